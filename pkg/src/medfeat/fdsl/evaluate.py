"""Resolution, fitting, and evaluation of transformation programs.

Fitting computes every train-statistic node (trainmean, trainstd, ...) over
training rows only and freezes the results; application never recomputes
them, so validation and test rows cannot leak into any statistic.

Missing-value semantics at application time:

* arithmetic on a missing operand is missing, unless guarded by
  ``is_missing``/``coalesce``;
* division by zero, sqrt of a negative, log1p at or below -1, and any
  overflow to infinity are missing;
* comparisons on missing operands are missing, and an ``if`` whose
  condition is missing is missing; ``and``/``or`` use three-valued logic
  (``false and missing`` is false, ``true or missing`` is true);
* ``gslope`` is the least-squares slope over a group's observed
  (time_offset, value) pairs, missing with fewer than two observations;
  ``gmissing`` is the fraction of missing members and is always defined.

Structural problems (unknown columns, label references, categorical misuse)
are raised at fit time; application itself cannot fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datamodel import ColumnKind, Dataset
from .nodes import (
    Binary,
    BoolOp,
    Coalesce,
    Col,
    Compare,
    GroupAgg,
    IfExpr,
    IsMissing,
    Literal,
    NotOp,
    Program,
    Stat,
    StringLit,
    Unary,
    render,
    render_expr,
    walk,
)


class ResolveError(ValueError):
    """The program does not type-check against the dataset schema."""


class FitError(ValueError):
    """A train statistic could not be computed."""


VALIDITY_REASONS = (
    "ok",
    "non_finite_output",
    "all_missing",
    "zero_variance",
    "excess_missing",
    "runtime_error",
)

EXCESS_MISSING_THRESHOLD = 0.95


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    reason: str
    missing_fraction: float

    def __post_init__(self) -> None:
        if self.reason not in VALIDITY_REASONS:
            raise ValueError(f"unknown validity reason {self.reason!r}")


@dataclass(frozen=True)
class FittedTransformation:
    """A program plus its frozen train statistics.

    ``fitted_stats`` maps stat-node ids (preorder position among stat
    nodes) to the value computed over the fitting split.
    """

    program: Program
    fitted_stats: dict[str, float]
    fitted: bool = True
    provenance: dict | None = field(default=None, compare=False)

    def apply(self, dataset: Dataset, indices: np.ndarray | None = None) -> np.ndarray:
        return apply(self, dataset, indices)


TransformationSet = list[FittedTransformation]


# -- resolution ----------------------------------------------------------


def _temporal_groups(dataset: Dataset) -> dict[str, list[tuple[str, float]]]:
    groups: dict[str, list[tuple[str, float]]] = {}
    for col in dataset.schema:
        if col.temporal_group is not None:
            groups.setdefault(col.temporal_group.group_id, []).append(
                (col.name, col.temporal_group.time_offset)
            )
    for members in groups.values():
        members.sort(key=lambda m: m[1])
    return groups


def resolve(program: Program, dataset: Dataset) -> None:
    """Check every reference and categorical usage against the dataset.

    Raises ResolveError on: unknown columns or groups, any mention of the
    label column, categorical columns used outside ``== "token"`` or
    ``is_missing``, and string literals compared to anything else.
    """
    kinds = {c.name: c.kind for c in dataset.schema}
    label = dataset.label_name
    groups = _temporal_groups(dataset)

    def is_categorical_col(node) -> bool:
        return isinstance(node, Col) and kinds.get(node.name) is ColumnKind.CATEGORICAL

    def check_col(node: Col) -> None:
        if node.name == label:
            raise ResolveError(f"program references the label column {label!r}")
        if node.name not in kinds:
            raise ResolveError(f"unknown column {node.name!r}")

    def check_numeric(node) -> None:
        """Reject categorical/string leaves outside their two legal homes."""
        if isinstance(node, Col):
            check_col(node)
            if kinds[node.name] is ColumnKind.CATEGORICAL:
                raise ResolveError(
                    f"categorical column {node.name!r} can only be compared to a "
                    f'quoted token (col({node.name}) == "...") or tested with is_missing'
                )
            return
        if isinstance(node, StringLit):
            raise ResolveError(
                f"string literal {node.value!r} is only valid as an == operand "
                "against a categorical column"
            )
        if isinstance(node, (Unary, Stat)):
            check_numeric(node.arg)
        elif isinstance(node, Binary):
            check_numeric(node.left)
            check_numeric(node.right)
        elif isinstance(node, Coalesce):
            check_numeric(node.first)
            check_numeric(node.second)
        elif isinstance(node, IfExpr):
            check_cond(node.cond)
            check_numeric(node.then)
            check_numeric(node.orelse)
        elif isinstance(node, GroupAgg):
            if node.group_id not in groups:
                raise ResolveError(f"unknown temporal group {node.group_id!r}")
        elif not isinstance(node, Literal):
            raise TypeError(f"unexpected node {node!r}")

    def check_cond(node) -> None:
        if isinstance(node, Compare):
            left_cat = is_categorical_col(node.left)
            right_cat = is_categorical_col(node.right)
            left_str = isinstance(node.left, StringLit)
            right_str = isinstance(node.right, StringLit)
            if left_cat or right_cat or left_str or right_str:
                if node.op != "==":
                    raise ResolveError(
                        f"categorical comparison must use ==, got {node.op!r}"
                    )
                if not ((left_cat and right_str) or (left_str and right_cat)):
                    raise ResolveError(
                        "categorical == requires a categorical column on one side "
                        "and a quoted token on the other"
                    )
                col = node.left if left_cat else node.right
                check_col(col)
                return
            check_numeric(node.left)
            check_numeric(node.right)
        elif isinstance(node, IsMissing):
            if is_categorical_col(node.arg):
                check_col(node.arg)
            else:
                check_numeric(node.arg)
        elif isinstance(node, BoolOp):
            check_cond(node.left)
            check_cond(node.right)
        elif isinstance(node, NotOp):
            check_cond(node.arg)
        else:
            raise TypeError(f"unexpected condition node {node!r}")

    check_numeric(program.ast)


# -- evaluation ----------------------------------------------------------


class _Context:
    def __init__(
        self,
        dataset: Dataset,
        indices: np.ndarray | None,
        stats: dict[str, float],
        stat_ids: dict[int, str],
    ):
        self.dataset = dataset
        self.indices = indices
        self.n = dataset.n_rows if indices is None else len(indices)
        self.stats = stats
        self.stat_ids = stat_ids  # id(node) -> stat id
        self.groups = _temporal_groups(dataset)

    def column(self, name: str) -> np.ndarray:
        arr = self.dataset.columns[name]
        return arr if self.indices is None else arr[self.indices]


def _eval_expr(node, ctx: _Context) -> tuple[np.ndarray, np.ndarray]:
    """Returns (values, missing_mask); values are garbage where missing."""
    n = ctx.n
    if isinstance(node, Literal):
        return np.full(n, node.value), np.zeros(n, dtype=bool)
    if isinstance(node, Col):
        raw = ctx.column(node.name)
        miss = np.isnan(raw)
        return np.where(miss, 0.0, raw), miss
    if isinstance(node, Stat):
        value = ctx.stats[ctx.stat_ids[id(node)]]
        return np.full(n, value), np.zeros(n, dtype=bool)
    if isinstance(node, Unary):
        vals, miss = _eval_expr(node.arg, ctx)
        with np.errstate(all="ignore"):
            if node.op == "log1p":
                bad = vals <= -1.0
                out = np.log1p(np.where(bad, 0.0, vals))
                miss = miss | bad
            elif node.op == "abs":
                out = np.abs(vals)
            elif node.op == "sqrt":
                bad = vals < 0.0
                out = np.sqrt(np.where(bad, 0.0, vals))
                miss = miss | bad
            elif node.op == "neg":
                out = -vals
            elif node.op == "clip01":
                out = np.clip(vals, 0.0, 1.0)
            else:
                raise TypeError(f"unknown unary op {node.op!r}")
        return _finite(out, miss)
    if isinstance(node, Binary):
        lv, lm = _eval_expr(node.left, ctx)
        rv, rm = _eval_expr(node.right, ctx)
        miss = lm | rm
        with np.errstate(all="ignore"):
            if node.op == "+":
                out = lv + rv
            elif node.op == "-":
                out = lv - rv
            elif node.op == "*":
                out = lv * rv
            elif node.op == "/":
                zero = rv == 0.0
                out = lv / np.where(zero, 1.0, rv)
                miss = miss | zero
            elif node.op == "min":
                out = np.minimum(lv, rv)
            elif node.op == "max":
                out = np.maximum(lv, rv)
            elif node.op == "pow":
                out = np.power(lv, rv)
            else:
                raise TypeError(f"unknown binary op {node.op!r}")
        return _finite(out, miss)
    if isinstance(node, Coalesce):
        fv, fm = _eval_expr(node.first, ctx)
        sv, sm = _eval_expr(node.second, ctx)
        return np.where(fm, sv, fv), fm & sm
    if isinstance(node, IfExpr):
        cv, cm = _eval_cond(node.cond, ctx)
        tv, tm = _eval_expr(node.then, ctx)
        ev, em = _eval_expr(node.orelse, ctx)
        vals = np.where(cv, tv, ev)
        miss = cm | np.where(cv, tm, em)
        return vals, miss
    if isinstance(node, GroupAgg):
        return _eval_group_agg(node, ctx)
    if isinstance(node, StringLit):
        raise TypeError("string literal outside a categorical comparison")
    raise TypeError(f"unexpected node {node!r}")


def _finite(values: np.ndarray, missing: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    missing = missing | ~np.isfinite(values)
    return np.where(missing, 0.0, values), missing


def _eval_group_agg(node: GroupAgg, ctx: _Context) -> tuple[np.ndarray, np.ndarray]:
    members = ctx.groups[node.group_id]
    raw = np.stack([ctx.column(name) for name, _ in members], axis=1)
    offsets = np.array([t for _, t in members])
    obs = ~np.isnan(raw)
    vals = np.where(obs, raw, 0.0)
    count = obs.sum(axis=1)
    none = count == 0

    if node.op == "gmissing":
        return (~obs).mean(axis=1), np.zeros(ctx.n, dtype=bool)

    with np.errstate(all="ignore"):
        safe = np.maximum(count, 1)
        if node.op == "gmean":
            out = vals.sum(axis=1) / safe
            return _finite(out, none)
        if node.op == "gstd":
            mean = vals.sum(axis=1) / safe
            var = (np.where(obs, (raw - mean[:, None]) ** 2, 0.0)).sum(axis=1) / safe
            return _finite(np.sqrt(var), none)
        if node.op == "gmin":
            return _finite(np.where(obs, raw, np.inf).min(axis=1), none)
        if node.op == "gmax":
            return _finite(np.where(obs, raw, -np.inf).max(axis=1), none)
        if node.op in ("gfirst", "glast", "gdelta"):
            first_idx = np.argmax(obs, axis=1)
            last_idx = raw.shape[1] - 1 - np.argmax(obs[:, ::-1], axis=1)
            rows = np.arange(ctx.n)
            first = raw[rows, first_idx]
            last = raw[rows, last_idx]
            if node.op == "gfirst":
                return _finite(np.where(none, 0.0, first), none)
            if node.op == "glast":
                return _finite(np.where(none, 0.0, last), none)
            return _finite(np.where(none, 0.0, last - first), none)
        if node.op == "gslope":
            under = count < 2
            safe = np.maximum(count, 1)
            tsum = (np.where(obs, offsets[None, :], 0.0)).sum(axis=1)
            tbar = tsum / safe
            vbar = vals.sum(axis=1) / safe
            tc = np.where(obs, offsets[None, :] - tbar[:, None], 0.0)
            vc = np.where(obs, raw - vbar[:, None], 0.0)
            num = (tc * vc).sum(axis=1)
            den = (tc * tc).sum(axis=1)
            out = num / np.where(den == 0.0, 1.0, den)
            return _finite(out, under | (den == 0.0))
    raise TypeError(f"unknown group aggregation {node.op!r}")


def _eval_cond(node, ctx: _Context) -> tuple[np.ndarray, np.ndarray]:
    """Returns (truth, missing_mask) with three-valued logic."""
    if isinstance(node, Compare):
        cat_side = None
        str_side = None
        for side in (node.left, node.right):
            if isinstance(side, StringLit):
                str_side = side
            elif isinstance(side, Col) and (
                ctx.dataset.column_schema(side.name).kind is ColumnKind.CATEGORICAL
            ):
                cat_side = side
        if cat_side is not None and str_side is not None:
            raw = ctx.column(cat_side.name)
            miss = np.array([v is None for v in raw], dtype=bool)
            truth = np.array([v == str_side.value for v in raw], dtype=bool)
            return truth & ~miss, miss
        lv, lm = _eval_expr(node.left, ctx)
        rv, rm = _eval_expr(node.right, ctx)
        ops = {
            ">": np.greater,
            ">=": np.greater_equal,
            "<": np.less,
            "<=": np.less_equal,
            "==": np.equal,
        }
        miss = lm | rm
        return ops[node.op](lv, rv) & ~miss, miss
    if isinstance(node, IsMissing):
        arg = node.arg
        if isinstance(arg, Col) and (
            ctx.dataset.column_schema(arg.name).kind is ColumnKind.CATEGORICAL
        ):
            raw = ctx.column(arg.name)
            truth = np.array([v is None for v in raw], dtype=bool)
            return truth, np.zeros(ctx.n, dtype=bool)
        _, miss = _eval_expr(arg, ctx)
        return miss.copy(), np.zeros(ctx.n, dtype=bool)
    if isinstance(node, BoolOp):
        lv, lm = _eval_cond(node.left, ctx)
        rv, rm = _eval_cond(node.right, ctx)
        if node.op == "and":
            false = (~lm & ~lv) | (~rm & ~rv)
            miss = ~false & (lm | rm)
            return lv & rv & ~miss, miss
        true = (~lm & lv) | (~rm & rv)
        miss = ~true & (lm | rm)
        return true, miss
    if isinstance(node, NotOp):
        v, m = _eval_cond(node.arg, ctx)
        return ~v & ~m, m
    raise TypeError(f"unexpected condition node {node!r}")


# -- fit / apply / validate ----------------------------------------------


def _stat_ids(program: Program) -> dict[int, str]:
    """Stable ids for stat nodes: preorder position among stat nodes."""
    ids: dict[int, str] = {}
    for node in walk(program.ast):
        if isinstance(node, Stat) and id(node) not in ids:
            ids[id(node)] = f"stat_{len(ids)}"
    return ids


def fit(program: Program, dataset: Dataset, train_indices: np.ndarray) -> FittedTransformation:
    """Resolve the program and freeze its train statistics.

    Statistics are evaluated innermost-first over training rows only,
    ignoring missing outputs; trainstd uses the population denominator.
    A statistic whose input is entirely missing is a fit error.
    """
    # Canonicalize via a render/parse round trip so the tree never shares
    # subtree objects; stat ids are then a pure function of structure.
    from .parser import parse

    program = Program(
        name=program.name, ast=parse(render(program)).ast, rationale=program.rationale
    )
    resolve(program, dataset)
    stat_ids = _stat_ids(program)
    train_indices = np.asarray(train_indices, dtype=np.intp)

    # Innermost first: a stat's input may contain already-fitted inner stats.
    ordered = [n for n in walk(program.ast) if isinstance(n, Stat)]
    ordered.sort(key=lambda n: -_depth_of(program.ast, n))

    stats: dict[str, float] = {}
    ctx = _Context(dataset, train_indices, stats, stat_ids)
    for node in ordered:
        vals, miss = _eval_expr(node.arg, ctx)
        observed = vals[~miss]
        if len(observed) == 0:
            raise FitError(
                f"statistic over all-missing values: {node.op}({render_expr(node.arg)})"
            )
        if node.op == "trainmean":
            value = float(np.mean(observed))
        elif node.op == "trainstd":
            value = float(np.std(observed))
        elif node.op == "trainmin":
            value = float(np.min(observed))
        elif node.op == "trainmax":
            value = float(np.max(observed))
        elif node.op == "trainmedian":
            value = float(np.median(observed))
        else:
            raise TypeError(f"unknown statistic {node.op!r}")
        stats[stat_ids[id(node)]] = value
    return FittedTransformation(program=program, fitted_stats=stats)


def _depth_of(root, target) -> int:
    """Nesting depth of ``target`` under ``root`` (identity match)."""

    def rec(node, depth: int) -> int | None:
        if node is target:
            return depth
        for child in _children(node):
            found = rec(child, depth + 1)
            if found is not None:
                return found
        return None

    found = rec(root, 0)
    if found is None:
        raise ValueError("node not in tree")
    return found


def _children(node):
    if isinstance(node, (Unary, Stat, IsMissing, NotOp)):
        return (node.arg,)
    if isinstance(node, (Binary, Compare, BoolOp)):
        return (node.left, node.right)
    if isinstance(node, Coalesce):
        return (node.first, node.second)
    if isinstance(node, IfExpr):
        return (node.cond, node.then, node.orelse)
    return ()


def apply(
    fitted: FittedTransformation, dataset: Dataset, indices: np.ndarray | None = None
) -> np.ndarray:
    """Evaluate over the given rows (all rows by default).

    Returns float64 with NaN for missing; never raises and never yields a
    non-finite value other than NaN.
    """
    if not fitted.fitted:
        raise ValueError(f"transformation {fitted.program.name!r} is not fitted")
    resolve(fitted.program, dataset)
    if indices is not None:
        indices = np.asarray(indices, dtype=np.intp)
    ctx = _Context(dataset, indices, fitted.fitted_stats, _stat_ids(fitted.program))
    vals, miss = _eval_expr(fitted.program.ast, ctx)
    out = np.where(miss, np.nan, vals)
    return out


def validate(
    fitted: FittedTransformation, dataset: Dataset, train_indices: np.ndarray
) -> ValidityReport:
    """Check training-row outputs for degeneracy.

    Reasons, checked in order: all_missing (no observed output),
    zero_variance (observed outputs constant), excess_missing (missing
    fraction above 0.95). A non-finite observed output would report
    non_finite_output, but application semantics make that unreachable.
    """
    out = apply(fitted, dataset, np.asarray(train_indices, dtype=np.intp))
    miss = np.isnan(out)
    frac = float(miss.mean())
    observed = out[~miss]
    if len(observed) > 0 and not np.isfinite(observed).all():
        return ValidityReport(valid=False, reason="non_finite_output", missing_fraction=frac)
    if len(observed) == 0:
        return ValidityReport(valid=False, reason="all_missing", missing_fraction=frac)
    if np.all(observed == observed[0]):
        return ValidityReport(valid=False, reason="zero_variance", missing_fraction=frac)
    if frac > EXCESS_MISSING_THRESHOLD:
        return ValidityReport(valid=False, reason="excess_missing", missing_fraction=frac)
    return ValidityReport(valid=True, reason="ok", missing_fraction=frac)
