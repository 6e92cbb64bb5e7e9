"""AST node types and rendering for the feature-transformation language.

A program defines one numeric output column from existing columns:

    feature IDENT = expr

Expressions combine column references, literals, arithmetic, conditionals,
train-fitted statistics, and temporal-group aggregations. Rendering emits
parentheses only where precedence requires them, and ``parse(render(p))``
is structurally identical to ``p`` for every well-formed program.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

UNARY_OPS = ("log1p", "abs", "sqrt", "neg", "clip01")
BINARY_OPS = ("+", "-", "*", "/", "min", "max", "pow")
CMP_OPS = (">", ">=", "<", "<=", "==")
STAT_OPS = ("trainmean", "trainstd", "trainmin", "trainmax", "trainmedian")
GAGG_OPS = (
    "gmean",
    "gstd",
    "gmin",
    "gmax",
    "gfirst",
    "glast",
    "gdelta",
    "gslope",
    "gmissing",
)

# Infix binding strength, weakest first. min/max sit below +/- as combining
# operators; pow binds tightest of the infix set and associates right.
_PRECEDENCE = {"min": 1, "max": 1, "+": 2, "-": 2, "*": 3, "/": 3, "pow": 4}
_ATOM_PRECEDENCE = 5


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class StringLit:
    value: str


@dataclass(frozen=True)
class Col:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Stat:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class GroupAgg:
    op: str
    group_id: str


@dataclass(frozen=True)
class Coalesce:
    first: "Expr"
    second: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class IsMissing:
    arg: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    left: "Cond"
    right: "Cond"


@dataclass(frozen=True)
class NotOp:
    arg: "Cond"


@dataclass(frozen=True)
class IfExpr:
    cond: "Cond"
    then: "Expr"
    orelse: "Expr"


Expr = Union[Literal, StringLit, Col, Unary, Binary, Stat, GroupAgg, Coalesce, IfExpr]
Cond = Union[Compare, IsMissing, BoolOp, NotOp]


@dataclass(frozen=True)
class Program:
    """A named transformation with an optional free-text justification."""

    name: str
    ast: Expr
    rationale: str = field(default="", compare=False)


def _render_literal(value: float) -> str:
    text = repr(float(value))
    return text


def render_expr(node: Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(node, Literal):
        return _render_literal(node.value)
    if isinstance(node, StringLit):
        return f'"{node.value}"'
    if isinstance(node, Col):
        return f"col({node.name})"
    if isinstance(node, Unary):
        return f"{node.op}({render_expr(node.arg)})"
    if isinstance(node, Stat):
        return f"{node.op}({render_expr(node.arg)})"
    if isinstance(node, GroupAgg):
        return f"{node.op}({node.group_id})"
    if isinstance(node, Coalesce):
        return f"coalesce({render_expr(node.first)}, {render_expr(node.second)})"
    if isinstance(node, IfExpr):
        return (
            f"if({render_cond(node.cond)}, "
            f"{render_expr(node.then)}, {render_expr(node.orelse)})"
        )
    if isinstance(node, Binary):
        prec = _PRECEDENCE[node.op]
        right_assoc = node.op == "pow"
        left = render_expr(node.left, prec, right_side=right_assoc)
        right = render_expr(node.right, prec, right_side=not right_assoc)
        text = f"{left} {node.op} {right}"
        needs = prec < parent_prec or (prec == parent_prec and right_side)
        return f"({text})" if needs else text
    raise TypeError(f"not an expression node: {node!r}")


# Cond binding strength: or < and < not < atoms.
_COND_PRECEDENCE = {"or": 1, "and": 2}


def render_cond(node: Cond, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(node, Compare):
        return f"{render_expr(node.left)} {node.op} {render_expr(node.right)}"
    if isinstance(node, IsMissing):
        return f"is_missing({render_expr(node.arg)})"
    if isinstance(node, NotOp):
        inner = node.arg
        if isinstance(inner, (BoolOp, Compare)):
            return f"not ({render_cond(inner)})"
        return f"not {render_cond(inner)}"
    if isinstance(node, BoolOp):
        prec = _COND_PRECEDENCE[node.op]
        left = render_cond(node.left, prec, right_side=False)
        right = render_cond(node.right, prec, right_side=True)
        text = f"{left} {node.op} {right}"
        needs = prec < parent_prec or (prec == parent_prec and right_side)
        return f"({text})" if needs else text
    raise TypeError(f"not a condition node: {node!r}")


def render(program: Program) -> str:
    """Program text whose re-parse is structurally identical to ``program``."""
    return f"feature {program.name} = {render_expr(program.ast)}"


def walk(node) -> list:
    """All nodes in preorder, conditions included."""
    out = [node]
    if isinstance(node, (Unary, Stat)):
        out += walk(node.arg)
    elif isinstance(node, (Binary, Compare, BoolOp)):
        out += walk(node.left) + walk(node.right)
    elif isinstance(node, Coalesce):
        out += walk(node.first) + walk(node.second)
    elif isinstance(node, IfExpr):
        out += walk(node.cond) + walk(node.then) + walk(node.orelse)
    elif isinstance(node, (IsMissing, NotOp)):
        out += walk(node.arg)
    return out


def referenced_columns(node) -> set[str]:
    return {n.name for n in walk(node) if isinstance(n, Col)}


def referenced_groups(node) -> set[str]:
    return {n.group_id for n in walk(node) if isinstance(n, GroupAgg)}


def rename_references(program: Program, name_map: dict[str, str]) -> Program:
    """New program with column and group references renamed per the map."""

    def rec(node):
        if isinstance(node, Col):
            return Col(name_map.get(node.name, node.name))
        if isinstance(node, GroupAgg):
            return GroupAgg(node.op, name_map.get(node.group_id, node.group_id))
        if isinstance(node, (Literal, StringLit)):
            return node
        if isinstance(node, Unary):
            return Unary(node.op, rec(node.arg))
        if isinstance(node, Stat):
            return Stat(node.op, rec(node.arg))
        if isinstance(node, Binary):
            return Binary(node.op, rec(node.left), rec(node.right))
        if isinstance(node, Coalesce):
            return Coalesce(rec(node.first), rec(node.second))
        if isinstance(node, IfExpr):
            return IfExpr(rec(node.cond), rec(node.then), rec(node.orelse))
        if isinstance(node, Compare):
            return Compare(node.op, rec(node.left), rec(node.right))
        if isinstance(node, IsMissing):
            return IsMissing(rec(node.arg))
        if isinstance(node, BoolOp):
            return BoolOp(node.op, rec(node.left), rec(node.right))
        if isinstance(node, NotOp):
            return NotOp(rec(node.arg))
        raise TypeError(f"unexpected node {node!r}")

    return Program(name=program.name, ast=rec(program.ast), rationale=program.rationale)
