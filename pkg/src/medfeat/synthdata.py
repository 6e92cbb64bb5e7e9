"""Synthetic clinical-panel generator with planted predictive signal.

Labels come from a logistic model over the planted signal plus Gaussian
logit noise; the intercept is calibrated so the label marginal matches the
requested positive rate. The interaction variant carries its entire signal
in a centered product of two columns (no main effects), so a linear model
on raw features is blind to it while the product column recovers it fully.
The temporal variant puts the signal in within-group least-squares slopes,
with row-level intercepts scattered widely enough that single-column
thresholds are uninformative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import ColumnKind, ColumnSchema, Dataset, TemporalTag

PLANTED_KINDS = ("none", "interaction", "temporal_slope")
_CATEGORY_TOKENS = ("a", "b", "c")


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 4000
    n_static_numeric: int = 3
    n_static_categorical: int = 0
    n_temporal_groups: int = 0
    temporal_length: int = 3
    missing_rate: float = 0.0
    positive_rate: float = 0.5
    planted: str = "none"
    noise_sd: float = 0.5
    signal_scale: float = 3.0
    level_sd: float = 10.0  # scatter of per-row temporal baselines
    seed: int = 0

    def __post_init__(self) -> None:
        if self.planted not in PLANTED_KINDS:
            raise ValueError(f"unknown planted kind {self.planted!r}")
        if not 0.0 < self.positive_rate < 1.0:
            raise ValueError("positive_rate must be in (0, 1)")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must be in [0, 1)")
        if self.planted == "interaction" and self.n_static_numeric < 2:
            raise ValueError("interaction needs >= 2 static numeric columns")
        if self.planted == "temporal_slope" and self.n_temporal_groups < 1:
            raise ValueError("temporal_slope needs >= 1 temporal group")


def _calibrate_intercept(signal: np.ndarray, positive_rate: float) -> float:
    """Bisect b0 so mean(sigmoid(b0 + signal)) hits the positive rate."""
    lo, hi = -30.0, 30.0
    for _ in range(100):
        mid = (lo + hi) / 2.0
        mean = float((1.0 / (1.0 + np.exp(-(mid + signal)))).mean())
        if mean < positive_rate:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def generate(spec: SynthSpec) -> tuple[Dataset, dict]:
    """Deterministic per seed; returns the dataset and a ground-truth record."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows

    schema: list[ColumnSchema] = []
    columns: dict[str, np.ndarray] = {}

    for j in range(spec.n_static_numeric):
        name = f"num_{j}"
        schema.append(
            ColumnSchema(name, ColumnKind.NUMERIC, description=f"static numeric marker {j}")
        )
        columns[name] = rng.standard_normal(n)

    for j in range(spec.n_static_categorical):
        name = f"cat_{j}"
        schema.append(
            ColumnSchema(name, ColumnKind.CATEGORICAL, description=f"static category {j}")
        )
        columns[name] = np.array(rng.choice(_CATEGORY_TOKENS, size=n), dtype=object)

    slopes = rng.standard_normal((spec.n_temporal_groups, n)) if spec.n_temporal_groups else None
    for g in range(spec.n_temporal_groups):
        base = rng.normal(0.0, spec.level_sd, size=n)
        for i in range(spec.temporal_length):
            name = f"vital{g}_t{i}"
            offset = float(6 * i)
            schema.append(
                ColumnSchema(
                    name,
                    ColumnKind.NUMERIC,
                    description=f"repeated measurement of vital {g} at {offset:g}h",
                    temporal_group=TemporalTag(group_id=f"vital{g}", time_offset=offset),
                )
            )
            columns[name] = base + slopes[g] * i + rng.normal(0.0, 0.5, size=n)

    if spec.planted == "interaction":
        signal = spec.signal_scale * columns["num_0"] * columns["num_1"]
        truth_cols: list[str] = ["num_0", "num_1"]
    elif spec.planted == "temporal_slope":
        signal = spec.signal_scale * slopes[0]
        truth_cols = [c.name for c in schema if c.temporal_group is not None
                      and c.temporal_group.group_id == "vital0"]
    else:
        signal = np.zeros(n)
        truth_cols = []

    logits = signal + rng.normal(0.0, spec.noise_sd, size=n)
    b0 = _calibrate_intercept(logits, spec.positive_rate)
    probs = 1.0 / (1.0 + np.exp(-(b0 + logits)))
    labels = (rng.random(n) < probs).astype(np.int8)

    if spec.missing_rate > 0:
        for name, values in columns.items():
            mask = rng.random(n) < spec.missing_rate
            if values.dtype == object:
                values = values.copy()
                values[mask] = None
            else:
                values = np.where(mask, np.nan, values)
            columns[name] = values

    schema.append(
        ColumnSchema("outcome", ColumnKind.BINARY, description="binary outcome", is_label=True)
    )
    truth = {
        "planted": spec.planted,
        "planted_columns": truth_cols,
        "planted_group": "vital0" if spec.planted == "temporal_slope" else None,
        "intercept": b0,
        "positive_rate": float(labels.mean()),
    }
    return Dataset(schema, columns, labels), truth


def generate_drift_panel(
    spec: SynthSpec,
    n_periods: int,
    rows_per_period: int,
    drift_shift: float,
    period_column: str = "period",
) -> Dataset:
    """Concatenated per-period cohorts with drifting marginals.

    Each period shifts the mean of num_0 by ``drift_shift * period`` while
    the label mechanism (spec.planted over raw columns) stays fixed, so a
    feature capturing the mechanism transfers across periods. The period
    index is appended as a numeric column for bucketing; it is not meant to
    be a predictor.
    """
    all_cols: dict[str, list[np.ndarray]] = {}
    all_labels: list[np.ndarray] = []
    schema = None
    for p in range(n_periods):
        period_spec = SynthSpec(
            n_rows=rows_per_period,
            n_static_numeric=spec.n_static_numeric,
            n_static_categorical=spec.n_static_categorical,
            n_temporal_groups=spec.n_temporal_groups,
            temporal_length=spec.temporal_length,
            missing_rate=spec.missing_rate,
            positive_rate=spec.positive_rate,
            planted=spec.planted,
            noise_sd=spec.noise_sd,
            signal_scale=spec.signal_scale,
            level_sd=spec.level_sd,
            seed=spec.seed + 7919 * p,
        )
        ds, _ = generate(period_spec)
        shifted = dict(ds.columns)
        if drift_shift != 0.0:
            shifted["num_0"] = ds.columns["num_0"] + drift_shift * p
        schema = ds.schema
        for name, values in shifted.items():
            all_cols.setdefault(name, []).append(values)
        all_cols.setdefault(period_column, []).append(np.full(rows_per_period, float(p)))
        all_labels.append(ds.labels)

    out_schema = [c for c in schema if not c.is_label]
    out_schema.append(
        ColumnSchema(period_column, ColumnKind.NUMERIC, description="deployment period index")
    )
    out_schema.append(next(c for c in schema if c.is_label))
    columns = {name: np.concatenate(parts) for name, parts in all_cols.items()}
    return Dataset(out_schema, columns, np.concatenate(all_labels))
