"""Tabular dataset model: schema, loading, stratified splitting, augmentation.

Cells are numeric, categorical tokens, or missing. Missing is a first-class
cell state (NaN in numeric columns, None in categorical columns), never a
sentinel value, because downstream learners treat missingness differently
(median imputation for the linear model, native routing for the boosted
trees).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SCHEMA_VERSION = 1

_IDENT_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


class ColumnKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    BINARY = "binary"


class SchemaError(ValueError):
    """Raised when a schema document or dataset violates its invariants."""


class DataError(ValueError):
    """Raised when a data file cannot be parsed against its schema."""


def is_identifier(name: str) -> bool:
    return bool(name) and name[0] not in "0123456789" and set(name) <= _IDENT_CHARS


@dataclass(frozen=True)
class TemporalTag:
    """Marks a column as one repeated measurement of an underlying variable."""

    group_id: str
    time_offset: float


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: ColumnKind
    description: str = ""
    temporal_group: TemporalTag | None = None
    is_label: bool = False

    def __post_init__(self) -> None:
        if not is_identifier(self.name):
            raise SchemaError(f"column name {self.name!r} is not an identifier")
        if self.temporal_group is not None and self.kind is not ColumnKind.NUMERIC:
            raise SchemaError(
                f"temporal column {self.name!r} must be numeric, got {self.kind.value}"
            )
        if self.is_label and self.kind is not ColumnKind.BINARY:
            raise SchemaError(f"label column {self.name!r} must be binary")


@dataclass(frozen=True)
class FeatureGroup:
    """Unit of importance and island sampling.

    Static columns form singleton groups; repeated measurements of one
    variable form a single temporal group covering all member columns.
    """

    group_id: str
    member_columns: tuple[str, ...]
    is_temporal: bool

    def __post_init__(self) -> None:
        if not self.member_columns:
            raise SchemaError(f"group {self.group_id!r} has no members")
        if self.is_temporal and len(self.member_columns) < 2:
            raise SchemaError(f"temporal group {self.group_id!r} needs >= 2 members")
        if not self.is_temporal and len(self.member_columns) != 1:
            raise SchemaError(f"static group {self.group_id!r} must be a singleton")


def validate_schema(schema: list[ColumnSchema]) -> None:
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise SchemaError(f"duplicate column names: {dupes}")
    labels = [c for c in schema if c.is_label]
    if len(labels) != 1:
        raise SchemaError(f"schema must declare exactly one label column, got {len(labels)}")
    if labels[0].temporal_group is not None:
        raise SchemaError("label column cannot belong to a temporal group")
    by_group: dict[str, list[ColumnSchema]] = {}
    for col in schema:
        if col.temporal_group is not None:
            by_group.setdefault(col.temporal_group.group_id, []).append(col)
    for gid, members in by_group.items():
        if len(members) < 2:
            raise SchemaError(f"temporal group {gid!r} has a single member")
        offsets = [m.temporal_group.time_offset for m in members]
        if len(set(offsets)) != len(offsets):
            raise SchemaError(f"temporal group {gid!r} has duplicate time offsets")
        if gid in names:
            raise SchemaError(f"temporal group id {gid!r} collides with a column name")


class Dataset:
    """Immutable rows + labels with a validated schema.

    Numeric and binary columns are float64 arrays with NaN for missing;
    categorical columns are object arrays of tokens with None for missing.
    Arrays are frozen after construction and safe to share across threads.
    """

    def __init__(
        self,
        schema: list[ColumnSchema],
        columns: dict[str, np.ndarray],
        labels: np.ndarray,
    ) -> None:
        validate_schema(schema)
        self.schema = list(schema)
        self.label_name = next(c.name for c in schema if c.is_label)
        feature_cols = [c for c in schema if not c.is_label]
        if set(columns) != {c.name for c in feature_cols}:
            raise SchemaError("columns do not match the non-label schema entries")

        labels = np.asarray(labels)
        if labels.ndim != 1:
            raise SchemaError("labels must be one-dimensional")
        if not np.isin(labels, (0, 1)).all():
            raise SchemaError("labels must be 0 or 1 with no missing values")
        self.labels = labels.astype(np.int8)
        self.n_rows = len(self.labels)

        self.columns: dict[str, np.ndarray] = {}
        for col in feature_cols:
            values = columns[col.name]
            if len(values) != self.n_rows:
                raise SchemaError(
                    f"column {col.name!r} has {len(values)} cells, expected {self.n_rows}"
                )
            if col.kind is ColumnKind.CATEGORICAL:
                arr = np.asarray(values, dtype=object)
                for v in arr:
                    if v is not None and not isinstance(v, str):
                        raise SchemaError(
                            f"categorical column {col.name!r} holds non-token cell {v!r}"
                        )
            else:
                arr = np.asarray(values, dtype=np.float64)
                if np.isinf(arr).any():
                    raise SchemaError(f"numeric column {col.name!r} holds non-finite cells")
                if col.kind is ColumnKind.BINARY:
                    observed = arr[~np.isnan(arr)]
                    if not np.isin(observed, (0.0, 1.0)).all():
                        raise SchemaError(f"binary column {col.name!r} holds non-0/1 cells")
            arr.setflags(write=False)
            self.columns[col.name] = arr
        self.labels.setflags(write=False)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.schema if not c.is_label]

    def column_schema(self, name: str) -> ColumnSchema:
        for c in self.schema:
            if c.name == name:
                return c
        raise KeyError(name)

    def with_column(self, schema: ColumnSchema, values: np.ndarray) -> "Dataset":
        """Return a new dataset with one appended non-label column."""
        if schema.name in self.columns or schema.name == self.label_name:
            raise SchemaError(f"column name collision: {schema.name!r}")
        if schema.is_label:
            raise SchemaError("cannot append a label column")
        new_schema = self.schema + [schema]
        new_columns = dict(self.columns)
        new_columns[schema.name] = np.asarray(values, dtype=np.float64)
        return Dataset(new_schema, new_columns, self.labels)


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self) -> None:
        parts = [np.asarray(p, dtype=np.intp) for p in (self.train, self.val, self.test)]
        for name, p in zip(("train", "val", "test"), parts):
            if len(p) == 0:
                raise ValueError(f"{name} split is empty")
            p.setflags(write=False)
            object.__setattr__(self, name, p)
        combined = np.concatenate(parts)
        if len(np.unique(combined)) != len(combined):
            raise ValueError("split parts overlap")

    @property
    def n_rows(self) -> int:
        return len(self.train) + len(self.val) + len(self.test)


def _parse_schema_column(entry: dict) -> ColumnSchema:
    known = {"name", "kind", "description", "temporal_group", "is_label"}
    unknown = set(entry) - known
    if unknown:
        raise SchemaError(f"unknown schema keys {sorted(unknown)} on column {entry.get('name')!r}")
    try:
        kind = ColumnKind(entry["kind"])
    except (KeyError, ValueError):
        raise SchemaError(f"column {entry.get('name')!r} has invalid kind {entry.get('kind')!r}")
    tag = None
    if entry.get("temporal_group") is not None:
        tg = entry["temporal_group"]
        tag = TemporalTag(group_id=str(tg["group_id"]), time_offset=float(tg["time_offset"]))
    return ColumnSchema(
        name=entry["name"],
        kind=kind,
        description=entry.get("description", ""),
        temporal_group=tag,
        is_label=bool(entry.get("is_label", False)),
    )


def load_schema(schema_path: str) -> tuple[list[ColumnSchema], str, str]:
    """Read a schema sidecar; returns (schema, missing_token, delimiter)."""
    with open(schema_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    schema = [_parse_schema_column(entry) for entry in doc["columns"]]
    validate_schema(schema)
    return schema, doc.get("missing_token", ""), doc.get("delimiter", ",")


def schema_to_doc(
    schema: list[ColumnSchema], missing_token: str = "", delimiter: str = ","
) -> dict:
    cols = []
    for c in schema:
        entry: dict = {"name": c.name, "kind": c.kind.value, "description": c.description}
        if c.temporal_group is not None:
            entry["temporal_group"] = {
                "group_id": c.temporal_group.group_id,
                "time_offset": c.temporal_group.time_offset,
            }
        if c.is_label:
            entry["is_label"] = True
        cols.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "missing_token": missing_token,
        "delimiter": delimiter,
        "columns": cols,
    }


def load_dataset(
    table_path: str,
    schema_path: str,
    delimiter: str | None = None,
    missing_token: str | None = None,
) -> Dataset:
    """Parse a delimited table against its schema sidecar.

    Empty fields and the configured missing token map to missing. Every
    header column must be declared in the schema and vice versa.
    """
    schema, schema_missing, schema_delim = load_schema(schema_path)
    missing = schema_missing if missing_token is None else missing_token
    delim = schema_delim if delimiter is None else delimiter

    with open(table_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delim)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{table_path}: empty file")
        rows = list(reader)

    declared = {c.name for c in schema}
    header_set = set(header)
    undeclared = [h for h in header if h not in declared]
    if undeclared:
        raise DataError(f"undeclared column(s) in header: {undeclared}")
    absent = sorted(declared - header_set)
    if absent:
        raise DataError(f"schema declares column(s) absent from header: {absent}")

    by_name = {c.name: c for c in schema}
    label_name = next(c.name for c in schema if c.is_label)
    raw: dict[str, list] = {name: [] for name in header}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {i + 2}: expected {len(header)} fields, got {len(row)}")
        for name, cell in zip(header, row):
            raw[name].append(cell)

    columns: dict[str, np.ndarray] = {}
    labels = None
    for name, cells in raw.items():
        col = by_name[name]
        if col.kind is ColumnKind.CATEGORICAL:
            parsed = np.array(
                [None if c == "" or c == missing else c for c in cells], dtype=object
            )
        else:
            out = np.empty(len(cells), dtype=np.float64)
            for i, c in enumerate(cells):
                if c == "" or c == missing:
                    out[i] = np.nan
                else:
                    try:
                        out[i] = float(c)
                    except ValueError:
                        raise DataError(
                            f"column {name!r}, row {i + 2}: non-parsable numeric cell {c!r}"
                        )
            parsed = out
        if name == label_name:
            if col.kind is not ColumnKind.CATEGORICAL and np.isnan(parsed).any():
                raise DataError("label column holds missing cells")
            labels = parsed
        else:
            columns[name] = parsed
    if labels is None:
        raise DataError("missing label column")
    return Dataset(schema, columns, labels)


def save_dataset(
    dataset: Dataset,
    table_path: str,
    schema_path: str,
    missing_token: str = "",
    delimiter: str = ",",
) -> None:
    """Write the table and its schema sidecar; floats round-trip exactly."""
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_doc(dataset.schema, missing_token, delimiter), fh, indent=2)
        fh.write("\n")
    names = [c.name for c in dataset.schema]
    with open(table_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(names)
        for i in range(dataset.n_rows):
            row = []
            for c in dataset.schema:
                if c.is_label:
                    row.append(str(int(dataset.labels[i])))
                    continue
                v = dataset.columns[c.name][i]
                if c.kind is ColumnKind.CATEGORICAL:
                    row.append(missing_token if v is None else v)
                elif isinstance(v, float) and np.isnan(v):
                    row.append(missing_token)
                else:
                    row.append(repr(float(v)))
            writer.writerow(row)


def stratified_split(
    dataset: Dataset, fractions: tuple[float, float, float], seed: int
) -> SplitIndices:
    """Per-class allocation into train/val/test, within 1 of exact proportion.

    Uses largest-remainder rounding per class over a seeded shuffle, so the
    result is deterministic for a fixed seed.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be three positives")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")

    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in (0, 1):
        members = np.flatnonzero(dataset.labels == cls)
        if len(members) < 3:
            raise ValueError(f"class {cls} has {len(members)} members, needs >= 3")
        members = rng.permutation(members)
        exact = np.array(fractions) * len(members)
        counts = np.floor(exact).astype(int)
        remainder = len(members) - counts.sum()
        # Distribute leftovers to the largest fractional parts; ties resolve
        # in train/val/test order via stable sort.
        order = np.argsort(-(exact - counts), kind="stable")
        for j in range(remainder):
            counts[order[j]] += 1
        offsets = np.concatenate(([0], np.cumsum(counts)))
        for p in range(3):
            parts[p].append(members[offsets[p] : offsets[p + 1]])

    train, val, test = (np.sort(np.concatenate(p)) for p in parts)
    if min(len(train), len(val), len(test)) == 0:
        raise ValueError("requested fractions leave an empty split part")
    return SplitIndices(train=train, val=val, test=test)


def feature_groups(schema: list[ColumnSchema]) -> list[FeatureGroup]:
    """One singleton group per static non-label column, one per temporal group.

    Temporal groups list members in time-offset order. Group order follows
    first appearance in the schema.
    """
    validate_schema(schema)
    groups: list[FeatureGroup] = []
    seen_temporal: dict[str, list[ColumnSchema]] = {}
    order: list[tuple[str, bool]] = []
    for col in schema:
        if col.is_label:
            continue
        if col.temporal_group is None:
            order.append((col.name, False))
        else:
            gid = col.temporal_group.group_id
            if gid not in seen_temporal:
                order.append((gid, True))
                seen_temporal[gid] = []
            seen_temporal[gid].append(col)
    for gid, is_temporal in order:
        if is_temporal:
            members = sorted(seen_temporal[gid], key=lambda c: c.temporal_group.time_offset)
            groups.append(
                FeatureGroup(
                    group_id=gid,
                    member_columns=tuple(m.name for m in members),
                    is_temporal=True,
                )
            )
        else:
            groups.append(FeatureGroup(group_id=gid, member_columns=(gid,), is_temporal=False))
    return groups


def subset(dataset: Dataset, row_indices: np.ndarray) -> Dataset:
    """New dataset holding only the given rows, schema unchanged."""
    idx = np.asarray(row_indices, dtype=np.intp)
    columns = {name: arr[idx] for name, arr in dataset.columns.items()}
    return Dataset(dataset.schema, columns, dataset.labels[idx])


def drop_column(dataset: Dataset, name: str) -> Dataset:
    """New dataset without one non-label column (e.g. an ordering column)."""
    if name == dataset.label_name:
        raise SchemaError("cannot drop the label column")
    if name not in dataset.columns:
        raise SchemaError(f"no such column {name!r}")
    schema = [c for c in dataset.schema if c.name != name]
    columns = {k: v for k, v in dataset.columns.items() if k != name}
    return Dataset(schema, columns, dataset.labels)


def augment(dataset: Dataset, sigma: "TransformationSet") -> Dataset:
    """Append one numeric output column per fitted transformation, in order.

    Later transformations may reference columns produced by earlier ones;
    original cells are never modified.
    """
    out = dataset
    for fitted in sigma:
        if not fitted.fitted:
            raise ValueError(f"transformation {fitted.program.name!r} is not fitted")
        values = fitted.apply(out)
        out = out.with_column(
            ColumnSchema(
                name=fitted.program.name,
                kind=ColumnKind.NUMERIC,
                description=fitted.program.rationale,
            ),
            values,
        )
    return out
