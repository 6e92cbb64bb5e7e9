"""Grouped permutation importance on the validation split.

For each feature group, all member columns are jointly row-permuted (one
shuffle shared by every member, preserving within-group structure) and the
validation AUC drop is averaged over seeded repeats. Drops are clamped at
zero so the normalized vector is a probability distribution suitable for
island sampling. The explainer is deliberately model-agnostic: any callable
producing nonnegative per-group relevance can stand in behind the same
interface.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .datamodel import ColumnSchema, Dataset, FeatureGroup
from .learners import TrainedModel, predict_scores
from .metrics import auc

DEFAULT_REPEATS = 5


@dataclass(frozen=True)
class ImportanceEntry:
    group_id: str
    raw_score: float
    normalized: float
    rank: int


@dataclass(frozen=True)
class ImportanceVector:
    entries: tuple[ImportanceEntry, ...]

    def __post_init__(self) -> None:
        total = sum(e.normalized for e in self.entries)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"normalized importance sums to {total}, not 1")
        if sorted(e.rank for e in self.entries) != list(range(1, len(self.entries) + 1)):
            raise ValueError("ranks must be a permutation of 1..G")

    def by_group(self) -> dict[str, ImportanceEntry]:
        return {e.group_id: e for e in self.entries}

    def group_ids(self) -> list[str]:
        return [e.group_id for e in self.entries]

    def probabilities(self) -> np.ndarray:
        return np.array([e.normalized for e in self.entries])

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "group_id": e.group_id,
                    "raw_score": e.raw_score,
                    "normalized": e.normalized,
                    "rank": e.rank,
                }
                for e in self.entries
            ]
        }

    @staticmethod
    def from_dict(doc: dict) -> "ImportanceVector":
        return ImportanceVector(
            entries=tuple(ImportanceEntry(**e) for e in doc["entries"])
        )


def _group_seed(seed: int, group_id: str, repeat: int) -> np.random.Generator:
    """Independent stream per (seed, group, repeat), stable across processes."""
    digest = hashlib.sha256(group_id.encode()).digest()[:8]
    key = int.from_bytes(digest, "big")
    return np.random.default_rng(np.random.SeedSequence([seed, key, repeat]))


def _normalize(raw: dict[str, float]) -> ImportanceVector:
    ids = list(raw)
    scores = np.array([raw[g] for g in ids])
    total = scores.sum()
    if total > 0:
        normalized = scores / total
    else:
        normalized = np.full(len(ids), 1.0 / len(ids))
    # Rank 1 = highest raw score; ties broken by group name.
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    ranks = {ids[i]: r + 1 for r, i in enumerate(order)}
    entries = tuple(
        ImportanceEntry(
            group_id=g, raw_score=float(scores[i]), normalized=float(normalized[i]),
            rank=ranks[g],
        )
        for i, g in enumerate(ids)
    )
    return ImportanceVector(entries=entries)


def normalize(raw_scores: dict[str, float]) -> ImportanceVector:
    """Clamp below zero, scale to sum 1; uniform fallback when all-zero."""
    return _normalize({g: max(0.0, s) for g, s in raw_scores.items()})


def grouped_permutation_importance(
    model: TrainedModel,
    dataset: Dataset,
    val_indices: np.ndarray,
    groups: list[FeatureGroup],
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
) -> ImportanceVector:
    """Mean clamped AUC drop per group under joint member permutation.

    A group whose columns the model never consumes scores exactly zero:
    permuting them cannot change a single prediction.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    val_indices = np.asarray(val_indices, dtype=np.intp)
    labels = dataset.labels[val_indices]
    base_scores = predict_scores(model, dataset, val_indices)
    base_auc = auc(base_scores, labels)
    used = set(model.feature_names)

    raw: dict[str, float] = {}
    for group in groups:
        members = [c for c in group.member_columns if c in used]
        if not members:
            raw[group.group_id] = 0.0
            continue
        drops = []
        for repeat in range(repeats):
            rng = _group_seed(seed, group.group_id, repeat)
            perm = rng.permutation(len(val_indices))
            shuffled = _permuted_view(dataset, members, val_indices, perm)
            scores = predict_scores(model, shuffled, None)
            drops.append(max(0.0, base_auc - auc(scores, labels)))
        raw[group.group_id] = float(np.mean(drops))
    return _normalize(raw)


def _permuted_view(
    dataset: Dataset, members: list[str], val_indices: np.ndarray, perm: np.ndarray
) -> Dataset:
    """Validation rows with the member columns jointly permuted."""
    columns = {}
    for c in dataset.schema:
        if c.is_label:
            continue
        values = dataset.columns[c.name][val_indices]
        if c.name in members:
            values = values[perm]
        columns[c.name] = values
    return Dataset(dataset.schema, columns, dataset.labels[val_indices])


@dataclass(frozen=True)
class ImportanceReportRow:
    rank: int
    group_id: str
    raw_score: float
    normalized: float
    generated: bool


def importance_report(
    importance: ImportanceVector, generated_names: set[str]
) -> list[ImportanceReportRow]:
    """Rank-ordered listing flagging engine-generated features."""
    rows = [
        ImportanceReportRow(
            rank=e.rank,
            group_id=e.group_id,
            raw_score=e.raw_score,
            normalized=e.normalized,
            generated=e.group_id in generated_names,
        )
        for e in importance.entries
    ]
    rows.sort(key=lambda r: r.rank)
    return rows


def generated_fraction(rows: list[ImportanceReportRow], top_k: int = 10) -> float:
    """Share of generated features among the top-k ranked groups."""
    top = [r for r in rows if r.rank <= top_k]
    if not top:
        return 0.0
    return sum(r.generated for r in top) / len(top)
