"""Importance-weighted sampling of feature-group subsets (islands)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import FeatureGroup
from .explain import ImportanceVector


@dataclass(frozen=True)
class Island:
    """A bounded generation context: up to m distinct groups and their columns.

    Temporal groups contribute every member column, so the proposer always
    sees a group's full set of repeated measurements.
    """

    island_id: tuple[int, int]  # (iteration, index)
    groups: tuple[FeatureGroup, ...]

    def __post_init__(self) -> None:
        ids = [g.group_id for g in self.groups]
        if len(set(ids)) != len(ids):
            raise ValueError("island holds a repeated group")

    @property
    def columns(self) -> list[str]:
        out: list[str] = []
        for g in self.groups:
            out.extend(g.member_columns)
        return out


def sample_islands(
    importance: ImportanceVector,
    groups: list[FeatureGroup],
    K: int,
    m: int,
    seed: int,
    iteration: int = 0,
) -> list[Island]:
    """K islands of m successive without-replacement importance draws.

    Each draw is proportional to the normalized importance renormalized
    over the remaining groups (uniform over the remainder if their mass is
    zero). Islands are drawn independently, so duplicates across islands
    are allowed; per-island streams derive from (seed, island index).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not 1 <= m <= len(groups):
        raise ValueError(f"island size {m} outside 1..{len(groups)}")
    by_id = {g.group_id: g for g in groups}
    probs = importance.by_group()
    missing = set(by_id) - set(probs)
    if missing:
        raise ValueError(f"groups without importance entries: {sorted(missing)}")

    islands = []
    for k in range(K):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        remaining = sorted(by_id)
        weights = np.array([probs[g].normalized for g in remaining])
        chosen: list[FeatureGroup] = []
        for _ in range(m):
            total = weights.sum()
            p = weights / total if total > 0 else np.full(len(remaining), 1 / len(remaining))
            pick = int(rng.choice(len(remaining), p=p))
            chosen.append(by_id[remaining[pick]])
            del remaining[pick]
            weights = np.delete(weights, pick)
        islands.append(Island(island_id=(iteration, k), groups=tuple(chosen)))
    return islands
