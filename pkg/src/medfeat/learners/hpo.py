"""Seeded random-search hyperparameter optimization maximizing validation AUC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datamodel import Dataset, SplitIndices
from ..metrics import auc

# (low, high, kind); integers sample inclusive of both ends.
GBDT_SPACE = {
    "max_depth": (2, 7, "int"),
    "n_estimators": (100, 2000, "int"),
    "min_child_weight": (10, 100, "int"),
    "max_delta_step": (0, 10, "int"),
    "subsample": (0.5, 1.0, "float"),
    "learning_rate": (0.01, 0.5, "float"),
    "colsample_bylevel": (0.5, 1.0, "float"),
    "colsample_bytree": (0.3, 1.0, "float"),
    "gamma": (0.0, 5.0, "float"),
    "reg_alpha": (0.5, 10.0, "float"),
    "reg_lambda": (2.0, 20.0, "float"),
}

LOGREG_SPACE = {
    "C": (1e-4, 1e4, "logfloat"),
}

DEFAULT_PATIENCE = 50
DEFAULT_MIN_IMPROVEMENT = 1e-4


def search_space(kind: str) -> dict:
    if kind == "logreg":
        return LOGREG_SPACE
    if kind == "gbdt":
        return GBDT_SPACE
    raise ValueError(f"unknown learner kind {kind!r}")


def sample_params(kind: str, rng: np.random.Generator) -> dict:
    """One uniform draw from the kind's search space (C is log-uniform)."""
    params = {}
    for name, (low, high, ptype) in search_space(kind).items():
        if ptype == "int":
            params[name] = int(rng.integers(low, high + 1))
        elif ptype == "float":
            params[name] = float(rng.uniform(low, high))
        else:
            params[name] = float(np.exp(rng.uniform(np.log(low), np.log(high))))
    return params


@dataclass(frozen=True)
class HpoResult:
    kind: str
    best_hyperparams: dict
    best_auc: float
    trials: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "best_hyperparams": self.best_hyperparams,
            "best_auc": self.best_auc,
            "trials": self.trials,
        }


def hpo_search(
    kind: str,
    dataset: Dataset,
    split: SplitIndices,
    budget: int,
    seed: int,
    patience: int = DEFAULT_PATIENCE,
    min_improvement: float = DEFAULT_MIN_IMPROVEMENT,
) -> HpoResult:
    """Random search with early stopping after ``patience`` stale trials.

    Failed trials are logged and skipped; they do not consume the
    improvement patience budget's best score.
    """
    from . import train

    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    best_auc = -np.inf
    best_params: dict | None = None
    trials: list[dict] = []
    stale = 0
    for trial in range(budget):
        params = sample_params(kind, rng)
        try:
            model = train(kind, dataset, split.train, params, seed=seed)
            scores = model.predict_scores(dataset, split.val)
            score = auc(scores, dataset.labels[split.val])
        except ValueError as exc:
            trials.append({"trial": trial, "params": params, "error": str(exc)})
            continue
        trials.append({"trial": trial, "params": params, "auc": score})
        if score > best_auc + min_improvement:
            stale = 0
        else:
            stale += 1
        if score > best_auc:
            best_auc = score
            best_params = params
        if stale >= patience:
            break
    if best_params is None:
        raise ValueError("every trial failed")
    return HpoResult(kind=kind, best_hyperparams=best_params, best_auc=float(best_auc), trials=trials)
