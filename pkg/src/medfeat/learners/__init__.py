"""Downstream learners: regularized logistic regression and boosted trees."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..datamodel import Dataset
from .gbdt import GBDT_DEFAULTS, GbdtModel, train_gbdt
from .hpo import (
    GBDT_SPACE,
    LOGREG_SPACE,
    HpoResult,
    hpo_search,
    sample_params,
    search_space,
)
from .logreg import LOGREG_DEFAULTS, LogRegModel, logistic_loss_grad, sigmoid, train_logreg
from .preprocess import FeatureEncoder, LearnerError, Standardizer

KINDS = ("logreg", "gbdt")

TrainedModel = LogRegModel | GbdtModel


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise LearnerError(f"unknown learner kind {self.kind!r}")
        allowed = LOGREG_DEFAULTS if self.kind == "logreg" else GBDT_DEFAULTS
        unknown = set(self.hyperparams) - set(allowed)
        if unknown:
            raise LearnerError(f"unknown {self.kind} hyperparameters: {sorted(unknown)}")


def train(
    kind: str, dataset: Dataset, train_indices: np.ndarray, hyperparams: dict, seed: int = 0
) -> TrainedModel:
    if kind == "logreg":
        return train_logreg(dataset, train_indices, hyperparams, seed)
    if kind == "gbdt":
        return train_gbdt(dataset, train_indices, hyperparams, seed)
    raise LearnerError(f"unknown learner kind {kind!r}")


def train_spec(dataset: Dataset, train_indices: np.ndarray, spec: LearnerSpec) -> TrainedModel:
    return train(spec.kind, dataset, train_indices, spec.hyperparams, spec.seed)


def predict_scores(
    model: TrainedModel, dataset: Dataset, indices: np.ndarray | None = None
) -> np.ndarray:
    """Probability scores in [0, 1]; extra dataset columns are ignored."""
    return model.predict_scores(dataset, indices)


def save_model(model: TrainedModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc["kind"] == "logreg":
        return LogRegModel.from_dict(doc)
    if doc["kind"] == "gbdt":
        return GbdtModel.from_dict(doc)
    raise LearnerError(f"unknown model kind {doc['kind']!r}")
