"""L2-regularized weighted logistic regression.

Objective (sklearn convention, intercept unpenalized):

    f(w, b) = 0.5 ||w||^2 + C * sum_i cw_i * log(1 + exp(-t_i (x_i.w + b)))

with t in {-1, +1} and balanced class weights cw_c = N / (2 N_c). Minimized
with a limited-memory quasi-Newton solver to projected-gradient tolerance
1e-6 within 1000 iterations. Rows are canonically reordered before any
statistic or optimizer step, so training is invariant to the incoming row
order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..datamodel import Dataset
from .preprocess import FeatureEncoder, LearnerError, Standardizer, canonical_order

LOGREG_DEFAULTS = {"C": 1.0}
GRAD_TOL = 1e-6
MAX_ITER = 1000


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def balanced_weights(y: np.ndarray) -> np.ndarray:
    n = len(y)
    n_pos = int((y == 1).sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise LearnerError("training data holds a single class")
    return np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * n_neg))


def logistic_loss_grad(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray,
    C: float,
) -> tuple[float, np.ndarray]:
    """Loss and exact gradient; params = (w_1..w_d, b)."""
    w, b = params[:-1], params[-1]
    t = np.where(y == 1, 1.0, -1.0)
    s = t * (X @ w + b)
    loss = 0.5 * float(w @ w) + C * float(sample_weight @ np.logaddexp(0.0, -s))
    # d/ds log(1+e^{-s}) = -sigmoid(-s)
    coef = C * sample_weight * (-t * sigmoid(-s))
    grad = np.empty_like(params)
    grad[:-1] = w + X.T @ coef
    grad[-1] = coef.sum()
    return loss, grad


@dataclass(frozen=True)
class LogRegModel:
    kind = "logreg"
    encoder: FeatureEncoder
    standardizer: Standardizer
    coef: np.ndarray
    intercept: float
    hyperparams: dict
    seed: int

    @property
    def feature_names(self) -> list[str]:
        return list(self.encoder.feature_names)

    def predict_scores(self, dataset: Dataset, indices: np.ndarray | None = None) -> np.ndarray:
        X = self.standardizer.transform(self.encoder.transform(dataset, indices))
        return sigmoid(X @ self.coef + self.intercept)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hyperparams": self.hyperparams,
            "seed": self.seed,
            "encoder": self.encoder.to_dict(),
            "standardizer": self.standardizer.to_dict(),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
        }

    @staticmethod
    def from_dict(doc: dict) -> "LogRegModel":
        return LogRegModel(
            encoder=FeatureEncoder.from_dict(doc["encoder"]),
            standardizer=Standardizer.from_dict(doc["standardizer"]),
            coef=np.array(doc["coef"]),
            intercept=doc["intercept"],
            hyperparams=doc["hyperparams"],
            seed=doc["seed"],
        )


def train_logreg(
    dataset: Dataset, train_indices: np.ndarray, hyperparams: dict, seed: int = 0
) -> LogRegModel:
    params = dict(LOGREG_DEFAULTS)
    unknown = set(hyperparams) - set(params)
    if unknown:
        raise LearnerError(f"unknown logreg hyperparameters: {sorted(unknown)}")
    params.update(hyperparams)
    C = float(params["C"])

    train_indices = np.asarray(train_indices, dtype=np.intp)
    encoder = FeatureEncoder.fit(dataset, train_indices)
    X_raw = encoder.transform(dataset, train_indices)
    y = dataset.labels[train_indices].astype(np.float64)

    order = canonical_order(X_raw, y)
    X_raw, y = X_raw[order], y[order]
    cw = balanced_weights(y)
    standardizer = Standardizer.fit(X_raw)
    X = standardizer.transform(X_raw)

    x0 = np.zeros(X.shape[1] + 1)
    result = minimize(
        logistic_loss_grad,
        x0,
        args=(X, y, cw, C),
        jac=True,
        method="L-BFGS-B",
        options={"gtol": GRAD_TOL, "maxiter": MAX_ITER, "ftol": 0.0},
    )
    coef, intercept = result.x[:-1], float(result.x[-1])
    coef.setflags(write=False)
    return LogRegModel(
        encoder=encoder,
        standardizer=standardizer,
        coef=coef,
        intercept=intercept,
        hyperparams={"C": C},
        seed=seed,
    )
