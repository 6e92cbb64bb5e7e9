"""Train-fitted feature encoding shared by both learners.

Categorical columns become one-hot blocks over the training vocabulary plus
an explicit unseen bucket; numeric columns pass through. Missing cells stay
NaN in the encoded matrix — the linear model imputes them, the boosted
trees route them natively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datamodel import ColumnKind, Dataset

UNSEEN = "__unseen__"


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureEncoder:
    """Column order and one-hot vocabularies frozen on the training split."""

    feature_names: tuple[str, ...]
    vocabularies: dict[str, tuple[str, ...]]  # categorical column -> tokens

    @staticmethod
    def fit(dataset: Dataset, train_indices: np.ndarray) -> "FeatureEncoder":
        names = tuple(dataset.feature_names)
        vocabs: dict[str, tuple[str, ...]] = {}
        for col in dataset.schema:
            if col.is_label or col.kind is not ColumnKind.CATEGORICAL:
                continue
            values = dataset.columns[col.name][np.asarray(train_indices, dtype=np.intp)]
            vocabs[col.name] = tuple(sorted({v for v in values if v is not None}))
        return FeatureEncoder(feature_names=names, vocabularies=vocabs)

    @property
    def encoded_names(self) -> list[str]:
        out: list[str] = []
        for name in self.feature_names:
            if name in self.vocabularies:
                out.extend(f"{name}={tok}" for tok in self.vocabularies[name])
                out.append(f"{name}={UNSEEN}")
            else:
                out.append(name)
        return out

    def transform(self, dataset: Dataset, indices: np.ndarray | None = None) -> np.ndarray:
        """Encoded float matrix with NaN for missing cells.

        Extra dataset columns are ignored; an absent model feature is an
        error.
        """
        idx = None if indices is None else np.asarray(indices, dtype=np.intp)
        n = dataset.n_rows if idx is None else len(idx)
        blocks: list[np.ndarray] = []
        for name in self.feature_names:
            if name not in dataset.columns:
                raise LearnerError(f"model feature {name!r} absent from dataset")
            raw = dataset.columns[name]
            values = raw if idx is None else raw[idx]
            if name in self.vocabularies:
                vocab = self.vocabularies[name]
                block = np.zeros((n, len(vocab) + 1))
                missing = np.array([v is None for v in values], dtype=bool)
                matched = np.zeros(n, dtype=bool)
                for j, tok in enumerate(vocab):
                    hit = np.array([v == tok for v in values], dtype=bool)
                    block[hit, j] = 1.0
                    matched |= hit
                block[~matched & ~missing, len(vocab)] = 1.0  # unseen bucket
                block[missing] = np.nan
                blocks.append(block)
            else:
                blocks.append(np.asarray(values, dtype=np.float64).reshape(n, 1))
        return np.hstack(blocks) if blocks else np.empty((n, 0))

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "vocabularies": {k: list(v) for k, v in self.vocabularies.items()},
        }

    @staticmethod
    def from_dict(doc: dict) -> "FeatureEncoder":
        return FeatureEncoder(
            feature_names=tuple(doc["feature_names"]),
            vocabularies={k: tuple(v) for k, v in doc["vocabularies"].items()},
        )


@dataclass(frozen=True)
class Standardizer:
    """Median imputation then standardization, all fitted on training rows."""

    medians: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    @staticmethod
    def fit(X_train: np.ndarray) -> "Standardizer":
        medians = np.empty(X_train.shape[1])
        for j in range(X_train.shape[1]):
            col = X_train[:, j]
            observed = col[~np.isnan(col)]
            medians[j] = np.median(observed) if len(observed) else 0.0
        imputed = np.where(np.isnan(X_train), medians[None, :], X_train)
        means = imputed.mean(axis=0)
        stds = imputed.std(axis=0)
        stds = np.where(stds == 0.0, 1.0, stds)
        return Standardizer(medians=medians, means=means, stds=stds)

    def transform(self, X: np.ndarray) -> np.ndarray:
        imputed = np.where(np.isnan(X), self.medians[None, :], X)
        return (imputed - self.means[None, :]) / self.stds[None, :]

    def to_dict(self) -> dict:
        return {
            "medians": self.medians.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @staticmethod
    def from_dict(doc: dict) -> "Standardizer":
        return Standardizer(
            medians=np.array(doc["medians"]),
            means=np.array(doc["means"]),
            stds=np.array(doc["stds"]),
        )


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation that is invariant to the incoming row order.

    Sorting rows lexicographically (labels as the final tie-break) makes
    every downstream reduction bit-identical no matter how the training
    indices were shuffled. NaN sorts high, consistently.
    """
    # np.lexsort treats the last key as primary: column 0 leads, labels
    # break the final ties.
    keys = [np.asarray(y, dtype=np.float64)]
    for j in range(X.shape[1] - 1, -1, -1):
        keys.append(X[:, j])
    return np.lexsort(keys)
