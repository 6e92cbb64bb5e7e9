"""Gradient-boosted depth-limited trees on logistic loss.

Histogram training: each feature is quantized into at most 256 train-fitted
bins plus one missing bin; split search scans bin boundaries and learns a
default direction for missing values by trying both sides. Positive
examples are weighted by n_neg / n_pos. No imputation — missing cells are
routed by the learned default direction at prediction time.

Split scoring and leaf values follow the standard second-order objective:

    gain = 0.5 * (S(G_L) + S(G_R) - S(G)) - gamma,   S(G) = T(G)^2 / (H + lambda)
    leaf = -T(G) / (H + lambda)

where T soft-thresholds G by reg_alpha. Rows are canonically reordered
before binning, so training is invariant to the incoming row order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datamodel import Dataset
from .logreg import sigmoid
from .preprocess import FeatureEncoder, LearnerError, canonical_order

GBDT_DEFAULTS = {
    "n_estimators": 100,
    "max_depth": 6,
    "learning_rate": 0.3,
    "min_child_weight": 1.0,
    "max_delta_step": 0.0,
    "subsample": 1.0,
    "colsample_bytree": 1.0,
    "colsample_bylevel": 1.0,
    "gamma": 0.0,
    "reg_alpha": 0.0,
    "reg_lambda": 1.0,
}

MAX_BINS = 256


def fit_bin_edges(values: np.ndarray) -> np.ndarray:
    """Up to MAX_BINS - 1 ascending edges from the observed training values.

    Few distinct values get exact midpoints; otherwise quantile cuts.
    """
    observed = values[~np.isnan(values)]
    if len(observed) == 0:
        return np.empty(0)
    distinct = np.unique(observed)
    if len(distinct) <= MAX_BINS:
        return (distinct[:-1] + distinct[1:]) / 2.0
    qs = np.quantile(observed, np.linspace(0.0, 1.0, MAX_BINS + 1)[1:-1])
    return np.unique(qs)


def bin_column(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Codes 0..len(edges) for finite bins; len(edges)+1 marks missing."""
    miss = np.isnan(values)
    codes = np.searchsorted(edges, np.where(miss, 0.0, values), side="left")
    codes[miss] = len(edges) + 1
    return codes.astype(np.int64)


def _soft_threshold(g, alpha: float):
    return np.where(g > alpha, g - alpha, np.where(g < -alpha, g + alpha, 0.0))


@dataclass
class _Tree:
    feature: list  # -1 marks leaves
    bin: list  # split bin index (training-side routing)
    threshold: list  # raw-value threshold (inference-side routing)
    default_left: list
    left: list
    right: list
    value: list  # leaf values (0.0 on internal nodes)

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(len(X))
        stack = [(0, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            if self.feature[node] < 0:
                out[idx] = self.value[node]
                continue
            x = X[idx, self.feature[node]]
            miss = np.isnan(x)
            go_left = np.where(miss, self.default_left[node], x <= self.threshold[node])
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out

    def predict_binned(self, codes: np.ndarray, missing_code: np.ndarray) -> np.ndarray:
        out = np.zeros(len(codes))
        stack = [(0, np.arange(len(codes)))]
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            f = self.feature[node]
            if f < 0:
                out[idx] = self.value[node]
                continue
            c = codes[idx, f]
            miss = c == missing_code[f]
            go_left = np.where(miss, self.default_left[node], c <= self.bin[node])
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "bin": self.bin,
            "threshold": self.threshold,
            "default_left": self.default_left,
            "left": self.left,
            "right": self.right,
            "value": self.value,
        }

    @staticmethod
    def from_dict(doc: dict) -> "_Tree":
        return _Tree(**doc)


class _Grower:
    """Builds one tree over pre-binned training data."""

    def __init__(self, codes, edges, g, h, params, rng, features):
        self.codes = codes
        self.edges = edges
        self.g = g
        self.h = h
        self.p = params
        self.rng = rng
        self.features = features
        self.tree = _Tree([], [], [], [], [], [], [])

    def _new_node(self) -> int:
        t = self.tree
        t.feature.append(-1)
        t.bin.append(-1)
        t.threshold.append(0.0)
        t.default_left.append(True)
        t.left.append(-1)
        t.right.append(-1)
        t.value.append(0.0)
        return len(t.feature) - 1

    def _leaf_value(self, g_sum: float, h_sum: float) -> float:
        value = float(
            -_soft_threshold(g_sum, self.p["reg_alpha"]) / (h_sum + self.p["reg_lambda"])
        )
        step = self.p["max_delta_step"]
        if step > 0:
            value = float(np.clip(value, -step, step))
        return value

    def _score(self, g_sum, h_sum):
        t = _soft_threshold(g_sum, self.p["reg_alpha"])
        return t * t / (h_sum + self.p["reg_lambda"])

    def _best_split(self, idx: np.ndarray, features: np.ndarray):
        g_total = float(self.g[idx].sum())
        h_total = float(self.h[idx].sum())
        parent = self._score(g_total, h_total)
        mcw = self.p["min_child_weight"]
        n_idx = len(idx)
        best = None  # (gain, feature, bin, default_left)
        for f in features:
            n_edges = len(self.edges[f])
            if n_edges == 0:
                continue
            c = self.codes[idx, f]
            nb = n_edges + 2  # finite bins + missing bin
            g_hist = np.bincount(c, weights=self.g[idx], minlength=nb)
            h_hist = np.bincount(c, weights=self.h[idx], minlength=nb)
            n_hist = np.bincount(c, minlength=nb)
            g_miss, h_miss, n_miss = g_hist[-1], h_hist[-1], int(n_hist[-1])
            g_cum = np.cumsum(g_hist[:-1])[:n_edges]
            h_cum = np.cumsum(h_hist[:-1])[:n_edges]
            n_cum = np.cumsum(n_hist[:-1])[:n_edges]
            # Rows 0/1: missing routed left / right. Scanning order (direction
            # major, bin minor) fixes deterministic tie-breaking via argmax.
            gl = np.stack([g_cum + g_miss, g_cum])
            hl = np.stack([h_cum + h_miss, h_cum])
            nl = np.stack([n_cum + n_miss, n_cum])
            gr, hr, nr = g_total - gl, h_total - hl, n_idx - nl
            gains = 0.5 * (self._score(gl, hl) + self._score(gr, hr) - parent)
            gains -= self.p["gamma"]
            invalid = (nl == 0) | (nr == 0) | (hl < mcw) | (hr < mcw)
            gains[invalid] = -np.inf
            flat = int(np.argmax(gains))
            gain = float(gains.ravel()[flat])
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, int(f), flat % n_edges, flat < n_edges)
        return best

    def grow(self, idx: np.ndarray) -> _Tree:
        self._build(idx, depth=0, node=self._new_node(), features=self.features)
        return self.tree

    def _build(self, idx: np.ndarray, depth: int, node: int, features: np.ndarray) -> None:
        t = self.tree
        g_sum = float(self.g[idx].sum())
        h_sum = float(self.h[idx].sum())
        if depth >= self.p["max_depth"]:
            t.value[node] = self._leaf_value(g_sum, h_sum)
            return
        level_features = features
        frac = self.p["colsample_bylevel"]
        if frac < 1.0 and len(features) > 1:
            k = max(1, int(round(frac * len(features))))
            level_features = np.sort(self.rng.choice(features, size=k, replace=False))
        best = self._best_split(idx, level_features)
        if best is None:
            t.value[node] = self._leaf_value(g_sum, h_sum)
            return
        _, f, b, default_left = best
        c = self.codes[idx, f]
        miss = c == len(self.edges[f]) + 1
        go_left = np.where(miss, default_left, c <= b)
        t.feature[node] = f
        t.bin[node] = b
        t.threshold[node] = float(self.edges[f][b])
        t.default_left[node] = bool(default_left)
        t.left[node] = self._new_node()
        t.right[node] = self._new_node()
        self._build(idx[go_left], depth + 1, t.left[node], features)
        self._build(idx[~go_left], depth + 1, t.right[node], features)


@dataclass(frozen=True)
class GbdtModel:
    kind = "gbdt"
    encoder: FeatureEncoder
    trees: list
    learning_rate: float
    base_logit: float
    hyperparams: dict
    seed: int
    train_losses: tuple[float, ...]  # weighted logloss after each round

    @property
    def feature_names(self) -> list[str]:
        return list(self.encoder.feature_names)

    def predict_scores(self, dataset: Dataset, indices: np.ndarray | None = None) -> np.ndarray:
        X = self.encoder.transform(dataset, indices)
        raw = np.full(len(X), self.base_logit)
        for tree in self.trees:
            raw += self.learning_rate * tree.predict_raw(X)
        return sigmoid(raw)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hyperparams": self.hyperparams,
            "seed": self.seed,
            "encoder": self.encoder.to_dict(),
            "learning_rate": self.learning_rate,
            "base_logit": self.base_logit,
            "trees": [t.to_dict() for t in self.trees],
            "train_losses": list(self.train_losses),
        }

    @staticmethod
    def from_dict(doc: dict) -> "GbdtModel":
        return GbdtModel(
            encoder=FeatureEncoder.from_dict(doc["encoder"]),
            trees=[_Tree.from_dict(t) for t in doc["trees"]],
            learning_rate=doc["learning_rate"],
            base_logit=doc["base_logit"],
            hyperparams=doc["hyperparams"],
            seed=doc["seed"],
            train_losses=tuple(doc["train_losses"]),
        )


def _weighted_logloss(y, p, w):
    eps = 1e-15
    p = np.clip(p, eps, 1 - eps)
    return float((w * -(y * np.log(p) + (1 - y) * np.log(1 - p))).sum() / w.sum())


def train_gbdt(
    dataset: Dataset, train_indices: np.ndarray, hyperparams: dict, seed: int = 0
) -> GbdtModel:
    params = dict(GBDT_DEFAULTS)
    unknown = set(hyperparams) - set(params)
    if unknown:
        raise LearnerError(f"unknown gbdt hyperparameters: {sorted(unknown)}")
    params.update(hyperparams)

    train_indices = np.asarray(train_indices, dtype=np.intp)
    encoder = FeatureEncoder.fit(dataset, train_indices)
    X = encoder.transform(dataset, train_indices)
    y = dataset.labels[train_indices].astype(np.float64)
    n_pos = int((y == 1).sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise LearnerError("training data holds a single class")

    order = canonical_order(X, y)
    X, y = X[order], y[order]
    sample_w = np.where(y == 1, n_neg / n_pos, 1.0)

    d = X.shape[1]
    edges = [fit_bin_edges(X[:, j]) for j in range(d)]
    codes = np.column_stack([bin_column(X[:, j], edges[j]) for j in range(d)]) if d else (
        np.empty((len(y), 0), dtype=np.int64)
    )
    missing_code = np.array([len(e) + 1 for e in edges], dtype=np.int64)

    rng = np.random.default_rng(seed)
    n = len(y)
    raw = np.zeros(n)  # base logit 0.0 == base score 0.5
    trees: list[_Tree] = []
    losses: list[float] = []
    all_rows = np.arange(n)
    all_features = np.arange(d)
    for _ in range(int(params["n_estimators"])):
        p = sigmoid(raw)
        g = sample_w * (p - y)
        h = sample_w * p * (1 - p)
        rows = all_rows
        if params["subsample"] < 1.0:
            k = max(1, int(round(params["subsample"] * n)))
            rows = np.sort(rng.choice(n, size=k, replace=False))
        features = all_features
        if params["colsample_bytree"] < 1.0 and d > 1:
            k = max(1, int(round(params["colsample_bytree"] * d)))
            features = np.sort(rng.choice(d, size=k, replace=False))
        grower = _Grower(codes, edges, g, h, params, rng, features)
        tree = grower.grow(rows)
        trees.append(tree)
        raw += params["learning_rate"] * tree.predict_binned(codes, missing_code)
        losses.append(_weighted_logloss(y, sigmoid(raw), sample_w))

    return GbdtModel(
        encoder=encoder,
        trees=trees,
        learning_rate=float(params["learning_rate"]),
        base_logit=0.0,
        hyperparams=params,
        seed=seed,
        train_losses=tuple(losses),
    )
