"""Random forest fusing classifier probabilities with a large-lesion flag.

Trees are CART classifiers grown on bootstrap resamples with Gini impurity,
considering a random subset of features at each split. A forest predicts
the mean of its trees' leaf class frequencies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .classifier import ClassProbs
from .errors import DegenerateLabels, SchemaError
from .rules import CancerStatus

SCHEMA_VERSION = 1
# impurities closer than this count as tied; the earlier candidate wins
TIE_TOL = 1e-12
N_CLASSES = len(CancerStatus)
N_FEATURES = 5


class EnsembleFeatures(NamedTuple):
    p_neg: float
    p_naa: float
    p_aa: float
    p_crc: float
    size_ge_10mm: int


def build_features(probs: Sequence[float], size_flag: int) -> EnsembleFeatures:
    probs = tuple(float(p) for p in probs)
    if len(probs) != N_CLASSES or any(not 0.0 <= p <= 1.0 for p in probs):
        raise ValueError(f"expected {N_CLASSES} probabilities in [0, 1], got {probs}")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")
    if size_flag not in (0, 1):
        raise ValueError(f"size flag must be 0 or 1, got {size_flag!r}")
    return EnsembleFeatures(*probs, int(size_flag))


@dataclass
class Tree:
    """Flat array tree; ``feature[i] == -1`` marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[list[float]] = field(default_factory=list)
    depth: list[int] = field(default_factory=list)

    def _add(self, counts, depth) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append([float(c) for c in counts])
        self.depth.append(depth)
        return len(self.feature) - 1

    @property
    def max_depth(self) -> int:
        return max(self.depth)

    def leaf(self, x) -> int:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return node

    def predict_proba(self, x) -> np.ndarray:
        c = np.asarray(self.counts[self.leaf(x)])
        return c / c.sum()


@dataclass
class ForestModel:
    trees: list[Tree]
    n_trees: int = 10
    max_depth: int = 10
    seed: int = 0
    max_features: int = 3
    bootstrap: bool = True


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


def _best_split_on_feature(x: np.ndarray, Y: np.ndarray):
    """Lowest weighted Gini over thresholds for one feature.

    ``Y`` is the one-hot label matrix. Returns ``(impurity, threshold)`` or
    ``None`` when the feature is constant.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    valid = np.nonzero(xs[1:] > xs[:-1])[0]  # split after position i
    if len(valid) == 0:
        return None
    left = np.cumsum(Y[order], axis=0)[valid]
    total = Y.sum(axis=0)
    right = total - left
    nl = left.sum(axis=1)
    nr = right.sum(axis=1)
    g_left = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
    g_right = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
    impurity = (nl * g_left + nr * g_right) / len(x)
    k = int(np.flatnonzero(impurity <= impurity.min() + TIE_TOL)[0])
    i = valid[k]
    return float(impurity[k]), float((xs[i] + xs[i + 1]) / 2.0)


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int = 10,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    feature_pool: Sequence[int] | None = None,
) -> Tree:
    """Grow one CART tree to purity or ``max_depth``.

    With ``max_features`` below the pool size, each node examines features in
    a random order until that many non-constant ones have been scored.
    Otherwise all pool features are scored in index order. Ties keep the
    first candidate.
    """
    pool = np.arange(X.shape[1]) if feature_pool is None else np.asarray(feature_pool)
    Y = np.eye(N_CLASSES)[y]
    tree = Tree()

    def grow(rows: np.ndarray, depth: int) -> int:
        counts = Y[rows].sum(axis=0)
        node = tree._add(counts, depth)
        if depth >= max_depth or np.count_nonzero(counts) <= 1:
            return node
        if max_features is None or max_features >= len(pool):
            candidates = pool
            budget = len(pool)
        else:
            candidates = pool[rng.permutation(len(pool))]
            budget = max_features
        best = None
        scored = 0
        for f in candidates:
            if scored >= budget:
                break
            found = _best_split_on_feature(X[rows, f], Y[rows])
            if found is None:
                continue
            scored += 1
            if best is None or found[0] < best[0] - TIE_TOL:
                best = (found[0], int(f), found[1])
        if best is None:
            return node
        _, f, thr = best
        mask = X[rows, f] <= thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = grow(rows[mask], depth + 1)
        tree.right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return tree


def _labels_array(labels) -> np.ndarray:
    return np.array([CancerStatus[v] if isinstance(v, str) else int(v) for v in labels], dtype=int)


def train_forest(
    features: Sequence[Sequence[float]],
    labels: Sequence,
    n_trees: int = 10,
    max_depth: int = 10,
    seed: int = 0,
    max_features: int | None = None,
    bootstrap: bool = True,
    feature_pool: Sequence[int] | None = None,
) -> ForestModel:
    """Tree ``t`` draws its bootstrap and feature subsets from ``seed + t``."""
    X = np.asarray(features, dtype=float)
    y = _labels_array(labels)
    if len(X) != len(y) or len(y) == 0:
        raise ValueError("features and labels must be non-empty and aligned")
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("ensemble training labels contain a single class")
    n_pool = X.shape[1] if feature_pool is None else len(feature_pool)
    if max_features is None:
        max_features = math.ceil(math.sqrt(n_pool))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(seed + t)
        rows = rng.integers(0, len(y), len(y)) if bootstrap else np.arange(len(y))
        trees.append(
            build_tree(X[rows], y[rows], max_depth, max_features, rng, feature_pool=feature_pool)
        )
    return ForestModel(trees, n_trees, max_depth, seed, max_features, bootstrap)


def resolve_argmax(probs) -> CancerStatus:
    """Argmax where exact ties go to the more severe class."""
    probs = np.asarray(probs, dtype=float)
    top = probs.max()
    winners = np.nonzero(np.isclose(probs, top, rtol=0.0, atol=1e-12))[0]
    return CancerStatus(int(winners.max()))


def predict_forest(model: ForestModel, features: Sequence[float]) -> tuple[CancerStatus, ClassProbs]:
    x = np.asarray(features, dtype=float)
    probs = np.mean([tree.predict_proba(x) for tree in model.trees], axis=0)
    return resolve_argmax(probs), ClassProbs.from_array(probs)


def forest_to_json(model: ForestModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "random_forest",
        "feature_names": list(EnsembleFeatures._fields),
        "n_trees": model.n_trees,
        "max_depth": model.max_depth,
        "max_features": model.max_features,
        "bootstrap": model.bootstrap,
        "seed": model.seed,
        "trees": [
            {
                "feature": t.feature,
                "threshold": t.threshold,
                "left": t.left,
                "right": t.right,
                "counts": t.counts,
                "depth": t.depth,
            }
            for t in model.trees
        ],
    }


def forest_from_json(obj: dict) -> ForestModel:
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported forest schema_version {obj.get('schema_version')!r}")
    trees = [Tree(**t) for t in obj["trees"]]
    return ForestModel(
        trees=trees,
        n_trees=obj["n_trees"],
        max_depth=obj["max_depth"],
        seed=obj["seed"],
        max_features=obj["max_features"],
        bootstrap=obj["bootstrap"],
    )


def save_forest(model: ForestModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(forest_to_json(model), sort_keys=True), encoding="utf-8")


def load_forest(path: str | Path) -> ForestModel:
    return forest_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
