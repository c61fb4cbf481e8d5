"""Seeded synthetic ensembles and inputs for sweeps and verification runs.

Trees are balanced with splits drawn inside each node's surviving feature
range, on a 256-level threshold lattice, so every branch is reachable and an
8-bit quantization grid reproduces the float model exactly.  Leaf values land
on a 2^-16 grid so the fixed-point flit encoding is lossless and chip
decisions can be compared to the float oracle exactly.
"""

from __future__ import annotations

import numpy as np

from .ensemble import Ensemble, Tree

LEAF_GRID_BITS = 16
THRESHOLD_LEVELS = 256


def make_tree(rng, tree_id, class_id, depth, n_features, leaf_values=None):
    """One balanced tree with consistent random splits.

    Split codes are drawn strictly inside the node's remaining [lo, hi) range
    for the chosen feature; a node whose features are all exhausted becomes an
    early leaf (rare for realistic feature counts).
    """
    feature, threshold, left, right, value, is_leaf = [], [], [], [], [], []

    def add_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        is_leaf.append(False)
        return len(feature) - 1

    leaves = []

    def build(d, lo, hi):
        node = add_node()
        splittable = np.flatnonzero(hi - lo >= 2)
        if d == 0 or splittable.size == 0:
            is_leaf[node] = True
            leaves.append(node)
            return node
        f = int(rng.choice(splittable))
        t = int(rng.integers(lo[f] + 1, hi[f]))
        feature[node] = f
        threshold[node] = t / THRESHOLD_LEVELS
        hi_left = hi.copy()
        hi_left[f] = t
        left[node] = build(d - 1, lo.copy(), hi_left)
        lo_right = lo.copy()
        lo_right[f] = t
        right[node] = build(d - 1, lo_right, hi.copy())
        return node

    lo0 = np.zeros(n_features, dtype=np.int64)
    hi0 = np.full(n_features, THRESHOLD_LEVELS, dtype=np.int64)
    build(depth, lo0, hi0)

    if leaf_values is None:
        grid = 2 ** LEAF_GRID_BITS
        leaf_values = rng.integers(-2 * grid, 2 * grid + 1, size=len(leaves)) / grid
    for node, val in zip(leaves, np.asarray(leaf_values, dtype=np.float64)[:len(leaves)]):
        value[node] = float(val)
    return Tree(tree_id, class_id, feature, threshold, left, right, value, is_leaf)


def make_random_ensemble(task, n_trees, depth, n_features, n_classes=1, seed=0,
                         reduction="sum"):
    """Balanced random ensemble; multiclass sum models tag trees round-robin."""
    rng = np.random.default_rng(seed)
    trees = []
    for t in range(n_trees):
        if task == "multiclass_classification" and reduction == "sum":
            class_id = t % n_classes
        else:
            class_id = 0
        leaf_values = None
        if reduction == "majority":
            leaf_values = rng.integers(0, n_classes, size=2 ** depth).astype(np.float64)
        trees.append(make_tree(rng, t, class_id, depth, n_features, leaf_values))
    return Ensemble(task, n_classes if task == "multiclass_classification" else 1,
                    n_features, reduction, trees)


def make_samples(n_samples, n_features, seed=0):
    """Uniform [0, 1) feature matrix."""
    rng = np.random.default_rng(seed + 1)
    return rng.uniform(0.0, 1.0, size=(n_samples, n_features))
