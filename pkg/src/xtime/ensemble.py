"""Tree-ensemble model: interchange parsing, quantization, and the software oracle.

Trees are stored as flat node tables (one row per node) mirroring the dump
format of mainstream boosting libraries.  The split rule is strict: an input
goes left iff ``feature < threshold``.  Quantization replaces thresholds with
integer codes such that the same strict comparison on codes reproduces the
float decision whenever each feature's distinct thresholds fit the code space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, RangeError, SchemaError, StructureError

TASKS = ("regression", "binary_classification", "multiclass_classification")
REDUCTIONS = ("sum", "majority")

FORMAT_VERSION = 1

_NODE_KEYS = {"id", "feature", "threshold", "left", "right", "value", "is_leaf"}
_TREE_KEYS = {"tree_id", "class_id", "nodes"}
_TOP_KEYS = {"format_version", "task", "n_classes", "n_features", "reduction", "trees"}


class Tree:
    """One binary decision tree held as parallel node arrays.

    ``left``/``right`` are -1 for leaves.  ``threshold`` is a float for raw
    models and an integer code for quantized ones; the comparison is always
    ``x < threshold`` to branch left.
    """

    def __init__(self, tree_id, class_id, feature, threshold, left, right, value, is_leaf,
                 root=0, node_ids=None):
        self.tree_id = int(tree_id)
        self.class_id = int(class_id)
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)
        self.is_leaf = np.asarray(is_leaf, dtype=bool)
        self.root = int(root)
        self.node_ids = (np.arange(len(self.feature), dtype=np.int32)
                         if node_ids is None else np.asarray(node_ids, dtype=np.int32))

    @classmethod
    def from_nodes(cls, tree_id, class_id, nodes):
        """Build a tree from a list of node dicts (interchange layout).

        Node ids may be arbitrary non-negative integers; they are re-indexed
        to array positions internally.
        """
        if not nodes:
            raise StructureError(f"tree {tree_id}: empty node table")
        ids = [n["id"] for n in nodes]
        if len(set(ids)) != len(ids):
            raise StructureError(f"tree {tree_id}: duplicate node ids")
        index = {nid: i for i, nid in enumerate(ids)}

        n = len(nodes)
        feature = np.full(n, -1, dtype=np.int32)
        threshold = np.zeros(n, dtype=np.float64)
        left = np.full(n, -1, dtype=np.int32)
        right = np.full(n, -1, dtype=np.int32)
        value = np.zeros(n, dtype=np.float64)
        is_leaf = np.zeros(n, dtype=bool)

        for i, node in enumerate(nodes):
            if node["is_leaf"]:
                is_leaf[i] = True
                value[i] = float(node["value"])
            else:
                feature[i] = int(node["feature"])
                threshold[i] = float(node["threshold"])
                for side, arr in (("left", left), ("right", right)):
                    child = node[side]
                    if child is None or child not in index:
                        raise StructureError(
                            f"tree {tree_id}: node {node['id']} lists missing {side} child {child}")
                    arr[i] = index[child]

        tree = cls(tree_id, class_id, feature, threshold, left, right, value, is_leaf,
                   root=_find_root(tree_id, left, right, n),
                   node_ids=np.asarray(ids, dtype=np.int32))
        tree.validate_structure()
        return tree

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return int(self.is_leaf.sum())

    @property
    def depth(self):
        """Maximum number of branches on a root-to-leaf traversal."""
        depth = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            if self.is_leaf[node]:
                depth = max(depth, d)
            else:
                stack.append((self.left[node], d + 1))
                stack.append((self.right[node], d + 1))
        return depth

    def validate_structure(self):
        """Check single-rootedness, reachability, and leaf/branch consistency."""
        n = self.n_nodes
        seen = np.zeros(n, dtype=bool)
        stack = [self.root]
        while stack:
            node = stack.pop()
            if seen[node]:
                raise StructureError(f"tree {self.tree_id}: node {self.node_ids[node]} reached twice")
            seen[node] = True
            if self.is_leaf[node]:
                continue
            for child in (self.left[node], self.right[node]):
                if child < 0 or child >= n:
                    raise StructureError(
                        f"tree {self.tree_id}: node {self.node_ids[node]} has missing child")
                stack.append(child)
        if not seen.all():
            orphan = self.node_ids[np.flatnonzero(~seen)[0]]
            raise StructureError(f"tree {self.tree_id}: node {orphan} is unreachable from the root")
        n_internal = n - self.n_leaves
        if self.n_leaves != n_internal + 1:
            raise StructureError(f"tree {self.tree_id}: {self.n_leaves} leaves for {n_internal} branches")

    def traverse(self, x):
        """Return the leaf value reached by one input vector."""
        node = self.root
        while not self.is_leaf[node]:
            node = self.left[node] if x[self.feature[node]] < self.threshold[node] else self.right[node]
        return float(self.value[node])

    def traverse_batch(self, X):
        """Vectorized traversal: leaf values for a (samples, features) matrix."""
        node = np.full(X.shape[0], self.root, dtype=np.int32)
        pending = ~self.is_leaf[node]
        rows = np.arange(X.shape[0])
        while pending.any():
            idx = node[pending]
            go_left = X[rows[pending], self.feature[idx]] < self.threshold[idx]
            node[pending] = np.where(go_left, self.left[idx], self.right[idx])
            pending = ~self.is_leaf[node]
        return self.value[node]

    def nodes_as_dicts(self, as_codes=False):
        """Interchange node list, in stored order; ``as_codes`` emits integer thresholds."""
        out = []
        for i in range(self.n_nodes):
            if self.is_leaf[i]:
                out.append({"id": int(self.node_ids[i]), "feature": None, "threshold": None,
                            "left": None, "right": None, "value": float(self.value[i]),
                            "is_leaf": True})
            else:
                thr = int(self.threshold[i]) if as_codes else float(self.threshold[i])
                out.append({"id": int(self.node_ids[i]), "feature": int(self.feature[i]),
                            "threshold": thr,
                            "left": int(self.node_ids[self.left[i]]),
                            "right": int(self.node_ids[self.right[i]]),
                            "value": None, "is_leaf": False})
        return out


def _find_root(tree_id, left, right, n):
    is_child = np.zeros(n, dtype=bool)
    for arr in (left, right):
        valid = arr[arr >= 0]
        bad = valid[(valid >= n)]
        if bad.size:
            raise StructureError(f"tree {tree_id}: child index {int(bad[0])} out of bounds")
        is_child[valid] = True
    roots = np.flatnonzero(~is_child)
    if len(roots) != 1:
        raise StructureError(f"tree {tree_id}: expected exactly one root, found {len(roots)}")
    return int(roots[0])


class Ensemble:
    """A validated tree ensemble plus its task metadata."""

    def __init__(self, task, n_classes, n_features, reduction, trees):
        self.task = task
        self.n_classes = int(n_classes)
        self.n_features = int(n_features)
        self.reduction = reduction
        self.trees = list(trees)
        self.validate()

    def validate(self):
        if self.task not in TASKS:
            raise SchemaError(f"unknown task {self.task!r}")
        if self.reduction not in REDUCTIONS:
            raise SchemaError(f"unknown reduction {self.reduction!r}")
        if self.n_features < 1:
            raise RangeError("n_features must be >= 1")
        if not self.trees:
            raise SchemaError("ensemble has no trees")
        expected_classes = 1 if self.task in ("regression", "binary_classification") else self.n_classes
        if self.task == "multiclass_classification" and self.n_classes < 2:
            raise RangeError("multiclass model needs n_classes >= 2")
        if self.task != "multiclass_classification" and self.n_classes != 1:
            raise RangeError("regression/binary models must declare n_classes = 1")
        if self.reduction == "majority" and self.task != "multiclass_classification":
            raise SchemaError("majority reduction is only supported for multiclass classification")
        for tree in self.trees:
            if not (0 <= tree.class_id < expected_classes):
                raise RangeError(f"tree {tree.tree_id}: class_id {tree.class_id} out of range")
            branch_feats = tree.feature[~tree.is_leaf]
            if branch_feats.size and (branch_feats.min() < 0 or branch_feats.max() >= self.n_features):
                raise RangeError(f"tree {tree.tree_id}: feature_id out of range")
            if self.reduction == "majority":
                votes = tree.value[tree.is_leaf]
                rounded = np.rint(votes)
                if not np.allclose(votes, rounded) or rounded.min() < 0 or rounded.max() >= self.n_classes:
                    raise RangeError(
                        f"tree {tree.tree_id}: majority leaves must be class indices in [0, {self.n_classes})")

    @property
    def n_trees(self):
        return len(self.trees)

    @property
    def n_leaves_total(self):
        return sum(t.n_leaves for t in self.trees)

    @property
    def max_depth(self):
        return max(t.depth for t in self.trees)

    def to_dict(self, as_codes=False):
        return {
            "format_version": FORMAT_VERSION,
            "task": self.task,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "reduction": self.reduction,
            "trees": [{"tree_id": t.tree_id, "class_id": t.class_id,
                       "nodes": t.nodes_as_dicts(as_codes=as_codes)}
                      for t in sorted(self.trees, key=lambda t: t.tree_id)],
        }


class QuantizedEnsemble(Ensemble):
    """Ensemble whose thresholds are integer codes on a :class:`QuantizationGrid`.

    Leaf values are kept as the original floats; only comparisons move to code
    space.  When every feature's distinct thresholds fit the grid, decisions
    are preserved exactly for every real input.
    """

    def __init__(self, task, n_classes, n_features, reduction, trees, grid):
        self.grid = grid
        super().__init__(task, n_classes, n_features, reduction, trees)

    @property
    def n_bits(self):
        return self.grid.n_bits


def parse_ensemble(document):
    """Parse interchange JSON (bytes or str) into a validated :class:`Ensemble`.

    Unknown fields anywhere in the document are rejected.
    """
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    else:
        doc = document

    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaError(f"unknown top-level fields: {sorted(unknown)}")
    for key in _TOP_KEYS:
        if key not in doc:
            raise SchemaError(f"missing top-level field {key!r}")
    if doc["format_version"] != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {doc['format_version']!r}")
    if not isinstance(doc["trees"], list):
        raise SchemaError("'trees' must be a list")
    for name in ("n_classes", "n_features"):
        if not isinstance(doc[name], int) or isinstance(doc[name], bool):
            raise SchemaError(f"{name!r} must be an integer")

    trees = []
    for entry in doc["trees"]:
        if not isinstance(entry, dict):
            raise SchemaError("tree entries must be objects")
        unknown = set(entry) - _TREE_KEYS
        if unknown:
            raise SchemaError(f"unknown tree fields: {sorted(unknown)}")
        for key in _TREE_KEYS:
            if key not in entry:
                raise SchemaError(f"tree entry missing field {key!r}")
        nodes = entry["nodes"]
        if not isinstance(nodes, list) or not nodes:
            raise SchemaError(f"tree {entry['tree_id']}: 'nodes' must be a non-empty list")
        for node in nodes:
            if not isinstance(node, dict):
                raise SchemaError("node entries must be objects")
            unknown = set(node) - _NODE_KEYS
            if unknown:
                raise SchemaError(f"unknown node fields: {sorted(unknown)}")
            missing = _NODE_KEYS - set(node)
            if missing:
                raise SchemaError(f"node missing fields: {sorted(missing)}")
            if not node["is_leaf"]:
                if node["feature"] is None or node["threshold"] is None:
                    raise SchemaError(f"branch node {node['id']} needs feature and threshold")
            elif node["value"] is None:
                raise SchemaError(f"leaf node {node['id']} needs a value")
        trees.append(Tree.from_nodes(entry["tree_id"], entry["class_id"], nodes))

    tree_ids = [t.tree_id for t in trees]
    if len(set(tree_ids)) != len(tree_ids):
        raise SchemaError("duplicate tree_id values")
    return Ensemble(doc["task"], doc["n_classes"], doc["n_features"], doc["reduction"], trees)


class QuantizationGrid:
    """Per-feature sorted cut points defining the integer code space.

    ``code(x) = number of cut points <= x``, so codes are monotone in x and a
    threshold that appears as a cut maps to a code preserving strict-< splits.
    """

    def __init__(self, n_bits, cuts):
        self.n_bits = int(n_bits)
        self.cuts = [np.asarray(c, dtype=np.float64) for c in cuts]
        limit = 2 ** self.n_bits - 1
        for f, c in enumerate(self.cuts):
            if len(c) > limit:
                raise RangeError(f"feature {f}: {len(c)} cut points exceed 2^{self.n_bits}-1")
            if len(c) > 1 and not (np.diff(c) > 0).all():
                raise RangeError(f"feature {f}: cut points must be strictly increasing")

    @property
    def n_features(self):
        return len(self.cuts)

    def quantize(self, x):
        """Code vector for one raw input (binary search per feature)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise DimensionError(f"expected {self.n_features} features, got {x.shape}")
        return np.array([int(np.searchsorted(self.cuts[f], x[f], side="right"))
                         for f in range(self.n_features)], dtype=np.int32)

    def quantize_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionError(f"expected (n, {self.n_features}) matrix, got {X.shape}")
        codes = np.empty(X.shape, dtype=np.int32)
        for f in range(self.n_features):
            codes[:, f] = np.searchsorted(self.cuts[f], X[:, f], side="right")
        return codes

    def threshold_code(self, feature, threshold):
        return int(np.searchsorted(self.cuts[feature], threshold, side="right"))

    def to_dict(self):
        return {"n_bits": self.n_bits, "cuts": [c.tolist() for c in self.cuts]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_bits"], d["cuts"])


def build_quant_grid(ensemble, n_bits=8):
    """Threshold-anchored cut points per feature, with a quantile fallback.

    If a feature's distinct thresholds fit in ``2**n_bits - 1`` cuts they are
    used verbatim (quantization is then decision-preserving); otherwise the
    cuts are evenly spaced quantiles of the threshold multiset.
    """
    if n_bits not in (4, 8):
        raise RangeError(f"n_bits must be 4 or 8, got {n_bits}")
    limit = 2 ** n_bits - 1
    per_feature = [[] for _ in range(ensemble.n_features)]
    for tree in ensemble.trees:
        branch = ~tree.is_leaf
        for f, t in zip(tree.feature[branch], tree.threshold[branch]):
            per_feature[f].append(float(t))

    cuts = []
    for values in per_feature:
        if not values:
            cuts.append(np.empty(0, dtype=np.float64))
            continue
        distinct = np.unique(np.asarray(values, dtype=np.float64))
        if len(distinct) <= limit:
            cuts.append(distinct)
        else:
            multiset = np.sort(np.asarray(values, dtype=np.float64))
            fractions = np.arange(1, limit + 1, dtype=np.float64) / (limit + 1)
            q = _interp_quantiles(multiset, fractions)
            cuts.append(np.unique(q))
    return QuantizationGrid(n_bits, cuts)


def _interp_quantiles(sorted_values, fractions):
    """Linear-interpolation quantiles of an already sorted array."""
    m = len(sorted_values)
    pos = fractions * (m - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, m - 1)
    w = pos - lo
    return sorted_values[lo] * (1.0 - w) + sorted_values[hi] * w


def quantize_input(x, grid):
    """Integer code vector for one raw input."""
    return grid.quantize(x)


def quantize_ensemble(ensemble, grid=None, n_bits=8):
    """Replace every threshold with its grid code; leaf values are untouched."""
    if grid is None:
        grid = build_quant_grid(ensemble, n_bits)
    qtrees = []
    for tree in ensemble.trees:
        thr = tree.threshold.copy()
        for i in range(tree.n_nodes):
            if not tree.is_leaf[i]:
                thr[i] = grid.threshold_code(tree.feature[i], tree.threshold[i])
        qtrees.append(Tree(tree.tree_id, tree.class_id, tree.feature, thr, tree.left,
                           tree.right, tree.value, tree.is_leaf, root=tree.root,
                           node_ids=tree.node_ids))
    return QuantizedEnsemble(ensemble.task, ensemble.n_classes, ensemble.n_features,
                             ensemble.reduction, qtrees, grid)


@dataclass
class Prediction:
    """Raw per-class logits plus the decided model output."""
    logits: np.ndarray
    decision: float


def decide(logits, task, decision_threshold=0.0):
    """Decision rule shared by the oracle: sum / threshold / lowest-index argmax."""
    if task == "regression":
        return float(logits[0])
    if task == "binary_classification":
        return int(logits[0] >= decision_threshold)
    return int(np.argmax(logits))


def oracle_predict(model, x, decision_threshold=0.0):
    """Exact reference inference for one input (raw or quantized model)."""
    x = np.asarray(x)
    if x.shape != (model.n_features,):
        raise DimensionError(f"expected {model.n_features} features, got {x.shape}")
    logits = np.zeros(model.n_classes, dtype=np.float64)
    for tree in model.trees:
        leaf = tree.traverse(x)
        if model.reduction == "majority":
            logits[int(round(leaf))] += 1.0
        else:
            logits[tree.class_id] += leaf
    return Prediction(logits, decide(logits, model.task, decision_threshold))


def oracle_predict_batch(model, X, decision_threshold=0.0):
    """Vectorized oracle: (logits matrix, decisions array) for a sample matrix."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionError(f"expected (n, {model.n_features}) matrix, got {X.shape}")
    logits = np.zeros((X.shape[0], model.n_classes), dtype=np.float64)
    for tree in model.trees:
        leaves = tree.traverse_batch(X)
        if model.reduction == "majority":
            votes = np.rint(leaves).astype(np.int64)
            np.add.at(logits, (np.arange(X.shape[0]), votes), 1.0)
        else:
            logits[:, tree.class_id] += leaves
    if model.task == "regression":
        decisions = logits[:, 0].copy()
    elif model.task == "binary_classification":
        decisions = (logits[:, 0] >= decision_threshold).astype(np.int64)
    else:
        decisions = np.argmax(logits, axis=1).astype(np.int64)
    return logits, decisions
