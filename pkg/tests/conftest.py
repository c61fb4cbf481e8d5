import json

import pytest

from xtime import Ensemble, Tree, build_quant_grid, quantize_ensemble


def balanced_two_feature_tree(tree_id=0, class_id=0,
                              t_root=0.5, t_left=0.25, t_right=0.75,
                              leaves=(0.1, 0.2, 0.3, 0.4)):
    """Four-leaf, depth-2 tree splitting feature 0 at the root and feature 1 below."""
    nodes = [
        {"id": 0, "feature": 0, "threshold": t_root, "left": 1, "right": 2,
         "value": None, "is_leaf": False},
        {"id": 1, "feature": 1, "threshold": t_left, "left": 3, "right": 4,
         "value": None, "is_leaf": False},
        {"id": 2, "feature": 1, "threshold": t_right, "left": 5, "right": 6,
         "value": None, "is_leaf": False},
        {"id": 3, "feature": None, "threshold": None, "left": None, "right": None,
         "value": leaves[0], "is_leaf": True},
        {"id": 4, "feature": None, "threshold": None, "left": None, "right": None,
         "value": leaves[1], "is_leaf": True},
        {"id": 5, "feature": None, "threshold": None, "left": None, "right": None,
         "value": leaves[2], "is_leaf": True},
        {"id": 6, "feature": None, "threshold": None, "left": None, "right": None,
         "value": leaves[3], "is_leaf": True},
    ]
    return Tree.from_nodes(tree_id, class_id, nodes)


def small_regression_ensemble():
    return Ensemble("regression", 1, 2, "sum", [balanced_two_feature_tree()])


@pytest.fixture
def fig_tree_model():
    return small_regression_ensemble()


@pytest.fixture
def fig_tree_quantized(fig_tree_model):
    return quantize_ensemble(fig_tree_model, build_quant_grid(fig_tree_model, 8))


@pytest.fixture
def fig_tree_json(fig_tree_model):
    return json.dumps(fig_tree_model.to_dict())


def stump_ensemble(threshold=0.5, left=1.0, right=-1.0, n_features=1):
    nodes = [
        {"id": 0, "feature": 0, "threshold": threshold, "left": 1, "right": 2,
         "value": None, "is_leaf": False},
        {"id": 1, "feature": None, "threshold": None, "left": None, "right": None,
         "value": left, "is_leaf": True},
        {"id": 2, "feature": None, "threshold": None, "left": None, "right": None,
         "value": right, "is_leaf": True},
    ]
    return Ensemble("regression", 1, n_features, "sum",
                    [Tree.from_nodes(0, 0, nodes)])


def naive_traverse(tree_nodes_by_id, root_id, x):
    """Independent reference traversal over interchange node dicts."""
    node = tree_nodes_by_id[root_id]
    while not node["is_leaf"]:
        if x[node["feature"]] < node["threshold"]:
            node = tree_nodes_by_id[node["left"]]
        else:
            node = tree_nodes_by_id[node["right"]]
    return node["value"]


def naive_predict(model_dict, x, decision_threshold=0.0):
    """Second, independently written ensemble inference over interchange JSON."""
    n_classes = model_dict["n_classes"]
    logits = [0.0] * n_classes
    for tree in model_dict["trees"]:
        by_id = {n["id"]: n for n in tree["nodes"]}
        referenced = {n[s] for n in tree["nodes"] for s in ("left", "right")
                      if not n["is_leaf"]}
        root_id = next(n["id"] for n in tree["nodes"] if n["id"] not in referenced)
        leaf = naive_traverse(by_id, root_id, x)
        if model_dict["reduction"] == "majority":
            logits[int(round(leaf))] += 1.0
        else:
            logits[tree["class_id"]] += leaf
    if model_dict["task"] == "regression":
        return logits, logits[0]
    if model_dict["task"] == "binary_classification":
        return logits, int(logits[0] >= decision_threshold)
    best = 0
    for c in range(1, n_classes):
        if logits[c] > logits[best]:
            best = c
    return logits, best
