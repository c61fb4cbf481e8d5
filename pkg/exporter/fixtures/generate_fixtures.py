"""Generate committed fixtures for the exporter tests.

Trains small scikit-learn models on synthetic data and writes, per fixture:
the native dump (sklearn tree-attribute JSON, an XGBoost-style JSON dump, or
a LightGBM-style text dump), 200 probe rows, and the native predictions on
those probes.  Re-encoded dumps are verified here against the trained model
under the target format's own traversal semantics before being written.

Run from this directory:  python3 generate_fixtures.py
"""

import json
import math
import os

import numpy as np
from sklearn.ensemble import (GradientBoostingClassifier, GradientBoostingRegressor,
                              RandomForestClassifier)

OUT = os.path.dirname(os.path.abspath(__file__))
RNG = np.random.default_rng(20240817)


def synth_data(n_rows, n_features, task, n_classes=2, seed=1):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n_rows, n_features))
    cross = X[:, 2] * X[:, 0] if n_features > 2 else X[:, 0] * X[:, 1]
    score = X[:, 0] * 1.5 - X[:, 1] + 0.5 * cross + rng.normal(0, 0.3, n_rows)
    if task == "regression":
        return X, score
    if n_classes == 2:
        return X, (score > 0).astype(int)
    edges = np.quantile(score, np.linspace(0, 1, n_classes + 1)[1:-1])
    return X, np.digitize(score, edges)


def probes_for(n_features, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-2.2, 2.2, size=(200, n_features))


def write_csv(path, X):
    with open(path, "w") as fh:
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def sklearn_tree_dict(tree):
    return {
        "children_left": tree.children_left.tolist(),
        "children_right": tree.children_right.tolist(),
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "value": tree.value.tolist(),
    }


def dump_sklearn_forest(clf, task, path):
    doc = {
        "framework": "sklearn",
        "model_type": type(clf).__name__,
        "task": task,
        "n_features": int(clf.n_features_in_),
        "n_classes": int(getattr(clf, "n_classes_", 1)),
        "estimators": [sklearn_tree_dict(e.tree_) for e in clf.estimators_],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return doc


def dump_sklearn_gbr(reg, path):
    doc = {
        "framework": "sklearn",
        "model_type": "GradientBoostingRegressor",
        "task": "regression",
        "n_features": int(reg.n_features_in_),
        "n_classes": 1,
        "learning_rate": float(reg.learning_rate),
        "init_prediction": float(reg.init_.constant_[0][0]),
        "estimators": [sklearn_tree_dict(e[0].tree_) for e in reg.estimators_],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return doc


def next_up(x):
    return float(np.nextafter(x, np.inf))


def sk_tree_to_xgb_node(tree, node, scale, offset):
    """Re-encode one sklearn node as an XGBoost JSON-dump node (x < cond -> yes)."""
    if tree.children_left[node] < 0:
        return {"nodeid": int(node),
                "leaf": float(tree.value[node][0][0] * scale + offset)}
    return {
        "nodeid": int(node),
        "split": f"f{int(tree.feature[node])}",
        "split_condition": next_up(tree.threshold[node]),
        "yes": int(tree.children_left[node]),
        "no": int(tree.children_right[node]),
        "missing": int(tree.children_left[node]),
        "children": [sk_tree_to_xgb_node(tree, int(tree.children_left[node]), scale, offset),
                     sk_tree_to_xgb_node(tree, int(tree.children_right[node]), scale, offset)],
    }


def eval_xgb_node(node, x):
    while "leaf" not in node:
        f = int(node["split"][1:])
        target = node["yes"] if x[f] < node["split_condition"] else node["no"]
        node = next(c for c in node["children"] if c["nodeid"] == target)
    return node["leaf"]


def eval_xgb_dump(trees, x, n_classes):
    if n_classes <= 2:
        return sum(eval_xgb_node(t, x) for t in trees)
    margins = [0.0] * n_classes
    for i, t in enumerate(trees):
        margins[i % n_classes] += eval_xgb_node(t, x)
    return margins


def make_xgb_binary():
    X, y = synth_data(400, 8, "binary", seed=11)
    clf = GradientBoostingClassifier(n_estimators=30, max_depth=3,
                                     learning_rate=0.1, random_state=0)
    clf.fit(X, y)
    lr = clf.learning_rate
    init = float(clf.init_.class_prior_[1])
    init_margin = math.log(init / (1.0 - init))
    trees = []
    for i, est in enumerate(clf.estimators_):
        offset = init_margin if i == 0 else 0.0  # fold the prior into round 0
        trees.append(sk_tree_to_xgb_node(est[0].tree_, 0, lr, 0.0))
        if i == 0:
            # Offset every leaf of the first tree by the init margin.
            def add_offset(node):
                if "leaf" in node:
                    node["leaf"] += init_margin
                else:
                    for c in node["children"]:
                        add_offset(c)
            add_offset(trees[0])

    P = probes_for(8, seed=21)
    native = clf.predict(P)
    dump_margin = np.array([eval_xgb_dump(trees, x, 2) for x in P])
    assert ((dump_margin >= 0).astype(int) == native).all(), "re-encoding broke decisions"

    with open(os.path.join(OUT, "xgb_binary.dump.json"), "w") as fh:
        json.dump(trees, fh)
    write_csv(os.path.join(OUT, "xgb_binary.probes.csv"), P)
    meta = {"framework": "xgboost", "task": "binary_classification", "n_classes": 2,
            "n_features": 8, "native_predictions": native.tolist(),
            "native_margins": dump_margin.tolist()}
    with open(os.path.join(OUT, "xgb_binary.meta.json"), "w") as fh:
        json.dump(meta, fh)
    print("xgb_binary: 30 trees, decision parity verified")


def make_xgb_multiclass():
    X, y = synth_data(450, 6, "multiclass", n_classes=3, seed=13)
    clf = GradientBoostingClassifier(n_estimators=30, max_depth=3,
                                     learning_rate=0.1, random_state=0)
    clf.fit(X, y)
    lr = clf.learning_rate
    priors = clf.init_.class_prior_
    init_margins = [float(np.log(p)) for p in priors]  # argmax-equivalent init
    trees = []
    for r in range(clf.n_estimators_):
        for k in range(3):
            node = sk_tree_to_xgb_node(clf.estimators_[r, k].tree_, 0, lr, 0.0)
            if r == 0:
                def add_offset(n, off=init_margins[k]):
                    if "leaf" in n:
                        n["leaf"] += off
                    else:
                        for c in n["children"]:
                            add_offset(c, off)
                add_offset(node)
            trees.append(node)

    P = probes_for(6, seed=23)
    native = clf.predict(P)
    dump_dec = np.array([int(np.argmax(eval_xgb_dump(trees, x, 3))) for x in P])
    assert (dump_dec == native).all(), "re-encoding broke multiclass decisions"

    with open(os.path.join(OUT, "xgb_multiclass.dump.json"), "w") as fh:
        json.dump(trees, fh)
    write_csv(os.path.join(OUT, "xgb_multiclass.probes.csv"), P)
    meta = {"framework": "xgboost", "task": "multiclass_classification",
            "n_classes": 3, "n_features": 6, "rounds": 30,
            "native_predictions": native.tolist()}
    with open(os.path.join(OUT, "xgb_multiclass.meta.json"), "w") as fh:
        json.dump(meta, fh)
    print("xgb_multiclass: 90 trees (30 rounds x 3 classes), parity verified")


def sk_tree_to_lgb_block(tree, index, scale, offset):
    """Re-encode one sklearn tree as a LightGBM text block (x <= thr -> left)."""
    internal = [i for i in range(tree.node_count) if tree.children_left[i] >= 0]
    leaves = [i for i in range(tree.node_count) if tree.children_left[i] < 0]
    internal_index = {n: i for i, n in enumerate(internal)}
    leaf_index = {n: i for i, n in enumerate(leaves)}

    def child_ref(node):
        if tree.children_left[node] < 0:
            return -(leaf_index[node] + 1)
        return internal_index[node]

    split_feature = [int(tree.feature[n]) for n in internal]
    threshold = [float(tree.threshold[n]) for n in internal]
    left_child = [child_ref(int(tree.children_left[n])) for n in internal]
    right_child = [child_ref(int(tree.children_right[n])) for n in internal]
    leaf_value = [float(tree.value[n][0][0] * scale + offset) for n in leaves]

    lines = [f"Tree={index}",
             f"num_leaves={len(leaves)}",
             "split_feature=" + " ".join(map(str, split_feature)),
             "threshold=" + " ".join(repr(t) for t in threshold),
             "decision_type=" + " ".join(["2"] * len(internal)),
             "left_child=" + " ".join(map(str, left_child)),
             "right_child=" + " ".join(map(str, right_child)),
             "leaf_value=" + " ".join(repr(v) for v in leaf_value),
             ""]
    return "\n".join(lines)


def eval_lgb_block(block, x):
    fields = {}
    for line in block.strip().splitlines():
        key, _, rhs = line.partition("=")
        fields[key] = rhs
    n_leaves = int(fields["num_leaves"])
    if n_leaves == 1:
        return float(fields["leaf_value"].split()[0])
    feat = [int(v) for v in fields["split_feature"].split()]
    thr = [float(v) for v in fields["threshold"].split()]
    left = [int(v) for v in fields["left_child"].split()]
    right = [int(v) for v in fields["right_child"].split()]
    leaf = [float(v) for v in fields["leaf_value"].split()]
    node = 0
    while True:
        nxt = left[node] if x[feat[node]] <= thr[node] else right[node]
        if nxt < 0:
            return leaf[-nxt - 1]
        node = nxt


def make_lgb_regression():
    X, y = synth_data(500, 7, "regression", seed=17)
    reg = GradientBoostingRegressor(n_estimators=40, max_depth=3,
                                    learning_rate=0.1, random_state=0)
    reg.fit(X, y)
    init = float(reg.init_.constant_[0][0])
    blocks = []
    for i, est in enumerate(reg.estimators_):
        offset = init if i == 0 else 0.0
        blocks.append(sk_tree_to_lgb_block(est[0].tree_, i, reg.learning_rate, offset))
    header = "\n".join([
        "tree", "version=v3", "num_class=1", "num_tree_per_iteration=1",
        "max_feature_idx=6", "objective=regression", "feature_names=" +
        " ".join(f"f{i}" for i in range(7)), ""])
    text = header + "\n" + "\n".join(blocks) + "\nend of trees\n"

    P = probes_for(7, seed=27)
    native = reg.predict(P)
    dump_pred = np.array([sum(eval_lgb_block(b, x) for b in blocks) for x in P])
    rel = np.abs(dump_pred - native) / np.maximum(np.abs(native), 1e-12)
    assert rel.max() < 1e-9, f"re-encoding error {rel.max()}"

    with open(os.path.join(OUT, "lgb_regression.model.txt"), "w") as fh:
        fh.write(text)
    write_csv(os.path.join(OUT, "lgb_regression.probes.csv"), P)
    meta = {"framework": "lightgbm", "task": "regression", "n_classes": 1,
            "n_features": 7, "native_predictions": native.tolist()}
    with open(os.path.join(OUT, "lgb_regression.meta.json"), "w") as fh:
        json.dump(meta, fh)
    print(f"lgb_regression: 40 trees, max re-encoding error {rel.max():.2e}")


def make_sklearn_rf_binary():
    X, y = synth_data(400, 8, "binary", seed=19)
    clf = RandomForestClassifier(n_estimators=20, max_depth=4, random_state=0)
    clf.fit(X, y)
    dump_sklearn_forest(clf, "binary_classification",
                        os.path.join(OUT, "sk_rf_binary.dump.json"))
    P = probes_for(8, seed=29)
    write_csv(os.path.join(OUT, "sk_rf_binary.probes.csv"), P)
    meta = {"framework": "sklearn", "task": "binary_classification", "n_classes": 2,
            "n_features": 8, "native_predictions": clf.predict(P).tolist()}
    with open(os.path.join(OUT, "sk_rf_binary.meta.json"), "w") as fh:
        json.dump(meta, fh)
    print("sk_rf_binary: 20 trees")


def make_sklearn_rf_multiclass():
    X, y = synth_data(450, 6, "multiclass", n_classes=3, seed=23)
    clf = RandomForestClassifier(n_estimators=15, max_depth=4, random_state=0)
    clf.fit(X, y)
    dump_sklearn_forest(clf, "multiclass_classification",
                        os.path.join(OUT, "sk_rf_multiclass.dump.json"))
    P = probes_for(6, seed=31)
    write_csv(os.path.join(OUT, "sk_rf_multiclass.probes.csv"), P)
    meta = {"framework": "sklearn", "task": "multiclass_classification",
            "n_classes": 3, "n_features": 6,
            "native_predictions": clf.predict(P).tolist()}
    with open(os.path.join(OUT, "sk_rf_multiclass.meta.json"), "w") as fh:
        json.dump(meta, fh)
    print("sk_rf_multiclass: 15 trees x 3 classes")


def make_sklearn_gbr():
    X, y = synth_data(500, 5, "regression", seed=29)
    reg = GradientBoostingRegressor(n_estimators=25, max_depth=3, random_state=0)
    reg.fit(X, y)
    dump_sklearn_gbr(reg, os.path.join(OUT, "sk_gbr.dump.json"))
    P = probes_for(5, seed=37)
    write_csv(os.path.join(OUT, "sk_gbr.probes.csv"), P)
    meta = {"framework": "sklearn", "task": "regression", "n_classes": 1,
            "n_features": 5, "native_predictions": reg.predict(P).tolist()}
    with open(os.path.join(OUT, "sk_gbr.meta.json"), "w") as fh:
        json.dump(meta, fh)
    print("sk_gbr: 25 trees + init")


def make_stump():
    X, y = synth_data(100, 2, "regression", seed=31)
    reg = GradientBoostingRegressor(n_estimators=1, max_depth=1, random_state=0)
    reg.fit(X, y)
    dump_sklearn_gbr(reg, os.path.join(OUT, "sk_stump.dump.json"))
    P = probes_for(2, seed=41)
    write_csv(os.path.join(OUT, "sk_stump.probes.csv"), P)
    meta = {"framework": "sklearn", "task": "regression", "n_classes": 1,
            "n_features": 2, "native_predictions": reg.predict(P).tolist()}
    with open(os.path.join(OUT, "sk_stump.meta.json"), "w") as fh:
        json.dump(meta, fh)
    print("sk_stump: depth-1 single tree")


if __name__ == "__main__":
    make_xgb_binary()
    make_xgb_multiclass()
    make_lgb_regression()
    make_sklearn_rf_binary()
    make_sklearn_rf_multiclass()
    make_sklearn_gbr()
    make_stump()
    print("fixtures written to", OUT)
