import json

import numpy as np
import pytest

from xtime import (Ensemble, QuantizationGrid, build_quant_grid, oracle_predict,
                   oracle_predict_batch, parse_ensemble, quantize_ensemble,
                   quantize_input)
from xtime.errors import DimensionError, RangeError, SchemaError, StructureError
from xtime.synth import make_random_ensemble, make_samples

from conftest import naive_predict, small_regression_ensemble, stump_ensemble


def minimal_doc(**overrides):
    doc = {
        "format_version": 1,
        "task": "regression",
        "n_classes": 1,
        "n_features": 1,
        "reduction": "sum",
        "trees": [{
            "tree_id": 0, "class_id": 0,
            "nodes": [
                {"id": 0, "feature": 0, "threshold": 0.5, "left": 1, "right": 2,
                 "value": None, "is_leaf": False},
                {"id": 1, "feature": None, "threshold": None, "left": None,
                 "right": None, "value": 1.0, "is_leaf": True},
                {"id": 2, "feature": None, "threshold": None, "left": None,
                 "right": None, "value": -1.0, "is_leaf": True},
            ],
        }],
    }
    doc.update(overrides)
    return doc


class TestParse:
    def test_smallest_valid_tree(self):
        model = parse_ensemble(json.dumps(minimal_doc()))
        assert model.n_trees == 1
        tree = model.trees[0]
        assert tree.n_leaves == 2
        assert tree.depth == 1

    def test_four_leaf_depth_two_tree(self, fig_tree_json):
        model = parse_ensemble(fig_tree_json)
        tree = model.trees[0]
        assert tree.n_leaves == 4
        assert tree.depth == 2

    def test_missing_child_is_structure_error(self):
        doc = minimal_doc()
        doc["trees"][0]["nodes"][0]["right"] = 9
        with pytest.raises(StructureError):
            parse_ensemble(json.dumps(doc))

    def test_accepts_bytes(self):
        parse_ensemble(json.dumps(minimal_doc()).encode())

    def test_unknown_top_level_field_rejected(self):
        with pytest.raises(SchemaError):
            parse_ensemble(json.dumps(minimal_doc(extra_field=1)))

    def test_unknown_node_field_rejected(self):
        doc = minimal_doc()
        doc["trees"][0]["nodes"][0]["gain"] = 0.3
        with pytest.raises(SchemaError):
            parse_ensemble(json.dumps(doc))

    def test_missing_field_rejected(self):
        doc = minimal_doc()
        del doc["reduction"]
        with pytest.raises(SchemaError):
            parse_ensemble(json.dumps(doc))

    def test_bad_format_version(self):
        with pytest.raises(SchemaError):
            parse_ensemble(json.dumps(minimal_doc(format_version=2)))

    def test_cycle_detected(self):
        doc = minimal_doc()
        doc["trees"][0]["nodes"][1] = {"id": 1, "feature": 0, "threshold": 0.2,
                                       "left": 0, "right": 2, "value": None,
                                       "is_leaf": False}
        with pytest.raises(StructureError):
            parse_ensemble(json.dumps(doc))

    def test_feature_out_of_range(self):
        doc = minimal_doc()
        doc["trees"][0]["nodes"][0]["feature"] = 5
        with pytest.raises(RangeError):
            parse_ensemble(json.dumps(doc))

    def test_class_out_of_range(self):
        doc = minimal_doc()
        doc["trees"][0]["class_id"] = 1
        with pytest.raises(RangeError):
            parse_ensemble(json.dumps(doc))

    def test_round_trip_is_identical(self, fig_tree_model):
        doc = fig_tree_model.to_dict()
        again = parse_ensemble(json.dumps(doc)).to_dict()
        assert doc == again


class TestQuantGrid:
    def test_dedupe_and_sort(self):
        model = small_regression_ensemble()
        tree = model.trees[0]
        # Feature 0 thresholds {0.5}; fabricate duplicates via a second tree.
        from conftest import balanced_two_feature_tree
        model = Ensemble("regression", 1, 2, "sum",
                         [tree, balanced_two_feature_tree(tree_id=1, t_root=0.2,
                                                          t_left=0.25, t_right=0.5)])
        grid = build_quant_grid(model, 8)
        assert grid.cuts[0].tolist() == [0.2, 0.5]

    def test_unsplit_feature_gets_single_bin(self):
        model = stump_ensemble(n_features=3)
        grid = build_quant_grid(model, 8)
        assert len(grid.cuts[1]) == 0
        assert len(grid.cuts[2]) == 0
        assert grid.quantize(np.array([0.9, 123.0, -5.0])).tolist()[1:] == [0, 0]

    def test_quantile_fallback_matches_reference(self):
        # 300 distinct thresholds on one feature forces the quantile path.
        rng = np.random.default_rng(0)
        thresholds = np.unique(rng.uniform(0, 1, size=400))[:300]
        trees = []
        from xtime import Tree
        for i, t in enumerate(thresholds):
            nodes = [
                {"id": 0, "feature": 0, "threshold": float(t), "left": 1, "right": 2,
                 "value": None, "is_leaf": False},
                {"id": 1, "feature": None, "threshold": None, "left": None,
                 "right": None, "value": 1.0, "is_leaf": True},
                {"id": 2, "feature": None, "threshold": None, "left": None,
                 "right": None, "value": 0.0, "is_leaf": True},
            ]
            trees.append(Tree.from_nodes(i, 0, nodes))
        model = Ensemble("regression", 1, 1, "sum", trees)
        grid = build_quant_grid(model, 8)
        cuts = grid.cuts[0]
        assert len(cuts) == 255
        assert (np.diff(cuts) > 0).all()
        expected = np.quantile(np.sort(thresholds),
                               np.arange(1, 256) / 256.0, method="linear")
        np.testing.assert_allclose(cuts, np.unique(expected), rtol=1e-12)

    def test_too_many_cuts_rejected(self):
        with pytest.raises(RangeError):
            QuantizationGrid(4, [np.linspace(0, 1, 16)])  # 16 > 2^4 - 1

    def test_bad_n_bits(self):
        with pytest.raises(RangeError):
            build_quant_grid(stump_ensemble(), 6)


class TestQuantizeInput:
    def test_counts_cuts_at_or_below(self):
        grid = QuantizationGrid(8, [np.array([0.2, 0.5])])
        assert quantize_input(np.array([0.3]), grid).tolist() == [1]

    def test_boundary_cut_counts(self):
        grid = QuantizationGrid(8, [np.array([0.2, 0.5])])
        assert quantize_input(np.array([0.2]), grid).tolist() == [1]
        assert quantize_input(np.array([0.5]), grid).tolist() == [2]

    def test_dimension_mismatch(self):
        grid = QuantizationGrid(8, [np.array([0.2])])
        with pytest.raises(DimensionError):
            quantize_input(np.array([0.1, 0.2]), grid)

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(42)
        cuts = np.unique(rng.uniform(0, 1, size=60))
        grid = QuantizationGrid(8, [cuts])
        xs = rng.uniform(-0.2, 1.2, size=1000)
        for x in xs:
            scan = sum(1 for c in cuts if c <= x)
            assert grid.quantize(np.array([x]))[0] == scan

    def test_monotone(self):
        rng = np.random.default_rng(7)
        cuts = np.unique(rng.uniform(0, 1, size=40))
        grid = QuantizationGrid(8, [cuts])
        xs = np.sort(rng.uniform(0, 1, size=200))
        codes = grid.quantize_batch(xs[:, None])[:, 0]
        assert (np.diff(codes) >= 0).all()


class TestOracle:
    def test_single_tree_leaf_regions(self, fig_tree_model):
        assert oracle_predict(fig_tree_model, np.array([0.2, 0.1])).decision == 0.1
        assert oracle_predict(fig_tree_model, np.array([0.2, 0.5])).decision == 0.2
        assert oracle_predict(fig_tree_model, np.array([0.8, 0.2])).decision == 0.3
        assert oracle_predict(fig_tree_model, np.array([0.8, 0.9])).decision == 0.4

    def test_sum_reduction(self):
        from conftest import balanced_two_feature_tree
        model = Ensemble("regression", 1, 2, "sum", [
            balanced_two_feature_tree(0, leaves=(0.7, 0.7, 0.7, 0.7)),
            balanced_two_feature_tree(1, leaves=(-0.2, -0.2, -0.2, -0.2)),
        ])
        pred = oracle_predict(model, np.array([0.5, 0.5]))
        assert pred.decision == pytest.approx(0.5)

    def test_dimension_error(self, fig_tree_model):
        with pytest.raises(DimensionError):
            oracle_predict(fig_tree_model, np.array([0.1]))

    def test_against_independent_traversal(self):
        model = make_random_ensemble("binary_classification", n_trees=10, depth=4,
                                     n_features=5, seed=21)
        doc = model.to_dict()
        X = make_samples(200, 5, seed=3)
        _, decisions = oracle_predict_batch(model, X)
        for i, x in enumerate(X):
            _, naive = naive_predict(doc, x)
            assert decisions[i] == naive

    def test_multiclass_against_independent_traversal(self):
        model = make_random_ensemble("multiclass_classification", n_trees=12, depth=3,
                                     n_features=4, n_classes=4, seed=5)
        doc = model.to_dict()
        X = make_samples(150, 4, seed=8)
        _, decisions = oracle_predict_batch(model, X)
        for i, x in enumerate(X):
            _, naive = naive_predict(doc, x)
            assert decisions[i] == naive

    def test_majority_votes(self):
        model = make_random_ensemble("multiclass_classification", n_trees=9, depth=3,
                                     n_features=4, n_classes=3, seed=6,
                                     reduction="majority")
        X = make_samples(50, 4, seed=1)
        logits, decisions = oracle_predict_batch(model, X)
        assert (logits.sum(axis=1) == 9).all()  # every tree votes once
        assert (logits >= 0).all()

    def test_argmax_tie_break_is_lowest_index(self):
        model = make_random_ensemble("multiclass_classification", n_trees=8, depth=3,
                                     n_features=4, n_classes=4, seed=13)
        X = make_samples(100, 4, seed=2)
        logits, decisions = oracle_predict_batch(model, X)
        for row, dec in zip(logits, decisions):
            best = np.flatnonzero(row == row.max())
            assert dec == best[0]

    def test_tree_order_never_changes_decision(self):
        model = make_random_ensemble("multiclass_classification", n_trees=10, depth=3,
                                     n_features=5, n_classes=3, seed=17)
        shuffled = Ensemble(model.task, model.n_classes, model.n_features,
                            model.reduction, list(reversed(model.trees)))
        X = make_samples(300, 5, seed=4)
        _, d1 = oracle_predict_batch(model, X)
        _, d2 = oracle_predict_batch(shuffled, X)
        assert (d1 == d2).all()

    def test_traversal_terminates_within_depth(self):
        model = make_random_ensemble("regression", n_trees=3, depth=6, n_features=8,
                                     seed=30)
        for tree in model.trees:
            x = make_samples(1, 8, seed=9)[0]
            node, steps = tree.root, 0
            while not tree.is_leaf[node]:
                f = tree.feature[node]
                node = tree.left[node] if x[f] < tree.threshold[node] else tree.right[node]
                steps += 1
                assert steps <= tree.depth


class TestQuantizationConsistency:
    @pytest.mark.parametrize("task,n_classes", [
        ("regression", 1), ("binary_classification", 1),
        ("multiclass_classification", 4)])
    def test_decisions_preserved_when_grid_exact(self, task, n_classes):
        model = make_random_ensemble(task, n_trees=12, depth=4, n_features=6,
                                     n_classes=n_classes, seed=23)
        grid = build_quant_grid(model, 8)
        assert all(len(np.unique(c)) == len(c) for c in grid.cuts)
        qmodel = quantize_ensemble(model, grid)
        X = make_samples(500, 6, seed=11)
        codes = grid.quantize_batch(X)
        _, raw = oracle_predict_batch(model, X)
        _, quant = oracle_predict_batch(qmodel, codes)
        assert (raw == quant).all()

    def test_randomized_counterexample_search(self):
        # Adversarial inputs at and around every cut point.
        model = make_random_ensemble("binary_classification", n_trees=6, depth=5,
                                     n_features=3, seed=29)
        grid = build_quant_grid(model, 8)
        qmodel = quantize_ensemble(model, grid)
        probes = []
        for f, cuts in enumerate(grid.cuts):
            for c in cuts:
                for eps in (-1e-9, 0.0, 1e-9):
                    x = np.full(3, 0.5)
                    x[f] = c + eps
                    probes.append(x)
        X = np.asarray(probes)
        _, raw = oracle_predict_batch(model, X)
        _, quant = oracle_predict_batch(qmodel, grid.quantize_batch(X))
        assert (raw == quant).all()

    def test_quantized_threshold_codes_in_range(self):
        model = make_random_ensemble("regression", n_trees=6, depth=5, n_features=4,
                                     seed=31)
        qmodel = quantize_ensemble(model, build_quant_grid(model, 8))
        for tree in qmodel.trees:
            codes = tree.threshold[~tree.is_leaf]
            assert codes.min() >= 0 and codes.max() <= 256
