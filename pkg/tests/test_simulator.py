import copy
import json

import numpy as np
import pytest

from xtime import (ChipConfig, CostModel, SweepSpec, analytic_throughput,
                   build_quant_grid, compile_model, defect_experiment, estimate_cost,
                   oracle_predict_batch, quantize_ensemble, run_inference, sweep)
from xtime.errors import ConfigError, RangeError
from xtime.simulator import _functional_predict
from xtime.synth import make_random_ensemble, make_samples


def compiled(task="binary_classification", n_trees=8, depth=4, n_feat=12, n_classes=1,
             seed=60, batch_factor=1, cap=None, reduction="sum", chip=None):
    model = make_random_ensemble(task, n_trees, depth, n_feat, n_classes, seed=seed,
                                 reduction=reduction)
    qmodel = quantize_ensemble(model, build_quant_grid(model, 8))
    table, plan, program = compile_model(qmodel, chip, batch_factor,
                                         trees_per_core_cap=cap)
    return qmodel, program


def simulate(qmodel, program, n_samples=200, seed=1):
    X = make_samples(n_samples, qmodel.n_features, seed=seed)
    codes = qmodel.grid.quantize_batch(X)
    predictions, metrics = run_inference(program, codes)
    return codes, predictions, metrics


class TestRunInference:
    def test_four_leaf_regions(self, fig_tree_quantized):
        qmodel = fig_tree_quantized
        table, plan, program = compile_model(qmodel)
        codes = qmodel.grid.quantize_batch(np.array(
            [[0.2, 0.1], [0.2, 0.5], [0.8, 0.2], [0.8, 0.9]]))
        predictions, metrics = run_inference(program, codes)
        got = [round(p.decision, 6) for p in predictions]
        assert got == [0.1, 0.2, 0.3, 0.4]

    def test_spec_argument_order_also_accepted(self, fig_tree_quantized):
        qmodel = fig_tree_quantized
        table, plan, program = compile_model(qmodel)
        codes = qmodel.grid.quantize_batch(np.array([[0.2, 0.1]]))
        p1, _ = run_inference(plan, program, codes)
        p2, _ = run_inference(program, codes)
        assert p1[0].decision == p2[0].decision

    def test_binary_model_matches_oracle_exactly(self):
        qmodel, program = compiled(n_trees=64, depth=4, n_feat=12, seed=61)
        codes, predictions, _ = simulate(qmodel, program, n_samples=1000)
        _, oracle = oracle_predict_batch(qmodel, codes)
        sim = np.array([p.decision for p in predictions])
        assert (sim == oracle).all()

    def test_deterministic_across_worker_counts(self):
        qmodel, program = compiled(n_trees=12, depth=3, n_feat=8, seed=62)
        X = make_samples(300, 8, seed=3)
        codes = qmodel.grid.quantize_batch(X)
        p1, m1 = run_inference(program, codes, workers=1)
        p2, m2 = run_inference(program, codes, workers=8)
        assert [p.decision for p in p1] == [p.decision for p in p2]
        assert m1.to_dict() == m2.to_dict()

    def test_latency_breakdown_telescopes(self):
        qmodel, program = compiled(n_trees=8, depth=4, n_feat=16, seed=63)
        _, _, metrics = simulate(qmodel, program)
        b = metrics.latency_breakdown
        total = sum(b[k]["mean"] for k in ("streaming", "delivery", "core", "up", "cp"))
        assert total == pytest.approx(metrics.latency_cycles_mean)
        assert b["core"]["max"] == 12

    def test_network_latency_lower_bound(self):
        qmodel, program = compiled(n_trees=4, depth=3, n_feat=8, seed=64)
        _, _, metrics = simulate(qmodel, program)
        depth = program.topology.depth
        network = (metrics.latency_breakdown["delivery"]["mean"]
                   + metrics.latency_breakdown["up"]["mean"])
        assert network >= 2 * depth

    def test_flow_conservation(self):
        qmodel, program = compiled(task="multiclass_classification", n_trees=12,
                                   depth=3, n_feat=8, n_classes=3, seed=65)
        _, _, metrics = simulate(qmodel, program)
        assert metrics.flow["conserved"]
        assert metrics.flow["logits_emitted"] > 0

    def test_multiclass_batched_equals_oracle(self):
        qmodel, program = compiled(task="multiclass_classification", n_trees=24,
                                   depth=3, n_feat=10, n_classes=4, seed=66,
                                   batch_factor=2)
        codes, predictions, metrics = simulate(qmodel, program, n_samples=401)
        _, oracle = oracle_predict_batch(qmodel, codes)
        sim = np.array([p.decision for p in predictions])
        assert (sim == oracle).all()

    def test_majority_model_equals_oracle(self):
        qmodel, program = compiled(task="multiclass_classification", n_trees=9,
                                   depth=3, n_feat=8, n_classes=3, seed=67,
                                   reduction="majority")
        codes, predictions, _ = simulate(qmodel, program, n_samples=150)
        _, oracle = oracle_predict_batch(qmodel, codes)
        sim = np.array([p.decision for p in predictions])
        assert (sim == oracle).all()

    def test_four_bit_direct_mode_matches_oracle(self):
        # Without precision doubling (4-bit codes on 4-bit cells) the single
        # search cycle must still agree with the oracle exactly.
        chip = ChipConfig(n_bits=4)
        model = make_random_ensemble("binary_classification", 8, 3, 6, seed=73)
        from xtime import build_quant_grid, quantize_ensemble, compile_model
        qmodel = quantize_ensemble(model, build_quant_grid(model, 4))
        _, plan, program = compile_model(qmodel, chip)
        codes = qmodel.grid.quantize_batch(make_samples(300, 6, seed=11))
        assert int(codes.max()) < 16
        predictions, _ = run_inference(program, codes)
        _, oracle = oracle_predict_batch(qmodel, codes)
        sim = np.array([p.decision for p in predictions])
        assert (sim == oracle).all()

    def test_trace_output(self, tmp_path, fig_tree_quantized):
        qmodel = fig_tree_quantized
        _, _, program = compile_model(qmodel)
        codes = qmodel.grid.quantize_batch(np.array([[0.2, 0.1]]))
        trace = tmp_path / "trace.jsonl"
        run_inference(program, codes, trace_path=str(trace))
        rows = [json.loads(line) for line in trace.read_text().splitlines()]
        assert any(r["event"] == "decision" for r in rows)
        assert any(r["event"] == "query_ready" for r in rows)

    def test_reduction_placement_invariance(self):
        # Forcing every router to forward (global reduction at the CP) must
        # not change any prediction relative to the purity-driven program.
        qmodel, program = compiled(n_trees=16, depth=3, n_feat=8, seed=68)
        codes, predictions, _ = simulate(qmodel, program, n_samples=200)
        flat = copy.deepcopy(program)
        flat.router_bits = {rid: 0 for rid in flat.router_bits}
        p2, _ = run_inference(flat, codes)
        assert [p.decision for p in predictions] == [p.decision for p in p2]
        l1 = np.stack([p.logits for p in predictions])
        l2 = np.stack([p.logits for p in p2])
        np.testing.assert_array_equal(l1, l2)

    def test_mixed_legal_config_assignments(self):
        # Accumulate only at the leaf routers, forward above: still exact.
        qmodel, program = compiled(n_trees=32, depth=3, n_feat=8, seed=69)
        codes, predictions, _ = simulate(qmodel, program, n_samples=100)
        topo = program.topology
        mixed = copy.deepcopy(program)
        leaf_level = topo.depth - 1
        mixed.router_bits = {
            rid: (bit if topo.router_level(rid)[0] == leaf_level else 0)
            for rid, bit in mixed.router_bits.items()}
        p2, _ = run_inference(mixed, codes)
        assert [p.decision for p in predictions] == [p.decision for p in p2]


class TestAnalytic:
    def test_core_rate_up_to_four_trees(self):
        table = analytic_throughput(ChipConfig(), n_trees_core=1)
        assert table["core_samples_per_s"] == 250e6

    def test_core_rate_five_trees(self):
        table = analytic_throughput(ChipConfig(), n_trees_core=5)
        assert table["core_samples_per_s"] == 200e6

    def test_multiclass_ceiling(self):
        table = analytic_throughput(ChipConfig(), n_trees_core=1, n_classes=7,
                                    mode="multiclass")
        assert table["chip_samples_per_s"] <= 1e9 / 7
        assert table["multiclass_ceiling_sps"] == 1e9 / 7

    def test_booster_depth_limit(self):
        table = analytic_throughput(ChipConfig(), depth=8)
        assert table["booster_samples_per_s"] == 31.25e6

    def test_finite_sample_form(self):
        table = analytic_throughput(ChipConfig(), n_trees_core=1, n_samples=1)
        assert table["core_samples_per_s"] == 1e9 / 12


class TestSweep:
    def test_throughput_constant_in_tree_count(self):
        spec = SweepSpec(param="n_trees", values=[16, 64, 256], depth=2, n_feat=16,
                         n_samples=400)
        rows = sweep(spec)
        assert all(r["feasible"] for r in rows)
        rates = [r["throughput_sps"] for r in rows]
        assert max(rates) / min(rates) < 1.02

    def test_infeasible_point_marked(self):
        spec = SweepSpec(param="depth", values=[2, 9], n_trees=4, n_feat=8,
                         n_samples=50)
        rows = sweep(spec)
        assert rows[0]["feasible"]
        assert not rows[1]["feasible"]
        assert "too tall" in rows[1]["error"]

    def test_feature_count_dependence(self):
        spec = SweepSpec(param="n_feat", values=[16, 64, 128], n_trees=8, depth=3,
                         n_samples=400)
        rows = sweep(spec)
        rates = [r["throughput_sps"] for r in rows]
        assert rates[0] > rates[1] > rates[2]

    def test_empty_values_rejected(self):
        with pytest.raises(RangeError):
            sweep(SweepSpec(param="n_feat", values=[]))


class TestDefects:
    def _program(self):
        return compiled(n_trees=32, depth=3, n_feat=8, seed=70, cap=8)

    def test_rate_zero_exact(self):
        qmodel, program = self._program()
        codes = qmodel.grid.quantize_batch(make_samples(100, 8, seed=4))
        _, labels = oracle_predict_batch(qmodel, codes)
        curve = defect_experiment(program.plan, program, codes, labels, [0.0],
                                  trials=3, seed=5)
        assert curve[0]["mean_relative_accuracy"] == 1.0
        assert curve[0]["std_relative_accuracy"] == 0.0

    def test_deterministic(self):
        qmodel, program = self._program()
        codes = qmodel.grid.quantize_batch(make_samples(80, 8, seed=6))
        _, labels = oracle_predict_batch(qmodel, codes)
        c1 = defect_experiment(program.plan, program, codes, labels, [0.0, 0.02],
                               trials=4, seed=9)
        c2 = defect_experiment(program.plan, program, codes, labels, [0.0, 0.02],
                               trials=4, seed=9)
        assert c1 == c2

    def test_degradation_trend(self):
        qmodel, program = self._program()
        codes = qmodel.grid.quantize_batch(make_samples(150, 8, seed=7))
        _, labels = oracle_predict_batch(qmodel, codes)
        curve = defect_experiment(program.plan, program, codes, labels,
                                  [0.0, 0.01, 0.10], trials=20, seed=11)
        means = [row["mean_relative_accuracy"] for row in curve]
        assert means[0] == 1.0
        assert means[0] >= means[1] >= means[2]

    def test_bad_rate_rejected(self):
        qmodel, program = self._program()
        codes = qmodel.grid.quantize_batch(make_samples(10, 8, seed=8))
        with pytest.raises(RangeError):
            defect_experiment(program.plan, program, codes, np.zeros(10), [1.5],
                              trials=1, seed=1)

    def test_functional_predict_matches_engine(self):
        qmodel, program = compiled(task="multiclass_classification", n_trees=12,
                                   depth=3, n_feat=8, n_classes=3, seed=71)
        codes = qmodel.grid.quantize_batch(make_samples(120, 8, seed=9))
        logits, decisions = _functional_predict(program, codes)
        predictions, _ = run_inference(program, codes)
        assert [p.decision for p in predictions] == decisions.tolist()


class TestCost:
    def test_default_power_anchor(self):
        report = estimate_cost(CostModel.default(), ChipConfig())
        assert report["peak_power_total_w"] == pytest.approx(19.0, abs=1e-9)

    def test_acam_dominates(self):
        report = estimate_cost(CostModel.default(), ChipConfig())
        power = report["peak_power_w"]
        assert power["acam_array"] > sum(v for k, v in power.items()
                                         if k != "acam_array")
        area = report["area_mm2"]
        assert area["acam_array"] == max(area.values())

    def test_zeroed_model_all_zero(self):
        zero = CostModel({k: 0.0 for k in CostModel.default().area_mm2},
                         {k: 0.0 for k in CostModel.default().peak_power_w},
                         {k: 0.0 for k in CostModel.default().energy_per_cycle_j})
        report = estimate_cost(zero, ChipConfig())
        assert report["peak_power_total_w"] == 0.0
        assert report["area_total_mm2"] == 0.0

    def test_missing_entry_rejected(self):
        model = CostModel.default()
        del model.peak_power_w["router"]
        with pytest.raises(ConfigError):
            estimate_cost(model, ChipConfig())

    def test_energy_per_decision_from_run(self):
        qmodel, program = compiled(n_trees=8, depth=7, n_feat=32, seed=72,
                                   batch_factor=8)
        codes = qmodel.grid.quantize_batch(make_samples(400, 32, seed=10))
        _, metrics = run_inference(program, codes)
        report = estimate_cost(CostModel.default(), program.plan, metrics)
        assert 0.15e-9 <= report["energy_per_decision_j"] <= 0.45e-9

    def test_json_round_trip(self, tmp_path):
        model = CostModel.default()
        path = tmp_path / "cost.json"
        path.write_text(json.dumps(model.to_dict()))
        again = CostModel.from_json(str(path))
        assert again.to_dict() == model.to_dict()

    def test_incomplete_json_rejected(self, tmp_path):
        doc = CostModel.default().to_dict()
        del doc["energy_per_cycle_j"]["cp"]
        path = tmp_path / "cost.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigError):
            CostModel.from_json(str(path))
