"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
results; the whole module is also part of the default suite.
"""

import numpy as np
import pytest

from xtime import (ChipConfig, CostModel, MacroCell, SweepSpec, analytic_throughput,
                   build_htree, build_quant_grid, compile_model, core_schedule,
                   defect_experiment, estimate_cost, match_direct, match_two_cycle,
                   oracle_predict_batch, quantize_ensemble, run_inference, sweep)
from xtime.acam import (lower_bound_parallel_form, lower_bound_series_form,
                        split_levels, two_cycle_match_codes)
from xtime.synth import make_random_ensemble, make_samples

CLOCK = 1.0e9


def _ok(msg):
    print(f"PASS: {msg}")


def compile_random(task, n_trees, depth, n_feat, n_classes=1, seed=0, batch_factor=1,
                   cap=None, reduction="sum"):
    model = make_random_ensemble(task, n_trees, depth, n_feat, n_classes, seed=seed,
                                 reduction=reduction)
    qmodel = quantize_ensemble(model, build_quant_grid(model, 8))
    _, plan, program = compile_model(qmodel, batch_factor=batch_factor,
                                     trees_per_core_cap=cap)
    return qmodel, plan, program


def test_precision_doubling_exhaustive_equivalence():
    """match_two_cycle == match_direct over every (q, t_lo < t_hi) triple."""
    q = np.arange(256, dtype=np.int64)
    lo_all, hi_all = [], []
    for lo in range(256):
        hi = np.arange(lo + 1, 257, dtype=np.int64)
        lo_all.append(np.full(hi.shape, lo, dtype=np.int64))
        hi_all.append(hi)
    lo_all = np.concatenate(lo_all)
    hi_all = np.concatenate(hi_all)
    total = 0
    mismatches = 0
    chunk = 4096
    for start in range(0, len(lo_all), chunk):
        lo = lo_all[start:start + chunk, None]
        hi = hi_all[start:start + chunk, None]
        protocol = two_cycle_match_codes(lo, hi, q[None, :])
        direct = (q[None, :] >= lo) & (q[None, :] < hi)
        mismatches += int((protocol != direct).sum())
        total += protocol.size
    assert total == 8_421_376
    assert mismatches == 0

    # The scalar cell API agrees with the vector kernel on a random sample.
    rng = np.random.default_rng(0)
    for _ in range(20_000):
        lo = int(rng.integers(0, 256))
        hi = int(rng.integers(lo + 1, 257))
        qq = int(rng.integers(0, 256))
        cell = MacroCell(lo, hi)
        assert match_two_cycle(cell, qq) == match_direct(cell, qq)
    _ok(f"precision doubling: {total} triples, 0 mismatches")


def test_lower_bound_formulations_cross_check():
    """Both refactored lower-bound forms equal q >= t_lo over all 8-bit codes."""
    q = np.arange(256)
    t = np.arange(256)
    qm, ql = split_levels(q[:, None])
    tm, tl = split_levels(t[None, :])
    direct = q[:, None] >= t[None, :]
    a = lower_bound_parallel_form(qm, ql, tm, tl)
    b = lower_bound_series_form(qm, ql, tm, tl)
    assert (a == direct).all()
    assert (b == direct).all()
    # Third formulation: the lower half of the two-cycle protocol (open upper).
    c = two_cycle_match_codes(t[None, :], np.full((1, 256), 256), q[:, None])
    assert (c == direct).all()
    _ok("lower-bound formulations agree exhaustively over 8-bit codes")


def test_oracle_equivalence_master():
    """>= 20 randomized models x tasks x trees-per-core x batching: chip == oracle."""
    tasks = [("regression", 1), ("binary_classification", 1),
             ("multiclass_classification", 3), ("multiclass_classification", 5),
             ("multiclass_classification", 7)]
    configs = []
    i = 0
    for tpc in range(1, 9):
        for batch in (1, 2):
            task, k = tasks[i % len(tasks)]
            configs.append((task, k, tpc, batch))
            i += 1
    for task, k in tasks:
        configs.append((task, k, 4, 1))
    assert len(configs) >= 20

    n_feat, depth, n_samples = 12, 4, 1000
    for run_idx, (task, k, tpc, batch) in enumerate(configs):
        n_trees = k * tpc * 2
        qmodel, plan, program = compile_random(task, n_trees, depth, n_feat,
                                               n_classes=k, seed=100 + run_idx,
                                               batch_factor=batch, cap=tpc)
        assert plan.trees_per_core_max == tpc
        X = make_samples(n_samples, n_feat, seed=run_idx)
        codes = qmodel.grid.quantize_batch(X)
        predictions, _ = run_inference(program, codes)
        _, oracle = oracle_predict_batch(qmodel, codes)
        sim = np.array([p.decision for p in predictions])
        assert (sim == oracle).all(), (task, k, tpc, batch)
    _ok(f"oracle equivalence: {len(configs)} models x {n_samples} samples, exact")


def test_throughput_anchors():
    """Core rate 250/200 MSamples/s; simulation within 2% of the closed form."""
    assert analytic_throughput(ChipConfig(), n_trees_core=1)["core_samples_per_s"] == 250e6
    assert analytic_throughput(ChipConfig(), n_trees_core=5)["core_samples_per_s"] == 200e6

    n_samples = 10_000
    for tpc, steady in ((1, 250e6), (5, 200e6)):
        qmodel, plan, program = compile_random("binary_classification", tpc, 3, 16,
                                               seed=7 + tpc, cap=tpc)
        assert plan.cores_used == 1 and plan.trees_per_core_max == tpc
        codes = qmodel.grid.quantize_batch(make_samples(n_samples, 16, seed=tpc))
        _, metrics = run_inference(program, codes)
        closed = core_schedule(tpc, n_samples)
        assert metrics.core_total_cycles == closed.total_cycles
        assert abs(metrics.core_throughput_sps - closed.throughput_sps) \
            / closed.throughput_sps < 0.02
        assert abs(metrics.core_throughput_sps - steady) / steady < 0.02
    _ok("throughput anchors: 250 / 200 MSamples/s, simulation within 2%")


def test_single_sample_core_latency():
    """One sample traverses a core in exactly 12 cycles."""
    for tpc in (1, 2, 4):
        assert core_schedule(tpc, 1).total_cycles == 12
    qmodel, plan, program = compile_random("regression", 1, 3, 8, seed=3)
    codes = qmodel.grid.quantize_batch(make_samples(1, 8, seed=1))
    _, metrics = run_inference(program, codes)
    assert metrics.core_total_cycles == 12
    assert metrics.latency_breakdown["core"]["max"] == 12
    _ok("single-sample core latency = 12 cycles exactly")


def test_default_topology():
    """Default chip: 4096 cores, 1365 routers."""
    chip = ChipConfig()
    topo = build_htree(chip.n_cores, chip.noc_arity)
    assert chip.n_cores == 4096
    assert topo.n_routers == 1365
    assert topo.depth == 6
    _ok("topology: 4096 cores / 1365 routers")


def test_throughput_shape_constant_in_trees():
    """Throughput flat (within 2%) while the tree count scales 64 -> 4096."""
    spec = SweepSpec(param="n_trees", values=[64, 256, 1024, 4096], depth=2,
                     n_feat=16, n_samples=400, seed=41)
    rows = sweep(spec)
    assert all(r["feasible"] for r in rows)
    rates = [r["throughput_sps"] for r in rows]
    spread = (max(rates) - min(rates)) / min(rates)
    assert spread < 0.02
    _ok(f"throughput constant over n_trees 64..4096 (spread {spread * 100:.3f}%)")


def test_throughput_shape_constant_in_depth():
    """Throughput flat (within 2%) while depth scales 2 -> 8 at <= 4 trees/core."""
    spec = SweepSpec(param="depth", values=[2, 4, 6, 8], n_trees=64, n_feat=16,
                     n_samples=400, seed=43)
    rows = sweep(spec)
    assert all(r["feasible"] for r in rows)
    assert all(r["initiation_interval"] == 4 for r in rows)
    rates = [r["throughput_sps"] for r in rows]
    spread = (max(rates) - min(rates)) / min(rates)
    assert spread < 0.02
    _ok(f"throughput constant over depth 2..8 (spread {spread * 100:.3f}%)")


def test_throughput_shape_decreasing_in_features():
    """Throughput monotonically non-increasing as the feature count grows."""
    values = [10, 30, 50, 70, 90, 110, 130]
    spec = SweepSpec(param="n_feat", values=values, n_trees=16, depth=3,
                     n_samples=400, seed=47)
    rows = sweep(spec)
    assert all(r["feasible"] for r in rows)
    rates = [r["throughput_sps"] for r in rows]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert rates[0] > rates[-1]
    _ok("throughput non-increasing over n_feat 10..130")


def test_multiclass_throughput_ceiling():
    """Simulated throughput never exceeds clock / n_classes."""
    for k in (3, 7):
        qmodel, plan, program = compile_random("multiclass_classification",
                                               n_trees=2 * k, depth=3, n_feat=8,
                                               n_classes=k, seed=50 + k)
        codes = qmodel.grid.quantize_batch(make_samples(3000, 8, seed=k))
        _, metrics = run_inference(program, codes)
        assert metrics.throughput_sps <= CLOCK / k
        assert metrics.initiation_interval >= k
    _ok("multiclass ceiling: throughput <= clock / n_classes for 3 and 7 classes")


def test_defect_sensitivity_curve():
    """Rate 0 is exactly 1.0; the mean curve never increases with the rate."""
    qmodel, plan, program = compile_random("binary_classification", n_trees=512,
                                           depth=3, n_feat=16, seed=61, cap=32)
    codes = qmodel.grid.quantize_batch(make_samples(128, 16, seed=6))
    _, labels = oracle_predict_batch(qmodel, codes)
    rates = [0.0, 0.001, 0.005, 0.01, 0.05]
    curve = defect_experiment(plan, program, codes, labels, rates, trials=100,
                              seed=13)
    means = [row["mean_relative_accuracy"] for row in curve]
    assert means[0] == 1.0
    assert curve[0]["std_relative_accuracy"] == 0.0
    assert all(a >= b for a, b in zip(means, means[1:])), means
    _ok("defects: rate 0 -> 1.0 exactly; mean curve non-increasing "
        + " -> ".join(f"{m:.4f}" for m in means))


def test_cost_anchors():
    """Default cost model: 19 W peak power; ~0.3 nJ/decision on a batched run."""
    report = estimate_cost(CostModel.default(), ChipConfig())
    assert report["peak_power_total_w"] == pytest.approx(19.0, abs=1e-9)

    qmodel, plan, program = compile_random("binary_classification", n_trees=8,
                                           depth=7, n_feat=32, seed=67,
                                           batch_factor=64)
    codes = qmodel.grid.quantize_batch(make_samples(2000, 32, seed=9))
    _, metrics = run_inference(program, codes)
    full = estimate_cost(CostModel.default(), program.plan, metrics)
    energy = full["energy_per_decision_j"]
    assert 0.15e-9 <= energy <= 0.45e-9
    _ok(f"cost anchors: 19 W exact, {energy * 1e9:.3f} nJ/decision (target 0.3 +-50%)")


def test_booster_baseline():
    """Depth-limited LUT baseline throughput is clock / (4 * depth)."""
    for depth in range(2, 9):
        table = analytic_throughput(ChipConfig(), depth=depth)
        assert table["booster_samples_per_s"] == CLOCK / (4 * depth)
    assert analytic_throughput(ChipConfig(), depth=8)["booster_samples_per_s"] == 31.25e6
    _ok("booster baseline: clock / (4*depth), 31.25 MSamples/s at depth 8")
