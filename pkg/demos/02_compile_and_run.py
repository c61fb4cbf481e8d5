# Full pipeline on a small model: quantize, flatten to CAM rows, place onto
# cores, program the routers, cycle-simulate, and check against the oracle.

import numpy as np

from xtime import (build_cam_table, build_quant_grid, compile_model,
                   oracle_predict_batch, quantize_ensemble, run_inference)
from xtime.synth import make_random_ensemble, make_samples

model = make_random_ensemble("binary_classification", n_trees=16, depth=5,
                             n_features=20, seed=42)
print(f"model: {model.n_trees} trees, depth {model.max_depth}, "
      f"{model.n_leaves_total} leaves, {model.n_features} features")

grid = build_quant_grid(model, n_bits=8)
qmodel = quantize_ensemble(model, grid)
table = build_cam_table(qmodel)
print(f"CAM table: {table.n_rows} rows x {table.logical_columns} logical columns "
      f"(2*{table.n_features} bounds + value + tree + class)")

table, plan, program = compile_model(qmodel, batch_factor=2)
print(f"placement: {plan.cores_used} cores/replica, "
      f"max {plan.trees_per_core_max} trees/core, "
      f"leaf scale 2^{plan.leaf_scale_bits}")
print(f"router program: {len(program.router_bits)} active routers, "
      f"{sum(program.router_bits.values())} accumulating, cp op {program.cp_op!r}, "
      f"{program.n_batch_groups} batch groups")

X = make_samples(2000, 20, seed=7)
codes = grid.quantize_batch(X)
predictions, metrics = run_inference(program, codes)

_, oracle = oracle_predict_batch(qmodel, codes)
sim = np.array([p.decision for p in predictions])
print(f"\noracle agreement: {int((sim == oracle).sum())}/{len(sim)}")
print(f"cycles: {metrics.total_cycles}  latency: {metrics.latency_ns_mean:.1f} ns  "
      f"chip throughput: {metrics.throughput_sps / 1e6:.1f} MSamples/s")
print(f"latency breakdown (mean cycles): "
      + "  ".join(f"{k}={v['mean']:.1f}" for k, v in metrics.latency_breakdown.items()
                  if isinstance(v, dict)))
