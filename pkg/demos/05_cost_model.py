# Chip cost estimation: per-component area and peak power composed from
# instance counts, and energy per decision derived from simulated activity.

from xtime import (ChipConfig, CostModel, build_quant_grid, compile_model,
                   estimate_cost, quantize_ensemble, run_inference)
from xtime.synth import make_random_ensemble, make_samples

chip = ChipConfig()
cost = CostModel.default(chip)
report = estimate_cost(cost, chip)

print(f"{'component':>12}  {'area mm^2':>10}  {'peak W':>8}")
for name in report["area_mm2"]:
    print(f"{name:>12}  {report['area_mm2'][name]:10.2f}  "
          f"{report['peak_power_w'][name]:8.3f}")
print(f"{'total':>12}  {report['area_total_mm2']:10.2f}  "
      f"{report['peak_power_total_w']:8.3f}")

# Energy per decision on a batched binary workload.
model = make_random_ensemble("binary_classification", n_trees=8, depth=7,
                             n_features=32, seed=11)
qmodel = quantize_ensemble(model, build_quant_grid(model, 8))
_, plan, program = compile_model(qmodel, batch_factor=64)
codes = qmodel.grid.quantize_batch(make_samples(2000, 32, seed=3))
_, metrics = run_inference(program, codes)
full = estimate_cost(cost, program.plan, metrics)
print(f"\nbatched run: {metrics.n_samples} samples over "
      f"{program.n_batch_groups} groups of {plan.cores_used} cores")
print(f"energy per decision: {full['energy_per_decision_j'] * 1e9:.3f} nJ")
