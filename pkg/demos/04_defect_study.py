# Accuracy sensitivity to analog defects: random one-level flips in stored
# sub-cell levels and DAC outputs, half up and half down, swept over defect
# rates and averaged over seeded trials.

from xtime import (build_quant_grid, compile_model, defect_experiment,
                   oracle_predict_batch, quantize_ensemble)
from xtime.synth import make_random_ensemble, make_samples

model = make_random_ensemble("binary_classification", n_trees=128, depth=3,
                             n_features=16, seed=5)
qmodel = quantize_ensemble(model, build_quant_grid(model, 8))
_, plan, program = compile_model(qmodel, trees_per_core_cap=32)
print(f"{model.n_trees} trees on {plan.cores_used} cores")

X = make_samples(200, 16, seed=1)
codes = qmodel.grid.quantize_batch(X)
_, labels = oracle_predict_batch(qmodel, codes)  # clean predictions as labels

curve = defect_experiment(plan, program, codes, labels,
                          rates=[0.0, 0.001, 0.005, 0.01, 0.05],
                          trials=30, seed=2)
print(f"\n{'rate':>8}  {'mean rel acc':>12}  {'std':>8}")
for row in curve:
    print(f"{row['rate']:8.3%}  {row['mean_relative_accuracy']:12.4f}  "
          f"{row['std_relative_accuracy']:8.4f}")
