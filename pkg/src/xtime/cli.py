"""Command-line front end: compile, run, sweep, defects, validate, cost.

Exit codes: 0 ok, 2 compile/validation error, 3 run error, 4 verification
failure.  Every command writes a manifest.json into --out-dir so a run can be
replayed exactly; metrics.json is byte-stable apart from its timestamp field.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .compiler import (ChipConfig, compile_model, effective_ensemble, load_artifact,
                       save_artifact)
from .ensemble import (build_quant_grid, oracle_predict_batch, parse_ensemble,
                       quantize_ensemble)
from .errors import XTimeError
from .simulator import (CostModel, SweepSpec, defect_experiment, estimate_cost,
                        run_inference, sweep)

EXIT_OK = 0
EXIT_COMPILE = 2
EXIT_RUN = 3
EXIT_VERIFY = 4


def _chip_from_args(args):
    kwargs = {}
    for name in ("n_cores", "stacked_arrays", "rows_per_array", "queued_arrays",
                 "cols_per_array", "n_bits", "memristor_bits"):
        val = getattr(args, name, None)
        if val is not None:
            kwargs[name] = val
    if getattr(args, "clock_ghz", None) is not None:
        kwargs["clock_hz"] = args.clock_ghz * 1e9
    return ChipConfig(**kwargs)


def _add_chip_flags(parser):
    parser.add_argument("--n-cores", dest="n_cores", type=int, default=None)
    parser.add_argument("--stacked-arrays", dest="stacked_arrays", type=int, default=None)
    parser.add_argument("--rows-per-array", dest="rows_per_array", type=int, default=None)
    parser.add_argument("--queued-arrays", dest="queued_arrays", type=int, default=None)
    parser.add_argument("--cols-per-array", dest="cols_per_array", type=int, default=None)
    parser.add_argument("--n-bits", dest="n_bits", type=int, default=None)
    parser.add_argument("--memristor-bits", dest="memristor_bits", type=int, default=None)
    parser.add_argument("--clock-ghz", dest="clock_ghz", type=float, default=None)


def _write_manifest(args, out_dir, command):
    manifest = {
        "manifest_version": 1,
        "tool_version": __version__,
        "command": command,
        "args": {k: v for k, v in sorted(vars(args).items())
                 if k not in ("func", "manifest") and v is not None},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def _write_metrics(metrics_dict, out_dir):
    metrics_dict = dict(metrics_dict)
    metrics_dict["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    path = os.path.join(out_dir, "metrics.json")
    with open(path, "w") as fh:
        json.dump(metrics_dict, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _load_samples(path, n_features, has_labels):
    rows = []
    labels = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if not line:
                continue
            values = [float(v) for v in line]
            if has_labels:
                labels.append(values[-1])
                values = values[:-1]
            if len(values) != n_features:
                raise XTimeError(
                    f"sample row has {len(values)} features, model needs {n_features}")
            rows.append(values)
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64) if has_labels else None
    return X, y


def cmd_compile(args):
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(args, out_dir, "compile")
    with open(args.model, "rb") as fh:
        ensemble = parse_ensemble(fh.read())
    chip = _chip_from_args(args)
    grid = build_quant_grid(ensemble, chip.n_bits)
    qmodel = quantize_ensemble(ensemble, grid)
    _, plan, program = compile_model(qmodel, chip, args.batch_factor,
                                     args.decision_threshold, args.trees_per_core)
    artifact = os.path.join(out_dir, args.artifact_name)
    save_artifact(program, qmodel, artifact)
    plan = program.plan
    print(f"compiled {args.model}")
    print(f"  cores used: {plan.cores_used}  (of {chip.n_cores})")
    print(f"  trees/core: max {plan.trees_per_core_max}")
    print(f"  rows used: {plan.total_rows}  (words/core {chip.words_per_core})")
    print(f"  batch groups: {program.n_batch_groups}")
    print(f"  leaf scale: 2^{plan.leaf_scale_bits}"
          + ("  (lossy leaf rounding)" if plan.lossy_leaves else ""))
    print(f"  artifact: {artifact}")
    return EXIT_OK


def cmd_validate(args):
    with open(args.model, "rb") as fh:
        ensemble = parse_ensemble(fh.read())
    grid = build_quant_grid(ensemble, args.grid_bits)
    qmodel = quantize_ensemble(ensemble, grid)
    print(f"valid: {ensemble.task}, {ensemble.n_trees} trees, "
          f"{ensemble.n_features} features, {ensemble.n_leaves_total} leaves, "
          f"max depth {ensemble.max_depth}")
    exact = all(len(np.unique(c)) == len(c) for c in grid.cuts)
    print(f"quantization: {args.grid_bits}-bit grid, "
          f"{'exact (decision preserving)' if exact else 'quantile fallback in use'}")
    del qmodel
    return EXIT_OK


def cmd_run(args):
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(args, out_dir, "run")
    program, qmodel = load_artifact(args.artifact)
    plan = program.plan

    X, labels = _load_samples(args.samples, plan.n_features, args.has_labels)
    codes = qmodel.grid.quantize_batch(X)

    if args.sweep:
        return _run_sweep_flag(args, out_dir)

    if args.defect_rate is not None:
        rates = [0.0, args.defect_rate] if args.defect_rate > 0 else [0.0]
        if labels is None:
            reference = effective_ensemble(qmodel, plan.leaf_scale_bits)
            _, labels = oracle_predict_batch(reference, codes, program.decision_threshold)
        curve = defect_experiment(plan, program, codes, labels, rates,
                                  trials=args.trials, seed=args.seed,
                                  workers=args.workers)
        path = os.path.join(out_dir, "defects.csv")
        _write_defect_csv(curve, path)
        print(f"defect curve written to {path}")
        return EXIT_OK

    trace_path = os.path.join(out_dir, "trace.jsonl") if args.trace else None
    predictions, metrics = run_inference(program, codes, seed=args.seed,
                                         workers=args.workers, trace_path=trace_path)

    pred_path = os.path.join(out_dir, "predictions.csv")
    with open(pred_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["sample", "prediction"] + [f"logit_{c}" for c in range(plan.n_classes)]
        writer.writerow(header)
        for i, pred in enumerate(predictions):
            writer.writerow([i, repr(float(pred.decision))]
                            + [repr(float(v)) for v in pred.logits])

    mismatches = 0
    if args.check_oracle:
        reference = effective_ensemble(qmodel, plan.leaf_scale_bits)
        _, oracle_dec = oracle_predict_batch(reference, codes, program.decision_threshold)
        sim_dec = np.asarray([p.decision for p in predictions])
        mismatches = int(np.sum(sim_dec != oracle_dec))
        print(f"oracle check: {mismatches} mismatches over {len(sim_dec)} samples")

    md = metrics.to_dict()
    md["oracle_mismatches"] = mismatches if args.check_oracle else None
    metrics_path = _write_metrics(md, out_dir)
    print(f"{metrics.n_samples} samples in {metrics.total_cycles} cycles "
          f"({metrics.throughput_sps / 1e6:.2f} MSamples/s, "
          f"latency {metrics.latency_ns_mean:.1f} ns)")
    print(f"predictions: {pred_path}")
    print(f"metrics: {metrics_path}")
    if args.check_oracle and mismatches:
        return EXIT_VERIFY
    return EXIT_OK


def _write_defect_csv(curve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rate", "mean_relative_accuracy", "std_relative_accuracy", "trials"])
        for row in curve:
            writer.writerow([row["rate"], row["mean_relative_accuracy"],
                             row["std_relative_accuracy"], row["trials"]])


def _parse_sweep_expr(expr):
    # e.g. "n_feat=10:130:10" or "n_trees=64,256,1024"
    name, _, rhs = expr.partition("=")
    name = name.strip()
    if name not in ("n_trees", "depth", "n_feat"):
        raise XTimeError(f"unknown sweep parameter {name!r}")
    if ":" in rhs:
        parts = [int(p) for p in rhs.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        values = list(range(start, stop + 1, step))
    else:
        values = [int(v) for v in rhs.split(",")]
    return name, values


def _run_sweep_flag(args, out_dir):
    name, values = _parse_sweep_expr(args.sweep)
    spec = SweepSpec(param=name, values=values, task=args.sweep_task,
                     n_classes=args.sweep_classes, n_samples=args.sweep_samples,
                     seed=args.seed, batch_factor=args.batch_factor or 1,
                     chip=_chip_from_args(args))
    rows = sweep(spec)
    path = os.path.join(out_dir, "sweep.csv")
    _write_sweep_csv(rows, path)
    print(f"sweep written to {path}")
    return EXIT_OK


def _write_sweep_csv(rows, path):
    fields = ["param", "value", "feasible", "throughput_sps", "core_throughput_sps",
              "latency_ns", "initiation_interval", "cores_used", "total_cycles", "error"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})


def cmd_sweep(args):
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(args, out_dir, "sweep")
    name, values = _parse_sweep_expr(args.expr)
    spec = SweepSpec(param=name, values=values, task=args.task, n_classes=args.classes,
                     n_trees=args.n_trees, depth=args.depth, n_feat=args.n_feat,
                     n_samples=args.samples, seed=args.seed,
                     batch_factor=args.batch_factor, chip=_chip_from_args(args))
    rows = sweep(spec)
    path = os.path.join(out_dir, "sweep.csv")
    _write_sweep_csv(rows, path)
    with open(os.path.join(out_dir, "sweep.json"), "w") as fh:
        json.dump(rows, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for row in rows:
        if row["feasible"]:
            print(f"{name}={row['value']}: {row['throughput_sps'] / 1e6:.2f} MSamples/s "
                  f"(II {row['initiation_interval']}, {row['cores_used']} cores)")
        else:
            print(f"{name}={row['value']}: infeasible ({row['error']})")
    print(f"sweep written to {path}")
    return EXIT_OK


def cmd_defects(args):
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(args, out_dir, "defects")
    program, qmodel = load_artifact(args.artifact)
    X, labels = _load_samples(args.samples, program.plan.n_features, args.has_labels)
    codes = qmodel.grid.quantize_batch(X)
    if labels is None:
        reference = effective_ensemble(qmodel, program.plan.leaf_scale_bits)
        _, labels = oracle_predict_batch(reference, codes, program.decision_threshold)
    rates = [float(r) for r in args.rates.split(",")]
    curve = defect_experiment(program.plan, program, codes, labels, rates,
                              trials=args.trials, seed=args.seed, workers=args.workers)
    path = os.path.join(out_dir, "defects.csv")
    _write_defect_csv(curve, path)
    for row in curve:
        print(f"rate {row['rate']:.4f}: relative accuracy "
              f"{row['mean_relative_accuracy']:.4f} +- {row['std_relative_accuracy']:.4f}")
    print(f"defect curve written to {path}")
    return EXIT_OK


def cmd_cost(args):
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(args, out_dir, "cost")
    if args.artifact:
        program, qmodel = load_artifact(args.artifact)
        plan = program.plan
        chip = plan.chip
    else:
        chip = _chip_from_args(args)
        plan = chip
        program = qmodel = None
    cost_model = (CostModel.from_json(args.cost_model) if args.cost_model
                  else CostModel.default(chip))
    metrics = None
    if args.samples and program is not None:
        X, _ = _load_samples(args.samples, program.plan.n_features, False)
        codes = qmodel.grid.quantize_batch(X)
        _, metrics = run_inference(program, codes, seed=args.seed)
    report = estimate_cost(cost_model, plan, metrics)
    path = os.path.join(out_dir, "cost.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"chip peak power: {report['peak_power_total_w']:.2f} W")
    print(f"chip area: {report['area_total_mm2']:.1f} mm^2")
    if "energy_per_decision_j" in report:
        print(f"energy/decision: {report['energy_per_decision_j'] * 1e9:.3f} nJ")
    print(f"cost report: {path}")
    return EXIT_OK


def _apply_manifest(args):
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    stored = manifest.get("args", {})
    for key, value in stored.items():
        if getattr(args, key, None) in (None, False):
            setattr(args, key, value)
    return manifest.get("command")


def build_parser():
    parser = argparse.ArgumentParser(prog="xtime",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a model JSON into a chip artifact")
    p.add_argument("model")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--artifact-name", default="plan.json")
    p.add_argument("--batch-factor", type=int, default=1)
    p.add_argument("--decision-threshold", type=float, default=0.0)
    p.add_argument("--trees-per-core", type=int, default=None,
                   help="cap trees per core (default: 4, escalating if needed)")
    _add_chip_flags(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("validate", help="check a model JSON against the schema")
    p.add_argument("model")
    p.add_argument("--grid-bits", type=int, default=8)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate a compiled artifact over samples")
    p.add_argument("artifact", nargs="?")
    p.add_argument("--manifest", default=None, help="replay a saved manifest")
    p.add_argument("--samples", required=False)
    p.add_argument("--has-labels", action="store_true",
                   help="samples CSV carries a trailing label column")
    p.add_argument("--check-oracle", action="store_true")
    p.add_argument("--defect-rate", type=float, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sweep", default=None, help="param=start:stop:step")
    p.add_argument("--sweep-task", default="binary_classification")
    p.add_argument("--sweep-classes", type=int, default=1)
    p.add_argument("--sweep-samples", type=int, default=2000)
    p.add_argument("--batch-factor", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--out-dir", default="out")
    _add_chip_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="throughput sweep over synthetic models")
    p.add_argument("expr", help="n_trees|depth|n_feat=start:stop:step or =v1,v2,...")
    p.add_argument("--task", default="binary_classification")
    p.add_argument("--classes", type=int, default=1)
    p.add_argument("--n-trees", dest="n_trees", type=int, default=64)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--n-feat", dest="n_feat", type=int, default=32)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--batch-factor", type=int, default=1)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out-dir", default="out")
    _add_chip_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("defects", help="relative-accuracy curve under level flips")
    p.add_argument("artifact")
    p.add_argument("--samples", required=True)
    p.add_argument("--has-labels", action="store_true")
    p.add_argument("--rates", default="0,0.001,0.005,0.01,0.05")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_defects)

    p = sub.add_parser("cost", help="area/power/energy report")
    p.add_argument("artifact", nargs="?", default=None)
    p.add_argument("--cost-model", default=None, help="JSON cost model override")
    p.add_argument("--samples", default=None,
                   help="optional samples CSV to derive energy/decision")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    _add_chip_flags(p)
    p.set_defaults(func=cmd_cost)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "manifest", None):
            _apply_manifest(args)
        code = args.func(args)
    except XTimeError as exc:
        compile_like = args.command in ("compile", "validate")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPILE if compile_like else EXIT_RUN
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPILE if args.command in ("compile", "validate") else EXIT_RUN
    return code


if __name__ == "__main__":
    sys.exit(main())
