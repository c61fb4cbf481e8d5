#!/usr/bin/env node
/**
 * xtime-export: convert a native tree-ensemble dump into interchange JSON.
 *
 *   xtime-export <dump> --format xgboost|lightgbm|sklearn --out model.json
 *                [--task T] [--n-classes K] [--n-features F]
 *                [--probe-samples probes.csv] [--report report.json]
 *
 * sklearn dumps carry their own task metadata; the other formats need
 * --task/--n-classes/--n-features.  With --probe-samples the exported model
 * is checked for prediction parity against the native dump and the process
 * exits nonzero if parity fails.
 */

import * as fs from "fs";

import { ExportMeta, Format, exportModel, verifyParity } from "./export";
import { canonicalize, Task } from "./interchange";
import * as sklearn from "./formats/sklearn";

interface Args {
  dump: string;
  format: Format;
  out: string | null;
  task: Task | null;
  nClasses: number | null;
  nFeatures: number | null;
  probeSamples: string | null;
  report: string | null;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { dump: "", format: "xgboost", out: null, task: null,
                       nClasses: null, nFeatures: null, probeSamples: null,
                       report: null };
  const positional: string[] = [];
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) {
        throw new Error(`missing value for ${arg}`);
      }
      return argv[i];
    };
    switch (arg) {
      case "--format": args.format = next() as Format; break;
      case "--out": args.out = next(); break;
      case "--task": args.task = next() as Task; break;
      case "--n-classes": args.nClasses = parseInt(next(), 10); break;
      case "--n-features": args.nFeatures = parseInt(next(), 10); break;
      case "--probe-samples": args.probeSamples = next(); break;
      case "--report": args.report = next(); break;
      case "--help":
      case "-h":
        console.log("usage: xtime-export <dump> --format xgboost|lightgbm|sklearn "
          + "[--out model.json] [--task T] [--n-classes K] [--n-features F] "
          + "[--probe-samples probes.csv] [--report report.json]");
        process.exit(0);
        break;
      default:
        positional.push(arg);
    }
  }
  if (positional.length !== 1) {
    throw new Error("exactly one dump file expected");
  }
  args.dump = positional[0];
  return args;
}

function readProbes(path: string): number[][] {
  return fs.readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line) => line.split(",").map(Number));
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  const dumpText = fs.readFileSync(args.dump, "utf-8");

  let meta: ExportMeta;
  if (args.format === "sklearn") {
    const dump = sklearn.parseDump(dumpText);
    meta = {
      task: args.task ?? dump.task,
      nClasses: args.nClasses ?? dump.n_classes,
      nFeatures: args.nFeatures ?? dump.n_features,
    };
  } else {
    if (args.task === null || args.nFeatures === null) {
      throw new Error(`--task and --n-features are required for ${args.format} dumps`);
    }
    meta = { task: args.task, nClasses: args.nClasses ?? 1, nFeatures: args.nFeatures };
  }

  const model = exportModel(dumpText, args.format, meta);
  const text = canonicalize(model);
  if (args.out !== null) {
    fs.writeFileSync(args.out, text);
    console.log(`wrote ${args.out}: ${model.trees.length} trees, task ${model.task}`);
  } else {
    process.stdout.write(text);
  }

  if (args.probeSamples !== null) {
    const probes = readProbes(args.probeSamples);
    const report = verifyParity(dumpText, args.format, meta, model, probes);
    if (args.report !== null) {
      fs.writeFileSync(args.report, JSON.stringify(report, null, 1) + "\n");
    }
    const verdict = report.pass ? "PASS" : "FAIL";
    console.log(`parity ${verdict}: ${report.decision_mismatches} mismatches, `
      + `max rel err ${report.max_relative_error.toExponential(2)} `
      + `over ${report.probes} probes`);
    for (const note of report.notes) {
      console.log(`  note: ${note}`);
    }
    if (!report.pass) {
      return 4;
    }
  }
  return 0;
}

if (require.main === module) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(2);
  }
}
