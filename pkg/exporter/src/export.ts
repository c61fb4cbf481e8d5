/**
 * Export dispatch plus prediction-parity verification.
 *
 * Parity compares the native dump evaluated under its own format semantics
 * against the exported interchange model evaluated by the reference oracle:
 * classification must agree on every probe, regression within 1e-6 relative
 * error (pre-quantization).
 */

import { InterchangeModel, Task, UnsupportedModelError, validateModel } from "./interchange";
import { logitsFor, predict } from "./oracle";
import * as lightgbm from "./formats/lightgbm";
import * as sklearn from "./formats/sklearn";
import * as xgboost from "./formats/xgboost";

export type Format = "xgboost" | "lightgbm" | "sklearn";

export interface ExportMeta {
  task: Task;
  nClasses: number;
  nFeatures: number;
}

export interface ExportReport {
  framework: Format;
  task: Task;
  n_trees: number;
  n_leaves: number;
  probes: number;
  decision_mismatches: number;
  max_relative_error: number;
  pass: boolean;
  notes: string[];
}

export function exportModel(dumpText: string, format: Format,
                            meta: ExportMeta): InterchangeModel {
  let model: InterchangeModel;
  if (format === "xgboost") {
    model = xgboost.toInterchange(xgboost.parseDump(dumpText), meta);
  } else if (format === "lightgbm") {
    model = lightgbm.toInterchange(lightgbm.parseDump(dumpText), meta);
  } else if (format === "sklearn") {
    model = sklearn.toInterchange(sklearn.parseDump(dumpText));
  } else {
    throw new UnsupportedModelError(`unknown format ${format}`);
  }
  validateModel(model);
  return model;
}

export function nativePredictions(dumpText: string, format: Format,
                                  meta: ExportMeta, probes: number[][]): number[] {
  if (format === "xgboost") {
    const trees = xgboost.parseDump(dumpText);
    return probes.map((x) => xgboost.nativePredict(trees, x, meta));
  }
  if (format === "lightgbm") {
    const model = lightgbm.parseDump(dumpText);
    return probes.map((x) => lightgbm.nativePredict(model, x, meta));
  }
  const dump = sklearn.parseDump(dumpText);
  return probes.map((x) => sklearn.nativePredict(dump, x));
}

function leafRange(model: InterchangeModel): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const tree of model.trees) {
    for (const node of tree.nodes) {
      if (node.is_leaf) {
        lo = Math.min(lo, node.value as number);
        hi = Math.max(hi, node.value as number);
      }
    }
  }
  return [lo, hi];
}

/** First structural leaf difference against a freshly exported model. */
function locateLeafDivergence(expected: InterchangeModel,
                              actual: InterchangeModel): string | null {
  for (let t = 0; t < Math.min(expected.trees.length, actual.trees.length); t += 1) {
    const a = expected.trees[t];
    const b = actual.trees[t];
    for (let n = 0; n < Math.min(a.nodes.length, b.nodes.length); n += 1) {
      const na = a.nodes[n];
      const nb = b.nodes[n];
      if (na.is_leaf && nb.is_leaf && na.value !== nb.value) {
        return `tree ${b.tree_id} leaf node ${nb.id}: value ${nb.value} != exported ${na.value}`;
      }
    }
  }
  return null;
}

export function verifyParity(dumpText: string, format: Format, meta: ExportMeta,
                             interchange: InterchangeModel,
                             probes: number[][]): ExportReport {
  validateModel(interchange);
  const native = nativePredictions(dumpText, format, meta, probes);
  const regression = meta.task === "regression";

  let mismatches = 0;
  let maxRel = 0;
  for (let i = 0; i < probes.length; i += 1) {
    if (regression) {
      const got = logitsFor(interchange, probes[i])[0];
      const rel = Math.abs(got - native[i]) / Math.max(Math.abs(native[i]), 1e-12);
      maxRel = Math.max(maxRel, rel);
    } else if (predict(interchange, probes[i]) !== native[i]) {
      mismatches += 1;
    }
  }
  const pass = regression ? maxRel <= 1e-6 : mismatches === 0;

  const notes: string[] = [];
  if (!pass) {
    const reference = exportModel(dumpText, format, meta);
    const located = locateLeafDivergence(reference, interchange);
    if (located !== null) {
      notes.push(located);
    }
    const [lo, hi] = leafRange(interchange);
    const [rlo, rhi] = leafRange(reference);
    if (lo >= 0 && hi <= 1 && (rlo < 0 || rhi > 1)) {
      notes.push("leaf scale mismatch: leaves lie in (0, 1) like link-transformed "
        + "probabilities; export raw margins/logits instead");
    }
  }

  let leaves = 0;
  for (const tree of interchange.trees) {
    for (const node of tree.nodes) {
      if (node.is_leaf) {
        leaves += 1;
      }
    }
  }
  return {
    framework: format,
    task: meta.task,
    n_trees: interchange.trees.length,
    n_leaves: leaves,
    probes: probes.length,
    decision_mismatches: mismatches,
    max_relative_error: maxRel,
    pass,
    notes,
  };
}
