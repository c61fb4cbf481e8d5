/**
 * scikit-learn support via the estimators' tree attribute arrays
 * (children_left / children_right / feature / threshold / value), dumped to
 * JSON.  sklearn sends x <= threshold left, so thresholds are bumped to the
 * next representable double for the strict-< interchange.
 *
 * Random-forest classifiers export one class-probability tree per class per
 * estimator (binary collapses to a single signed P1 - P0 tree), so summing
 * leaves and taking the argmax/threshold reproduces the forest's soft vote.
 * Gradient-boosting regressors fold the learning rate into the leaves and
 * carry the init prediction as one extra single-leaf tree.
 */

import {
  InterchangeModel, Task, UnsupportedModelError, branchNode, leafNode,
} from "../interchange";
import { nextUp } from "../util";

export interface SkTree {
  children_left: number[];
  children_right: number[];
  feature: number[];
  threshold: number[];
  value: number[][][];
}

export interface SkDump {
  framework: string;
  model_type: string;
  task: Task;
  n_features: number;
  n_classes: number;
  learning_rate?: number;
  init_prediction?: number;
  estimators: SkTree[];
}

export function parseDump(text: string): SkDump {
  const doc = JSON.parse(text) as SkDump;
  if (doc.framework !== "sklearn" || !Array.isArray(doc.estimators)) {
    throw new UnsupportedModelError("not a sklearn tree-attribute dump");
  }
  return doc;
}

function leafDistribution(tree: SkTree, node: number): number[] {
  const counts = tree.value[node][0];
  const total = counts.reduce((a, b) => a + b, 0);
  return counts.map((c) => (total > 0 ? c / total : 0));
}

function evalNode(tree: SkTree, x: number[]): number {
  let node = 0;
  while (tree.children_left[node] >= 0) {
    node = x[tree.feature[node]] <= tree.threshold[node]
      ? tree.children_left[node]
      : tree.children_right[node];
  }
  return node;
}

export function nativePredict(dump: SkDump, x: number[]): number {
  if (dump.model_type === "GradientBoostingRegressor") {
    let total = dump.init_prediction ?? 0;
    const lr = dump.learning_rate ?? 1;
    for (const tree of dump.estimators) {
      total += lr * tree.value[evalNode(tree, x)][0][0];
    }
    return total;
  }
  // Random forest classifier: argmax of the summed per-tree distributions.
  const probs = new Array<number>(dump.n_classes).fill(0);
  for (const tree of dump.estimators) {
    const dist = leafDistribution(tree, evalNode(tree, x));
    for (let c = 0; c < dump.n_classes; c += 1) {
      probs[c] += dist[c];
    }
  }
  let best = 0;
  for (let c = 1; c < probs.length; c += 1) {
    if (probs[c] > probs[best]) {
      best = c;
    }
  }
  return best;
}

type LeafValue = (tree: SkTree, node: number) => number;

function convertTree(tree: SkTree, treeId: number, classId: number,
                     leafValue: LeafValue): InterchangeModel["trees"][0] {
  const nodes: InterchangeModel["trees"][0]["nodes"] = [];
  const n = tree.children_left.length;
  for (let i = 0; i < n; i += 1) {
    if (tree.children_left[i] < 0) {
      nodes.push(leafNode(i, leafValue(tree, i)));
    } else {
      nodes.push(branchNode(i, tree.feature[i], nextUp(tree.threshold[i]),
                            tree.children_left[i], tree.children_right[i]));
    }
  }
  return { tree_id: treeId, class_id: classId, nodes };
}

export function toInterchange(dump: SkDump): InterchangeModel {
  if (dump.model_type === "GradientBoostingRegressor") {
    const lr = dump.learning_rate ?? 1;
    const model: InterchangeModel = {
      format_version: 1,
      task: "regression",
      n_classes: 1,
      n_features: dump.n_features,
      reduction: "sum",
      trees: dump.estimators.map((tree, i) =>
        convertTree(tree, i, 0, (t, node) => lr * t.value[node][0][0])),
    };
    model.trees.push({
      tree_id: dump.estimators.length,
      class_id: 0,
      nodes: [leafNode(0, dump.init_prediction ?? 0)],
    });
    return model;
  }

  if (dump.model_type !== "RandomForestClassifier") {
    throw new UnsupportedModelError(`unsupported sklearn model ${dump.model_type}`);
  }
  if (dump.n_classes === 2) {
    // One signed tree per estimator: leaf = P(class 1) - P(class 0).
    return {
      format_version: 1,
      task: "binary_classification",
      n_classes: 1,
      n_features: dump.n_features,
      reduction: "sum",
      trees: dump.estimators.map((tree, i) =>
        convertTree(tree, i, 0, (t, node) => {
          const dist = leafDistribution(t, node);
          return dist[1] - dist[0];
        })),
    };
  }
  const model: InterchangeModel = {
    format_version: 1,
    task: "multiclass_classification",
    n_classes: dump.n_classes,
    n_features: dump.n_features,
    reduction: "sum",
    trees: [],
  };
  dump.estimators.forEach((tree, e) => {
    for (let k = 0; k < dump.n_classes; k += 1) {
      model.trees.push(convertTree(tree, e * dump.n_classes + k, k,
                                   (t, node) => leafDistribution(t, node)[k]));
    }
  });
  return model;
}
