/**
 * Reference inference over interchange models: strict-< traversal, sum or
 * majority reduction, and the decision rules (threshold for binary, argmax
 * with lowest-index tie-break for multiclass).
 */

import { InterchangeModel, InterchangeTree, rootOf } from "./interchange";

export function traverse(tree: InterchangeTree, x: number[]): number {
  const byId = new Map(tree.nodes.map((n) => [n.id, n]));
  let node = byId.get(rootOf(tree))!;
  while (!node.is_leaf) {
    const next = x[node.feature as number] < (node.threshold as number)
      ? node.left as number
      : node.right as number;
    node = byId.get(next)!;
  }
  return node.value as number;
}

export function logitsFor(model: InterchangeModel, x: number[]): number[] {
  const logits = new Array<number>(model.n_classes).fill(0);
  for (const tree of model.trees) {
    const leaf = traverse(tree, x);
    if (model.reduction === "majority") {
      logits[Math.round(leaf)] += 1;
    } else {
      logits[tree.class_id] += leaf;
    }
  }
  return logits;
}

export function decide(model: InterchangeModel, logits: number[],
                       decisionThreshold = 0): number {
  if (model.task === "regression") {
    return logits[0];
  }
  if (model.task === "binary_classification") {
    return logits[0] >= decisionThreshold ? 1 : 0;
  }
  let best = 0;
  for (let c = 1; c < logits.length; c += 1) {
    if (logits[c] > logits[best]) {
      best = c;
    }
  }
  return best;
}

export function predict(model: InterchangeModel, x: number[],
                        decisionThreshold = 0): number {
  return decide(model, logitsFor(model, x), decisionThreshold);
}
