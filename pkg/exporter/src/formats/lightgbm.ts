/**
 * LightGBM text-dump support (model.txt).  Trees are blocks of parallel
 * arrays; children indices >= 0 point at internal nodes, negative values
 * encode leaves as -(leaf_index) - 1.  Numerical splits (decision_type 2)
 * send x <= threshold left, so interchange thresholds are bumped to the next
 * representable double to express the same set with a strict <.
 */

import {
  InterchangeModel, Task, UnsupportedModelError, branchNode, leafNode,
} from "../interchange";
import { nextUp } from "../util";

export interface LgbTree {
  numLeaves: number;
  splitFeature: number[];
  threshold: number[];
  decisionType: number[];
  leftChild: number[];
  rightChild: number[];
  leafValue: number[];
}

export interface LgbModel {
  numClass: number;
  maxFeatureIdx: number;
  objective: string;
  trees: LgbTree[];
}

export interface LgbMeta {
  task: Task;
  nClasses: number;
  nFeatures: number;
}

const NUMERICAL_DECISION = 2;

export function parseDump(text: string): LgbModel {
  const headerFields = new Map<string, string>();
  const trees: LgbTree[] = [];
  let block: Map<string, string> | null = null;

  const finish = () => {
    if (block === null) {
      return;
    }
    const need = (key: string): string => {
      const value = block!.get(key);
      if (value === undefined) {
        throw new UnsupportedModelError(`tree block missing field ${key}`);
      }
      return value;
    };
    const numLeaves = parseInt(need("num_leaves"), 10);
    const ints = (s: string) => (s.trim() === "" ? [] : s.trim().split(/\s+/).map(Number));
    trees.push({
      numLeaves,
      splitFeature: numLeaves > 1 ? ints(need("split_feature")) : [],
      threshold: numLeaves > 1 ? ints(need("threshold")) : [],
      decisionType: numLeaves > 1 ? ints(need("decision_type")) : [],
      leftChild: numLeaves > 1 ? ints(need("left_child")) : [],
      rightChild: numLeaves > 1 ? ints(need("right_child")) : [],
      leafValue: ints(need("leaf_value")),
    });
    block = null;
  };

  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (line === "end of trees") {
      break;
    }
    if (line.startsWith("Tree=")) {
      finish();
      block = new Map();
      continue;
    }
    const eq = line.indexOf("=");
    if (eq < 0) {
      continue;
    }
    const key = line.slice(0, eq);
    const value = line.slice(eq + 1);
    if (block !== null) {
      block.set(key, value);
    } else {
      headerFields.set(key, value);
    }
  }
  finish();

  if (trees.length === 0) {
    throw new UnsupportedModelError("no Tree= blocks found");
  }
  for (const tree of trees) {
    for (const dt of tree.decisionType) {
      // Low bits 1 encode a categorical split.
      if ((dt & 1) !== 0 || (dt & ~3) !== 0) {
        throw new UnsupportedModelError(
          `decision_type ${dt}: only numerical splits are supported`);
      }
    }
  }
  return {
    numClass: parseInt(headerFields.get("num_class") ?? "1", 10),
    maxFeatureIdx: parseInt(headerFields.get("max_feature_idx") ?? "-1", 10),
    objective: headerFields.get("objective") ?? "",
    trees,
  };
}

function evalTree(tree: LgbTree, x: number[]): number {
  if (tree.numLeaves === 1) {
    return tree.leafValue[0];
  }
  let node = 0;
  for (;;) {
    const next = x[tree.splitFeature[node]] <= tree.threshold[node]
      ? tree.leftChild[node]
      : tree.rightChild[node];
    if (next < 0) {
      return tree.leafValue[-next - 1];
    }
    node = next;
  }
}

export function nativePredict(model: LgbModel, x: number[], meta: LgbMeta): number {
  if (meta.task === "multiclass_classification") {
    const margins = new Array<number>(meta.nClasses).fill(0);
    model.trees.forEach((tree, i) => {
      margins[i % meta.nClasses] += evalTree(tree, x);
    });
    let best = 0;
    for (let c = 1; c < margins.length; c += 1) {
      if (margins[c] > margins[best]) {
        best = c;
      }
    }
    return best;
  }
  let margin = 0;
  for (const tree of model.trees) {
    margin += evalTree(tree, x);
  }
  return meta.task === "regression" ? margin : (margin >= 0 ? 1 : 0);
}

export function toInterchange(model: LgbModel, meta: LgbMeta): InterchangeModel {
  const out: InterchangeModel = {
    format_version: 1,
    task: meta.task,
    n_classes: meta.task === "multiclass_classification" ? meta.nClasses : 1,
    n_features: meta.nFeatures,
    reduction: "sum",
    trees: [],
  };
  model.trees.forEach((tree, i) => {
    const nodes: InterchangeModel["trees"][0]["nodes"] = [];
    const nInternal = tree.numLeaves - 1;
    const nodeId = (child: number) => (child < 0 ? nInternal + (-child - 1) : child);
    for (let n = 0; n < nInternal; n += 1) {
      nodes.push(branchNode(n, tree.splitFeature[n], nextUp(tree.threshold[n]),
                            nodeId(tree.leftChild[n]), nodeId(tree.rightChild[n])));
    }
    tree.leafValue.forEach((value, j) => {
      nodes.push(leafNode(nInternal + j, value));
    });
    const classId = meta.task === "multiclass_classification" ? i % meta.nClasses : 0;
    out.trees.push({ tree_id: i, class_id: classId, nodes });
  });
  return out;
}
