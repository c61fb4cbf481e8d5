/**
 * XGBoost JSON dump support: the nested per-tree format produced by
 * get_dump(dump_format="json").  Split semantics: x < split_condition takes
 * the "yes" branch; NaN takes the "missing" branch.  Multiclass boosters lay
 * trees out one-per-class-per-round, which maps directly onto class-tagged
 * interchange trees.
 */

import {
  InterchangeModel, Task, UnsupportedModelError, branchNode, leafNode,
} from "../interchange";

export interface XgbLeaf {
  nodeid: number;
  leaf: number;
}

export interface XgbBranch {
  nodeid: number;
  split: string;
  split_condition: number;
  yes: number;
  no: number;
  missing?: number;
  children: Array<XgbBranch | XgbLeaf>;
  depth?: number;
}

export type XgbNode = XgbBranch | XgbLeaf;

export interface XgbMeta {
  task: Task;
  nClasses: number;
  nFeatures: number;
}

function isLeaf(node: XgbNode): node is XgbLeaf {
  return (node as XgbLeaf).leaf !== undefined;
}

export function parseDump(text: string): XgbNode[] {
  const doc = JSON.parse(text);
  if (!Array.isArray(doc)) {
    throw new UnsupportedModelError("XGBoost dump must be a JSON array of trees");
  }
  return doc as XgbNode[];
}

function featureIndex(split: string): number {
  const match = /^f(\d+)$/.exec(split);
  if (match === null) {
    throw new UnsupportedModelError(
      `non-numeric split ${JSON.stringify(split)}; categorical splits are not supported`);
  }
  return parseInt(match[1], 10);
}

function evalTree(root: XgbNode, x: number[]): number {
  let node = root;
  while (!isLeaf(node)) {
    const value = x[featureIndex(node.split)];
    let target: number;
    if (Number.isNaN(value)) {
      target = node.missing ?? node.yes;
    } else {
      target = value < node.split_condition ? node.yes : node.no;
    }
    const next = node.children.find((c) => c.nodeid === target);
    if (next === undefined) {
      throw new UnsupportedModelError(`tree is missing node ${target}`);
    }
    node = next;
  }
  return node.leaf;
}

/** Per-class margins under the dump's own semantics (the parity reference). */
export function nativeMargins(trees: XgbNode[], x: number[], nClasses: number): number[] {
  const margins = new Array<number>(Math.max(1, nClasses === 2 ? 1 : nClasses)).fill(0);
  trees.forEach((tree, i) => {
    const cls = nClasses > 2 ? i % nClasses : 0;
    margins[cls] += evalTree(tree, x);
  });
  return margins;
}

export function nativePredict(trees: XgbNode[], x: number[], meta: XgbMeta): number {
  const margins = nativeMargins(trees, x, meta.nClasses);
  if (meta.task === "regression") {
    return margins[0];
  }
  if (meta.task === "binary_classification") {
    return margins[0] >= 0 ? 1 : 0;
  }
  let best = 0;
  for (let c = 1; c < margins.length; c += 1) {
    if (margins[c] > margins[best]) {
      best = c;
    }
  }
  return best;
}

export function toInterchange(trees: XgbNode[], meta: XgbMeta): InterchangeModel {
  const model: InterchangeModel = {
    format_version: 1,
    task: meta.task,
    n_classes: meta.task === "multiclass_classification" ? meta.nClasses : 1,
    n_features: meta.nFeatures,
    reduction: "sum",
    trees: [],
  };
  trees.forEach((root, i) => {
    const nodes: InterchangeModel["trees"][0]["nodes"] = [];
    const walk = (node: XgbNode): void => {
      if (isLeaf(node)) {
        nodes.push(leafNode(node.nodeid, node.leaf));
        return;
      }
      nodes.push(branchNode(node.nodeid, featureIndex(node.split),
                            node.split_condition, node.yes, node.no));
      for (const child of node.children) {
        walk(child);
      }
    };
    walk(root);
    nodes.sort((a, b) => a.id - b.id);
    const classId = meta.task === "multiclass_classification" ? i % meta.nClasses : 0;
    model.trees.push({ tree_id: i, class_id: classId, nodes });
  });
  return model;
}
