/**
 * The accelerator's model interchange format (format_version 1) plus
 * validation and canonical serialization.
 *
 * Splits are strict: an input goes left iff feature < threshold.  Leaf values
 * are raw additive logits on the margin scale; link functions never enter the
 * file.
 */

export type Task = "regression" | "binary_classification" | "multiclass_classification";
export type Reduction = "sum" | "majority";

export interface InterchangeNode {
  id: number;
  feature: number | null;
  threshold: number | null;
  left: number | null;
  right: number | null;
  value: number | null;
  is_leaf: boolean;
}

export interface InterchangeTree {
  tree_id: number;
  class_id: number;
  nodes: InterchangeNode[];
}

export interface InterchangeModel {
  format_version: 1;
  task: Task;
  n_classes: number;
  n_features: number;
  reduction: Reduction;
  trees: InterchangeTree[];
}

export class SchemaError extends Error {}
export class UnsupportedModelError extends Error {}

export function leafNode(id: number, value: number): InterchangeNode {
  return { id, feature: null, threshold: null, left: null, right: null, value, is_leaf: true };
}

export function branchNode(id: number, feature: number, threshold: number,
                           left: number, right: number): InterchangeNode {
  return { id, feature, threshold, left, right, value: null, is_leaf: false };
}

/** Structural validation mirroring the simulator's parser. */
export function validateModel(model: InterchangeModel): void {
  if (model.format_version !== 1) {
    throw new SchemaError(`unsupported format_version ${model.format_version}`);
  }
  if (model.n_features < 1 || model.trees.length === 0) {
    throw new SchemaError("model needs n_features >= 1 and at least one tree");
  }
  const classBound =
    model.task === "multiclass_classification" ? model.n_classes : 1;
  if (model.task !== "multiclass_classification" && model.n_classes !== 1) {
    throw new SchemaError("regression/binary models must declare n_classes = 1");
  }
  const seenTreeIds = new Set<number>();
  for (const tree of model.trees) {
    if (seenTreeIds.has(tree.tree_id)) {
      throw new SchemaError(`duplicate tree_id ${tree.tree_id}`);
    }
    seenTreeIds.add(tree.tree_id);
    if (tree.class_id < 0 || tree.class_id >= classBound) {
      throw new SchemaError(`tree ${tree.tree_id}: class_id ${tree.class_id} out of range`);
    }
    const byId = new Map<number, InterchangeNode>();
    for (const node of tree.nodes) {
      if (byId.has(node.id)) {
        throw new SchemaError(`tree ${tree.tree_id}: duplicate node id ${node.id}`);
      }
      byId.set(node.id, node);
    }
    const referenced = new Set<number>();
    let leaves = 0;
    for (const node of tree.nodes) {
      if (node.is_leaf) {
        leaves += 1;
        if (node.value === null) {
          throw new SchemaError(`tree ${tree.tree_id}: leaf ${node.id} has no value`);
        }
        continue;
      }
      if (node.feature === null || node.threshold === null ||
          node.left === null || node.right === null) {
        throw new SchemaError(`tree ${tree.tree_id}: branch ${node.id} incomplete`);
      }
      if (node.feature < 0 || node.feature >= model.n_features) {
        throw new SchemaError(`tree ${tree.tree_id}: feature ${node.feature} out of range`);
      }
      for (const child of [node.left, node.right]) {
        if (!byId.has(child)) {
          throw new SchemaError(`tree ${tree.tree_id}: node ${node.id} lists missing child ${child}`);
        }
        if (referenced.has(child)) {
          throw new SchemaError(`tree ${tree.tree_id}: node ${child} referenced twice`);
        }
        referenced.add(child);
      }
    }
    const roots = tree.nodes.filter((n) => !referenced.has(n.id));
    if (roots.length !== 1) {
      throw new SchemaError(`tree ${tree.tree_id}: found ${roots.length} roots`);
    }
    if (leaves !== tree.nodes.length - leaves + 1) {
      throw new SchemaError(`tree ${tree.tree_id}: leaf/branch count mismatch`);
    }
  }
}

/** Root node id of an interchange tree (the one no other node references). */
export function rootOf(tree: InterchangeTree): number {
  const referenced = new Set<number>();
  for (const node of tree.nodes) {
    if (!node.is_leaf) {
      referenced.add(node.left as number);
      referenced.add(node.right as number);
    }
  }
  const root = tree.nodes.find((n) => !referenced.has(n.id));
  if (root === undefined) {
    throw new SchemaError(`tree ${tree.tree_id}: no root`);
  }
  return root.id;
}

/** Deterministic serialization: fixed key order, two-space indent. */
export function canonicalize(model: InterchangeModel): string {
  const trees = [...model.trees].sort((a, b) => a.tree_id - b.tree_id).map((tree) => ({
    tree_id: tree.tree_id,
    class_id: tree.class_id,
    nodes: tree.nodes.map((n) => ({
      id: n.id, feature: n.feature, threshold: n.threshold,
      left: n.left, right: n.right, value: n.value, is_leaf: n.is_leaf,
    })),
  }));
  const doc = {
    format_version: model.format_version,
    task: model.task,
    n_classes: model.n_classes,
    n_features: model.n_features,
    reduction: model.reduction,
    trees,
  };
  return JSON.stringify(doc, null, 1) + "\n";
}

export function parseModel(text: string): InterchangeModel {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    throw new SchemaError(`not valid JSON: ${err}`);
  }
  const model = doc as InterchangeModel;
  validateModel(model);
  return model;
}
