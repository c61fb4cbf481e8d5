"""Compile quantized ensembles into CAM range tables, core placements, and
router programs.

Each root-to-leaf path becomes one table row of per-feature half-open code
ranges; untouched features stay full-range (don't care).  Trees are assigned
to cores round-robin first-fit, never split across cores, and the router
configuration bits are derived from subtree purity: a router accumulates
(bit 1) iff every core below it carries a single (class, batch-group) stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import QuantizationGrid, QuantizedEnsemble, Tree, parse_ensemble
from .errors import CapacityError, EmptyRangeError, FixedPointOverflowError, RangeError
from .noc import HTreeTopology, build_htree

PLAN_VERSION = 1

FLIT_VALUE_BITS = 32
FLIT_VALUE_MAX = 2 ** (FLIT_VALUE_BITS - 1) - 1


@dataclass(frozen=True)
class ChipConfig:
    """Geometry and clocking of one chip."""
    n_cores: int = 4096
    stacked_arrays: int = 2
    rows_per_array: int = 128
    queued_arrays: int = 2
    cols_per_array: int = 65
    n_bits: int = 8
    memristor_bits: int = 4
    clock_hz: float = 1.0e9
    noc_arity: int = 4
    cam_search_cycles: int = 4
    core_latency_cycles: int = 12

    def __post_init__(self):
        if self.n_bits not in (self.memristor_bits, 2 * self.memristor_bits):
            raise RangeError("n_bits must equal memristor_bits or twice it")

    @property
    def words_per_core(self):
        return self.stacked_arrays * self.rows_per_array

    @property
    def feature_capacity(self):
        return self.queued_arrays * self.cols_per_array

    @property
    def precision_doubling(self):
        return self.n_bits == 2 * self.memristor_bits

    @property
    def noc_depth(self):
        return round(math.log(self.n_cores, self.noc_arity))

    def to_dict(self):
        return {"n_cores": self.n_cores, "stacked_arrays": self.stacked_arrays,
                "rows_per_array": self.rows_per_array, "queued_arrays": self.queued_arrays,
                "cols_per_array": self.cols_per_array, "n_bits": self.n_bits,
                "memristor_bits": self.memristor_bits, "clock_hz": self.clock_hz,
                "noc_arity": self.noc_arity, "cam_search_cycles": self.cam_search_cycles,
                "core_latency_cycles": self.core_latency_cycles}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class CamRow:
    """One root-to-leaf path: per-feature [lo, hi) code ranges plus leaf metadata."""
    lo: np.ndarray
    hi: np.ndarray
    leaf_value: float
    tree_id: int
    class_id: int


def extract_paths(tree, n_features, n_bits, reduction="sum"):
    """Flatten one quantized tree into CAM rows, one per leaf.

    A left branch at (f, T) intersects feature f's range with [., T); a right
    branch with [T, .).  For majority-vote models the row's class is the
    leaf's voted class and the stored value is one vote.
    """
    full = 1 << n_bits
    rows = []
    lo0 = np.zeros(n_features, dtype=np.int32)
    hi0 = np.full(n_features, full, dtype=np.int32)
    stack = [(tree.root, lo0, hi0)]
    while stack:
        node, lo, hi = stack.pop()
        if tree.is_leaf[node]:
            value = float(tree.value[node])
            if reduction == "majority":
                rows.append(CamRow(lo, hi, 1.0, tree.tree_id, int(round(value))))
            else:
                rows.append(CamRow(lo, hi, value, tree.tree_id, tree.class_id))
            continue
        f = int(tree.feature[node])
        t = int(tree.threshold[node])
        left_hi = hi.copy()
        left_hi[f] = min(left_hi[f], t)
        if lo[f] >= left_hi[f]:
            raise EmptyRangeError(f"tree {tree.tree_id}: empty left range at node {node}")
        right_lo = lo.copy()
        right_lo[f] = max(right_lo[f], t)
        if right_lo[f] >= hi[f]:
            raise EmptyRangeError(f"tree {tree.tree_id}: empty right range at node {node}")
        # Push right first so leaves pop out in left-to-right order.
        stack.append((tree.right[node], right_lo, hi))
        stack.append((tree.left[node], lo, left_hi))
    return rows


class CamTable:
    """Column-major concatenation of every tree's rows, sorted by tree_id."""

    def __init__(self, lo, hi, values, tree_ids, class_ids, tree_slices,
                 n_features, n_bits, task, reduction, n_classes):
        self.lo = lo
        self.hi = hi
        self.values = values
        self.tree_ids = tree_ids
        self.class_ids = class_ids
        self.tree_slices = tree_slices  # tree_id -> (offset, count)
        self.n_features = n_features
        self.n_bits = n_bits
        self.task = task
        self.reduction = reduction
        self.n_classes = n_classes

    @property
    def n_rows(self):
        return len(self.values)

    @property
    def logical_columns(self):
        return 2 * self.n_features + 3

    def rows(self):
        for i in range(self.n_rows):
            yield CamRow(self.lo[i], self.hi[i], float(self.values[i]),
                         int(self.tree_ids[i]), int(self.class_ids[i]))


def build_cam_table(model):
    """Flatten a quantized ensemble; table height equals the total leaf count."""
    if not isinstance(model, QuantizedEnsemble):
        raise RangeError("build_cam_table expects a quantized ensemble")
    trees = sorted(model.trees, key=lambda t: t.tree_id)
    total = sum(t.n_leaves for t in trees)
    lo = np.zeros((total, model.n_features), dtype=np.int32)
    hi = np.zeros((total, model.n_features), dtype=np.int32)
    values = np.zeros(total, dtype=np.float64)
    tree_ids = np.zeros(total, dtype=np.int32)
    class_ids = np.zeros(total, dtype=np.int32)
    tree_slices = {}
    offset = 0
    for tree in trees:
        rows = extract_paths(tree, model.n_features, model.n_bits, model.reduction)
        tree_slices[tree.tree_id] = (offset, len(rows))
        for row in rows:
            lo[offset] = row.lo
            hi[offset] = row.hi
            values[offset] = row.leaf_value
            tree_ids[offset] = row.tree_id
            class_ids[offset] = row.class_id
            offset += 1
    return CamTable(lo, hi, values, tree_ids, class_ids, tree_slices,
                    model.n_features, model.n_bits, model.task, model.reduction,
                    model.n_classes)


@dataclass
class CorePlacement:
    """Rows, SRAM contents, and tree metadata mapped onto one physical core."""
    core_index: int
    batch_group: int
    trees: list  # (tree_id, row_offset, row_count)
    lo: np.ndarray  # (rows_used, n_features) int32
    hi: np.ndarray
    leaf_values: np.ndarray  # float64, SRAM contents
    leaf_scaled: np.ndarray  # int64, fixed-point SRAM contents
    row_class: np.ndarray  # int32 class id per row

    @property
    def rows_used(self):
        return len(self.leaf_values)

    @property
    def n_trees(self):
        return len(self.trees)

    @property
    def classes_present(self):
        return sorted(set(int(c) for c in self.row_class))


@dataclass
class PlacementPlan:
    """Trees-to-cores assignment plus the fixed-point leaf encoding."""
    chip: ChipConfig
    cores: list  # CorePlacement, ordered by core_index
    n_features: int
    n_bits: int
    task: str
    reduction: str
    n_classes: int
    leaf_scale_bits: int
    lossy_leaves: bool
    max_leaf_round_error: float
    n_leaves_max: int
    batch_factor: int = 1

    @property
    def cores_used(self):
        return len(self.cores)

    @property
    def trees_per_core_max(self):
        return max(c.n_trees for c in self.cores)

    @property
    def total_rows(self):
        return sum(c.rows_used for c in self.cores)

    def core_by_index(self):
        return {c.core_index: c for c in self.cores}


def _leaf_scale(table):
    """Largest power-of-two scale keeping every worst-case class sum in 32 bits."""
    per_class = {}
    for tree_id, (off, cnt) in table.tree_slices.items():
        vals = np.abs(table.values[off:off + cnt])
        classes = table.class_ids[off:off + cnt]
        for cls in np.unique(classes):
            m = vals[classes == cls].max() if (classes == cls).any() else 0.0
            per_class[cls] = per_class.get(cls, 0.0) + float(m)
    bound = max(per_class.values()) if per_class else 0.0
    if bound == 0.0:
        return 16, False, 0.0
    scale_bits = int(math.floor(math.log2(FLIT_VALUE_MAX / bound))) if bound < FLIT_VALUE_MAX else 0
    if bound * (2.0 ** scale_bits) > FLIT_VALUE_MAX:
        scale_bits -= 1
    if scale_bits < -31:
        raise FixedPointOverflowError(f"leaf sums too large for the flit format (bound {bound})")
    scale = 2.0 ** scale_bits
    scaled = np.rint(table.values * scale)
    err = np.abs(scaled / scale - table.values).max()
    return scale_bits, bool(err > 0.0), float(err)


def _align_up(value, block):
    return ((value + block - 1) // block) * block


def _subtree_block(n_cores_needed, arity):
    """Smallest arity-power block that can hold the group under one subtree."""
    block = 1
    while block < n_cores_needed:
        block *= arity
    return block


def place(table, chip=None, trees_per_core_cap=None):
    """Round-robin first-fit assignment of whole trees to cores.

    Cores hold at most ``trees_per_core_cap`` trees (default 4 while the chip
    has room, since a fuller core lengthens the initiation interval); the cap
    escalates automatically when the chip would otherwise run out of cores.
    Class-tagged multiclass trees are grouped so each core is class-pure and
    each class group sits under an aligned subtree.
    """
    chip = chip or ChipConfig()
    if table.n_features > chip.feature_capacity:
        raise CapacityError(
            f"features exceed capacity {chip.feature_capacity}: model has {table.n_features}")
    words = chip.words_per_core
    for tree_id, (off, cnt) in sorted(table.tree_slices.items()):
        if cnt > words:
            raise CapacityError(f"tree {tree_id} too tall: {cnt} leaves > {words} words")
    if table.n_rows > chip.n_cores * words:
        raise CapacityError(
            f"total rows exceed chip: {table.n_rows} > {chip.n_cores * words}")

    pure_classes = table.task == "multiclass_classification" and table.reduction == "sum"
    groups = {}
    for tree_id in sorted(table.tree_slices):
        off, cnt = table.tree_slices[tree_id]
        key = int(table.class_ids[off]) if pure_classes else 0
        groups.setdefault(key, []).append((tree_id, off, cnt))

    base_cap = trees_per_core_cap if trees_per_core_cap is not None else 4
    if base_cap < 1:
        raise RangeError("trees_per_core_cap must be >= 1")
    cap = min(base_cap, words)
    caps = []
    while cap <= words:
        caps.append(cap)
        cap *= 2
    if caps[-1] != words:
        caps.append(words)

    last_error = None
    for cap in caps:
        try:
            cores = _try_place(groups, table, chip, cap)
            break
        except CapacityError as exc:
            last_error = exc
            if trees_per_core_cap is not None:
                raise
    else:
        raise last_error

    scale_bits, lossy, err = _leaf_scale(table)
    scale = 2.0 ** scale_bits
    for core in cores:
        core.leaf_scaled = np.rint(core.leaf_values * scale).astype(np.int64)
    n_leaves_max = max(cnt for _, cnt in table.tree_slices.values())
    return PlacementPlan(chip, cores, table.n_features, table.n_bits, table.task,
                         table.reduction, table.n_classes, scale_bits, lossy, err,
                         n_leaves_max)


def _try_place(groups, table, chip, cap):
    words = chip.words_per_core
    arity = chip.noc_arity
    cores = []
    next_free_index = 0
    for key in sorted(groups):
        trees = groups[key]
        rows_total = sum(cnt for _, _, cnt in trees)
        est_cores = max(1, math.ceil(rows_total / words), math.ceil(len(trees) / cap))
        block = _subtree_block(est_cores, arity)
        start = _align_up(next_free_index, min(block, chip.n_cores))
        group_cores = [[[], 0] for _ in range(est_cores)]  # [tree list, rows used]
        cursor = 0
        for tree_id, off, cnt in trees:
            placed = False
            for step in range(len(group_cores)):
                idx = (cursor + step) % len(group_cores)
                entry = group_cores[idx]
                if len(entry[0]) < cap and entry[1] + cnt <= words:
                    entry[0].append((tree_id, off, cnt))
                    entry[1] += cnt
                    cursor = (idx + 1) % len(group_cores)
                    placed = True
                    break
            if not placed:
                if start + len(group_cores) >= chip.n_cores:
                    raise CapacityError(
                        f"total rows exceed chip: ran out of cores placing tree {tree_id}")
                group_cores.append([[(tree_id, off, cnt)], cnt])
                cursor = 0
        group_cores = [g for g in group_cores if g[0]]
        for i, (tree_list, _) in enumerate(group_cores):
            cores.append(_make_core(start + i, tree_list, table))
        next_free_index = start + _subtree_block(len(group_cores), arity) \
            if len(group_cores) > 1 else start + len(group_cores)
    if cores and max(c.core_index for c in cores) >= chip.n_cores:
        raise CapacityError("placement exceeded available cores")
    return cores


def _make_core(core_index, tree_list, table):
    rows = sum(cnt for _, _, cnt in tree_list)
    lo = np.zeros((rows, table.n_features), dtype=np.int32)
    hi = np.zeros((rows, table.n_features), dtype=np.int32)
    values = np.zeros(rows, dtype=np.float64)
    row_class = np.zeros(rows, dtype=np.int32)
    trees = []
    offset = 0
    for tree_id, off, cnt in tree_list:
        lo[offset:offset + cnt] = table.lo[off:off + cnt]
        hi[offset:offset + cnt] = table.hi[off:off + cnt]
        values[offset:offset + cnt] = table.values[off:off + cnt]
        row_class[offset:offset + cnt] = table.class_ids[off:off + cnt]
        trees.append((tree_id, offset, cnt))
        offset += cnt
    return CorePlacement(core_index, 0, trees, lo, hi, values,
                         np.zeros(rows, dtype=np.int64), row_class)


CP_OPS = {"regression": "identity", "binary_classification": "threshold",
          "multiclass_classification": "argmax"}


@dataclass
class NocProgram:
    """Router configuration bits, batch groups, and the co-processor op.

    Carries the (possibly replicated) placement it was derived from; the
    original plan passed to :func:`configure_noc` is never modified.
    """
    plan: PlacementPlan
    topology: HTreeTopology
    router_bits: dict  # router_id -> 0/1, only routers above active cores
    core_groups: dict  # core_index -> batch group
    cp_op: str
    decision_threshold: float
    n_batch_groups: int

    def bit_for(self, router_id):
        return self.router_bits.get(router_id, 0)


def configure_noc(plan, model, batch_factor=1, decision_threshold=0.0):
    """Derive the router program (and replicated placement) for a plan.

    Replication clones the whole placement ``batch_factor`` times into
    aligned subtree blocks.  A router's bit is 1 iff every active core in its
    subtree carries the same (class, batch-group) stream, which reproduces
    the all-accumulate, forward-only, and batched configurations.
    """
    if batch_factor < 1:
        raise RangeError("batch_factor must be >= 1")
    chip = plan.chip
    topology = build_htree(chip.n_cores, chip.noc_arity)

    cores = []
    span = max(c.core_index for c in plan.cores) + 1
    block = _subtree_block(span, chip.noc_arity)
    if batch_factor * block > chip.n_cores:
        raise CapacityError(
            f"replication x{batch_factor} overflows cores: "
            f"{batch_factor} x {block} > {chip.n_cores}")
    for group in range(batch_factor):
        base = group * block
        for core in plan.cores:
            cores.append(CorePlacement(base + core.core_index, group, core.trees,
                                       core.lo, core.hi, core.leaf_values,
                                       core.leaf_scaled, core.row_class))
    expanded = PlacementPlan(chip, cores, plan.n_features, plan.n_bits, plan.task,
                             plan.reduction, plan.n_classes, plan.leaf_scale_bits,
                             plan.lossy_leaves, plan.max_leaf_round_error,
                             plan.n_leaves_max, batch_factor)

    # Stream key per core: (classes present, batch group); purity drives bits.
    core_keys = {}
    for core in cores:
        classes = core.classes_present
        key = (classes[0], core.batch_group) if len(classes) == 1 else None
        core_keys[core.core_index] = key

    router_bits = {}
    for router_id in topology.routers_above(core_keys.keys()):
        keys = {core_keys[c] for c in topology.active_cores_under(router_id, core_keys.keys())}
        router_bits[router_id] = 1 if (len(keys) == 1 and None not in keys) else 0

    core_groups = {c.core_index: c.batch_group for c in cores}
    return NocProgram(expanded, topology, router_bits, core_groups,
                      CP_OPS[plan.task], decision_threshold, batch_factor)


def compile_model(qmodel, chip=None, batch_factor=1, decision_threshold=0.0,
                  trees_per_core_cap=None):
    """Convenience front end: table -> placement -> router program."""
    chip = chip or ChipConfig()
    table = build_cam_table(qmodel)
    plan = place(table, chip, trees_per_core_cap)
    program = configure_noc(plan, qmodel, batch_factor, decision_threshold)
    return table, plan, program


def effective_ensemble(qmodel, leaf_scale_bits):
    """The model as actually programmed: leaf values at SRAM fixed-point precision.

    Verification compares the simulated chip against this model; for leaves
    already on the fixed-point grid it is identical to the input model.
    """
    scale = 2.0 ** leaf_scale_bits
    trees = []
    for t in qmodel.trees:
        value = np.where(t.is_leaf, np.rint(t.value * scale) / scale, t.value)
        trees.append(Tree(t.tree_id, t.class_id, t.feature, t.threshold, t.left,
                          t.right, value, t.is_leaf, root=t.root, node_ids=t.node_ids))
    return QuantizedEnsemble(qmodel.task, qmodel.n_classes, qmodel.n_features,
                             qmodel.reduction, trees, qmodel.grid)


def save_artifact(program, qmodel, path):
    """Write the placement+program artifact (plan_version 1) as stable JSON."""
    plan = program.plan
    doc = {
        "plan_version": PLAN_VERSION,
        "chip": plan.chip.to_dict(),
        "model": {
            "task": plan.task,
            "reduction": plan.reduction,
            "n_classes": plan.n_classes,
            "n_features": plan.n_features,
            "n_bits": plan.n_bits,
            "leaf_scale_bits": plan.leaf_scale_bits,
            "lossy_leaves": plan.lossy_leaves,
            "max_leaf_round_error": plan.max_leaf_round_error,
            "decision_threshold": program.decision_threshold,
            "interchange": qmodel.to_dict(as_codes=True),
            "grid": qmodel.grid.to_dict(),
        },
        "placement": {
            "n_leaves_max": plan.n_leaves_max,
            "batch_factor": plan.batch_factor,
            "cores": [{
                "core_index": c.core_index,
                "batch_group": c.batch_group,
                "trees": [[int(t), int(o), int(n)] for t, o, n in c.trees],
                "lo": c.lo.tolist(),
                "hi": c.hi.tolist(),
                "leaf_values": c.leaf_values.tolist(),
                "leaf_scaled": c.leaf_scaled.tolist(),
                "row_class": c.row_class.tolist(),
            } for c in plan.cores],
        },
        "noc": {
            "arity": program.topology.arity,
            "depth": program.topology.depth,
            "cp_op": program.cp_op,
            "n_batch_groups": program.n_batch_groups,
            "router_bits": {str(k): int(v) for k, v in sorted(program.router_bits.items())},
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return doc


def load_artifact(path):
    """Reload a plan_version-1 artifact into (program, quantized model)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("plan_version") != PLAN_VERSION:
        raise RangeError(f"unsupported plan_version {doc.get('plan_version')!r}")
    chip = ChipConfig.from_dict(doc["chip"])
    m = doc["model"]
    base = parse_ensemble(json.dumps(m["interchange"]))
    grid = QuantizationGrid.from_dict(m["grid"])
    qmodel = QuantizedEnsemble(base.task, base.n_classes, base.n_features,
                               base.reduction, base.trees, grid)

    cores = []
    for c in doc["placement"]["cores"]:
        cores.append(CorePlacement(
            c["core_index"], c["batch_group"],
            [tuple(t) for t in c["trees"]],
            np.asarray(c["lo"], dtype=np.int32),
            np.asarray(c["hi"], dtype=np.int32),
            np.asarray(c["leaf_values"], dtype=np.float64),
            np.asarray(c["leaf_scaled"], dtype=np.int64),
            np.asarray(c["row_class"], dtype=np.int32)))
    plan = PlacementPlan(chip, cores, m["n_features"], m["n_bits"], m["task"],
                         m["reduction"], m["n_classes"], m["leaf_scale_bits"],
                         m["lossy_leaves"], m["max_leaf_round_error"],
                         doc["placement"]["n_leaves_max"],
                         doc["placement"]["batch_factor"])
    topology = build_htree(chip.n_cores, doc["noc"]["arity"])
    program = NocProgram(plan, topology,
                         {int(k): v for k, v in doc["noc"]["router_bits"].items()},
                         {c.core_index: c.batch_group for c in cores},
                         doc["noc"]["cp_op"], m["decision_threshold"],
                         doc["noc"]["n_batch_groups"])
    return program, qmodel
