"""Chip-level simulation: cycle-bucketed discrete events over cores, routers,
and the co-processor, plus analytic throughput models, parameter sweeps,
defect experiments, and the cost model.

The engine streams feature flits from the root (one injection port, one flit
per cycle, eight codes per flit), multicasts them down the paths to the
target batch group's cores, runs each core's pipeline, and carries logit
flits back up with one cycle per hop plus one per in-router accumulation.
Samples are issued at a fixed chip initiation interval derived from the
streaming width, the busiest core, and the number of upstream logit streams,
so the pipeline is hazard-free by construction; the engine asserts that.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .acam import DefectSpec, apply_defects
from .compiler import ChipConfig, NocProgram, PlacementPlan
from .core import (CORE_LATENCY_CYCLES, CorePipeline, CoreState, core_infer_batch,
                   initiation_interval)
from .ensemble import Prediction, decide
from .errors import (CapacityError, ConfigError, DimensionError, HazardError,
                     IncompleteError, RangeError)
from .noc import (ACCUMULATE_CYCLES, BUFFER_FLITS, FEATURES_PER_FLIT, HOP_CYCLES,
                  LogitFormat)
from .synth import make_random_ensemble, make_samples

METRICS_VERSION = 1


@dataclass
class SimMetrics:
    """Cycle counts, rates, energy, and bookkeeping for one simulated run."""
    n_samples: int
    total_cycles: int
    clock_hz: float
    latency_cycles_mean: float
    latency_cycles_max: int
    latency_ns_mean: float
    throughput_sps: float
    core_throughput_sps: float
    core_total_cycles: int
    initiation_interval: int
    cores_used: int
    routers_active: int
    energy_per_decision_j: float = 0.0
    relative_accuracy: float | None = None
    utilization: dict = field(default_factory=dict)
    latency_breakdown: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    activity: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "metrics_version": METRICS_VERSION,
            "n_samples": self.n_samples,
            "total_cycles": self.total_cycles,
            "clock_hz": self.clock_hz,
            "latency_cycles_mean": self.latency_cycles_mean,
            "latency_cycles_max": self.latency_cycles_max,
            "latency_ns_mean": self.latency_ns_mean,
            "throughput_sps": self.throughput_sps,
            "core_throughput_sps": self.core_throughput_sps,
            "core_total_cycles": self.core_total_cycles,
            "initiation_interval": self.initiation_interval,
            "cores_used": self.cores_used,
            "routers_active": self.routers_active,
            "energy_per_decision_j": self.energy_per_decision_j,
            "relative_accuracy": self.relative_accuracy,
            "utilization": self.utilization,
            "latency_breakdown": self.latency_breakdown,
            "flow": self.flow,
            "activity": self.activity,
        }
        return d


class _RouterNode:
    """Per-router bookkeeping on the upstream logit path."""

    __slots__ = ("router_id", "config_bit", "expected", "acc", "out_free",
                 "traversals", "accumulations", "forwarded", "absorbed",
                 "max_wait", "peak_buffer")

    def __init__(self, router_id, config_bit):
        self.router_id = router_id
        self.config_bit = config_bit
        self.expected = {}
        self.acc = {}
        self.out_free = -1
        self.traversals = 0
        self.accumulations = 0
        self.forwarded = 0
        self.absorbed = 0
        self.max_wait = 0
        self.peak_buffer = 0


class ChipEngine:
    """Deterministic cycle-granular simulation of one programmed chip."""

    def __init__(self, program: NocProgram, trace=None, strict=True):
        self.program = program
        self.plan = program.plan
        self.chip = self.plan.chip
        self.topology = program.topology
        self.trace = trace
        self.strict = strict
        self.fmt = LogitFormat(self.plan.leaf_scale_bits)

        multiclass = self.plan.task == "multiclass_classification"
        self.cores = []
        for cp in self.plan.cores:
            classes = cp.classes_present
            offset = classes[0] if (multiclass and len(classes) == 1) else 0
            state = CoreState.from_placement(cp, self.chip, class_offset=offset)
            self.cores.append(state)
        self.pipes = {c.core_index: CorePipeline(c, strict=strict) for c in self.cores}

        active = [c.core_index for c in self.cores]
        self.routers = {}
        for rid in self.topology.routers_above(active):
            self.routers[rid] = _RouterNode(rid, program.bit_for(rid))

        # Streams: each core's logits merge at its highest accumulating
        # ancestor whose subtree is pure; count expected child contributions
        # per router and the residual streams that reach the co-processor.
        self._wire_streams(active)

        self.feature_flits = math.ceil(self.plan.n_features / FEATURES_PER_FLIT)
        worst_core_ii = max(initiation_interval(c.n_trees, self.chip.cam_search_cycles)
                            for c in self.cores)
        groups = max(1, self.program.n_batch_groups)
        self.chip_interval = max(self.feature_flits,
                                 math.ceil(worst_core_ii / groups),
                                 self.cp_streams_per_sample_max)
        self.worst_core_interval = worst_core_ii

    def _wire_streams(self, active):
        """Per-router flit-count bookkeeping for the upstream logit cascade.

        ``flits_in[rid][key]`` counts the per-sample logit flits entering a
        router for one (class, batch-group) stream; an accumulating router
        waits for exactly that many before releasing one summed flit, while a
        forwarding router passes them all upward.  With purity-derived bits
        every accumulator waits on at most ``arity`` contributions.
        """
        topo = self.topology
        depth = topo.depth
        self.flits_in = {rid: {} for rid in self.routers}
        flits_up = {}  # rid -> {key: outgoing flit count}

        by_leaf_router = {}
        for state in self.cores:
            leaf_rid = topo.core_path(state.core_index)[-1]
            by_leaf_router.setdefault(leaf_rid, []).append(state)

        for level in range(depth - 1, -1, -1):
            for rid in self.routers:
                if topo.router_level(rid)[0] != level:
                    continue
                incoming = {}
                for state in by_leaf_router.get(rid, ()):  # cores (leaf level only)
                    for cls in state.classes_present:
                        key = (cls, state.batch_group)
                        incoming[key] = incoming.get(key, 0) + 1
                for child, counts in flits_up.items():
                    if topo.parent_router(child) == rid:
                        for key, n in counts.items():
                            incoming[key] = incoming.get(key, 0) + n
                self.flits_in[rid] = incoming
                node = self.routers[rid]
                node.expected = dict(incoming)
                if node.config_bit == 1:
                    flits_up[rid] = {key: 1 for key in incoming}
                else:
                    flits_up[rid] = dict(incoming)

        root_out = flits_up.get(0, {})
        self.cp_expected = {}  # (batch_group, class) -> contributions at CP
        cp_per_group = {}
        for (cls, group), n in root_out.items():
            self.cp_expected[(group, cls)] = n
            cp_per_group[group] = cp_per_group.get(group, 0) + n
        self.cp_streams_per_sample_max = max(cp_per_group.values()) if cp_per_group else 1

        # Input scheduling: query delivery is staggered per upstream stream
        # (class-interleaved for class-pure subtrees, per-core for mixed
        # cores) so one sample's logit flits occupy distinct cycles on every
        # forwarding link.
        self.core_stagger = {}
        stream_index = {}  # batch group -> {stream key: index}
        for state in sorted(self.cores, key=lambda c: c.core_index):
            path = topo.core_path(state.core_index)
            merge_root = None
            for rid in path:
                if self.routers[rid].config_bit == 1:
                    merge_root = rid
                    break
            group_streams = stream_index.setdefault(state.batch_group, {})
            first = None
            for cls in state.classes_present:
                skey = (merge_root, cls) if merge_root is not None \
                    else (("core", state.core_index), cls)
                if skey not in group_streams:
                    group_streams[skey] = len(group_streams)
                if first is None:
                    first = group_streams[skey]
            self.core_stagger[state.core_index] = first or 0

    # -- timing ------------------------------------------------------------

    def _downstream_cycles(self):
        """Hops from the injection port to a core's ingress."""
        return self.topology.depth * HOP_CYCLES

    def _class_stagger(self, state):
        """Stream-interleaved delivery offset driven by the co-processor."""
        return self.core_stagger.get(state.core_index, 0)

    def run(self, samples_codes, collect_traces=False):
        """Simulate every sample; returns (predictions, SimMetrics internals)."""
        codes = np.asarray(samples_codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != self.plan.n_features:
            raise DimensionError(
                f"samples must be (n, {self.plan.n_features}), got {codes.shape}")
        n_samples = codes.shape[0]
        groups = max(1, self.program.n_batch_groups)
        cores_by_group = {}
        for state in self.cores:
            cores_by_group.setdefault(state.batch_group, []).append(state)

        # Functional pass: per-core class sums and match counts, vectorized.
        sample_of_group = {g: np.flatnonzero(np.arange(n_samples) % groups == g)
                           for g in range(groups)}
        core_sums = {}
        core_counts = {}
        for state in self.cores:
            rows = sample_of_group[state.batch_group]
            if len(rows) == 0:
                core_sums[state.core_index] = ({}, rows)
                core_counts[state.core_index] = np.zeros(0, dtype=np.int64)
                continue
            sums, counts = core_infer_batch(state, codes[rows])
            if self.strict and not (counts == state.n_trees).all():
                bad = int(rows[np.flatnonzero(counts != state.n_trees)[0]])
                raise HazardError(
                    f"core {state.core_index}: sample {bad} matched {int(counts.min())} rows "
                    f"for {state.n_trees} trees")
            core_sums[state.core_index] = (sums, rows)
            core_counts[state.core_index] = counts

        interval = self.chip_interval
        down = self._downstream_cycles()
        depth = self.topology.depth
        fflits = self.feature_flits

        inject_free = -1
        decision_cycle = np.full(n_samples, -1, dtype=np.int64)
        logits_fp = np.zeros((n_samples, self.plan.n_classes), dtype=np.int64)
        latencies = np.zeros(n_samples, dtype=np.int64)
        # Telescoping per-sample timeline segments (issue -> last feature flit
        # -> last query delivery -> last core emission -> last CP ingress ->
        # decision); their sums equal the measured latency identically.
        seg = {"streaming": [], "delivery": [], "core": [], "up": [], "cp": []}
        feature_link_traversals = 0
        emitted_logits = 0
        absorbed_logits = 0
        direct_to_cp = 0
        trace_rows = [] if collect_traces else None
        batch_group_of = {c.core_index: c.batch_group for c in self.cores}

        for s in range(n_samples):
            group = s % groups
            t0 = s * interval
            # Root injection port serializes feature flits one per cycle.
            first = max(t0, inject_free + 1)
            if self.strict and first != t0:
                raise HazardError(f"injection port backlogged at sample {s}")
            last_flit = first + fflits - 1
            inject_free = last_flit

            group_cores = cores_by_group.get(group, [])
            # Multicast: the flits traverse every router on a path to the group.
            links = set()
            for state in group_cores:
                links.update(self.topology.core_path(state.core_index))
            feature_link_traversals += len(links) * fflits
            for rid in links:
                self.routers[rid].traversals += fflits

            arrivals = []
            last_ready = last_flit
            last_emit = last_flit
            for state in group_cores:
                stagger = self._class_stagger(state)
                query_ready = last_flit + down + stagger
                last_ready = max(last_ready, query_ready)
                sums, rows = core_sums[state.core_index]
                local_idx = int(np.searchsorted(rows, s))
                count = int(core_counts[state.core_index][local_idx])
                emit, _ = self.pipes[state.core_index].accept(s, query_ready, count)
                last_emit = max(last_emit, emit)
                if trace_rows is not None:
                    trace_rows.append({"cycle": int(query_ready), "event": "query_ready",
                                       "core": state.core_index, "sample": s})
                # A mixed-class core serializes one logit flit per class
                # onto its uplink.
                for idx, cls in enumerate(state.classes_present):
                    arrivals.append((emit + idx, state.core_index, cls,
                                     int(sums[cls][local_idx])))
                    emitted_logits += 1

            # Upstream cascade, processed level by level toward the root: an
            # accumulating router releases one summed flit per stream once
            # all expected contributions arrived (one extra cycle); a
            # forwarding router serializes flits onto its uplink one per
            # cycle.  Sorting keeps the walk deterministic.
            at_router = {}
            for emit, core_index, cls, value in sorted(arrivals):
                leaf_rid = self.topology.core_path(core_index)[-1]
                at_router.setdefault(leaf_rid, []).append(
                    (emit + HOP_CYCLES, cls, batch_group_of[core_index], value))
            released = []  # flits from the root router to the CP
            for level in range(depth - 1, -1, -1):
                level_rids = sorted(r for r in at_router
                                    if self.topology.router_level(r)[0] == level)
                for rid in level_rids:
                    node = self.routers[rid]
                    flits = sorted(at_router.pop(rid))
                    parent = self.topology.parent_router(rid)
                    out = []
                    if node.config_bit == 1:
                        acc = {}
                        for arrive, cls, bg, value in flits:
                            entry = acc.setdefault((cls, bg), [0, 0, -1])
                            entry[0] += value
                            entry[1] += 1
                            entry[2] = max(entry[2], arrive)
                            node.absorbed += 1
                            absorbed_logits += 1
                            node.peak_buffer = max(node.peak_buffer, entry[1])
                        for key in sorted(acc):
                            entry = acc[key]
                            if entry[1] != node.expected.get(key, -1):
                                raise IncompleteError(
                                    f"router {rid}: stream {key} got {entry[1]} of "
                                    f"{node.expected.get(key, 0)} contributions "
                                    f"for sample {s}")
                            self.fmt.check(entry[0])
                            node.accumulations += 1
                            node.traversals += 1
                            ready = entry[2] + ACCUMULATE_CYCLES
                            t_out = max(ready, node.out_free + 1)
                            node.out_free = t_out
                            out.append((t_out + HOP_CYCLES, key[0], key[1], entry[0]))
                    else:
                        for arrive, cls, bg, value in flits:
                            t_out = max(arrive, node.out_free + 1)
                            if self.strict and t_out - arrive > BUFFER_FLITS:
                                raise HazardError(
                                    f"router {rid} buffered more than "
                                    f"{BUFFER_FLITS} flits at sample {s}")
                            node.out_free = t_out
                            node.forwarded += 1
                            node.traversals += 1
                            out.append((t_out + HOP_CYCLES, cls, bg, value))
                    if parent is None:
                        released.extend(out)
                        if node.config_bit == 0:
                            direct_to_cp += len(out)
                    else:
                        at_router.setdefault(parent, []).extend(out)

            # Co-processor: flit arrivals are already serialized by the root
            # router's uplink.
            cp_acc = {}
            last_cp = last_emit
            for arrive, cls, bg, value in sorted(released):
                entry = cp_acc.setdefault(cls, [0, 0, -1])
                entry[0] += value
                entry[1] += 1
                entry[2] = max(entry[2], arrive)
                last_cp = max(last_cp, arrive)

            for cls in range(self.plan.n_classes):
                expected = self.cp_expected.get((group, cls), 0)
                entry = cp_acc.get(cls)
                if expected == 0:
                    if entry is not None:
                        raise IncompleteError(
                            f"sample {s}: unexpected contributions for class {cls}")
                    continue
                if entry is None or entry[1] != expected:
                    got = 0 if entry is None else entry[1]
                    raise IncompleteError(
                        f"sample {s}: class {cls} received {got} of {expected} contributions")
                self.fmt.check(entry[0])
                logits_fp[s, cls] = entry[0]

            decision_cycle[s] = last_cp + 1
            latencies[s] = decision_cycle[s] - t0
            seg["streaming"].append(last_flit - t0)
            seg["delivery"].append(last_ready - last_flit)
            seg["core"].append(last_emit - last_ready)
            seg["up"].append(last_cp - last_emit)
            seg["cp"].append(1)
            if trace_rows is not None:
                trace_rows.append({"cycle": int(decision_cycle[s]), "event": "decision",
                                   "sample": s})

        breakdown = {name: {"mean": float(np.mean(v)) if v else 0.0,
                            "max": int(np.max(v)) if v else 0}
                     for name, v in seg.items()}
        breakdown["down_hops"] = down
        breakdown["feature_flits"] = fflits

        # Decisions from fixed-point logits.
        predictions = self._decide(logits_fp)

        total_cycles = int(decision_cycle.max()) + 1 if n_samples else 0
        core_cycles, core_tput = self._core_window()
        if self.strict:
            for node in self.routers.values():
                if node.peak_buffer > BUFFER_FLITS:
                    raise HazardError(
                        f"router {node.router_id} buffered {node.peak_buffer} flits")
        util = self._utilization(total_cycles, feature_link_traversals)
        activity = self._activity(n_samples, feature_link_traversals, emitted_logits)
        flow = {
            "logits_emitted": emitted_logits,
            "absorbed_by_accumulators": absorbed_logits,
            "direct_to_cp": direct_to_cp,
            "conserved": emitted_logits == absorbed_logits + direct_to_cp,
        }
        metrics = SimMetrics(
            n_samples=n_samples,
            total_cycles=total_cycles,
            clock_hz=self.chip.clock_hz,
            latency_cycles_mean=float(latencies.mean()) if n_samples else 0.0,
            latency_cycles_max=int(latencies.max()) if n_samples else 0,
            latency_ns_mean=float(latencies.mean() / self.chip.clock_hz * 1e9)
            if n_samples else 0.0,
            throughput_sps=n_samples * self.chip.clock_hz / total_cycles
            if total_cycles else 0.0,
            core_throughput_sps=core_tput,
            core_total_cycles=core_cycles,
            initiation_interval=self.chip_interval,
            cores_used=len(self.cores),
            routers_active=len(self.routers),
            utilization=util,
            latency_breakdown=breakdown,
            flow=flow,
            activity=activity,
        )
        return predictions, metrics, trace_rows

    def _decide(self, logits_fp):
        task = self.plan.task
        thr = self.program.decision_threshold
        scale = self.fmt.scale
        out = []
        for row in logits_fp:
            logits = row / scale
            out.append(Prediction(logits, decide(logits, task, thr)))
        return out

    def _core_window(self):
        """Busiest core's active window and the implied per-core throughput."""
        best = (0, 0.0)
        for pipe in self.pipes.values():
            if not pipe.completions:
                continue
            first_ready = pipe.completions[0][1] - CORE_LATENCY_CYCLES
            window = pipe.completions[-1][1] - first_ready
            tput = len(pipe.completions) * self.chip.clock_hz / window
            if window > best[0]:
                best = (window, tput)
        return best

    def _utilization(self, total_cycles, feature_traversals):
        if total_cycles == 0:
            return {}
        cam_busy = sum(p.busy_cam_cycles for p in self.pipes.values())
        resolve_busy = sum(p.busy_resolve_cycles for p in self.pipes.values())
        router_busy = sum(r.traversals + r.accumulations for r in self.routers.values())
        n_arrays = len(self.cores) * self.chip.stacked_arrays * self.chip.queued_arrays
        return {
            "cam_arrays": cam_busy / (n_arrays * total_cycles) if n_arrays else 0.0,
            "resolver": resolve_busy / (len(self.cores) * total_cycles),
            "routers": router_busy / (len(self.routers) * total_cycles),
        }

    def _activity(self, n_samples, feature_traversals, emitted_logits):
        """Active-cycle counts per cost-model component for the whole run."""
        cam_cycles = sum(p.busy_cam_cycles for p in self.pipes.values())
        resolve = sum(p.busy_resolve_cycles for p in self.pipes.values())
        per_core_searches = sum(len(p.completions) for p in self.pipes.values())
        router_events = sum(r.traversals for r in self.routers.values())
        router_accs = sum(r.accumulations for r in self.routers.values())
        return {
            "acam_array": cam_cycles,
            "dac": per_core_searches * self.chip.queued_arrays * self.chip.cam_search_cycles,
            "sa": per_core_searches * self.chip.stacked_arrays * self.chip.queued_arrays,
            "pch": per_core_searches * self.chip.stacked_arrays * self.chip.queued_arrays,
            "regs_logic": per_core_searches * 5 + resolve,
            "sram": resolve,
            "router": router_events + router_accs,
            "cp": n_samples,
        }


def run_inference(plan_or_program, program=None, samples=None, *, seed=0, workers=1,
                  trace_path=None, strict=True):
    """Cycle-simulate a compiled chip over quantized samples.

    Accepts either (program, samples) or the spec-shaped (plan, program,
    samples).  Results are deterministic for fixed inputs regardless of
    ``workers``; the flag is an upper bound on helper parallelism.
    """
    if isinstance(plan_or_program, NocProgram):
        prog = plan_or_program
        codes = program if samples is None else samples
    else:
        prog = program
        codes = samples
    if prog is None or codes is None:
        raise DimensionError("run_inference needs a router program and samples")
    engine = ChipEngine(prog, strict=strict)
    predictions, metrics, trace_rows = engine.run(codes, collect_traces=trace_path is not None)
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            for row in trace_rows:
                fh.write(json.dumps(row) + "\n")
    return predictions, metrics


def analytic_throughput(chip=None, n_trees_core=1, n_classes=1, depth=6, mode="binary",
                        n_feat=None, batch_factor=1, n_samples=None):
    """Closed-form throughput table: per-core pipeline rate, chip rate with the
    streaming and multiclass ceilings, and the depth-limited LUT baseline."""
    chip = chip or ChipConfig()
    clock = chip.clock_hz
    ii = initiation_interval(n_trees_core, chip.cam_search_cycles)
    if n_samples is None:
        core_sps = clock / ii
    else:
        core_sps = n_samples * clock / (chip.core_latency_cycles + ii * (n_samples - 1))
    chip_interval = ii / max(1, batch_factor)
    if n_feat is not None:
        chip_interval = max(chip_interval, math.ceil(n_feat / FEATURES_PER_FLIT))
    if mode in ("multiclass", "multiclass_classification"):
        chip_interval = max(chip_interval, n_classes)
    chip_sps = clock / chip_interval
    return {
        "core_samples_per_s": core_sps,
        "chip_samples_per_s": chip_sps,
        "multiclass_ceiling_sps": clock / n_classes if n_classes > 1 else clock,
        "booster_samples_per_s": clock / (4 * depth),
        "initiation_interval": ii,
    }


def _accuracy(decisions, labels, task):
    decisions = np.asarray(decisions)
    labels = np.asarray(labels)
    if task == "regression":
        # Regression "accuracy" = fraction of predictions within a small
        # relative band; defect studies use classification models, this is a
        # fallback so the API is total.
        denom = np.maximum(np.abs(labels), 1e-12)
        return float(np.mean(np.abs(decisions - labels) / denom < 1e-6))
    return float(np.mean(decisions == labels))


def _functional_predict(program, codes, perturbed_cores=None):
    """Functional chip evaluation (values only): per-sample decisions."""
    plan = program.plan
    fmt = LogitFormat(plan.leaf_scale_bits)
    groups = max(1, program.n_batch_groups)
    n = codes.shape[0]
    logits = np.zeros((n, plan.n_classes), dtype=np.int64)
    for cp in plan.cores:
        rows = np.flatnonzero(np.arange(n) % groups == cp.batch_group)
        if len(rows) == 0:
            continue
        if perturbed_cores is not None and cp.core_index in perturbed_cores:
            state = perturbed_cores[cp.core_index]
        else:
            state = CoreState.from_placement(cp, plan.chip)
        sums, _ = core_infer_batch(state, codes[rows])
        for cls, vec in sums.items():
            logits[rows, cls] += vec
    scaled = logits / fmt.scale
    if plan.task == "regression":
        decisions = scaled[:, 0].copy()
    elif plan.task == "binary_classification":
        decisions = (scaled[:, 0] >= program.decision_threshold).astype(np.float64)
    else:
        decisions = np.argmax(scaled, axis=1).astype(np.float64)
    return logits, decisions


def defect_experiment(plan, program, samples, labels, rates, trials=100, seed=0,
                      workers=1):
    """Relative-accuracy curve under random level flips.

    For each rate, ``trials`` seeded injections perturb every core's arrays;
    accuracy against the labels is divided by the defect-free accuracy.  A
    trial shares its flip permutation across rates (larger rates flip a
    superset), which keeps per-trial degradations nested without biasing any
    single rate.
    """
    rates = list(rates)
    for r in rates:
        if not (0.0 <= r <= 1.0):
            raise RangeError(f"defect rate {r} out of [0, 1]")
    codes = np.asarray(samples, dtype=np.int64)
    labels = np.asarray(labels)
    task = program.plan.task

    _, clean_dec = _functional_predict(program, codes)
    clean_acc = _accuracy(clean_dec, labels, task)
    if clean_acc == 0.0:
        raise RangeError("clean accuracy is zero; relative accuracy undefined")

    results = {rate: [] for rate in rates}
    chip = program.plan.chip
    base_states = {cp.core_index: CoreState.from_placement(cp, chip)
                   for cp in program.plan.cores}
    for trial in range(trials):
        trial_seed = np.random.SeedSequence([seed, trial]).generate_state(1)[0]
        for rate in rates:
            if rate == 0.0:
                results[rate].append(1.0)
                continue
            perturbed = {}
            for core_index, state in base_states.items():
                clone = CoreState.__new__(CoreState)
                clone.__dict__.update(state.__dict__)
                clone.slices = [
                    apply_defects(arr, DefectSpec(rate, seed=int(trial_seed) + 7919 * core_index + si))
                    for si, arr in enumerate(state.slices)]
                perturbed[core_index] = clone
            _, dec = _functional_predict(program, codes, perturbed_cores=perturbed)
            results[rate].append(_accuracy(dec, labels, task) / clean_acc)

    curve = []
    for rate in rates:
        vals = np.asarray(results[rate], dtype=np.float64)
        curve.append({"rate": rate, "mean_relative_accuracy": float(vals.mean()),
                      "std_relative_accuracy": float(vals.std()), "trials": trials})
    return curve


@dataclass
class SweepSpec:
    """One-parameter sweep over synthetic models."""
    param: str  # "n_trees" | "depth" | "n_feat"
    values: list
    task: str = "binary_classification"
    n_classes: int = 1
    n_trees: int = 64
    depth: int = 6
    n_feat: int = 32
    n_samples: int = 2000
    seed: int = 7
    batch_factor: int = 1
    trees_per_core_cap: int | None = None
    chip: ChipConfig | None = None


def sweep(spec):
    """Simulate each point of a sweep; infeasible points are marked, not fatal."""
    from .ensemble import build_quant_grid, quantize_ensemble
    from .compiler import compile_model

    if not spec.values:
        raise RangeError("sweep needs at least one value")
    chip = spec.chip or ChipConfig()
    rows = []
    for value in spec.values:
        params = {"n_trees": spec.n_trees, "depth": spec.depth, "n_feat": spec.n_feat}
        if spec.param not in params:
            raise RangeError(f"unknown sweep parameter {spec.param!r}")
        params[spec.param] = value
        row = {"param": spec.param, "value": value, "feasible": True, "error": ""}
        try:
            model = make_random_ensemble(spec.task, params["n_trees"], params["depth"],
                                         params["n_feat"], spec.n_classes, seed=spec.seed)
            qmodel = quantize_ensemble(model, build_quant_grid(model, chip.n_bits))
            _, plan, program = compile_model(qmodel, chip, spec.batch_factor,
                                             trees_per_core_cap=spec.trees_per_core_cap)
            X = make_samples(spec.n_samples, params["n_feat"], seed=spec.seed)
            codes = qmodel.grid.quantize_batch(X)
            _, metrics = run_inference(program, codes)
            row.update({
                "throughput_sps": metrics.throughput_sps,
                "core_throughput_sps": metrics.core_throughput_sps,
                "latency_ns": metrics.latency_ns_mean,
                "initiation_interval": metrics.initiation_interval,
                "cores_used": metrics.cores_used,
                "total_cycles": metrics.total_cycles,
            })
        except CapacityError as exc:
            row["feasible"] = False
            row["error"] = str(exc)
        rows.append(row)
    return rows


# -- cost model --------------------------------------------------------------

COST_COMPONENTS = ("acam_array", "dac", "sa", "pch", "regs_logic", "sram", "router", "cp")

# Chip-wide defaults at the 4096-core geometry; individual entries are free
# parameters calibrated so the totals land on the published anchors (19 W
# peak, ~0.3 nJ per decision on a batched binary workload).
_DEFAULT_POWER_W = {"acam_array": 16.0, "dac": 1.2, "sa": 0.6, "pch": 0.4,
                    "regs_logic": 0.35, "sram": 0.25, "router": 0.18, "cp": 0.02}
_DEFAULT_AREA_MM2 = {"acam_array": 60.0, "dac": 8.0, "sa": 4.0, "pch": 3.0,
                     "regs_logic": 6.0, "sram": 10.0, "router": 5.0, "cp": 2.0}
_DEFAULT_ENERGY_J = {"acam_array": 3.0e-12, "dac": 0.8e-12, "sa": 0.5e-12,
                     "pch": 0.5e-12, "regs_logic": 0.4e-12, "sram": 1.0e-12,
                     "router": 2.0e-12, "cp": 1.0e-12}


def default_component_counts(chip):
    arrays = chip.n_cores * chip.stacked_arrays * chip.queued_arrays
    routers = (chip.n_cores - 1) // (chip.noc_arity - 1)
    return {"acam_array": arrays, "dac": chip.n_cores * chip.queued_arrays,
            "sa": arrays, "pch": arrays, "regs_logic": chip.n_cores,
            "sram": chip.n_cores, "router": routers, "cp": 1}


@dataclass
class CostModel:
    """Per-instance area/power/energy constants for each chip component."""
    area_mm2: dict
    peak_power_w: dict
    energy_per_cycle_j: dict

    @classmethod
    def default(cls, chip=None):
        chip = chip or ChipConfig()
        counts = default_component_counts(chip)
        return cls(
            area_mm2={k: _DEFAULT_AREA_MM2[k] / counts[k] for k in COST_COMPONENTS},
            peak_power_w={k: _DEFAULT_POWER_W[k] / counts[k] for k in COST_COMPONENTS},
            energy_per_cycle_j=dict(_DEFAULT_ENERGY_J),
        )

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        for section in ("area_mm2", "peak_power_w", "energy_per_cycle_j"):
            if section not in doc:
                raise ConfigError(f"cost model missing section {section!r}")
            for comp in COST_COMPONENTS:
                if comp not in doc[section]:
                    raise ConfigError(f"cost model missing entry {section}.{comp}")
        return cls(doc["area_mm2"], doc["peak_power_w"], doc["energy_per_cycle_j"])

    def to_dict(self):
        return {"area_mm2": self.area_mm2, "peak_power_w": self.peak_power_w,
                "energy_per_cycle_j": self.energy_per_cycle_j}


def estimate_cost(cost_model, plan, metrics=None):
    """Linear composition of per-component constants by instance counts.

    With run metrics, energy per decision = active component-cycles times the
    per-cycle energies, divided by the samples processed.
    """
    chip = plan.chip if isinstance(plan, PlacementPlan) else plan
    counts = default_component_counts(chip)
    for comp in COST_COMPONENTS:
        for section in (cost_model.area_mm2, cost_model.peak_power_w,
                        cost_model.energy_per_cycle_j):
            if comp not in section:
                raise ConfigError(f"cost model missing component {comp!r}")
    area = {k: counts[k] * cost_model.area_mm2[k] for k in COST_COMPONENTS}
    power = {k: counts[k] * cost_model.peak_power_w[k] for k in COST_COMPONENTS}
    report = {
        "area_mm2": area,
        "area_total_mm2": float(sum(area.values())),
        "peak_power_w": power,
        "peak_power_total_w": float(sum(power.values())),
        "counts": counts,
    }
    if metrics is not None:
        activity = metrics.activity if isinstance(metrics, SimMetrics) else metrics
        energy = {k: activity.get(k, 0) * cost_model.energy_per_cycle_j[k]
                  for k in COST_COMPONENTS}
        n = metrics.n_samples if isinstance(metrics, SimMetrics) else activity.get("cp", 1)
        report["energy_j"] = energy
        report["energy_total_j"] = float(sum(energy.values()))
        report["energy_per_decision_j"] = float(sum(energy.values()) / max(1, n))
    return report
