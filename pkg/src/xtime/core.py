"""One accelerator core: the chained CAM search, match buffer, multiple-match
resolver, SRAM leaf lookup, and per-class accumulation, plus its pipeline
timing.

The query is searched in queued column slices: slice 0 runs with full
precharge of the occupied rows and its match register precharges slice 1, so
the chained search is the row-wise AND of both slices.  A 4-cycle search per
slice (precharge, MSB compare, LSB compare, latch) followed by single-cycle
buffer, resolve, SRAM, and accumulate stages gives the 12-cycle end-to-end
latency; the resolver iterates once per mapped tree, so samples can enter
every max(4, trees_per_core) cycles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acam import AcamArray
from .errors import DimensionError, HazardError, MatchCountError

CAM_SEARCH_CYCLES = 4  # precharge, MSB search, LSB search, latch
CORE_LATENCY_CYCLES = 12
RESOLVE_LATENCY = 3  # buffer -> resolver -> SRAM -> accumulate handoff


def initiation_interval(n_trees_core, cam_cycles=CAM_SEARCH_CYCLES):
    """Cycles between samples entering one core."""
    return max(cam_cycles, n_trees_core)


class CoreState:
    """Programmed state of one core: CAM slices, SRAM, and tree metadata."""

    def __init__(self, lo, hi, leaf_scaled, row_class, n_trees, chip, batch_group=0,
                 core_index=0, class_offset=0):
        self.chip = chip
        self.core_index = core_index
        self.batch_group = batch_group
        self.class_offset = class_offset
        self.n_trees = int(n_trees)
        self.rows_used = lo.shape[0]
        self.n_features = lo.shape[1]
        words = chip.words_per_core
        if self.rows_used > words:
            raise DimensionError(f"{self.rows_used} rows exceed {words} words")

        # Queued slices cover the feature axis; only occupied columns are
        # stored since unused columns are programmed don't-care.
        self.slices = []
        self.slice_bounds = []
        for start in range(0, self.n_features, chip.cols_per_array):
            end = min(start + chip.cols_per_array, self.n_features)
            self.slices.append(AcamArray.from_ranges(lo[:, start:end], hi[:, start:end],
                                                     m_bits=chip.memristor_bits))
            self.slice_bounds.append((start, end))
        self.precharge = np.ones(self.rows_used, dtype=bool)
        self.sram_value = np.asarray(leaf_scaled, dtype=np.int64)
        self.sram_class = np.asarray(row_class, dtype=np.int32)
        self.classes_present = sorted(int(c) for c in np.unique(self.sram_class))

    @classmethod
    def from_placement(cls, core_placement, chip, class_offset=0):
        return cls(core_placement.lo, core_placement.hi, core_placement.leaf_scaled,
                   core_placement.row_class, core_placement.n_trees, chip,
                   core_placement.batch_group, core_placement.core_index, class_offset)

    def search(self, codes, doubled=None):
        """Chained slice search for one query or a (samples, features) matrix."""
        codes = np.asarray(codes, dtype=np.int64)
        if codes.shape[-1] != self.n_features:
            raise DimensionError(
                f"query has {codes.shape[-1]} features, core stores {self.n_features}")
        if doubled is None:
            doubled = self.chip.precision_doubling
        single = codes.ndim == 1
        q = codes[None, :] if single else codes
        matches = np.broadcast_to(self.precharge, (q.shape[0], self.rows_used)).copy()
        for (start, end), arr in zip(self.slice_bounds, self.slices):
            seg = q[:, start:end]
            out = np.empty_like(matches)
            for i in range(q.shape[0]):
                out[i] = arr.match_rows(seg[i], matches[i], doubled=doubled)
            matches = out
        return matches[0] if single else matches

    def search_batch(self, codes, doubled=None):
        """Vectorized chained search over a sample matrix (no per-row precharge loop)."""
        codes = np.asarray(codes, dtype=np.int64)
        if doubled is None:
            doubled = self.chip.precision_doubling
        matches = np.ones((codes.shape[0], self.rows_used), dtype=bool)
        for (start, end), arr in zip(self.slice_bounds, self.slices):
            matches &= arr.match_rows(codes[:, start:end], doubled=doubled)
        return matches & self.precharge


def mmr_resolve(matches):
    """Serialize a match bitset into one-hot vectors, ascending row order."""
    matches = np.asarray(matches, dtype=bool)
    out = []
    for row in np.flatnonzero(matches):
        onehot = np.zeros(matches.shape, dtype=bool)
        onehot[row] = True
        out.append(onehot)
    return out


def core_infer(state, codes, strict=True, doubled=None):
    """Functional core inference: per-class accumulated logits for one query.

    Returns (class_id, scaled logit) pairs in ascending class order.  With
    ``strict`` the match count must equal the mapped tree count; defect
    studies disable that and let missing trees contribute nothing.
    """
    matches = state.search(codes, doubled=doubled)
    n_matches = int(matches.sum())
    if strict and n_matches != state.n_trees:
        raise MatchCountError(
            f"core {state.core_index}: {n_matches} matches for {state.n_trees} trees")
    sums = {}
    for onehot in mmr_resolve(matches):
        row = int(np.flatnonzero(onehot)[0])
        cls = int(state.sram_class[row])
        sums[cls] = sums.get(cls, 0) + int(state.sram_value[row])
    return sorted(sums.items())


def core_infer_batch(state, codes, doubled=None):
    """Vectorized functional inference over a sample matrix.

    Returns (class_sums, match_counts): class_sums maps class_id to an int64
    vector of per-sample accumulated logits.
    """
    matches = state.search_batch(codes, doubled=doubled)
    counts = matches.sum(axis=1).astype(np.int64)
    class_sums = {}
    for cls in state.classes_present:
        sel = state.sram_class == cls
        vals = np.where(sel, state.sram_value, 0)
        class_sums[cls] = matches @ vals
    return class_sums, counts


@dataclass
class CoreSchedule:
    """Closed-form pipeline timing for one core fed at its initiation interval."""
    trees_per_core: int
    n_samples: int
    cam_cycles: int = CAM_SEARCH_CYCLES
    core_latency: int = CORE_LATENCY_CYCLES
    clock_hz: float = 1.0e9
    stages: list = field(default_factory=list)

    @property
    def bubbles(self):
        return initiation_interval(self.trees_per_core, self.cam_cycles)

    @property
    def total_cycles(self):
        return self.core_latency + self.bubbles * (self.n_samples - 1)

    @property
    def throughput_sps(self):
        return self.n_samples * self.clock_hz / self.total_cycles


def core_schedule(n_trees_core, n_samples, clock_hz=1.0e9,
                  cam_cycles=CAM_SEARCH_CYCLES, core_latency=CORE_LATENCY_CYCLES):
    """Pipeline schedule and ideal throughput for a core.

    Total cycles follow ``core_latency + max(cam_cycles, trees) * (N_s - 1)``;
    the recorded stage layout reproduces the 12-cycle latency with two chained
    4-cycle searches and single-cycle buffer/resolve/SRAM/accumulate stages.
    """
    if n_samples < 1:
        raise DimensionError("n_samples must be >= 1")
    stages = [("cam_slice_0", 1, cam_cycles),
              ("cam_slice_1", 1 + cam_cycles, cam_cycles),
              ("buffer", 1 + 2 * cam_cycles, 1),
              ("resolve", 2 + 2 * cam_cycles, max(1, n_trees_core)),
              ("sram", 3 + 2 * cam_cycles, 1),
              ("accumulate", 4 + 2 * cam_cycles, 1)]
    return CoreSchedule(n_trees_core, n_samples, cam_cycles, core_latency,
                        clock_hz, stages)


class CorePipeline:
    """Cycle bookkeeping for one core inside the chip simulation.

    Tracks when each stage is busy, enforces the initiation interval through
    resource-free times, and reports per-sample completion cycles.  Under
    defect-free operation arrivals are paced so no stage ever waits; the
    hazard check asserts exactly that.
    """

    def __init__(self, state, strict=True):
        self.state = state
        self.strict = strict
        self.cam_free = 0  # first slice is the pacing resource
        self.resolve_free = 0
        self.buffer_busy_until = -1
        self.completions = []
        self.busy_cam_cycles = 0
        self.busy_resolve_cycles = 0

    def accept(self, sample, query_ready, match_count):
        """Schedule one sample; returns (emit_cycle, intervals) for tracing.

        ``query_ready`` is the cycle the full query arrived; the search may
        start the next cycle.  If the resolver is backlogged (possible only
        when defects inflate the match count) the search start is delayed so
        the match buffer is never overwritten.
        """
        cam = self.state.chip.cam_search_cycles
        start = max(query_ready + 1, self.cam_free + 1,
                    self.buffer_busy_until - 2 * cam + 1)
        slice0 = (start, start + cam - 1)
        slice1 = (start + cam, start + 2 * cam - 1)
        self.cam_free = slice0[1]
        buffer_cycle = slice1[1] + 1
        if buffer_cycle <= self.buffer_busy_until:
            raise HazardError(
                f"core {self.state.core_index}: match buffer overwritten at cycle {buffer_cycle}")
        resolve_len = max(1, match_count)
        resolve_start = max(buffer_cycle + 1, self.resolve_free + 1)
        resolve_end = resolve_start + resolve_len - 1
        self.buffer_busy_until = resolve_start
        self.resolve_free = resolve_end
        emit = max(query_ready + CORE_LATENCY_CYCLES, resolve_start + RESOLVE_LATENCY - 1)
        if self.strict and (start != query_ready + 1 or resolve_start != buffer_cycle + 1):
            raise HazardError(
                f"core {self.state.core_index}: stage conflict for sample {sample}")
        self.busy_cam_cycles += 2 * cam * self.state.chip.stacked_arrays
        self.busy_resolve_cycles += resolve_len
        self.completions.append((sample, emit))
        return emit, {"cam0": slice0, "cam1": slice1, "buffer": buffer_cycle,
                      "resolve": (resolve_start, resolve_end), "emit": emit}
