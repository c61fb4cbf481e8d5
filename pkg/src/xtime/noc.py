"""H-tree network on chip: topology arithmetic, the configurable router, the
fixed-point logit format, and the co-processor's global reduction.

Feature vectors broadcast downstream as 64-bit flits carrying up to eight
packed 8-bit codes; logits flow upstream and are either forwarded verbatim
(config bit 0) or folded into a per-(class, batch) accumulator that releases
one summed flit once all expected child contributions arrived (config bit 1).
Forwarding costs one cycle per hop; accumulation adds one more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionError, FixedPointOverflowError, IncompleteError,
                     RangeError, ShapeError)

FEATURES_PER_FLIT = 8
PORTS_PER_ROUTER = 4
FLIT_BITS = 64
BUFFER_FLITS = 4  # per input port

HOP_CYCLES = 1
ACCUMULATE_CYCLES = 1


@dataclass(frozen=True)
class HTreeTopology:
    """Full arity-a tree with cores at the leaves and the co-processor at the root.

    Router levels are numbered 0 (root) through depth-1; level L holds a^L
    routers.  Global router ids enumerate levels top-down, so the root is 0
    and the parent of any router is computable arithmetically.
    """
    arity: int
    depth: int

    @property
    def n_cores(self):
        return self.arity ** self.depth

    @property
    def n_routers(self):
        return (self.arity ** self.depth - 1) // (self.arity - 1)

    def level_offset(self, level):
        return (self.arity ** level - 1) // (self.arity - 1)

    def router_id(self, level, index):
        return self.level_offset(level) + index

    def router_level(self, router_id):
        level = 0
        while self.level_offset(level + 1) <= router_id:
            level += 1
        return level, router_id - self.level_offset(level)

    def parent_router(self, router_id):
        level, index = self.router_level(router_id)
        if level == 0:
            return None
        return self.router_id(level - 1, index // self.arity)

    def core_path(self, core_index):
        """Router ids from the root down to the core's leaf-level router."""
        if not (0 <= core_index < self.n_cores):
            raise RangeError(f"core index {core_index} out of range")
        path = []
        for level in range(self.depth):
            index = core_index // (self.arity ** (self.depth - level))
            path.append(self.router_id(level, index))
        return path

    def cores_under(self, router_id):
        """Half-open range of core indices below a router."""
        level, index = self.router_level(router_id)
        span = self.arity ** (self.depth - level)
        return index * span, (index + 1) * span

    def routers_above(self, core_indices):
        """All router ids on some path from an active core to the root."""
        seen = set()
        for core in core_indices:
            seen.update(self.core_path(core))
        return sorted(seen)

    def active_cores_under(self, router_id, core_indices):
        lo, hi = self.cores_under(router_id)
        return [c for c in core_indices if lo <= c < hi]


def build_htree(n_cores, arity=PORTS_PER_ROUTER):
    """Topology for a leaf count that must be a power of the arity."""
    if n_cores < arity:
        raise ShapeError(f"need at least {arity} cores, got {n_cores}")
    depth = round(math.log(n_cores, arity))
    if arity ** depth != n_cores:
        raise ShapeError(f"{n_cores} cores is not a power of arity {arity}")
    return HTreeTopology(arity, depth)


class LogitFormat:
    """Signed fixed-point logit encoding carried in flits.

    ``scale_bits`` is chosen at compile time so the worst-case class sum of
    the loaded model fits in 32 bits; encoding then never saturates and
    router sums are exact and order-independent.
    """

    WIDTH = 32

    def __init__(self, scale_bits):
        self.scale_bits = int(scale_bits)
        self.scale = 2.0 ** self.scale_bits
        self.limit = 2 ** (self.WIDTH - 1) - 1

    def encode(self, value):
        scaled = int(round(value * self.scale))
        self.check(scaled)
        return scaled

    def check(self, scaled):
        if abs(scaled) > self.limit:
            raise FixedPointOverflowError(
                f"fixed-point value {scaled} exceeds {self.WIDTH}-bit format")
        return scaled

    def decode(self, scaled):
        return scaled / self.scale


@dataclass
class Flit:
    """One 64-bit network word: a feature segment or one logit contribution."""
    kind: str  # "features" | "logit"
    sample: int
    batch_group: int = 0
    class_id: int = 0
    value: int = 0  # fixed-point logit payload
    codes: tuple = ()  # packed feature codes
    offset: int = 0  # feature offset of codes[0]

    def __post_init__(self):
        if self.kind == "features" and len(self.codes) > FEATURES_PER_FLIT:
            raise DimensionError(f"feature flit carries at most {FEATURES_PER_FLIT} codes")


def feature_flits(sample, codes, batch_group=0):
    """Split one query vector into its broadcast flits."""
    flits = []
    for off in range(0, len(codes), FEATURES_PER_FLIT):
        flits.append(Flit("features", sample, batch_group,
                          codes=tuple(int(c) for c in codes[off:off + FEATURES_PER_FLIT]),
                          offset=off))
    return flits


class RouterState:
    """One router's configuration, buffers, and accumulator bank.

    ``expected`` maps (class_id, batch_group) to the number of child
    contributions that must arrive before the accumulated flit is released.
    """

    def __init__(self, router_id, config_bit, expected=None, logit_format=None):
        self.router_id = router_id
        self.config_bit = int(config_bit)
        self.expected = dict(expected or {})
        self.fmt = logit_format
        self.buffers = {port: [] for port in range(PORTS_PER_ROUTER)}
        self.acc = {}  # (class, batch, sample) -> [sum, count]
        self.forwarded = 0
        self.absorbed = 0

    def step(self, incoming):
        """Process one cycle of arrivals; return flits leaving toward the parent.

        Feature flits are replication plumbing handled by the engine; this
        models the upstream logit path.
        """
        outgoing = []
        for port, flit in incoming:
            if flit.kind != "logit":
                raise RangeError("router_step handles logit flits; features use broadcast")
            if self.config_bit == 0:
                self.forwarded += 1
                outgoing.append(flit)
                continue
            key = (flit.class_id, flit.batch_group, flit.sample)
            entry = self.acc.setdefault(key, [0, 0])
            entry[0] += flit.value
            entry[1] += 1
            if self.fmt is not None:
                self.fmt.check(entry[0])
            self.absorbed += 1
            need = self.expected.get((flit.class_id, flit.batch_group), 1)
            if entry[1] == need:
                del self.acc[key]
                outgoing.append(Flit("logit", flit.sample, flit.batch_group,
                                     flit.class_id, entry[0]))
        return outgoing


def router_step(state, incoming):
    """Functional wrapper over :meth:`RouterState.step`."""
    return state.step(incoming)


def coprocessor_reduce(class_sums, task, decision_threshold=0.0, n_classes=None,
                       logit_format=None):
    """Global reduction: identity for regression, threshold for binary,
    lowest-index argmax for multiclass.

    ``class_sums`` maps class_id to the (fixed-point or float) summed logit.
    """
    if n_classes is None:
        n_classes = (max(class_sums) + 1) if class_sums else 1
    missing = [c for c in range(n_classes) if c not in class_sums]
    if missing:
        raise IncompleteError(f"missing class sums for classes {missing}")
    values = [class_sums[c] for c in range(n_classes)]
    if logit_format is not None:
        values = [logit_format.decode(v) for v in values]
    from .ensemble import Prediction, decide
    logits = np.asarray(values, dtype=np.float64)
    return Prediction(logits, decide(logits, task, decision_threshold))
