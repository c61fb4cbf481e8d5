"""Analog CAM model: range cells, the two-cycle doubled-precision search, defects.

A macro-cell stores one half-open code range [t_lo, t_hi) using two 4-bit
sub-cells per bound.  An 8-bit search runs as two back-to-back cycles whose
results AND on the match line:

  cycle 1:  [(q_lsb >= lo_lsb) or (q_msb - 1 >= lo_msb)]
            and [(q_lsb < hi_lsb) or (q_msb < hi_msb)]
  cycle 2:  (q_msb >= lo_msb) and (q_msb - 1 < hi_msb)

Cycle 2 drives the LSB sub-cell with rail constants so it contributes a
mismatch on both bounds, leaving only the MSB terms.  The MSB wires carry
``q_msb - 1`` which underflows to the signed level -1 at q_msb = 0; -1
compares below every stored level, which is exactly what the boundary cases
require.  An upper bound equal to the full code range (t_hi = 2^N) cannot be
stored in sub-cells and is modeled as a forced-true upper side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, RangeError

M_BITS_DEFAULT = 4

# Rail constants for cycle-2 LSB drive lines.  On the lower-bound line VDD
# disables the LSB contribution; on the upper-bound line GND does (the two
# bound halves of the sub-cell have opposite comparison polarity).
GND = "gnd"
VDD = "vdd"


def split_levels(code, m_bits=M_BITS_DEFAULT):
    """Decompose a code into (msb, lsb) sub-cell levels."""
    mask = (1 << m_bits) - 1
    return code >> m_bits, code & mask


@dataclass(frozen=True)
class MacroCell:
    """One stored range [t_lo, t_hi) with its sub-cell decomposition.

    ``t_hi`` may equal ``2**(2*m_bits)`` to express an open upper bound
    (don't-care-upper); in that case the upper sub-levels are unused.
    """
    t_lo: int
    t_hi: int
    m_bits: int = M_BITS_DEFAULT

    def __post_init__(self):
        full = 1 << (2 * self.m_bits)
        if not (0 <= self.t_lo < self.t_hi <= full):
            raise RangeError(f"invalid range [{self.t_lo}, {self.t_hi})")

    @property
    def code_bits(self):
        return 2 * self.m_bits

    @property
    def hi_open(self):
        return self.t_hi == (1 << self.code_bits)

    @property
    def dont_care(self):
        return self.t_lo == 0 and self.hi_open

    @property
    def lo_msb(self):
        return split_levels(self.t_lo, self.m_bits)[0]

    @property
    def lo_lsb(self):
        return split_levels(self.t_lo, self.m_bits)[1]

    @property
    def hi_msb(self):
        if self.hi_open:
            raise RangeError("open upper bound has no stored sub-levels")
        return split_levels(self.t_hi, self.m_bits)[0]

    @property
    def hi_lsb(self):
        if self.hi_open:
            raise RangeError("open upper bound has no stored sub-levels")
        return split_levels(self.t_hi, self.m_bits)[1]


@dataclass(frozen=True)
class QueryLevels:
    """One query code with its per-cycle drive-line schedule."""
    q: int
    m_bits: int = M_BITS_DEFAULT

    def __post_init__(self):
        if not (0 <= self.q < (1 << (2 * self.m_bits))):
            raise RangeError(f"query code {self.q} out of range")

    @property
    def msb(self):
        return split_levels(self.q, self.m_bits)[0]

    @property
    def lsb(self):
        return split_levels(self.q, self.m_bits)[1]

    def cycle_inputs(self):
        """Drive-line values per search cycle: (hi_lsb, lo_lsb, hi_msb, lo_msb).

        MSB lines are signed; -1 is the underflow sentinel that compares below
        every stored level.
        """
        return (
            {"hi_lsb": self.lsb, "lo_lsb": self.lsb, "hi_msb": self.msb, "lo_msb": self.msb - 1},
            {"hi_lsb": GND, "lo_lsb": VDD, "hi_msb": self.msb - 1, "lo_msb": self.msb},
        )


def match_direct(cell, q):
    """Single-shot range check: t_lo <= q < t_hi (don't-care always matches)."""
    if not (0 <= q < (1 << cell.code_bits)):
        raise RangeError(f"query code {q} out of range")
    return cell.t_lo <= q < cell.t_hi


def _lower_side(wire_lsb, wire_msb, lo_msb, lo_lsb):
    lsb_term = False if wire_lsb == VDD else (wire_lsb >= lo_lsb)
    return lsb_term or (wire_msb >= lo_msb)


def _upper_side(wire_lsb, wire_msb, hi_msb, hi_lsb):
    lsb_term = False if wire_lsb == GND else (wire_lsb < hi_lsb)
    return lsb_term or (wire_msb < hi_msb)


def match_two_cycle(cell, query):
    """Evaluate the doubled-precision protocol for one cell and one query.

    Both cycles' results AND on the match line; each cycle's result is the
    AND of its lower-bound and upper-bound sides, each side an OR of the LSB
    and MSB sub-cell conditions.
    """
    if isinstance(query, int):
        query = QueryLevels(query, cell.m_bits)
    mal = True
    for wires in query.cycle_inputs():
        lower = _lower_side(wires["lo_lsb"], wires["lo_msb"], cell.lo_msb, cell.lo_lsb)
        if cell.hi_open:
            upper = True
        else:
            upper = _upper_side(wires["hi_lsb"], wires["hi_msb"], cell.hi_msb, cell.hi_lsb)
        mal = mal and (lower and upper)
    return mal


def lower_bound_parallel_form(q_msb, q_lsb, lo_msb, lo_lsb):
    """Lower-bound check as [(msb>=T) and (lsb>=T)] or (msb>=T+1); array-friendly."""
    return ((q_msb >= lo_msb) & (q_lsb >= lo_lsb)) | (q_msb >= lo_msb + 1)


def lower_bound_series_form(q_msb, q_lsb, lo_msb, lo_lsb):
    """Lower-bound check as [(msb>=T+1) or (lsb>=T)] and (msb>=T); array-friendly."""
    return ((q_msb >= lo_msb + 1) | (q_lsb >= lo_lsb)) & (q_msb >= lo_msb)


def two_cycle_match_codes(t_lo, t_hi, q, m_bits=M_BITS_DEFAULT):
    """Vectorized two-cycle protocol over broadcastable integer arrays.

    ``t_hi`` may contain the full-range code 2^(2M) for open upper bounds.
    Returns a boolean array with the broadcast shape.
    """
    t_lo = np.asarray(t_lo, dtype=np.int64)
    t_hi = np.asarray(t_hi, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    lo_msb, lo_lsb = split_levels(t_lo, m_bits)
    hi_open = t_hi == (1 << (2 * m_bits))
    hi_capped = np.where(hi_open, 0, t_hi)
    hi_msb, hi_lsb = split_levels(hi_capped, m_bits)
    q_msb, q_lsb = split_levels(q, m_bits)

    c1_lower = (q_lsb >= lo_lsb) | ((q_msb - 1) >= lo_msb)
    c1_upper = hi_open | (q_lsb < hi_lsb) | (q_msb < hi_msb)
    c2_lower = q_msb >= lo_msb
    c2_upper = hi_open | ((q_msb - 1) < hi_msb)
    return c1_lower & c1_upper & c2_lower & c2_upper


def two_cycle_match_levels(lo_msb, lo_lsb, hi_msb, hi_lsb, hi_open,
                           wires_c1, wires_c2):
    """Two-cycle protocol from raw sub-cell levels and explicit wire levels.

    ``wires_cX`` are dicts with integer arrays for keys ``hi_lsb``/``lo_lsb``/
    ``hi_msb``/``lo_msb``; cycle 2's LSB entries may be ``None`` to stand for
    the rail constants (contribute-false).  This is the defect-capable kernel:
    stored levels and wire levels can be perturbed independently.
    """
    def side_lower(lsb_wire, msb_wire):
        msb_term = msb_wire >= lo_msb
        if lsb_wire is None:
            return msb_term
        return (lsb_wire >= lo_lsb) | msb_term

    def side_upper(lsb_wire, msb_wire):
        msb_term = msb_wire < hi_msb
        if lsb_wire is None:
            term = msb_term
        else:
            term = (lsb_wire < hi_lsb) | msb_term
        return hi_open | term

    c1 = side_lower(wires_c1["lo_lsb"], wires_c1["lo_msb"]) & \
        side_upper(wires_c1["hi_lsb"], wires_c1["hi_msb"])
    c2 = side_lower(wires_c2["lo_lsb"], wires_c2["lo_msb"]) & \
        side_upper(wires_c2["hi_lsb"], wires_c2["hi_msb"])
    return c1 & c2


# Drive-line wire order used for DAC defect bookkeeping.
WIRES = ("hi_lsb", "lo_lsb", "hi_msb", "lo_msb")


@dataclass(frozen=True)
class DefectSpec:
    """Random single-level flips over stored sub-cell levels and DAC outputs.

    ``defect_rate`` is the fraction of the population to flip; targets are
    drawn uniformly without replacement, half shifted up and half down.
    """
    defect_rate: float
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.defect_rate <= 1.0):
            raise RangeError(f"defect_rate must be in [0, 1], got {self.defect_rate}")


class AcamArray:
    """H x W grid of macro-cells with an optional defect overlay.

    Stored state lives in sub-cell level planes (int8, shape (H, W)) plus an
    ``hi_open`` mask for full-range upper bounds.  ``dac_offset`` holds one
    +-1 level shift per (column, wire); zero means a healthy DAC.
    """

    def __init__(self, lo_msb, lo_lsb, hi_msb, hi_lsb, hi_open, dac_offset=None,
                 m_bits=M_BITS_DEFAULT):
        self.lo_msb = np.asarray(lo_msb, dtype=np.int8)
        self.lo_lsb = np.asarray(lo_lsb, dtype=np.int8)
        self.hi_msb = np.asarray(hi_msb, dtype=np.int8)
        self.hi_lsb = np.asarray(hi_lsb, dtype=np.int8)
        self.hi_open = np.asarray(hi_open, dtype=bool)
        self.m_bits = m_bits
        shape = self.lo_msb.shape
        if any(a.shape != shape for a in (self.lo_lsb, self.hi_msb, self.hi_lsb, self.hi_open)):
            raise DimensionError("level planes must share one shape")
        self.dac_offset = (np.zeros((shape[1], len(WIRES)), dtype=np.int8)
                           if dac_offset is None else np.asarray(dac_offset, dtype=np.int8))
        if self.dac_offset.shape != (shape[1], len(WIRES)):
            raise DimensionError("dac_offset must have shape (width, 4)")

    @classmethod
    def from_ranges(cls, t_lo, t_hi, m_bits=M_BITS_DEFAULT):
        """Build level planes from [t_lo, t_hi) code matrices."""
        t_lo = np.asarray(t_lo, dtype=np.int64)
        t_hi = np.asarray(t_hi, dtype=np.int64)
        full = 1 << (2 * m_bits)
        if (t_lo < 0).any() or (t_hi > full).any() or (t_lo >= t_hi).any():
            raise RangeError("ranges must satisfy 0 <= lo < hi <= full code range")
        lo_msb, lo_lsb = split_levels(t_lo, m_bits)
        hi_open = t_hi == full
        hi_capped = np.where(hi_open, 0, t_hi)
        hi_msb, hi_lsb = split_levels(hi_capped, m_bits)
        return cls(lo_msb, lo_lsb, hi_msb, hi_lsb, hi_open, m_bits=m_bits)

    @property
    def height(self):
        return self.lo_msb.shape[0]

    @property
    def width(self):
        return self.lo_msb.shape[1]

    @property
    def t_lo(self):
        return (self.lo_msb.astype(np.int64) << self.m_bits) + self.lo_lsb

    @property
    def t_hi(self):
        full = 1 << (2 * self.m_bits)
        closed = (self.hi_msb.astype(np.int64) << self.m_bits) + self.hi_lsb
        return np.where(self.hi_open, full, closed)

    @property
    def has_dac_defects(self):
        return bool(self.dac_offset.any())

    def cell(self, row, col):
        return MacroCell(int(self.t_lo[row, col]), int(self.t_hi[row, col]), self.m_bits)

    def population_size(self):
        """Defect population: 4 stored levels per cell plus 4 DAC outputs per column."""
        return 4 * self.height * self.width + 4 * self.width

    def _wire_levels(self, q):
        """Per-cycle wire levels for query codes (..., W), DAC offsets applied.

        LSB wire outputs clamp to [0, 2^M - 1]; MSB wires admit the -1
        sentinel, so they clamp to [-1, 2^M - 1].
        """
        q = np.asarray(q, dtype=np.int64)
        q_msb, q_lsb = split_levels(q, self.m_bits)
        top = (1 << self.m_bits) - 1
        off = self.dac_offset.astype(np.int64)

        def lsb_wire(base, wire_idx):
            return np.clip(base + off[:, wire_idx], 0, top)

        def msb_wire(base, wire_idx):
            return np.clip(base + off[:, wire_idx], -1, top)

        c1 = {"hi_lsb": lsb_wire(q_lsb, 0), "lo_lsb": lsb_wire(q_lsb, 1),
              "hi_msb": msb_wire(q_msb, 2), "lo_msb": msb_wire(q_msb - 1, 3)}
        c2 = {"hi_lsb": None, "lo_lsb": None,
              "hi_msb": msb_wire(q_msb - 1, 2), "lo_msb": msb_wire(q_msb, 3)}
        return c1, c2

    def match_rows(self, queries, precharge=None, doubled=True):
        """Row match bitsets for query codes of shape (W,) or (S, W).

        Rows outside the precharge mask report mismatch regardless of content.
        """
        queries = np.asarray(queries, dtype=np.int64)
        if queries.shape[-1] != self.width:
            raise DimensionError(f"query width {queries.shape[-1]} != array width {self.width}")
        single = queries.ndim == 1
        q = queries[None, :] if single else queries

        if doubled:
            if self.has_dac_defects:
                c1, c2 = self._wire_levels(q[:, None, :])
                cells = two_cycle_match_levels(self.lo_msb, self.lo_lsb, self.hi_msb,
                                               self.hi_lsb, self.hi_open, c1, c2)
            else:
                cells = two_cycle_match_codes(self.t_lo, self.t_hi, q[:, None, :], self.m_bits)
        else:
            cells = (q[:, None, :] >= self.t_lo) & (q[:, None, :] < self.t_hi)
        rows = cells.all(axis=-1)
        if precharge is not None:
            precharge = np.asarray(precharge, dtype=bool)
            if precharge.shape != (self.height,):
                raise DimensionError("precharge mask must have one bit per row")
            rows = rows & precharge
        return rows[0] if single else rows

    def copy(self):
        return AcamArray(self.lo_msb.copy(), self.lo_lsb.copy(), self.hi_msb.copy(),
                         self.hi_lsb.copy(), self.hi_open.copy(), self.dac_offset.copy(),
                         self.m_bits)


def array_search(array, queries, precharge_mask=None, doubled=True):
    """Search an array: row r matches iff precharged and every cell matches."""
    if precharge_mask is None:
        precharge_mask = np.ones(array.height, dtype=bool)
    return array.match_rows(queries, precharge_mask, doubled=doubled)


def apply_defects(array, spec):
    """Return a perturbed copy of the array per the defect specification.

    A single permutation of the device population is drawn and the first
    ``floor(rate * population)`` entries flip; alternating positions shift up
    and down so any prefix stays half-and-half.  Using a prefix makes curves
    at increasing rates nested for a fixed seed, which keeps sensitivity
    trends monotone per trial without biasing individual rates.
    """
    flipped = array.copy()
    population = array.population_size()
    n_flips = int(spec.defect_rate * population)
    if n_flips == 0:
        return flipped
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(population)
    targets = order[:n_flips]
    directions = np.where(np.arange(n_flips) % 2 == 0, 1, -1).astype(np.int8)

    n_levels = 4 * array.height * array.width
    top = (1 << array.m_bits) - 1
    planes = (flipped.lo_msb, flipped.lo_lsb, flipped.hi_msb, flipped.hi_lsb)

    level_mask = targets < n_levels
    level_targets = targets[level_mask]
    level_dirs = directions[level_mask]
    plane_idx = level_targets % 4
    rows, cols = np.divmod(level_targets // 4, array.width)
    for p in range(4):
        sel = plane_idx == p
        r, c, d = rows[sel], cols[sel], level_dirs[sel]
        if p >= 2:
            # Open upper bounds have no programmable upper device.
            keep = ~flipped.hi_open[r, c]
            r, c, d = r[keep], c[keep], d[keep]
        planes[p][r, c] = np.clip(planes[p][r, c] + d, 0, top)

    dac_targets = targets[~level_mask] - n_levels
    dac_dirs = directions[~level_mask]
    col, wire = np.divmod(dac_targets, len(WIRES))
    flipped.dac_offset[col, wire] = np.clip(flipped.dac_offset[col, wire] + dac_dirs, -1, 1)
    return flipped
