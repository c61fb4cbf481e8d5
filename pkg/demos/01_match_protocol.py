# How an 8-bit range compare runs on 4-bit cells in two search cycles.
#
# A macro-cell stores a half-open range [t_lo, t_hi) as four 4-bit sub-cell
# levels.  Cycle 1 evaluates the OR-form brackets of both bounds; cycle 2
# masks the LSB sub-cells and checks the MSB terms alone; the match line ANDs
# the two cycles.  The q_msb - 1 drive level underflows to -1 at q_msb = 0,
# which is exactly the "below every stored level" sentinel the boundary needs.

import numpy as np

from xtime import MacroCell, QueryLevels, match_direct, match_two_cycle
from xtime.acam import two_cycle_match_codes

cell = MacroCell(t_lo=200, t_hi=220)
print(f"stored range [{cell.t_lo}, {cell.t_hi})")
print(f"  lower bound sub-levels: msb={cell.lo_msb} lsb={cell.lo_lsb}"
      f"   (200 = 16*{cell.lo_msb} + {cell.lo_lsb})")
print(f"  upper bound sub-levels: msb={cell.hi_msb} lsb={cell.hi_lsb}")

for q in (199, 200, 210, 219, 220):
    wires = QueryLevels(q).cycle_inputs()
    print(f"q={q:3d}  cycle1 wires {wires[0]}")
    print(f"       cycle2 wires {wires[1]}")
    print(f"       two-cycle match: {match_two_cycle(cell, q)}   "
          f"direct: {match_direct(cell, q)}")

# The sentinel case: a full-range (don't care) cell must match code 0.
dc = MacroCell(0, 256)
print(f"\ndon't-care cell matches q=0: {match_two_cycle(dc, 0)}")

# Exhaustive check over every stored range and query, vectorized.
q = np.arange(256)
lo = np.repeat(np.arange(256), 256)
hi = np.tile(np.arange(1, 257), 256)
valid = lo < hi
lo, hi = lo[valid], hi[valid]
protocol = two_cycle_match_codes(lo[:, None], hi[:, None], q[None, :])
direct = (q[None, :] >= lo[:, None]) & (q[None, :] < hi[:, None])
print(f"\nexhaustive agreement over {protocol.size} triples: "
      f"{bool((protocol == direct).all())}")
