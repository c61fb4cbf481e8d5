/** Numeric helpers shared by the format converters. */

const buffer = new DataView(new ArrayBuffer(8));

/**
 * The next representable double above x.  Converting a native "x <= t goes
 * left" split into the interchange's strict "x < t' goes left" uses
 * t' = nextUp(t), which preserves the branch taken for every double input.
 */
export function nextUp(x: number): number {
  if (Number.isNaN(x) || x === Infinity) {
    return x;
  }
  if (x === 0) {
    return Number.MIN_VALUE;
  }
  buffer.setFloat64(0, x);
  let bits = buffer.getBigUint64(0);
  bits += x > 0 ? 1n : -1n;
  buffer.setBigUint64(0, bits);
  return buffer.getFloat64(0);
}
