// The wire protocol counts offsets in Unicode scalar values (code points);
// JavaScript strings index UTF-16 code units. The two diverge as soon as a
// text contains astral-plane characters, so entity offsets computed against
// the JS string must be converted before they go on the wire.

export type OffsetConverter = (utf16Index: number) => number;

/** Map UTF-16 code-unit indices to scalar-value indices for one text. */
export function scalarOffsetConverter(text: string): OffsetConverter {
  // common case: no surrogate pairs, the mapping is the identity
  let hasAstral = false;
  for (let i = 0; i < text.length; i += 1) {
    const code = text.charCodeAt(i);
    if (code >= 0xd800 && code <= 0xdbff) {
      hasAstral = true;
      break;
    }
  }
  if (!hasAstral) return (index) => index;

  const scalarAt = new Array<number>(text.length + 1);
  let scalar = 0;
  let unit = 0;
  for (const ch of text) {
    for (let k = 0; k < ch.length; k += 1) scalarAt[unit + k] = scalar;
    unit += ch.length;
    scalar += 1;
  }
  scalarAt[unit] = scalar;
  return (index) => scalarAt[index];
}

export function scalarLength(text: string): number {
  let count = 0;
  // eslint-disable-next-line @typescript-eslint/no-unused-vars
  for (const _ of text) count += 1;
  return count;
}
