// Helpers for querying a suspect set in several smaller requests. The
// server's verdict is a union over suspects, so part results can be
// recombined without loss.

export function canSplit(count: number, parts: number): boolean {
  return parts >= 2 && parts <= count;
}

/** Round-robin partition: element i lands in bucket i mod parts. */
export function splitQueryHelper<T>(suspects: readonly T[], parts: number): T[][] {
  if (!canSplit(suspects.length, parts)) {
    throw new RangeError(`cannot split ${suspects.length} suspects into ${parts} parts`);
  }
  const buckets: T[][] = Array.from({ length: parts }, () => []);
  suspects.forEach((item, i) => {
    buckets[i % parts]!.push(item);
  });
  return buckets;
}

/** Fisher-Yates copy; the server is order-blind, this is purely cosmetic. */
export function shuffled<T>(values: readonly T[], random: () => number = Math.random): T[] {
  const out = values.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(random() * (i + 1));
    [out[i], out[j]] = [out[j]!, out[i]!];
  }
  return out;
}
