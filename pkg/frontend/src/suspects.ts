// Suspect-AS field parsing. The server only ever sees the deduped numeric
// set; everything here exists to validate and echo tokens back to the user.

export const MAX_ASN = 4294967295; // 32-bit AS number space

export interface SuspectToken {
  raw: string;
  asn: number | null;
  error: string | null;
}

export interface ParsedSuspects {
  tokens: SuspectToken[];
  /** parsed values in input order, duplicates kept (for display) */
  display: number[];
  /** parsed values in first-seen order, deduped (what gets sent) */
  submission: number[];
  valid: boolean;
}

const TOKEN_RE = /^(?:as)?(\d+)$/i;

function parseToken(raw: string): SuspectToken {
  const match = TOKEN_RE.exec(raw);
  if (!match) {
    return { raw, asn: null, error: `"${raw}" is not an AS number` };
  }
  const asn = Number(match[1]);
  if (!Number.isSafeInteger(asn) || asn > MAX_ASN) {
    return { raw, asn: null, error: `"${raw}" is outside the AS number range` };
  }
  return { raw, asn, error: null };
}

export function parseSuspectsField(text: string): ParsedSuspects {
  const tokens = text
    .split(/[\s,]+/)
    .filter((part) => part.length > 0)
    .map(parseToken);

  const display: number[] = [];
  const submission: number[] = [];
  const seen = new Set<number>();
  for (const token of tokens) {
    if (token.asn === null) continue;
    display.push(token.asn);
    if (!seen.has(token.asn)) {
      seen.add(token.asn);
      submission.push(token.asn);
    }
  }
  const valid = tokens.length > 0 && tokens.every((t) => t.error === null);
  return { tokens, display, submission, valid };
}

/** IPv4 literal or a catalog host label; the server resolves either. */
export function destinationLooksValid(text: string): boolean {
  const trimmed = text.trim();
  if (trimmed.length === 0) return false;
  if (/^[\d.]+$/.test(trimmed)) {
    const octets = trimmed.split(".");
    return (
      octets.length === 4 &&
      octets.every((o) => /^\d{1,3}$/.test(o) && Number(o) <= 255)
    );
  }
  return /^[a-z0-9]([a-z0-9-]*[a-z0-9])?(\.[a-z0-9]([a-z0-9-]*[a-z0-9])?)*$/i.test(
    trimmed,
  );
}
