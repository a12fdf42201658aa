// Pure view rendering: every function maps response data to an HTML
// string, so the whole layer is snapshot-testable without a DOM.

import type { DbInfo, QueryResponse } from "./api.js";

export interface PartResult {
  suspects: number[];
  response: QueryResponse;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Numeric octet order, matching how the server sorts exit addresses. */
export function ipSortKey(address: string): number[] {
  return address.split(".").map(Number);
}

function compareIps(a: string, b: string): number {
  const ka = ipSortKey(a);
  const kb = ipSortKey(b);
  for (let i = 0; i < 4; i++) {
    const d = (ka[i] ?? 0) - (kb[i] ?? 0);
    if (d !== 0) return d;
  }
  return 0;
}

function ipList(heading: string, addresses: string[]): string {
  const title = `<h2>${heading} (${addresses.length})</h2>`;
  if (addresses.length === 0) {
    return `${title}\n<p class="none">none</p>`;
  }
  const items = addresses.map((ip) => `<li>${escapeHtml(ip)}</li>`).join("\n");
  return `${title}\n<ul>\n${items}\n</ul>`;
}

function torrcBlock(lines: string[]): string {
  if (lines.length === 0) return "";
  const text = lines.map(escapeHtml).join("\n");
  return [
    '<div class="torrc">',
    `<pre id="torrc-text">${text}</pre>`,
    '<button type="button" data-copy-target="torrc-text">copy torrc</button>',
    "</div>",
  ].join("\n");
}

export function renderReport(response: QueryResponse): string {
  return [
    '<section class="report">',
    ipList("unsafe exits", response.unsafe_exits),
    ipList("inconclusive exits", response.inconclusive_exits),
    `<p class="safe">safe exits: ${response.safe_count}</p>`,
    `<p class="freshness">db built at ${escapeHtml(response.db_built_at)}</p>`,
    torrcBlock(response.torrc),
    "</section>",
  ]
    .filter((part) => part !== "")
    .join("\n");
}

/** Recombine sequential part responses into one view. Unsafe and
 * inconclusive sets union; the safe count is whatever the union leaves
 * of the (constant) exit total; torrc IPs union into a single line. */
export function combineParts(parts: PartResult[]): QueryResponse {
  const unsafe = new Set<string>();
  const inconclusive = new Set<string>();
  const torrcIps = new Set<string>();
  for (const part of parts) {
    part.response.unsafe_exits.forEach((ip) => unsafe.add(ip));
    part.response.inconclusive_exits.forEach((ip) => inconclusive.add(ip));
    for (const line of part.response.torrc) {
      for (const ip of line.replace(/^ExcludeExitNodes\s+/, "").split(",")) {
        if (ip) torrcIps.add(ip);
      }
    }
  }
  const first = parts[0]!.response;
  const total =
    first.unsafe_exits.length + first.inconclusive_exits.length + first.safe_count;
  const unsafeSorted = [...unsafe].sort(compareIps);
  const torrcSorted = [...torrcIps].sort(compareIps);
  return {
    unsafe_exits: unsafeSorted,
    inconclusive_exits: [...inconclusive].sort(compareIps),
    safe_count: total - unsafe.size - inconclusive.size,
    torrc: torrcSorted.length > 0 ? [`ExcludeExitNodes ${torrcSorted.join(",")}`] : [],
    db_built_at: first.db_built_at,
  };
}

export function renderSplitReport(parts: PartResult[]): string {
  const combined = renderReport(combineParts(parts));
  const annotations = parts
    .map((part) => {
      const who = part.suspects.map((asn) => `AS${asn}`).join(", ");
      const hits =
        part.response.unsafe_exits.length > 0
          ? part.response.unsafe_exits.map(escapeHtml).join(", ")
          : "none";
      return `<li>${escapeHtml(who)} &rarr; unsafe: ${hits}</li>`;
    })
    .join("\n");
  return [
    combined.replace("</section>", ""),
    `<h3>per part (${parts.length})</h3>`,
    `<ol class="parts">\n${annotations}\n</ol>`,
    "</section>",
  ].join("\n");
}

export function renderBanner(code: string, message: string): string {
  return `<div class="banner" role="alert">${escapeHtml(code)}: ${escapeHtml(message)}</div>`;
}

export function renderDbInfo(info: DbInfo | null): string {
  if (info === null) {
    return '<span class="db-missing">service database unavailable</span>';
  }
  return escapeHtml(
    `db built at ${info.built_at}; ${info.exit_count} exits, ` +
      `${info.destination_count} destinations`,
  );
}
