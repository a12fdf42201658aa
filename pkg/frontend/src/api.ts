// Service client. Only two endpoints exist; both return canonical JSON.

export interface QueryResponse {
  unsafe_exits: string[];
  inconclusive_exits: string[];
  safe_count: number;
  torrc: string[];
  db_built_at: string;
}

export interface DbInfo {
  built_at: string;
  exit_count: number;
  destination_count: number;
  destinations: { category: string; host: string; address: string }[];
}

export interface QueryParams {
  suspectAsns: number[];
  destination: string;
  includeInconclusive: boolean;
}

export type QueryResult =
  | { ok: true; response: QueryResponse }
  | { ok: false; code: string; message: string };

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function bannerMessage(code: string, detail: string): string {
  if (code === "no-database-loaded") return "service has no database loaded";
  return detail || code;
}

export async function submitQuery(
  params: QueryParams,
  fetchFn: FetchLike = fetch,
): Promise<QueryResult> {
  const body = JSON.stringify({
    suspect_asns: params.suspectAsns,
    destination: params.destination,
    include_inconclusive_in_torrc: params.includeInconclusive,
  });
  let response: Response;
  try {
    response = await fetchFn("/v1/unsafe-exits", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
  } catch (err) {
    return { ok: false, code: "network", message: `request failed: ${err}` };
  }
  let document: unknown;
  try {
    document = await response.json();
  } catch {
    return { ok: false, code: "bad-response", message: `HTTP ${response.status}` };
  }
  if (!response.ok) {
    const { error = "error", detail = "" } = document as {
      error?: string;
      detail?: string;
    };
    return { ok: false, code: error, message: bannerMessage(error, detail) };
  }
  return { ok: true, response: document as QueryResponse };
}

export async function fetchDbInfo(fetchFn: FetchLike = fetch): Promise<DbInfo | null> {
  try {
    const response = await fetchFn("/v1/db-info");
    if (!response.ok) return null;
    return (await response.json()) as DbInfo;
  } catch {
    return null;
  }
}
