"""Online query service over a PathDb: a pure request handler, a torrc
snippet emitter, atomic database replacement, and a small stdlib HTTP
front end (three JSON routes plus static files).

Responses are a pure function of (request, database, blacklist): JSON is
emitted with sorted keys and fixed separators, so identical queries against
the same database are byte-identical. The service keeps no per-query state
and writes nothing to disk.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .asdb import AsBlacklist
from .consensus import ipv4_sort_key, parse_ipv4
from .safety import (
    EmptySuspectSet,
    PathDb,
    SuspectSet,
    UnknownDestination,
    unsafe_exits,
    validate_path_db,
)

MAX_ASN = 2 ** 32 - 1
DEFAULT_RATE_PER_SECOND = 10


class MalformedAsNumber(ValueError):
    def __init__(self, token) -> None:
        super().__init__(f"not an AS number: {token!r}")
        self.token = token


class MalformedRequest(ValueError):
    pass


class NoDatabaseLoaded(RuntimeError):
    pass


class RateLimited(RuntimeError):
    pass


# error class -> (HTTP status, stable machine-readable code)
ERROR_STATUS = {
    EmptySuspectSet: (400, "empty-suspect-set"),
    MalformedAsNumber: (400, "malformed-as-number"),
    MalformedRequest: (400, "malformed-request"),
    UnknownDestination: (404, "unknown-destination"),
    NoDatabaseLoaded: (503, "no-database-loaded"),
    RateLimited: (429, "rate-limited"),
}


def canonical_json(document) -> bytes:
    return json.dumps(document, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True).encode("ascii")


def coerce_asn(value) -> int:
    """Accept an int or a decimal string with an optional AS/as prefix."""
    if isinstance(value, bool):
        raise MalformedAsNumber(value)
    if isinstance(value, int):
        asn = value
    elif isinstance(value, str):
        text = value.strip()
        if text[:2].upper() == "AS":
            text = text[2:]
        if not text.isdigit():
            raise MalformedAsNumber(value)
        asn = int(text)
    else:
        raise MalformedAsNumber(value)
    if not 0 <= asn <= MAX_ASN:
        raise MalformedAsNumber(value)
    return asn


@dataclass(frozen=True)
class QueryRequest:
    suspect_asns: tuple[int, ...]
    destination: str
    include_inconclusive: bool = True

    @classmethod
    def of(cls, suspects, destination: str,
           include_inconclusive: bool = True) -> "QueryRequest":
        return cls(tuple(coerce_asn(a) for a in suspects), destination,
                   include_inconclusive)


def parse_query_document(body: bytes | str) -> QueryRequest:
    try:
        document = json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedRequest(f"body is not JSON: {exc}") from None
    if not isinstance(document, dict):
        raise MalformedRequest("body must be a JSON object")
    suspects = document.get("suspect_asns")
    if not isinstance(suspects, list):
        raise MalformedRequest("suspect_asns must be a list")
    destination = document.get("destination")
    if not isinstance(destination, str) or not destination.strip():
        raise MalformedRequest("destination must be a nonempty string")
    include = document.get("include_inconclusive", True)
    if not isinstance(include, bool):
        raise MalformedRequest("include_inconclusive must be a boolean")
    return QueryRequest.of(suspects, destination.strip(), include)


@dataclass(frozen=True)
class TorrcSnippet:
    lines: tuple[str, ...]
    exit_count: int

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def emit_torrc(unsafe: list[str], strict: bool = False) -> TorrcSnippet:
    """One ExcludeExitNodes line listing every excluded exit IP."""
    addresses = sorted({parse_ipv4(ip) for ip in unsafe}, key=ipv4_sort_key)
    if not addresses:
        return TorrcSnippet(("# no exits to exclude",), 0)
    lines = ["ExcludeExitNodes " + ",".join(addresses)]
    if strict:
        lines.append("StrictNodes 1")
    return TorrcSnippet(tuple(lines), len(addresses))


def handle_query(request: QueryRequest, db: PathDb,
                 blacklist: AsBlacklist | None = None) -> dict:
    """Resolve a query against one database. Pure; raises the 4xx-class
    errors listed in ERROR_STATUS on bad input."""
    suspects = SuspectSet.of(request.suspect_asns)
    report = unsafe_exits(suspects, request.destination, db)
    excluded = list(report.unsafe_exits)
    if request.include_inconclusive:
        excluded.extend(report.inconclusive_exits)
    torrc = emit_torrc(excluded)
    response = {
        "unsafe_exits": list(report.unsafe_exits),
        "inconclusive_exits": list(report.inconclusive_exits),
        "safe_count": report.safe_count,
        "torrc": list(torrc.lines),
        "db_built_at": report.snapshot_id,
    }
    if blacklist is not None:
        dest_ip = db.resolve_destination(request.destination)
        on_path: set[int] = set()
        for exit_relay in db.exits:
            on_path.update(db.entries.get((exit_relay.fingerprint, dest_ip), ()))
        # evaluated at the db's build instant so responses stay reproducible
        listed = blacklist.listed_asns(db.built_at)
        response["blacklist_advisory"] = sorted(on_path & set(listed))
    return response


class TokenBucket:
    """Classic token bucket; capacity equals the per-second rate."""

    def __init__(self, rate_per_second: float, clock=time.monotonic) -> None:
        if rate_per_second <= 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate_per_second)
        self.capacity = float(rate_per_second)
        self.tokens = self.capacity
        self.clock = clock
        self.updated = clock()

    def allow(self) -> bool:
        now = self.clock()
        self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
        self.updated = now
        if self.tokens >= 1.0:
            self.tokens -= 1.0
            return True
        return False


class ApiService:
    """Query service state: the current database, an optional blacklist,
    per-connection rate limits, and (opt-in) aggregate counters.

    Reads take a single reference to the current database, so every
    response is internally consistent with exactly one database even while
    a swap is in progress.
    """

    def __init__(self, db: PathDb | None = None,
                 blacklist: AsBlacklist | None = None,
                 rate_per_second: float = DEFAULT_RATE_PER_SECOND,
                 counters_enabled: bool = False,
                 clock=time.monotonic) -> None:
        self._db = db
        self._blacklist = blacklist
        self._swap_lock = threading.Lock()
        self._rate = rate_per_second
        self._clock = clock
        self._buckets: dict[str, TokenBucket] = {}
        self._bucket_lock = threading.Lock()
        self.counters_enabled = counters_enabled
        self.counters = {"queries": 0, "errors": 0, "swaps": 0}

    @property
    def db(self) -> PathDb | None:
        return self._db

    def swap_database(self, new_db: PathDb) -> dict:
        """Atomically replace the serving database; invalid input leaves
        the previous database in place."""
        validate_path_db(new_db)
        with self._swap_lock:
            self._db = new_db
        if self.counters_enabled:
            self.counters["swaps"] += 1
        return {"swapped": True, "db_built_at": new_db.built_at.isoformat()}

    def _admit(self, connection_id: str | None) -> bool:
        if connection_id is None:
            return True
        with self._bucket_lock:
            bucket = self._buckets.get(connection_id)
            if bucket is None:
                bucket = TokenBucket(self._rate, clock=self._clock)
                self._buckets[connection_id] = bucket
            return bucket.allow()

    def query(self, request: QueryRequest) -> dict:
        db = self._db
        if db is None:
            raise NoDatabaseLoaded("no database loaded")
        return handle_query(request, db, self._blacklist)

    def handle_query_bytes(self, body: bytes,
                           connection_id: str | None = None) -> tuple[int, bytes]:
        """Full request path: rate limit, parse, query. Returns
        (status, canonical JSON body); never raises."""
        try:
            if not self._admit(connection_id):
                raise RateLimited("too many requests")
            request = parse_query_document(body)
            response = self.query(request)
        except tuple(ERROR_STATUS) as exc:
            status, code = ERROR_STATUS[type(exc)]
            if self.counters_enabled:
                self.counters["errors"] += 1
            return status, canonical_json({"error": code, "detail": str(exc)})
        if self.counters_enabled:
            self.counters["queries"] += 1
        return 200, canonical_json(response)

    def db_info(self) -> tuple[int, bytes]:
        db = self._db
        if db is None:
            return 503, canonical_json(
                {"error": "no-database-loaded", "detail": "no database loaded"})
        info = {
            "built_at": db.built_at.isoformat(),
            "exit_count": len(db.exits),
            "destination_count": len(db.destinations),
            "destinations": [
                {"category": d.category, "host": d.host, "address": d.address}
                for d in db.destinations
            ],
        }
        return 200, canonical_json(info)

    def health(self) -> tuple[int, bytes]:
        return 200, canonical_json({"status": "ok", "db_loaded": self._db is not None})


_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
    ".map": "application/json",
}


def _default_static_dir() -> Path:
    return Path(__file__).resolve().parent / "static"


class _Handler(BaseHTTPRequestHandler):
    server_version = "aswatch"
    protocol_version = "HTTP/1.1"

    # privacy posture: no per-request logging
    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    @property
    def service(self) -> ApiService:
        return self.server.service  # type: ignore[attr-defined]

    def _send(self, status: int, body: bytes,
              content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", "no-store")
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self) -> None:  # noqa: N802 - stdlib naming
        if self.path != "/v1/unsafe-exits":
            self._send(404, canonical_json({"error": "not-found", "detail": self.path}))
            return
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, payload = self.service.handle_query_bytes(
            body, connection_id=self.client_address[0])
        self._send(status, payload)

    def do_GET(self) -> None:  # noqa: N802 - stdlib naming
        if self.path == "/v1/health":
            self._send(*self.service.health())
            return
        if self.path == "/v1/db-info":
            self._send(*self.service.db_info())
            return
        self._send_static(self.path)

    def _send_static(self, raw_path: str) -> None:
        root = self.server.static_dir  # type: ignore[attr-defined]
        name = raw_path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (root / name).resolve()
        if root not in target.parents and target != root:
            self._send(404, canonical_json({"error": "not-found", "detail": raw_path}))
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send(404, canonical_json({"error": "not-found", "detail": raw_path}))
            return
        content_type = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), content_type)


def make_server(service: ApiService, port: int = 8080,
                bind: str = "127.0.0.1",
                static_dir: Path | str | None = None) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((bind, port), _Handler)
    server.service = service  # type: ignore[attr-defined]
    server.static_dir = Path(static_dir or _default_static_dir()).resolve()  # type: ignore[attr-defined]
    return server
