"""Turn raw operator inputs into the PathDb: traceroute transcripts, the
destination catalog, and the (exit x destination) path precomputation.

Traceroute input must be the bracketed-AS dialect, one hop per line:
``<idx> [AS<digits>] <name-or-ip> (<ipv4>) <rtt> ms ...``. Hops missing the
AS annotation or sitting on RFC1918 space still appear in the report but are
tallied separately so the user can decide to omit them.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from datetime import datetime, timezone

from .asdb import AsTopology, NoMatchingPrefix, PrefixTable, ip_to_asn
from .consensus import ConsensusSnapshot, ipv4_sort_key
from .pathinfer import UnknownAs, path_as_set
from .safety import PathDb, PathDbDest, PathDbExit


class UnrecognizedDialect(ValueError):
    pass


class NoHops(ValueError):
    pass


class PathDbFormatError(ValueError):
    pass


_HOP_RE = re.compile(
    r"^\s*(?P<idx>\d+)\s+"
    r"(?:\[AS(?P<asn>\d+)\]\s+)?"
    r"(?P<host>\S+)"
    r"(?:\s+\((?P<ip>\d{1,3}(?:\.\d{1,3}){3})\))?"
    r"(?P<rest>.*)$"
)
_RTT_RE = re.compile(r"(\d+(?:\.\d+)?)\s*ms")

_PRIVATE_NETS = (
    (0x0A000000, 0xFF000000),   # 10.0.0.0/8
    (0xAC100000, 0xFFF00000),   # 172.16.0.0/12
    (0xC0A80000, 0xFFFF0000),   # 192.168.0.0/16
)


def _is_private(ip: str) -> bool:
    a, b, c, d = (int(x) for x in ip.split("."))
    value = (a << 24) | (b << 16) | (c << 8) | d
    return any(value & mask == net for net, mask in _PRIVATE_NETS)


@dataclass(frozen=True)
class TraceHop:
    index: int
    asn: int | None
    host: str
    address: str | None
    rtts: tuple[float, ...]


@dataclass(frozen=True)
class TracerouteReport:
    hops: tuple[TraceHop, ...]
    as_sequence: tuple[int, ...]
    private_hops: int


def parse_traceroute(text: bytes | str) -> TracerouteReport:
    """Extract the AS sequence from a bracketed-AS traceroute transcript."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    hop_lines = []
    saw_header = False
    saw_content = False
    for line in text.splitlines():
        if not line.strip():
            continue
        saw_content = True
        if re.match(r"^\s*traceroute\b", line, re.IGNORECASE):
            saw_header = True
            continue
        match = _HOP_RE.match(line)
        if match:
            hop_lines.append(match)
    if not hop_lines:
        if saw_header or not saw_content:
            raise NoHops("transcript contains no hop lines")
        raise UnrecognizedDialect("no bracketed-AS hop lines found")
    if not any(m["asn"] for m in hop_lines):
        # hop-shaped lines but zero [ASn] annotations: some other dialect
        raise UnrecognizedDialect("hop lines carry no [ASn] annotations")

    hops = []
    sequence: list[int] = []
    private = 0
    for match in hop_lines:
        asn = int(match["asn"]) if match["asn"] else None
        ip = match["ip"]
        if ip is not None:
            try:
                octets = [int(x) for x in ip.split(".")]
                if any(o > 255 for o in octets):
                    ip = None
            except ValueError:
                ip = None
        rtts = tuple(float(v) for v in _RTT_RE.findall(match["rest"] or ""))
        hops.append(TraceHop(int(match["idx"]), asn, match["host"], ip, rtts))
        if asn is not None and asn not in sequence:
            sequence.append(asn)
        if asn is None or (ip is not None and _is_private(ip)):
            private += 1
    return TracerouteReport(tuple(hops), tuple(sequence), private)


@dataclass(frozen=True)
class CatalogEntry:
    category: str
    host: str
    address: str
    origins: frozenset[int]

    @property
    def asn(self) -> int | None:
        return min(self.origins) if self.origins else None


@dataclass(frozen=True)
class DestinationCatalog:
    entries: tuple[CatalogEntry, ...]
    fetched_at: datetime


def load_catalog(document: bytes | str, prefix_table: PrefixTable,
                 resolver=None, fetched_at: datetime | None = None) -> DestinationCatalog:
    """Read a `category,host,ipv4` CSV. Rows with an empty ipv4 column go
    through the injected resolver (host -> IP); without one they are skipped.
    Origin ASes come from the prefix table; uncovered IPs get an empty set."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    reader = csv.reader(io.StringIO(document))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:3]] != ["category", "host", "ipv4"]:
        raise ValueError("catalog CSV must start with a category,host,ipv4 header")
    entries = []
    for row in reader:
        if not row or not any(cell.strip() for cell in row):
            continue
        category, host, ip = (cell.strip() for cell in row[:3])
        if not ip:
            if resolver is None:
                continue
            ip = resolver(host)
        try:
            origins = ip_to_asn(ip, prefix_table)
        except NoMatchingPrefix:
            origins = frozenset()
        entries.append(CatalogEntry(category, host, ip, origins))
    return DestinationCatalog(
        entries=tuple(entries),
        fetched_at=fetched_at or datetime.now(timezone.utc),
    )


def _exit_side_set(exit_origins, dest_origins, topology: AsTopology, k: int) -> frozenset[int]:
    """Both-direction path union over every (exit origin, dest origin) pair;
    empty set when no direction of any pair yields a path."""
    collected: set[int] = set()
    found = False
    for exit_asn in exit_origins:
        for dest_asn in dest_origins:
            try:
                forward = path_as_set(exit_asn, dest_asn, topology, k)
                reverse = path_as_set(dest_asn, exit_asn, topology, k)
            except UnknownAs:
                continue
            if forward or reverse:
                found = True
                collected.update(forward)
                collected.update(reverse)
    if not found:
        return frozenset()
    collected.update(exit_origins)
    collected.update(dest_origins)
    return frozenset(collected)


def _relay_origins(relay, prefix_table: PrefixTable) -> frozenset[int]:
    try:
        return ip_to_asn(relay.address, prefix_table)
    except NoMatchingPrefix:
        return frozenset()


def build_path_db(snapshot: ConsensusSnapshot, catalog: DestinationCatalog,
                  topology: AsTopology, prefix_table: PrefixTable,
                  k: int = 5, now: datetime | None = None) -> PathDb:
    """Precompute the exit-side AS set for every (Exit relay, destination)."""
    built_at = now or datetime.now(timezone.utc)
    exits = []
    entries = {}
    entry_inputs = {}
    version = topology.version
    for relay in snapshot.exits:
        exits.append(PathDbExit(relay.fingerprint, relay.address))
        exit_origins = _relay_origins(relay, prefix_table)
        for dest in catalog.entries:
            key = (relay.fingerprint, dest.address)
            entries[key] = _exit_side_set(exit_origins, dest.origins, topology, k)
            entry_inputs[key] = (exit_origins, dest.origins, version)
    destinations = tuple(PathDbDest(d.category, d.host, d.address, d.asn)
                         for d in catalog.entries)
    return PathDb(
        built_at=built_at,
        exits=tuple(exits),
        destinations=destinations,
        entries=entries,
        entry_inputs=entry_inputs,
        topology_version=version,
    )


def refresh(previous: PathDb, new_snapshot: ConsensusSnapshot,
            new_catalog: DestinationCatalog, topology: AsTopology,
            prefix_table: PrefixTable, k: int = 5,
            now: datetime | None = None) -> PathDb:
    """Rebuild the PathDb, carrying over entries whose inputs are unchanged.

    Equivalent (field-for-field, built_at aside) to build_path_db on the new
    inputs; only entries whose exit origins, destination origins, or topology
    changed are recomputed. A db loaded from disk has no recorded inputs, so
    everything recomputes. Carried entries were computed at the previous k,
    so k must stay stable across refreshes.
    """
    built_at = now or datetime.now(timezone.utc)
    version = topology.version
    exits = []
    entries = {}
    entry_inputs = {}
    for relay in new_snapshot.exits:
        exits.append(PathDbExit(relay.fingerprint, relay.address))
        exit_origins = _relay_origins(relay, prefix_table)
        for dest in new_catalog.entries:
            key = (relay.fingerprint, dest.address)
            inputs = (exit_origins, dest.origins, version)
            if key in previous.entries and previous.entry_inputs.get(key) == inputs:
                entries[key] = previous.entries[key]
            else:
                entries[key] = _exit_side_set(exit_origins, dest.origins, topology, k)
            entry_inputs[key] = inputs
    destinations = tuple(PathDbDest(d.category, d.host, d.address, d.asn)
                         for d in new_catalog.entries)
    return PathDb(
        built_at=built_at,
        exits=tuple(exits),
        destinations=destinations,
        entries=entries,
        entry_inputs=entry_inputs,
        topology_version=version,
    )


def save_path_db(db: PathDb) -> bytes:
    """Canonical flat-file form; load(save(db)) then save again is bit-exact."""
    lines = [f"pathdb-v1 built_at={db.built_at.isoformat()}"]
    for exit_relay in db.exits:
        lines.append(f"exit {exit_relay.fingerprint}|{exit_relay.address}")
    for dest in db.destinations:
        asn = "" if dest.asn is None else str(dest.asn)
        lines.append(f"dest {dest.category}|{dest.host}|{dest.address}|{asn}")
    for fp, ip in sorted(db.entries, key=lambda key: (key[0], ipv4_sort_key(key[1]))):
        asns = ",".join(str(a) for a in sorted(db.entries[(fp, ip)]))
        lines.append(f"{fp}|{ip}|{asns}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_path_db(data: bytes | str) -> PathDb:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines()
    if not lines or not lines[0].startswith("pathdb-v1 built_at="):
        raise PathDbFormatError("missing pathdb-v1 header")
    try:
        built_at = datetime.fromisoformat(lines[0][len("pathdb-v1 built_at="):])
    except ValueError as exc:
        raise PathDbFormatError(f"bad built_at: {exc}") from None

    exits = []
    destinations = []
    entries = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("exit "):
            parts = line[len("exit "):].split("|")
            if len(parts) != 2:
                raise PathDbFormatError(f"line {line_no}: bad exit line")
            exits.append(PathDbExit(parts[0], parts[1]))
        elif line.startswith("dest "):
            parts = line[len("dest "):].split("|")
            if len(parts) != 4:
                raise PathDbFormatError(f"line {line_no}: bad dest line")
            asn = int(parts[3]) if parts[3] else None
            destinations.append(PathDbDest(parts[0], parts[1], parts[2], asn))
        else:
            parts = line.split("|")
            if len(parts) != 3:
                raise PathDbFormatError(f"line {line_no}: bad entry line")
            fp, ip, asn_text = parts
            asns = frozenset(int(a) for a in asn_text.split(",")) if asn_text else frozenset()
            entries[(fp, ip)] = asns
    return PathDb(
        built_at=built_at,
        exits=tuple(exits),
        destinations=tuple(destinations),
        entries=entries,
    )
