"""Parse, validate, and serialize simplified Tor consensus documents.

The grammar is a small subset of a network-status document: three validity
headers followed by per-relay ``r`` / ``s`` / ``w`` lines and an optional
``f`` family extension line. The canonical serializer uses fixed-width
encodings for every field except the nickname, so a serialized relay block
costs 209 bytes plus the nickname length. That keeps the marginal per-relay
size inside the 210-230 byte band observed for real consensus growth.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

KNOWN_FLAGS = frozenset({"Exit", "Fast", "Guard", "Running", "Stable", "Valid"})

# Canonical line widths. r-line fixed part (66) + s-line (120) + w-line (23)
# put a family-less relay block at 209 + len(nickname) bytes.
_S_LINE_CONTENT_WIDTH = 119
_BANDWIDTH_DIGITS = 10

_TS_FORMAT = "%Y-%m-%d %H:%M:%S"
_HEADER_NAMES = ("valid-after", "fresh-until", "valid-until")

_NICKNAME_RE = re.compile(r"^[A-Za-z0-9]{1,19}$")
_FINGERPRINT_RE = re.compile(r"^[0-9A-Fa-f]{40}$")


class ConsensusError(ValueError):
    pass


class MalformedLine(ConsensusError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateFingerprint(ConsensusError):
    def __init__(self, fingerprint: str):
        super().__init__(f"duplicate fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class MissingValidityHeader(ConsensusError):
    def __init__(self, names):
        super().__init__("missing header(s): " + ", ".join(names))
        self.names = tuple(names)


def parse_ipv4(token: str) -> str:
    """Validate a dotted-quad IPv4 string, returning it without leading zeros."""
    if ":" in token:
        raise ValueError(f"not an IPv4 address: {token!r}")
    parts = token.split(".")
    if len(parts) != 4:
        raise ValueError(f"not an IPv4 address: {token!r}")
    octets = []
    for part in parts:
        if not part.isdigit() or len(part) > 3:
            raise ValueError(f"not an IPv4 address: {token!r}")
        value = int(part)
        if value > 255:
            raise ValueError(f"octet out of range: {token!r}")
        octets.append(value)
    return ".".join(str(o) for o in octets)


def ipv4_sort_key(address: str) -> tuple[int, int, int, int]:
    a, b, c, d = (int(x) for x in address.split("."))
    return (a, b, c, d)


@dataclass(frozen=True)
class RelayRecord:
    fingerprint: str
    nickname: str
    address: str
    or_port: int
    flags: frozenset[str]
    bandwidth: int
    family_id: str | None = None

    def __post_init__(self):
        if not _FINGERPRINT_RE.match(self.fingerprint):
            raise ValueError(f"bad fingerprint: {self.fingerprint!r}")
        object.__setattr__(self, "fingerprint", self.fingerprint.upper())
        if not _NICKNAME_RE.match(self.nickname):
            raise ValueError(f"bad nickname: {self.nickname!r}")
        object.__setattr__(self, "address", parse_ipv4(self.address))
        if not 0 <= self.or_port <= 65535:
            raise ValueError(f"bad or_port: {self.or_port}")
        object.__setattr__(self, "flags", frozenset(self.flags))
        unknown = self.flags - KNOWN_FLAGS
        if unknown:
            raise ValueError(f"unknown flags: {sorted(unknown)}")
        if self.bandwidth < 0:
            raise ValueError(f"negative bandwidth: {self.bandwidth}")

    @property
    def subnet16(self) -> str:
        a, b, _, _ = self.address.split(".")
        return f"{a}.{b}"

    @property
    def is_guard(self) -> bool:
        return "Guard" in self.flags

    @property
    def is_exit(self) -> bool:
        return "Exit" in self.flags


@dataclass(frozen=True)
class ConsensusSnapshot:
    valid_after: datetime
    fresh_until: datetime
    valid_until: datetime
    relays: tuple[RelayRecord, ...]
    raw_byte_size: int = field(default=0, compare=False)
    unknown_line_count: int = field(default=0, compare=False)

    def __post_init__(self):
        if not (self.valid_after < self.fresh_until < self.valid_until):
            raise ValueError("validity window out of order")
        ordered = tuple(sorted(self.relays, key=lambda r: r.fingerprint))
        object.__setattr__(self, "relays", ordered)
        seen = set()
        for relay in ordered:
            if relay.fingerprint in seen:
                raise DuplicateFingerprint(relay.fingerprint)
            seen.add(relay.fingerprint)

    @property
    def guards(self) -> tuple[RelayRecord, ...]:
        return tuple(r for r in self.relays if r.is_guard)

    @property
    def exits(self) -> tuple[RelayRecord, ...]:
        return tuple(r for r in self.relays if r.is_exit)


def _parse_timestamp(line_no: int, rest: str) -> datetime:
    try:
        parsed = datetime.strptime(rest, _TS_FORMAT)
    except ValueError:
        raise MalformedLine(line_no, f"bad timestamp {rest!r}") from None
    return parsed.replace(tzinfo=timezone.utc)


def parse_consensus(document: bytes | str) -> ConsensusSnapshot:
    """Parse a consensus document into a snapshot.

    Unknown line types are counted and skipped. Relays come out sorted by
    fingerprint regardless of input order.
    """
    if isinstance(document, str):
        raw = document.encode("utf-8")
        text = document
    else:
        raw = bytes(document)
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedLine(0, f"not UTF-8: {exc}") from None

    headers: dict[str, datetime] = {}
    header_lines: dict[str, int] = {}
    relays: list[RelayRecord] = []
    unknown = 0

    current: dict | None = None

    def finish_current():
        nonlocal current
        if current is None:
            return
        if "flags" not in current:
            raise MalformedLine(current["line_no"], "relay has no s line")
        if "bandwidth" not in current:
            raise MalformedLine(current["line_no"], "relay has no w line")
        try:
            relay = RelayRecord(
                fingerprint=current["fingerprint"],
                nickname=current["nickname"],
                address=current["address"],
                or_port=current["or_port"],
                flags=current["flags"],
                bandwidth=current["bandwidth"],
                family_id=current.get("family_id"),
            )
        except DuplicateFingerprint:
            raise
        except ValueError as exc:
            raise MalformedLine(current["line_no"], str(exc)) from None
        relays.append(relay)
        current = None

    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        kind = tokens[0]

        if kind in _HEADER_NAMES:
            if kind in headers:
                raise MalformedLine(line_no, f"duplicate {kind} header")
            if len(tokens) != 3:
                raise MalformedLine(line_no, f"bad {kind} header")
            headers[kind] = _parse_timestamp(line_no, f"{tokens[1]} {tokens[2]}")
            header_lines[kind] = line_no
        elif kind == "r":
            finish_current()
            if len(tokens) != 5:
                raise MalformedLine(line_no, "r line needs 5 fields")
            try:
                or_port = int(tokens[4])
            except ValueError:
                raise MalformedLine(line_no, f"bad or_port {tokens[4]!r}") from None
            current = {
                "line_no": line_no,
                "nickname": tokens[1],
                "fingerprint": tokens[2],
                "address": tokens[3],
                "or_port": or_port,
            }
        elif kind == "s":
            if current is None:
                raise MalformedLine(line_no, "s line outside a relay block")
            if "flags" in current:
                raise MalformedLine(line_no, "duplicate s line")
            current["flags"] = frozenset(tokens[1:])
        elif kind == "w":
            if current is None:
                raise MalformedLine(line_no, "w line outside a relay block")
            if "bandwidth" in current:
                raise MalformedLine(line_no, "duplicate w line")
            if len(tokens) != 2 or not tokens[1].startswith("Bandwidth="):
                raise MalformedLine(line_no, "w line must read 'w Bandwidth=<int>'")
            value = tokens[1][len("Bandwidth="):]
            if not value.isdigit():
                raise MalformedLine(line_no, f"bad bandwidth {value!r}")
            current["bandwidth"] = int(value)
        elif kind == "f":
            if current is None:
                raise MalformedLine(line_no, "f line outside a relay block")
            if "family_id" in current:
                raise MalformedLine(line_no, "duplicate f line")
            if len(tokens) != 2:
                raise MalformedLine(line_no, "f line needs one token")
            current["family_id"] = tokens[1]
        else:
            unknown += 1

    finish_current()

    missing = [name for name in _HEADER_NAMES if name not in headers]
    if missing:
        raise MissingValidityHeader(missing)
    if not headers["valid-after"] < headers["fresh-until"]:
        raise MalformedLine(header_lines["fresh-until"], "fresh-until not after valid-after")
    if not headers["fresh-until"] < headers["valid-until"]:
        raise MalformedLine(header_lines["valid-until"], "valid-until not after fresh-until")

    seen: set[str] = set()
    for relay in relays:
        if relay.fingerprint in seen:
            raise DuplicateFingerprint(relay.fingerprint)
        seen.add(relay.fingerprint)

    return ConsensusSnapshot(
        valid_after=headers["valid-after"],
        fresh_until=headers["fresh-until"],
        valid_until=headers["valid-until"],
        relays=tuple(relays),
        raw_byte_size=len(raw),
        unknown_line_count=unknown,
    )


def is_live(snapshot: ConsensusSnapshot, now: datetime) -> bool:
    """True while the document may still be used: strictly before valid_until."""
    return now < snapshot.valid_until


def _canonical_relay_lines(relay: RelayRecord) -> list[str]:
    octets = relay.address.split(".")
    padded_ip = ".".join(f"{int(o):03d}" for o in octets)
    r_line = f"r {relay.nickname} {relay.fingerprint} {padded_ip} {relay.or_port:05d}"
    s_line = ("s" + "".join(f" {f}" for f in sorted(relay.flags))).ljust(_S_LINE_CONTENT_WIDTH)
    w_line = f"w Bandwidth={relay.bandwidth:0{_BANDWIDTH_DIGITS}d}"
    lines = [r_line, s_line, w_line]
    if relay.family_id is not None:
        lines.append(f"f {relay.family_id}")
    return lines


def serialize_consensus(snapshot: ConsensusSnapshot) -> bytes:
    """Emit the canonical form; parse(serialize(s)) is field-equal to s."""
    lines = [
        "valid-after " + snapshot.valid_after.strftime(_TS_FORMAT),
        "fresh-until " + snapshot.fresh_until.strftime(_TS_FORMAT),
        "valid-until " + snapshot.valid_until.strftime(_TS_FORMAT),
    ]
    for relay in snapshot.relays:
        lines.extend(_canonical_relay_lines(relay))
    return ("\n".join(lines) + "\n").encode("utf-8")
