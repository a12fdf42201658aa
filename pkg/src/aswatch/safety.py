"""The safety core: does any suspect AS sit on both ends of a circuit?

A circuit is safe when the client-side AS set (user traceroute) and the
exit-side AS set (inferred exit<->destination paths) do not intersect. The
PathDb holds the precomputed exit-side set for every (exit relay, catalog
destination) pair; an empty or missing entry means inference failed and the
exit is reported as inconclusive rather than silently trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .consensus import ipv4_sort_key, parse_ipv4


class EmptySuspectSet(ValueError):
    pass


class UnknownDestination(LookupError):
    def __init__(self, destination: str):
        super().__init__(f"destination {destination!r} not in database")
        self.destination = destination


@dataclass(frozen=True)
class SuspectSet:
    asns: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "asns", frozenset(int(a) for a in self.asns))
        if not self.asns:
            raise EmptySuspectSet("suspect set is empty")

    @classmethod
    def of(cls, asns) -> "SuspectSet":
        return cls(frozenset(asns))


@dataclass(frozen=True)
class PathDbExit:
    fingerprint: str
    address: str


@dataclass(frozen=True)
class PathDbDest:
    category: str
    host: str
    address: str
    asn: int | None


@dataclass(frozen=True)
class PathDb:
    built_at: datetime = field(compare=False)
    exits: tuple[PathDbExit, ...]
    destinations: tuple[PathDbDest, ...]
    entries: dict[tuple[str, str], frozenset[int]]
    # Inputs each entry was computed from: (exit origins, dest origins,
    # topology version). In-memory only; lets refresh skip unchanged entries.
    entry_inputs: dict = field(default_factory=dict, compare=False, repr=False)
    topology_version: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "exits",
                           tuple(sorted(self.exits, key=lambda e: e.fingerprint)))
        object.__setattr__(self, "destinations",
                           tuple(sorted(self.destinations,
                                        key=lambda d: (d.category, d.host, ipv4_sort_key(d.address)))))
        validate_path_db(self)

    @property
    def destination_ips(self) -> frozenset[str]:
        return frozenset(d.address for d in self.destinations)

    def resolve_destination(self, destination: str) -> str:
        """Accept an IPv4 literal or a catalog host label; return the IP."""
        try:
            ip = parse_ipv4(destination)
        except ValueError:
            for dest in self.destinations:
                if dest.host == destination:
                    return dest.address
            raise UnknownDestination(destination) from None
        if ip not in self.destination_ips:
            raise UnknownDestination(destination)
        return ip


class ValidationFailed(ValueError):
    pass


def validate_path_db(db: PathDb) -> None:
    fingerprints = {e.fingerprint for e in db.exits}
    if len(fingerprints) != len(db.exits):
        raise ValidationFailed("duplicate exit fingerprint")
    dest_ips = {d.address for d in db.destinations}
    for fp, ip in db.entries:
        if fp not in fingerprints:
            raise ValidationFailed(f"entry references unknown exit {fp}")
        if ip not in dest_ips:
            raise ValidationFailed(f"entry references unknown destination {ip}")


@dataclass(frozen=True)
class UnsafeExitReport:
    suspects: tuple[int, ...]
    destination: str
    unsafe_exits: tuple[str, ...]
    inconclusive_exits: tuple[str, ...]
    safe_count: int
    snapshot_id: str

    @property
    def total_exits(self) -> int:
        return len(self.unsafe_exits) + len(self.inconclusive_exits) + self.safe_count


def circuit_is_safe(client_side, exit_side) -> bool:
    """True iff no AS appears on both the client side and the exit side."""
    return not (frozenset(client_side) & frozenset(exit_side))


def overlap(client_side, exit_side) -> frozenset[int]:
    return frozenset(client_side) & frozenset(exit_side)


def unsafe_exits(suspects: SuspectSet, destination: str, db: PathDb) -> UnsafeExitReport:
    """Partition the db's exits into unsafe / inconclusive / safe for a query."""
    if isinstance(suspects, SuspectSet):
        asns = suspects.asns
    else:
        asns = SuspectSet.of(suspects).asns
    dest_ip = db.resolve_destination(destination)

    unsafe: list[str] = []
    inconclusive: list[str] = []
    safe = 0
    for exit_relay in db.exits:
        entry = db.entries.get((exit_relay.fingerprint, dest_ip))
        if not entry:
            inconclusive.append(exit_relay.address)
        elif entry & asns:
            unsafe.append(exit_relay.address)
        else:
            safe += 1
    return UnsafeExitReport(
        suspects=tuple(sorted(asns)),
        destination=dest_ip,
        unsafe_exits=tuple(sorted(set(unsafe), key=ipv4_sort_key)),
        inconclusive_exits=tuple(sorted(set(inconclusive), key=ipv4_sort_key)),
        safe_count=safe,
        snapshot_id=db.built_at.isoformat(),
    )


def filter_prebuilt_circuits(circuits):
    """First circuit whose (client_side, exit_side) sets do not intersect.

    circuits: ordered iterable of (payload, client_side, exit_side), fastest
    first. Returns the payload, or None when every circuit is unsafe.
    """
    for payload, client_side, exit_side in circuits:
        if circuit_is_safe(client_side, exit_side):
            return payload
    return None
