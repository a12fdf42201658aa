"""IP-to-AS mapping, the AS relationship graph, and the multi-origin blacklist.

Prefix data uses RouteViews pfx2as lines (``prefix<TAB>mask_len<TAB>asn[,asn...]``),
relationships use CAIDA serial-1 as-rel lines (``as1|as2|rel`` with rel -1 for
provider->customer, first field the provider, and 0 for peers).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from .consensus import parse_ipv4


class NoMatchingPrefix(LookupError):
    def __init__(self, address: str):
        super().__init__(f"no prefix covers {address}")
        self.address = address


class PrefixTableError(ValueError):
    pass


class MalformedRelationshipLine(ValueError):
    pass


class ConflictingRelationship(ValueError):
    pass


def _ip_to_int(address: str) -> int:
    a, b, c, d = (int(x) for x in address.split("."))
    return (a << 24) | (b << 16) | (c << 8) | d


def _int_to_ip(value: int) -> str:
    return ".".join(str((value >> shift) & 0xFF) for shift in (24, 16, 8, 0))


@dataclass(frozen=True)
class PrefixEntry:
    prefix: str
    mask_len: int
    origin_asns: frozenset[int]

    def __post_init__(self):
        if not 0 <= self.mask_len <= 32:
            raise PrefixTableError(f"bad mask length {self.mask_len}")
        network = _ip_to_int(parse_ipv4(self.prefix))
        host_mask = (1 << (32 - self.mask_len)) - 1
        if network & host_mask:
            raise PrefixTableError(f"{self.prefix}/{self.mask_len} has host bits set")
        if not self.origin_asns:
            raise PrefixTableError(f"{self.prefix}/{self.mask_len} has no origins")

    @property
    def is_multi_origin(self) -> bool:
        return len(self.origin_asns) > 1


class _TrieNode:
    __slots__ = ("zero", "one", "value")

    def __init__(self):
        self.zero = None
        self.one = None
        self.value = None


class PrefixTrie:
    """Binary trie over IPv4 prefixes; lookup returns the most-specific value."""

    def __init__(self):
        self._root = _TrieNode()
        self._count = 0

    def __len__(self):
        return self._count

    def insert(self, network: int, mask_len: int, value):
        node = self._root
        for depth in range(mask_len):
            bit = (network >> (31 - depth)) & 1
            child = node.one if bit else node.zero
            if child is None:
                child = _TrieNode()
                if bit:
                    node.one = child
                else:
                    node.zero = child
            node = child
        if node.value is None:
            self._count += 1
        node.value = value

    def get(self, network: int, mask_len: int):
        node = self._root
        for depth in range(mask_len):
            bit = (network >> (31 - depth)) & 1
            node = node.one if bit else node.zero
            if node is None:
                return None
        return node.value

    def longest_match(self, address_int: int):
        node = self._root
        best = node.value
        for depth in range(32):
            bit = (address_int >> (31 - depth)) & 1
            node = node.one if bit else node.zero
            if node is None:
                break
            if node.value is not None:
                best = node.value
        return best


class PrefixTable:
    """Longest-prefix-match table from IPv4 prefixes to origin AS sets."""

    def __init__(self, entries=()):
        self._trie = PrefixTrie()
        self._entries: dict[tuple[int, int], PrefixEntry] = {}
        for entry in entries:
            self.add(entry)

    def add(self, entry: PrefixEntry):
        network = _ip_to_int(entry.prefix)
        key = (network, entry.mask_len)
        existing = self._entries.get(key)
        if existing is not None:
            # Same prefix announced again: merge origins, that is multi-origin.
            entry = PrefixEntry(entry.prefix, entry.mask_len,
                                existing.origin_asns | entry.origin_asns)
        self._entries[key] = entry
        self._trie.insert(network, entry.mask_len, entry)

    def entries(self) -> list[PrefixEntry]:
        return [self._entries[k] for k in sorted(self._entries)]

    def lookup(self, address: str) -> PrefixEntry:
        address = parse_ipv4(address)
        entry = self._trie.longest_match(_ip_to_int(address))
        if entry is None:
            raise NoMatchingPrefix(address)
        return entry


def load_prefix_table(document: bytes | str) -> PrefixTable:
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    table = PrefixTable()
    for line_no, line in enumerate(document.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise PrefixTableError(f"line {line_no}: expected 3 tab-separated fields")
        prefix, mask_text, asn_text = parts
        try:
            mask_len = int(mask_text)
            origins = frozenset(int(tok) for tok in asn_text.split(","))
            entry = PrefixEntry(prefix.strip(), mask_len, origins)
        except (ValueError, PrefixTableError) as exc:
            raise PrefixTableError(f"line {line_no}: {exc}") from None
        table.add(entry)
    return table


def ip_to_asn(address: str, table: PrefixTable) -> frozenset[int]:
    """Origin set of the longest matching prefix; multi-origin returns them all."""
    return table.lookup(address).origin_asns


def attribute_asn(address: str, table: PrefixTable) -> tuple[int, bool]:
    """Single-AS attribution for aggregation: smallest ASN of the most-specific
    match, with a flag telling whether the entry was multi-origin."""
    entry = table.lookup(address)
    return min(entry.origin_asns), entry.is_multi_origin


def detect_multi_origin(table: PrefixTable) -> list[PrefixEntry]:
    return [e for e in table.entries() if e.is_multi_origin]


class AsTopology:
    """Immutable AS relationship graph with provider/customer/peer adjacency."""

    def __init__(self, provider_customer_edges=(), peer_edges=()):
        self.provider_customer_edges = frozenset(
            (int(p), int(c)) for p, c in provider_customer_edges)
        self.peer_edges = frozenset(
            frozenset((int(a), int(b))) for a, b in peer_edges)
        nodes = set()
        self.providers_of: dict[int, set[int]] = {}
        self.customers_of: dict[int, set[int]] = {}
        self.peers_of: dict[int, set[int]] = {}
        for provider, customer in self.provider_customer_edges:
            if provider == customer:
                raise MalformedRelationshipLine(f"self loop on AS{provider}")
            if (customer, provider) in self.provider_customer_edges:
                raise ConflictingRelationship(
                    f"{provider}|{customer} claimed provider in both directions")
            nodes.add(provider)
            nodes.add(customer)
            self.customers_of.setdefault(provider, set()).add(customer)
            self.providers_of.setdefault(customer, set()).add(provider)
        for pair in self.peer_edges:
            if len(pair) != 2:
                raise MalformedRelationshipLine(f"self loop on AS{next(iter(pair))}")
            a, b = sorted(pair)
            if (a, b) in self.provider_customer_edges or (b, a) in self.provider_customer_edges:
                raise ConflictingRelationship(f"{a}|{b} is both peer and provider-customer")
            nodes.add(a)
            nodes.add(b)
            self.peers_of.setdefault(a, set()).add(b)
            self.peers_of.setdefault(b, set()).add(a)
        self.nodes = frozenset(nodes)

    def __eq__(self, other):
        if not isinstance(other, AsTopology):
            return NotImplemented
        return (self.provider_customer_edges == other.provider_customer_edges
                and self.peer_edges == other.peer_edges)

    def __hash__(self):
        return hash((self.provider_customer_edges, self.peer_edges))

    @property
    def version(self) -> str:
        """Stable digest of the edge set, used for incremental rebuild checks."""
        lines = sorted(f"{p}|{c}|-1" for p, c in self.provider_customer_edges)
        lines += sorted("{}|{}|0".format(*sorted(pair)) for pair in self.peer_edges)
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def load_as_relationships(document: bytes | str) -> AsTopology:
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    claims: dict[tuple[int, int], tuple] = {}
    pc_edges = set()
    peer_edges = set()
    for line_no, line in enumerate(document.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) < 3:
            raise MalformedRelationshipLine(f"line {line_no}: expected as1|as2|rel")
        try:
            as1, as2, rel = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise MalformedRelationshipLine(f"line {line_no}: non-numeric field") from None
        if as1 == as2:
            raise MalformedRelationshipLine(f"line {line_no}: self loop on AS{as1}")
        if rel == -1:
            claim = ("pc", as1)
        elif rel == 0:
            claim = ("peer", None)
        else:
            raise MalformedRelationshipLine(f"line {line_no}: unknown relation {rel}")
        pair = (min(as1, as2), max(as1, as2))
        previous = claims.get(pair)
        if previous is not None and previous != claim:
            raise ConflictingRelationship(
                f"line {line_no}: AS{as1}/AS{as2} already recorded as {previous[0]}")
        claims[pair] = claim
        if rel == -1:
            pc_edges.add((as1, as2))
        else:
            peer_edges.add(pair)
    return AsTopology(pc_edges, peer_edges)


@dataclass(frozen=True)
class AsBlacklist:
    entries: dict[int, datetime] = field(default_factory=dict)
    trust_period: timedelta = timedelta(days=30)

    def is_listed(self, asn: int, now: datetime) -> bool:
        first_seen = self.entries.get(asn)
        return first_seen is not None and now - first_seen < self.trust_period

    def listed_asns(self, now: datetime) -> frozenset[int]:
        return frozenset(a for a in self.entries if self.is_listed(a, now))


def update_blacklist(blacklist: AsBlacklist, newly_multi_origin, now: datetime) -> AsBlacklist:
    """Expire entries older than the trust period, then insert new sightings.

    An AS that expires and re-appears in the same update is re-added with a
    fresh first_seen.
    """
    if blacklist.trust_period <= timedelta(0):
        raise ValueError("trust_period must be positive")
    kept = {asn: seen for asn, seen in blacklist.entries.items()
            if now - seen < blacklist.trust_period}
    for asn in newly_multi_origin:
        kept.setdefault(int(asn), now)
    return AsBlacklist(entries=kept, trust_period=blacklist.trust_period)
