"""Valley-free AS path inference over the relationship graph.

A valid path is an uphill run of customer->provider edges (possibly empty),
then at most one peer edge, then a downhill run of provider->customer edges
(possibly empty). Paths are ranked the way a BGP speaker would prefer routes:
by the relationship of the first hop (routes learned from customers beat peer
routes beat provider routes), then by hop count, then lexicographically.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction

from .asdb import AsTopology


class UnknownAs(LookupError):
    def __init__(self, asn: int):
        super().__init__(f"AS{asn} not in topology")
        self.asn = asn


class InsufficientReachability(ValueError):
    pass


class RoutePref(IntEnum):
    """Lower value = more preferred. LOCAL is the identity path."""
    LOCAL = 0
    CUSTOMER = 1
    PEER = 2
    PROVIDER = 3


@dataclass(frozen=True)
class AsPath:
    hops: tuple[int, ...]
    pref: RoutePref

    @property
    def rank_key(self) -> tuple[int, int, tuple[int, ...]]:
        return (int(self.pref), len(self.hops), self.hops)


# Search phases: UP may still climb, take the peer step, or turn downhill;
# DOWN (entered after a peer or the first downhill edge) may only descend.
_UP, _DOWN = 0, 1


def _k_shortest_in_class(src: int, dst: int, topology: AsTopology,
                         k: int, pref: RoutePref) -> list[AsPath]:
    if pref is RoutePref.CUSTOMER:
        starts = [(n, _DOWN) for n in topology.customers_of.get(src, ())]
    elif pref is RoutePref.PEER:
        starts = [(n, _DOWN) for n in topology.peers_of.get(src, ())]
    else:
        starts = [(n, _UP) for n in topology.providers_of.get(src, ())]

    heap = [(2, (src, n), phase) for n, phase in starts]
    heapq.heapify(heap)
    found: list[AsPath] = []
    while heap and len(found) < k:
        length, path, phase = heapq.heappop(heap)
        last = path[-1]
        if last == dst:
            found.append(AsPath(path, pref))
            continue
        if phase == _UP:
            for nxt in topology.providers_of.get(last, ()):
                if nxt not in path:
                    heapq.heappush(heap, (length + 1, path + (nxt,), _UP))
            for nxt in topology.peers_of.get(last, ()):
                if nxt not in path:
                    heapq.heappush(heap, (length + 1, path + (nxt,), _DOWN))
        for nxt in topology.customers_of.get(last, ()):
            if nxt not in path:
                heapq.heappush(heap, (length + 1, path + (nxt,), _DOWN))
    return found


def infer_paths(src: int, dst: int, topology: AsTopology, k: int = 5) -> list[AsPath]:
    """Up to k valley-free loop-free paths from src to dst, best rank first."""
    if src not in topology.nodes:
        raise UnknownAs(src)
    if dst not in topology.nodes:
        raise UnknownAs(dst)
    if k < 1:
        return []
    if src == dst:
        return [AsPath((src,), RoutePref.LOCAL)]
    found: list[AsPath] = []
    for pref in (RoutePref.CUSTOMER, RoutePref.PEER, RoutePref.PROVIDER):
        if len(found) >= k:
            break
        found.extend(_k_shortest_in_class(src, dst, topology, k - len(found), pref))
    return found


def path_as_set(src: int, dst: int, topology: AsTopology, k: int = 5) -> frozenset[int]:
    """Union of all hops over the top-k paths; empty when unreachable."""
    hops: set[int] = set()
    for path in infer_paths(src, dst, topology, k):
        hops.update(path.hops)
    return frozenset(hops)


def mean_path_length(topology: AsTopology, sample_pairs: int, rng_seed: int) -> Fraction:
    """Mean rank-1 path length over sampled (src, dst) pairs.

    Sampling scheme (part of the contract, so callers can reproduce it):
    random.Random(rng_seed), each pair drawn as two independent choices over
    the sorted node list; identity pairs are allowed and have length 1. Pairs
    without a valley-free path are skipped; if fewer than half the sampled
    pairs are reachable the topology is considered too sparse to summarize.
    """
    if sample_pairs < 1:
        raise ValueError("sample_pairs must be positive")
    if not topology.nodes:
        raise InsufficientReachability("empty topology")
    rng = random.Random(rng_seed)
    nodes = sorted(topology.nodes)
    lengths = []
    for _ in range(sample_pairs):
        src = rng.choice(nodes)
        dst = rng.choice(nodes)
        best = infer_paths(src, dst, topology, k=1)
        if best:
            lengths.append(len(best[0].hops))
    if 2 * len(lengths) < sample_pairs:
        raise InsufficientReachability(
            f"only {len(lengths)}/{sample_pairs} sampled pairs reachable")
    return Fraction(sum(lengths), len(lengths))
