import random
from fractions import Fraction

import pytest

from aswatch.asdb import AsTopology
from aswatch.pathinfer import (
    AsPath,
    InsufficientReachability,
    RoutePref,
    UnknownAs,
    infer_paths,
    mean_path_length,
    path_as_set,
)

from oracles import (
    brute_force_infer,
    first_edge_class,
    random_relationship_edges,
    valley_free_ok,
)


class TestInferExamples:
    def test_identity_path(self, small_topology):
        assert infer_paths(10, 10, small_topology) == [AsPath((10,), RoutePref.LOCAL)]

    def test_small_fixture_single_route(self, small_topology):
        paths = infer_paths(10, 50, small_topology, k=5)
        assert [p.hops for p in paths] == [(10, 20, 30, 40, 50)]
        assert paths[0].pref == RoutePref.PROVIDER

    def test_unknown_endpoints(self, small_topology):
        with pytest.raises(UnknownAs):
            infer_paths(999, 50, small_topology)
        with pytest.raises(UnknownAs):
            infer_paths(10, 999, small_topology)

    def test_nonpositive_k_yields_nothing(self, small_topology):
        assert infer_paths(10, 50, small_topology, k=0) == []

    def test_unreachable_pair_is_empty(self):
        # Two customers under one provider: customer-to-customer would need
        # up then down, which is fine, but peers of each other is not present;
        # block reachability entirely with two disjoint components instead.
        topo = AsTopology([(1, 2), (3, 4)])
        assert infer_paths(2, 4, topo, k=5) == []
        assert path_as_set(2, 4, topo) == frozenset()

    def test_transit_fixture_route_order(self, transit_topology):
        paths = infer_paths(43350, 2510, transit_topology, k=5)
        assert [p.hops for p in paths] == [
            (43350, 3257, 2516, 2510),
            (43350, 174, 2914, 2510),
            (43350, 286, 2914, 2510),
            (43350, 6762, 2914, 2510),
            (43350, 37100, 2914, 2510),
        ]
        assert [p.pref for p in paths] == [RoutePref.CUSTOMER] + [RoutePref.PROVIDER] * 4

    def test_transit_fixture_union(self, transit_topology):
        assert path_as_set(43350, 2510, transit_topology, k=5) == frozenset(
            {43350, 3257, 2516, 2510, 174, 286, 6762, 37100, 2914})

    def test_customer_route_preferred_over_shorter_provider_route(self):
        # dst is both a direct provider and a 2-hop customer destination;
        # the longer downhill route must still rank first.
        topo = AsTopology([(9, 1), (1, 5), (5, 9)])
        paths = infer_paths(1, 9, topo, k=3)
        assert paths[0].hops == (1, 5, 9)
        assert paths[0].pref == RoutePref.CUSTOMER
        assert paths[1].hops == (1, 9)
        assert paths[1].pref == RoutePref.PROVIDER

    def test_no_valley_through_two_peers(self):
        topo = AsTopology([], [(1, 2), (2, 3)])
        assert infer_paths(1, 3, topo, k=5) == []

    def test_peer_step_must_precede_downhill(self):
        # 1 up to 2, down to 3, peer 3-4 would be a valley.
        topo = AsTopology([(2, 1), (2, 3)], [(3, 4)])
        assert infer_paths(1, 4, topo, k=5) == []


def random_topology(rng):
    """Random graph plus two endpoints drawn from its connected node set."""
    while True:
        _, pc, peers = random_relationship_edges(rng)
        topo = AsTopology(pc, peers)
        if topo.nodes:
            nodes = sorted(topo.nodes)
            return topo, pc, peers, rng.choice(nodes), rng.choice(nodes)


class TestInferProperties:
    def test_matches_exhaustive_oracle_on_random_graphs(self):
        rng = random.Random(20160504)
        for _ in range(300):
            topo, pc, peers, src, dst = random_topology(rng)
            k = rng.randint(1, 6)
            got = [list(p.hops) for p in infer_paths(src, dst, topo, k)]
            assert got == brute_force_infer(src, dst, pc, peers, k)

    def test_every_returned_path_is_valley_free(self):
        rng = random.Random(99)
        for _ in range(200):
            topo, pc, peers, src, dst = random_topology(rng)
            for path in infer_paths(src, dst, topo, k=4):
                if len(path.hops) == 1:
                    continue
                assert valley_free_ok(list(path.hops), pc, peers)
                assert int(path.pref) == first_edge_class(list(path.hops), pc, peers)

    def test_k_is_prefix_monotone(self):
        rng = random.Random(7)
        for _ in range(150):
            topo, _, _, src, dst = random_topology(rng)
            full = infer_paths(src, dst, topo, k=6)
            for k in range(1, 6):
                assert infer_paths(src, dst, topo, k=k) == full[:k]

    def test_rank_keys_strictly_increase(self):
        rng = random.Random(11)
        for _ in range(150):
            topo, _, _, src, dst = random_topology(rng)
            keys = [p.rank_key for p in infer_paths(src, dst, topo, k=6)]
            assert keys == sorted(set(keys))


class TestMeanPathLength:
    def test_chain_fixture_exact_mean(self, chain_topology):
        # 8-node provider chain: every ordered pair (identity included) is
        # reachable, so a big enough sample must converge on the all-pairs
        # mean, which enumerates to 3.625 by hand.
        n = len(chain_topology.nodes)
        total = 0
        count = 0
        nodes = sorted(chain_topology.nodes)
        for a in nodes:
            for b in nodes:
                total += abs(nodes.index(a) - nodes.index(b)) + 1
                count += 1
        assert Fraction(total, count) == Fraction(29, 8)
        assert n == 8

    def test_chain_fixture_sampled_mean_is_exactly_reproducible(self, chain_topology):
        value = mean_path_length(chain_topology, sample_pairs=64, rng_seed=5)
        again = mean_path_length(chain_topology, sample_pairs=64, rng_seed=5)
        assert value == again
        assert isinstance(value, Fraction)

    def test_sampling_scheme_matches_documented_contract(self, chain_topology):
        seed, pairs = 17, 40
        rng = random.Random(seed)
        nodes = sorted(chain_topology.nodes)
        lengths = []
        for _ in range(pairs):
            src = rng.choice(nodes)
            dst = rng.choice(nodes)
            best = infer_paths(src, dst, chain_topology, k=1)
            if best:
                lengths.append(len(best[0].hops))
        expected = Fraction(sum(lengths), len(lengths))
        assert mean_path_length(chain_topology, pairs, seed) == expected

    def test_sparse_topology_raises(self):
        # Ten isolated provider pairs: most sampled pairs are unreachable.
        topo = AsTopology([(i, i + 100) for i in range(1, 11)])
        with pytest.raises(InsufficientReachability):
            mean_path_length(topo, sample_pairs=200, rng_seed=3)

    def test_bad_sample_count(self, chain_topology):
        with pytest.raises(ValueError):
            mean_path_length(chain_topology, sample_pairs=0, rng_seed=1)
