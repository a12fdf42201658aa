import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import aswatch.ingest as ingest
from aswatch.asdb import AsTopology, PrefixEntry, PrefixTable
from aswatch.consensus import ConsensusSnapshot, RelayRecord
from aswatch.ingest import (
    DestinationCatalog,
    NoHops,
    PathDbFormatError,
    TracerouteReport,
    UnrecognizedDialect,
    build_path_db,
    load_catalog,
    load_path_db,
    parse_traceroute,
    refresh,
    save_path_db,
)
from aswatch.safety import PathDb

T0 = datetime(2016, 5, 4, 12, 0, tzinfo=timezone.utc)


class TestTraceroute:
    def test_fixture_transcript(self, traceroute_text):
        report = parse_traceroute(traceroute_text)
        assert len(report.hops) == 14
        assert report.as_sequence == (56220, 2516, 3257, 8001, 63949)
        assert report.private_hops == 1

    def test_fixture_first_hop_details(self, traceroute_text):
        hop = parse_traceroute(traceroute_text).hops[0]
        assert hop.index == 1
        assert hop.asn == 56220
        assert hop.host == "aterm.me"
        assert hop.address == "192.168.0.1"
        assert hop.rtts == (3.423, 1.904, 1.747)

    def test_repeated_asns_deduplicate_in_order(self):
        text = "\n".join(f"{i} [AS{a}] h{i} (10.0.0.{i}) 1.0 ms"
                         for i, a in enumerate([5, 5, 7, 5, 9], start=1))
        assert parse_traceroute(text).as_sequence == (5, 7, 9)

    def test_unannotated_hop_counts_as_private(self):
        text = ("1 [AS5] a (9.0.0.1) 1.0 ms\n"
                "2 * \n"
                "3 [AS7] c (192.168.3.4) 1.0 ms\n")
        report = parse_traceroute(text)
        assert report.private_hops == 2
        assert report.hops[1].asn is None
        assert report.hops[1].rtts == ()

    def test_out_of_range_octets_drop_the_address(self):
        report = parse_traceroute("1 [AS5] a (300.0.0.1) 1.0 ms\n")
        assert report.hops[0].address is None

    def test_header_only_is_no_hops(self):
        with pytest.raises(NoHops):
            parse_traceroute("traceroute to x, 64 hops max\n")

    def test_blank_input_is_no_hops(self):
        with pytest.raises(NoHops):
            parse_traceroute("\n   \n")

    def test_plain_dialect_without_as_brackets_rejected(self):
        text = ("traceroute to 10.0.0.1, 64 hops max\n"
                "1 gw (10.0.0.254) 1.0 ms\n"
                "2 10.0.0.1 (10.0.0.1) 2.0 ms\n")
        with pytest.raises(UnrecognizedDialect):
            parse_traceroute(text)

    def test_prose_rejected(self):
        with pytest.raises(UnrecognizedDialect):
            parse_traceroute("this is not a traceroute at all\n")

    @given(st.text(alphabet=" .*[]()AS0123456789msabc\n", max_size=300))
    @settings(max_examples=300, deadline=None)
    def test_fuzz_totality(self, text):
        try:
            report = parse_traceroute(text)
            assert isinstance(report, TracerouteReport)
        except (NoHops, UnrecognizedDialect):
            pass

    @given(st.binary(max_size=200))
    @settings(max_examples=150, deadline=None)
    def test_fuzz_totality_binary(self, blob):
        try:
            parse_traceroute(blob)
        except (NoHops, UnrecognizedDialect):
            pass


class TestCatalog:
    def test_fixture_catalog(self, data_dir, prefix_table_small):
        doc = (data_dir / "catalog_small.csv").read_bytes()
        catalog = load_catalog(doc, prefix_table_small, fetched_at=T0)
        by_host = {e.host: e for e in catalog.entries}
        assert by_host["site-a.example"].origins == frozenset({64500})
        assert by_host["site-a.example"].asn == 64500
        assert by_host["site-b.example"].address == "23.239.10.77"
        assert by_host["site-b.example"].origins == frozenset({63949})
        assert catalog.fetched_at == T0

    def test_header_required(self, prefix_table_small):
        with pytest.raises(ValueError):
            load_catalog("host,category,ipv4\nx,y,10.0.0.1\n", prefix_table_small)

    def test_uncovered_ip_gets_empty_origins(self, prefix_table_small):
        catalog = load_catalog("category,host,ipv4\nmail,m.example,203.0.113.9\n",
                               prefix_table_small)
        assert catalog.entries[0].origins == frozenset()
        assert catalog.entries[0].asn is None

    def test_blank_ip_skipped_without_resolver(self, prefix_table_small):
        doc = "category,host,ipv4\nnews,a.example,\nnews,b.example,23.239.1.1\n"
        catalog = load_catalog(doc, prefix_table_small)
        assert [e.host for e in catalog.entries] == ["b.example"]

    def test_blank_ip_goes_through_injected_resolver(self, prefix_table_small):
        doc = "category,host,ipv4\nnews,a.example,\n"
        catalog = load_catalog(doc, prefix_table_small,
                               resolver=lambda host: "23.239.10.77")
        assert catalog.entries[0].address == "23.239.10.77"
        assert catalog.entries[0].origins == frozenset({63949})

    def test_origins_consistent_with_prefix_table(self, data_dir, prefix_table_small):
        from aswatch.asdb import ip_to_asn
        doc = (data_dir / "catalog_small.csv").read_bytes()
        for entry in load_catalog(doc, prefix_table_small).entries:
            assert entry.origins == ip_to_asn(entry.address, prefix_table_small)


def exit_relay(fp_byte, address):
    return RelayRecord(fingerprint=f"{fp_byte:040X}", nickname=f"x{fp_byte}",
                       address=address, or_port=443,
                       flags=frozenset({"Exit", "Fast"}), bandwidth=100)


def snapshot_of(relays):
    return ConsensusSnapshot(valid_after=T0, fresh_until=T0 + timedelta(hours=1),
                             valid_until=T0 + timedelta(hours=3),
                             relays=tuple(relays))


def catalog_of(rows):
    """rows: (category, host, ip, origins)."""
    return DestinationCatalog(
        entries=tuple(ingest.CatalogEntry(c, h, ip, frozenset(o))
                      for c, h, ip, o in rows),
        fetched_at=T0)


BUILD_PREFIXES = PrefixTable([
    PrefixEntry("10.10.0.0", 16, frozenset({10})),
    PrefixEntry("10.50.0.0", 16, frozenset({50})),
    PrefixEntry("10.99.0.0", 16, frozenset({99})),
])


class TestBuild:
    def test_entry_per_exit_destination_pair(self, small_topology):
        snap = snapshot_of([exit_relay(1, "10.10.0.5")])
        catalog = catalog_of([
            ("search", "a.example", "10.50.0.1", {50}),
            ("news", "b.example", "10.50.0.2", {50}),
            ("mail", "c.example", "10.10.0.9", {10}),
        ])
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        assert len(db.entries) == 3
        assert len(db.exits) == 1
        assert len(db.destinations) == 3
        assert db.built_at == T0

    def test_route_union_covers_both_directions(self, small_topology):
        snap = snapshot_of([exit_relay(1, "10.10.0.5")])
        catalog = catalog_of([("search", "a.example", "10.50.0.1", {50})])
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        entry = db.entries[(f"{1:040X}", "10.50.0.1")]
        assert entry == frozenset({10, 20, 30, 40, 50})

    def test_exit_and_destination_in_same_as(self, small_topology):
        snap = snapshot_of([exit_relay(1, "10.10.0.5")])
        catalog = catalog_of([("mail", "c.example", "10.10.0.9", {10})])
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        assert db.entries[(f"{1:040X}", "10.10.0.9")] == frozenset({10})

    def test_unroutable_pair_yields_empty_entry(self, small_topology):
        # AS99 exists in the prefix table but not in the topology.
        snap = snapshot_of([exit_relay(1, "10.99.0.5")])
        catalog = catalog_of([("search", "a.example", "10.50.0.1", {50})])
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        assert db.entries[(f"{1:040X}", "10.50.0.1")] == frozenset()

    def test_entry_inputs_record_topology_version(self, small_topology):
        snap = snapshot_of([exit_relay(1, "10.10.0.5")])
        catalog = catalog_of([("search", "a.example", "10.50.0.1", {50})])
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        ((_, inputs),) = list(db.entry_inputs.items())
        assert inputs == (frozenset({10}), frozenset({50}), small_topology.version)
        assert db.topology_version == small_topology.version


class TestPersistence:
    def test_fixture_file_round_trips_bit_exact(self, data_dir):
        raw = (data_dir / "pathdb_small.v1").read_bytes()
        assert save_path_db(load_path_db(raw)) == raw

    def test_load_save_load_is_identity(self, pathdb_small):
        blob = save_path_db(pathdb_small)
        again = load_path_db(blob)
        assert again == pathdb_small
        assert again.built_at == pathdb_small.built_at
        assert save_path_db(again) == blob

    def test_random_dbs_round_trip(self, small_topology):
        rng = random.Random(4)
        for _ in range(40):
            exits = [exit_relay(i, f"10.10.{i}.1") for i in range(1, rng.randint(2, 6))]
            dests = [("search", f"d{j}.example", f"10.50.{j}.1", {50})
                     for j in range(rng.randint(1, 4))]
            db = build_path_db(snapshot_of(exits), catalog_of(dests),
                               small_topology, BUILD_PREFIXES, now=T0)
            assert load_path_db(save_path_db(db)) == db

    def test_missing_header_rejected(self):
        with pytest.raises(PathDbFormatError):
            load_path_db("exit aa|10.0.0.1\n")

    def test_bad_built_at_rejected(self):
        with pytest.raises(PathDbFormatError):
            load_path_db("pathdb-v1 built_at=yesterday\n")

    @pytest.mark.parametrize("line,lineno", [
        ("exit onlyonefield", 2),
        ("dest a|b|c", 2),
        ("notafingerprint", 2),
    ])
    def test_malformed_lines_carry_line_numbers(self, line, lineno):
        doc = f"pathdb-v1 built_at=2016-05-04T12:00:00+00:00\n{line}\n"
        with pytest.raises(PathDbFormatError) as err:
            load_path_db(doc)
        assert f"line {lineno}" in str(err.value)


def counting_exit_side(monkeypatch):
    calls = []
    real = ingest._exit_side_set

    def wrapper(exit_origins, dest_origins, topology, k):
        calls.append((frozenset(exit_origins), frozenset(dest_origins)))
        return real(exit_origins, dest_origins, topology, k)

    monkeypatch.setattr(ingest, "_exit_side_set", wrapper)
    return calls


class TestRefresh:
    def base_inputs(self):
        snap = snapshot_of([exit_relay(1, "10.10.0.5"), exit_relay(2, "10.10.0.6")])
        catalog = catalog_of([
            ("search", "a.example", "10.50.0.1", {50}),
            ("mail", "c.example", "10.10.0.9", {10}),
        ])
        return snap, catalog

    def test_unchanged_inputs_recompute_nothing(self, small_topology, monkeypatch):
        snap, catalog = self.base_inputs()
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        calls = counting_exit_side(monkeypatch)
        db2 = refresh(db, snap, catalog, small_topology, BUILD_PREFIXES,
                      now=T0 + timedelta(hours=1))
        assert calls == []
        assert db2 == db
        assert db2.built_at == T0 + timedelta(hours=1)

    def test_added_exit_recomputes_only_its_rows(self, small_topology, monkeypatch):
        snap, catalog = self.base_inputs()
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        grown = snapshot_of(list(snap.relays) + [exit_relay(3, "10.10.0.7")])
        calls = counting_exit_side(monkeypatch)
        db2 = refresh(db, grown, catalog, small_topology, BUILD_PREFIXES, now=T0)
        assert len(calls) == len(catalog.entries)
        assert db2 == build_path_db(grown, catalog, small_topology,
                                    BUILD_PREFIXES, now=T0)

    def test_removed_destination_prunes_without_recompute(self, small_topology,
                                                          monkeypatch):
        snap, catalog = self.base_inputs()
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        shrunk = catalog_of([("search", "a.example", "10.50.0.1", {50})])
        calls = counting_exit_side(monkeypatch)
        db2 = refresh(db, snap, shrunk, small_topology, BUILD_PREFIXES, now=T0)
        assert calls == []
        assert set(db2.entries) == {(f"{1:040X}", "10.50.0.1"),
                                    (f"{2:040X}", "10.50.0.1")}

    def test_topology_change_recomputes_everything(self, small_topology, monkeypatch):
        snap, catalog = self.base_inputs()
        db = build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        reshaped = AsTopology(small_topology.provider_customer_edges | {(60, 61)},
                              small_topology.peer_edges)
        calls = counting_exit_side(monkeypatch)
        db2 = refresh(db, snap, catalog, reshaped, BUILD_PREFIXES, now=T0)
        assert len(calls) == len(db.entries)
        assert db2 == build_path_db(snap, catalog, reshaped, BUILD_PREFIXES, now=T0)

    def test_loaded_db_has_no_inputs_so_everything_recomputes(self, small_topology,
                                                              monkeypatch):
        snap, catalog = self.base_inputs()
        db = load_path_db(save_path_db(
            build_path_db(snap, catalog, small_topology, BUILD_PREFIXES, now=T0)))
        calls = counting_exit_side(monkeypatch)
        db2 = refresh(db, snap, catalog, small_topology, BUILD_PREFIXES, now=T0)
        assert len(calls) == len(db.entries)
        assert db2 == db
