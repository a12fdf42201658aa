import pytest
from pathlib import Path

from aswatch import load_as_relationships, load_prefix_table, parse_consensus
from aswatch.ingest import load_path_db

DATA = Path(__file__).parent / "data"


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(label): criterion test reported as one PASS/FAIL line")


_ACCEPTANCE_RESULTS = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker:
        _ACCEPTANCE_RESULTS.append((marker.args[0], report.passed, report.duration))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, duration in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {label}  [{duration:.2f}s]")


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def snapshot_three():
    return parse_consensus((DATA / "consensus_three_relays.txt").read_bytes())


@pytest.fixture(scope="session")
def small_topology():
    return load_as_relationships((DATA / "as_rel_small.txt").read_bytes())


@pytest.fixture(scope="session")
def transit_topology():
    return load_as_relationships((DATA / "as_rel_transit.txt").read_bytes())


@pytest.fixture(scope="session")
def providers_topology():
    return load_as_relationships((DATA / "as_rel_providers.txt").read_bytes())


@pytest.fixture(scope="session")
def chain_topology():
    return load_as_relationships((DATA / "as_rel_chain.txt").read_bytes())


@pytest.fixture(scope="session")
def prefix_table_small():
    return load_prefix_table((DATA / "pfx2as_small.tsv").read_bytes())


@pytest.fixture(scope="session")
def pathdb_small():
    return load_path_db((DATA / "pathdb_small.v1").read_bytes())


@pytest.fixture(scope="session")
def traceroute_text() -> bytes:
    return (DATA / "traceroute_home_to_guard.txt").read_bytes()


@pytest.fixture(scope="session")
def snapshot_roles():
    """Ten relays, one per /16, with disjoint role sets (no Guard+Exit, no
    families). Rejection sampling never triggers here, so each slot's
    marginal distribution equals the raw bandwidth weights."""
    from datetime import datetime, timedelta, timezone
    from aswatch.consensus import ConsensusSnapshot, RelayRecord

    t0 = datetime(2016, 5, 4, 12, 0, tzinfo=timezone.utc)
    spec = [
        ("guard1", "10.1.0.1", ("Guard", "Fast"), 1000),
        ("guard2", "10.2.0.1", ("Guard", "Fast"), 2000),
        ("guard3", "10.3.0.1", ("Guard", "Fast"), 3000),
        ("exit1", "10.4.0.1", ("Exit", "Fast"), 500),
        ("exit2", "10.5.0.1", ("Exit", "Fast"), 1500),
        ("exit3", "10.6.0.1", ("Exit", "Fast"), 2500),
        ("mid1", "10.7.0.1", ("Fast",), 100),
        ("mid2", "10.8.0.1", ("Fast",), 400),
        ("mid3", "10.9.0.1", ("Fast",), 600),
        ("mid4", "10.10.0.1", ("Fast",), 900),
    ]
    relays = [RelayRecord(fingerprint=f"{i:040X}", nickname=nick, address=addr,
                          or_port=9001, flags=frozenset(flags), bandwidth=bw)
              for i, (nick, addr, flags, bw) in enumerate(spec, start=1)]
    return ConsensusSnapshot(valid_after=t0, fresh_until=t0 + timedelta(hours=1),
                             valid_until=t0 + timedelta(hours=3),
                             relays=tuple(relays))
