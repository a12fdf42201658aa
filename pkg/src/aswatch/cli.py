"""Command-line front end.

Subcommands: build-db, refresh-db, query, serve, report, parse-traceroute.
Every module error is reported as `error: <message>` on stderr with exit
status 1; argparse usage errors keep argparse's status 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import asdb, ingest, reports, service
from .consensus import parse_consensus
from .reports import AggregateSort


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _parse_suspects(tokens: list[str]) -> list[int]:
    suspects = []
    for token in tokens:
        for part in token.replace(",", " ").split():
            suspects.append(service.coerce_asn(part))
    return suspects


def render_query_report(response: dict, with_torrc: bool) -> str:
    unsafe = response["unsafe_exits"]
    inconclusive = response["inconclusive_exits"]
    lines = [f"unsafe exits ({len(unsafe)}):"]
    lines.extend(f"  {ip}" for ip in unsafe)
    lines.append(f"inconclusive exits ({len(inconclusive)}):")
    lines.extend(f"  {ip}" for ip in inconclusive)
    lines.append(f"safe exits: {response['safe_count']}")
    lines.append(f"db built at: {response['db_built_at']}")
    if with_torrc:
        lines.append("")
        lines.extend(response["torrc"])
    return "\n".join(lines) + "\n"


def _load_build_inputs(args):
    snapshot = parse_consensus(_read(args.consensus))
    prefix_table = asdb.load_prefix_table(_read(args.pfx2as))
    topology = asdb.load_as_relationships(_read(args.as_rel))
    catalog = ingest.load_catalog(_read(args.catalog), prefix_table)
    return snapshot, catalog, topology, prefix_table


def _cmd_build_db(args) -> int:
    snapshot, catalog, topology, prefix_table = _load_build_inputs(args)
    db = ingest.build_path_db(snapshot, catalog, topology, prefix_table, k=args.k)
    Path(args.out).write_bytes(ingest.save_path_db(db))
    print(f"wrote {args.out}: {len(db.exits)} exits x {len(db.destinations)} "
          f"destinations, built at {db.built_at.isoformat()}")
    return 0


def _cmd_refresh_db(args) -> int:
    previous = ingest.load_path_db(_read(args.db))
    snapshot, catalog, topology, prefix_table = _load_build_inputs(args)
    db = ingest.refresh(previous, snapshot, catalog, topology, prefix_table, k=args.k)
    Path(args.out).write_bytes(ingest.save_path_db(db))
    print(f"wrote {args.out}: {len(db.exits)} exits x {len(db.destinations)} "
          f"destinations, built at {db.built_at.isoformat()}")
    return 0


def _cmd_query(args) -> int:
    db = ingest.load_path_db(_read(args.db))
    request = service.QueryRequest.of(
        _parse_suspects(args.suspects),
        args.dest,
        include_inconclusive=not args.exclude_inconclusive,
    )
    response = service.handle_query(request, db)
    sys.stdout.write(render_query_report(response, args.torrc))
    return 0


def _cmd_serve(args) -> int:
    api = service.ApiService(
        db=ingest.load_path_db(_read(args.db)) if args.db else None,
        rate_per_second=args.rate,
        counters_enabled=args.counters,
    )
    server = service.make_server(api, port=args.port, bind=args.bind,
                                 static_dir=args.static)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _cmd_report(args) -> int:
    if args.table == "as-top":
        snapshot = parse_consensus(_read(args.consensus))
        prefix_table = asdb.load_prefix_table(_read(args.pfx2as))
        sort = AggregateSort.BY_BANDWIDTH if args.sort == "bw" else AggregateSort.BY_RELAYS
        rows = reports.aggregate_by_as(snapshot, prefix_table, sort, args.top)
        out = reports.as_table_json(rows) + "\n" if args.json else reports.as_table_tsv(rows)
    elif args.table == "countries":
        snapshot = parse_consensus(_read(args.consensus))
        geoip = reports.load_geoip(_read(args.geoip))
        rows = reports.country_distribution(snapshot, geoip, args.flag)
        out = (reports.country_table_json(rows) + "\n" if args.json
               else reports.country_table_tsv(rows))
    elif args.table == "users-per-guard":
        users = reports.load_users_csv(_read(args.users))
        guards = reports.load_counts_csv(_read(args.guards))
        rows = reports.users_per_guard(users, guards)
        out = (reports.users_per_guard_json(rows) + "\n" if args.json
               else reports.users_per_guard_tsv(rows))
    else:  # consensus-growth
        snapshots = [parse_consensus(_read(p)) for p in args.consensus]
        stats = reports.consensus_growth(snapshots)
        out = reports.growth_json(stats) + "\n" if args.json else reports.growth_tsv(stats)
    sys.stdout.write(out)
    return 0


def _cmd_parse_traceroute(args) -> int:
    report = ingest.parse_traceroute(_read(args.transcript))
    if args.json:
        document = {
            "hops": len(report.hops),
            "as_sequence": list(report.as_sequence),
            "private_or_unannotated_hops": report.private_hops,
        }
        print(json.dumps(document, sort_keys=True))
    else:
        sequence = " ".join(str(a) for a in report.as_sequence)
        print(f"hops: {len(report.hops)}")
        print(f"as sequence: {sequence}")
        print(f"private or unannotated hops: {report.private_hops}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aswatch",
        description="AS-aware endpoint safety for Tor circuits: precompute "
                    "exit-side AS paths, query unsafe exits, emit torrc "
                    "exclusions, and reproduce consensus measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_build_inputs(p):
        p.add_argument("--consensus", required=True, help="consensus document")
        p.add_argument("--catalog", required=True, help="destination catalog CSV")
        p.add_argument("--as-rel", required=True, dest="as_rel",
                       help="AS relationship file (as1|as2|rel)")
        p.add_argument("--pfx2as", required=True, help="prefix-to-AS table")
        p.add_argument("--k", type=int, default=5,
                       help="paths per (src, dst) pair (default 5)")
        p.add_argument("--out", required=True, help="output database path")

    p = sub.add_parser("build-db", help="precompute the exit-side path database")
    add_build_inputs(p)
    p.set_defaults(func=_cmd_build_db)

    p = sub.add_parser("refresh-db", help="rebuild, reusing entries with unchanged inputs")
    p.add_argument("--db", required=True, help="previous database")
    add_build_inputs(p)
    p.set_defaults(func=_cmd_refresh_db)

    p = sub.add_parser("query", help="list unsafe exits for suspects + destination")
    p.add_argument("--db", required=True, help="database file")
    p.add_argument("--suspects", required=True, nargs="+",
                   help="suspect AS numbers (comma or space separated)")
    p.add_argument("--dest", required=True, help="destination IPv4 or catalog host")
    p.add_argument("--torrc", action="store_true",
                   help="append the torrc exclusion snippet")
    p.add_argument("--exclude-inconclusive", action="store_true",
                   help="keep inconclusive exits out of the exclusion list")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("serve", help="run the HTTP query service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--db", help="database file (omit to start without one)")
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--static", help="static file directory (default: bundled page)")
    p.add_argument("--rate", type=float, default=service.DEFAULT_RATE_PER_SECOND,
                   help="per-connection requests per second")
    p.add_argument("--counters", action="store_true",
                   help="keep aggregate counters (counts only, never payloads)")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("report", help="measurement tables from a snapshot")
    rsub = p.add_subparsers(dest="table", required=True)

    r = rsub.add_parser("as-top", help="top ASes by relays or bandwidth")
    r.add_argument("--consensus", required=True)
    r.add_argument("--pfx2as", required=True)
    r.add_argument("--sort", choices=["bw", "relays"], default="bw")
    r.add_argument("--top", type=int, default=10)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=_cmd_report)

    r = rsub.add_parser("countries", help="relay count per hosting country")
    r.add_argument("--consensus", required=True)
    r.add_argument("--geoip", required=True)
    r.add_argument("--flag", choices=["Guard", "Exit"], default="Guard")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=_cmd_report)

    r = rsub.add_parser("users-per-guard", help="per-country users/guard ratios")
    r.add_argument("--users", required=True, help="country,mean_daily_users CSV")
    r.add_argument("--guards", required=True, help="country,count CSV")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=_cmd_report)

    r = rsub.add_parser("consensus-growth", help="bytes-per-relay growth fit")
    r.add_argument("--consensus", required=True, nargs="+")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=_cmd_report)

    p = sub.add_parser("parse-traceroute", help="extract the AS sequence from a transcript")
    p.add_argument("transcript", help="transcript file, or - for stdin")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_parse_traceroute)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, LookupError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
