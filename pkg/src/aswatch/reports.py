"""Measurement reports over a consensus snapshot: per-AS aggregation,
country distributions, users-per-guard feasibility ratios, and the
bytes-per-relay growth rate of serialized consensus documents.

All arithmetic is exact (integers and Fractions); percentages are rendered
to two decimals with half-up rounding only at emit time, so the TSV and
JSON forms are bit-stable goldens.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction

from .asdb import (
    NoMatchingPrefix,
    PrefixEntry,
    PrefixTable,
    attribute_asn,
)
from .circuits import SENTINEL_ASN
from .consensus import ConsensusSnapshot


class DegenerateSeries(ValueError):
    pass


def _half_up(value: Fraction) -> int:
    """Round to the nearest integer, ties away from zero."""
    if value < 0:
        return -_half_up(-value)
    return (2 * value.numerator + value.denominator) // (2 * value.denominator)


def format_fraction(value: Fraction, places: int = 2) -> str:
    scale = 10 ** places
    units = _half_up(value * scale)
    sign = "-" if units < 0 else ""
    units = abs(units)
    return f"{sign}{units // scale}.{units % scale:0{places}d}"


def percent(part: int, whole: int) -> Fraction:
    if whole == 0:
        return Fraction(0)
    return Fraction(part * 100, whole)


class AggregateSort(enum.Enum):
    BY_RELAYS = "relays"
    BY_BANDWIDTH = "bw"


@dataclass(frozen=True)
class AsAggregateRow:
    asn: int | None  # None marks the totals row
    cumulative_bw: int
    bw_share: Fraction
    relay_count: int
    relay_share: Fraction
    multi_origin: bool = False

    @property
    def is_total(self) -> bool:
        return self.asn is None


def aggregate_by_as(snapshot: ConsensusSnapshot, prefix_table: PrefixTable,
                    sort: AggregateSort = AggregateSort.BY_BANDWIDTH,
                    top_n: int = 10) -> list[AsAggregateRow]:
    """Group relays by origin AS, sorted per `sort`, truncated to top_n data
    rows followed by a totals row carrying the snapshot-wide sums."""
    if not snapshot.relays:
        raise ValueError("cannot aggregate an empty snapshot")
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    groups: dict[int, list] = {}
    for relay in snapshot.relays:
        try:
            asn, multi = attribute_asn(relay.address, prefix_table)
        except NoMatchingPrefix:
            asn, multi = SENTINEL_ASN, False
        bucket = groups.setdefault(asn, [0, 0, False])
        bucket[0] += relay.bandwidth
        bucket[1] += 1
        bucket[2] = bucket[2] or multi

    total_bw = sum(r.bandwidth for r in snapshot.relays)
    total_relays = len(snapshot.relays)
    rows = [
        AsAggregateRow(
            asn=asn,
            cumulative_bw=bw,
            bw_share=percent(bw, total_bw),
            relay_count=count,
            relay_share=percent(count, total_relays),
            multi_origin=multi,
        )
        for asn, (bw, count, multi) in groups.items()
    ]
    if sort is AggregateSort.BY_BANDWIDTH:
        rows.sort(key=lambda r: (-r.cumulative_bw, r.asn))
    else:
        rows.sort(key=lambda r: (-r.relay_count, r.asn))
    rows = rows[:top_n]
    rows.append(AsAggregateRow(
        asn=None,
        cumulative_bw=total_bw,
        bw_share=percent(total_bw, total_bw),
        relay_count=total_relays,
        relay_share=percent(total_relays, total_relays),
    ))
    return rows


UNMAPPED_COUNTRY = "ZZ"


class GeoIpTable:
    """Longest-prefix-match table from IPv4 prefixes to country codes."""

    def __init__(self) -> None:
        self._table = PrefixTable()
        self._countries: dict[tuple[str, int], str] = {}

    def add(self, prefix: str, mask_len: int, country_code: str) -> None:
        key = (prefix, mask_len)
        known = self._countries.get(key)
        if known is not None and known != country_code:
            raise ValueError(f"conflicting countries for {prefix}/{mask_len}")
        # the origin set is a placeholder; country lives in the side map
        self._table.add(PrefixEntry(prefix, mask_len, frozenset({1})))
        self._countries[key] = country_code

    def lookup(self, address: str) -> str:
        try:
            entry = self._table.lookup(address)
        except NoMatchingPrefix:
            return UNMAPPED_COUNTRY
        return self._countries[(entry.prefix, entry.mask_len)]


def load_geoip(document: bytes | str) -> GeoIpTable:
    """Parse `prefix,mask_len,country_code` CSV lines; # starts a comment."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    table = GeoIpTable()
    for line_no, line in enumerate(document.splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"geoip line {line_no}: expected prefix,mask_len,country_code")
        try:
            table.add(parts[0], int(parts[1]), parts[2].upper())
        except ValueError as exc:
            raise ValueError(f"geoip line {line_no}: {exc}") from None
    return table


@dataclass(frozen=True)
class CountryRow:
    country_code: str
    count: int
    share: Fraction


def country_distribution(snapshot: ConsensusSnapshot, geoip_table: GeoIpTable,
                         flag: str) -> list[CountryRow]:
    """Count flag-bearing relays per hosting country, descending by count."""
    if flag not in {"Guard", "Exit"}:
        raise ValueError("flag must be 'Guard' or 'Exit'")
    flagged = [r for r in snapshot.relays if flag in r.flags]
    counts: dict[str, int] = {}
    for relay in flagged:
        code = geoip_table.lookup(relay.address)
        counts[code] = counts.get(code, 0) + 1
    total = len(flagged)
    rows = [CountryRow(code, count, percent(count, total))
            for code, count in counts.items()]
    rows.sort(key=lambda r: (-r.count, r.country_code))
    return rows


@dataclass(frozen=True)
class UsersPerGuardRow:
    country: str
    users: int
    guards: int
    ratio: int
    unservable: bool = False


# one guard can comfortably serve about this many direct users; reports
# carry it as a reference line, the verdict is left to the reader
REFERENCE_USERS_PER_GUARD = 1000


def users_per_guard(users_by_country: dict[str, int],
                    guards_by_country: dict[str, int]) -> list[UsersPerGuardRow]:
    """Users-per-guard ratio per country, most feasible (lowest) first.

    Countries with zero guards cannot absorb their users at all; they keep
    the raw user count as the ratio and are flagged unservable so the list
    stays totally ordered.
    """
    rows = []
    for country in sorted(set(users_by_country) | set(guards_by_country)):
        users = users_by_country.get(country, 0)
        guards = guards_by_country.get(country, 0)
        if users == 0 and guards == 0:
            continue
        if guards == 0:
            rows.append(UsersPerGuardRow(country, users, 0, users, unservable=True))
        else:
            ratio = _half_up(Fraction(users, guards))
            rows.append(UsersPerGuardRow(country, users, guards, ratio))
    rows.sort(key=lambda r: (r.ratio, r.country))
    return rows


@dataclass(frozen=True)
class GrowthStats:
    n_points: int
    slope: Fraction
    intercept: Fraction
    residual_mean: Fraction
    residual_min: Fraction
    residual_max: Fraction


def consensus_growth(snapshots) -> GrowthStats:
    """Least-squares slope of serialized byte size against relay count.

    The slope estimates the marginal cost in bytes of listing one more
    relay. Exact Fraction arithmetic throughout.
    """
    points = [(len(s.relays), s.raw_byte_size) for s in snapshots]
    if len(points) < 2:
        raise DegenerateSeries("need at least two snapshots")
    if len({x for x, _ in points}) < 2:
        raise DegenerateSeries("relay count never changes across the series")
    n = len(points)
    sum_x = sum(x for x, _ in points)
    sum_y = sum(y for _, y in points)
    sum_xy = sum(x * y for x, y in points)
    sum_xx = sum(x * x for x, _ in points)
    slope = Fraction(n * sum_xy - sum_x * sum_y, n * sum_xx - sum_x * sum_x)
    intercept = (Fraction(sum_y) - slope * sum_x) / n
    residuals = [Fraction(y) - (slope * x + intercept) for x, y in points]
    return GrowthStats(
        n_points=n,
        slope=slope,
        intercept=intercept,
        residual_mean=sum(residuals, Fraction(0)) / n,
        residual_min=min(residuals),
        residual_max=max(residuals),
    )


def _asn_label(row: AsAggregateRow) -> str:
    if row.asn is None:
        return "TOTAL"
    return f"{row.asn}*" if row.multi_origin else str(row.asn)


def as_table_tsv(rows: list[AsAggregateRow]) -> str:
    lines = ["asn\tcumulative_bw\tbw_share\trelay_count\trelay_share"]
    for row in rows:
        lines.append("\t".join([
            _asn_label(row),
            str(row.cumulative_bw),
            format_fraction(row.bw_share),
            str(row.relay_count),
            format_fraction(row.relay_share),
        ]))
    return "\n".join(lines) + "\n"


def as_table_json(rows: list[AsAggregateRow]) -> str:
    payload = [
        {
            "asn": row.asn,
            "cumulative_bw": row.cumulative_bw,
            "bw_share": format_fraction(row.bw_share),
            "relay_count": row.relay_count,
            "relay_share": format_fraction(row.relay_share),
            "multi_origin": row.multi_origin,
            "total": row.is_total,
        }
        for row in rows
    ]
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def country_table_tsv(rows: list[CountryRow]) -> str:
    lines = ["country\tcount\tshare"]
    total = sum(r.count for r in rows)
    for row in rows:
        lines.append(f"{row.country_code}\t{row.count}\t{format_fraction(row.share)}")
    share = format_fraction(percent(total, total)) if total else "0.00"
    lines.append(f"TOTAL\t{total}\t{share}")
    return "\n".join(lines) + "\n"


def country_table_json(rows: list[CountryRow]) -> str:
    payload = [
        {
            "country": row.country_code,
            "count": row.count,
            "share": format_fraction(row.share),
        }
        for row in rows
    ]
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def users_per_guard_tsv(rows: list[UsersPerGuardRow]) -> str:
    lines = [
        f"# reference: {REFERENCE_USERS_PER_GUARD} users per guard",
        "country\tusers\tguards\tusers_per_guard\tnote",
    ]
    for row in rows:
        note = "unservable" if row.unservable else ""
        lines.append(f"{row.country}\t{row.users}\t{row.guards}\t{row.ratio}\t{note}")
    return "\n".join(lines) + "\n"


def users_per_guard_json(rows: list[UsersPerGuardRow]) -> str:
    payload = {
        "reference_users_per_guard": REFERENCE_USERS_PER_GUARD,
        "rows": [
            {
                "country": row.country,
                "users": row.users,
                "guards": row.guards,
                "users_per_guard": row.ratio,
                "unservable": row.unservable,
            }
            for row in rows
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def growth_tsv(stats: GrowthStats) -> str:
    lines = [
        f"points\t{stats.n_points}",
        f"slope_bytes_per_relay\t{format_fraction(stats.slope)}",
        f"intercept_bytes\t{format_fraction(stats.intercept)}",
        f"residual_mean\t{format_fraction(stats.residual_mean)}",
        f"residual_min\t{format_fraction(stats.residual_min)}",
        f"residual_max\t{format_fraction(stats.residual_max)}",
    ]
    return "\n".join(lines) + "\n"


def growth_json(stats: GrowthStats) -> str:
    payload = {
        "points": stats.n_points,
        "slope_bytes_per_relay": format_fraction(stats.slope),
        "intercept_bytes": format_fraction(stats.intercept),
        "residual_mean": format_fraction(stats.residual_mean),
        "residual_min": format_fraction(stats.residual_min),
        "residual_max": format_fraction(stats.residual_max),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def load_users_csv(document: bytes | str) -> dict[str, int]:
    """Parse `country,mean_daily_users` CSV (header required)."""
    return _load_count_csv(document, ("country", "mean_daily_users"))


def load_counts_csv(document: bytes | str) -> dict[str, int]:
    """Parse `country,count` CSV (header required)."""
    return _load_count_csv(document, ("country", "count"))


def _load_count_csv(document: bytes | str, header: tuple[str, str]) -> dict[str, int]:
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    lines = [l for l in document.splitlines() if l.strip()]
    if not lines or tuple(h.strip().lower() for h in lines[0].split(",")[:2]) != header:
        raise ValueError(f"expected a {header[0]},{header[1]} header")
    counts: dict[str, int] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            raise ValueError(f"line {line_no}: expected {header[0]},{header[1]}")
        try:
            value = int(parts[1])
        except ValueError:
            raise ValueError(f"line {line_no}: bad count {parts[1]!r}") from None
        if value < 0:
            raise ValueError(f"line {line_no}: negative count")
        counts[parts[0]] = counts.get(parts[0], 0) + value
    return counts
