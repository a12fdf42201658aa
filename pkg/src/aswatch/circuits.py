"""Bandwidth-weighted relay selection and per-AS observation probabilities.

The selection weight of a relay is its consensus bandwidth over the summed
bandwidth of the role-eligible set: Guard-flagged relays for the guard slot,
Exit-flagged for the exit slot, and relays carrying neither flag for the
middle slot. Weights are exact rationals so distributions sum to 1 exactly.
"""

from __future__ import annotations

import bisect
import enum
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import accumulate

from .asdb import NoMatchingPrefix, PrefixTable, attribute_asn
from .consensus import ConsensusSnapshot, RelayRecord

SENTINEL_ASN = 0  # relays whose address no prefix covers
RETRY_BOUND = 1000


class Role(enum.Enum):
    GUARD = "Guard"
    MIDDLE = "Middle"
    EXIT = "Exit"


class ZeroTotalBandwidth(ValueError):
    pass


class NoFeasibleCircuit(RuntimeError):
    pass


def eligible_relays(snapshot: ConsensusSnapshot, role: Role) -> tuple[RelayRecord, ...]:
    if role is Role.GUARD:
        return tuple(r for r in snapshot.relays if r.is_guard)
    if role is Role.EXIT:
        return tuple(r for r in snapshot.relays if r.is_exit)
    return tuple(r for r in snapshot.relays if not r.is_guard and not r.is_exit)


def selection_weight(relay: RelayRecord, snapshot: ConsensusSnapshot, role: Role) -> Fraction:
    eligible = eligible_relays(snapshot, role)
    total = sum(r.bandwidth for r in eligible)
    if total == 0:
        raise ZeroTotalBandwidth(f"no bandwidth in {role.value} set")
    if relay not in eligible:
        return Fraction(0)
    return Fraction(relay.bandwidth, total)


def circuit_constraints_ok(guard: RelayRecord, middle: RelayRecord, exit: RelayRecord) -> bool:
    relays = (guard, middle, exit)
    if len({r.fingerprint for r in relays}) != 3:
        return False
    if len({r.subnet16 for r in relays}) != 3:
        return False
    families = [r.family_id for r in relays if r.family_id is not None]
    if len(families) != len(set(families)):
        return False
    return guard.is_guard and exit.is_exit


@dataclass(frozen=True)
class Circuit:
    guard: RelayRecord
    middle: RelayRecord
    exit: RelayRecord

    def __post_init__(self):
        if not circuit_constraints_ok(self.guard, self.middle, self.exit):
            raise ValueError("circuit violates selection constraints")


def _weighted_chooser(relays):
    cumulative = list(accumulate(r.bandwidth for r in relays))
    total = cumulative[-1] if cumulative else 0
    if total == 0:
        raise ZeroTotalBandwidth("eligible set has zero total bandwidth")

    def choose(rng: random.Random):
        return relays[bisect.bisect_right(cumulative, rng.random() * total)]

    return choose


def sample_circuit(snapshot: ConsensusSnapshot, rng_seed: int) -> Circuit:
    """Draw (guard, middle, exit) by bandwidth weight, rejection-resampling
    until the /16, family, and distinct-relay constraints hold."""
    rng = random.Random(rng_seed)
    choose_guard = _weighted_chooser(eligible_relays(snapshot, Role.GUARD))
    choose_middle = _weighted_chooser(eligible_relays(snapshot, Role.MIDDLE))
    choose_exit = _weighted_chooser(eligible_relays(snapshot, Role.EXIT))
    for _ in range(RETRY_BOUND):
        guard = choose_guard(rng)
        middle = choose_middle(rng)
        exit_relay = choose_exit(rng)
        if circuit_constraints_ok(guard, middle, exit_relay):
            return Circuit(guard, middle, exit_relay)
    raise NoFeasibleCircuit(f"no valid circuit in {RETRY_BOUND} draws")


@dataclass(frozen=True)
class AsObservation:
    asn: int
    guard_probability: Fraction
    exit_probability: Fraction
    propagated_guard_upper: Fraction | None = None
    propagated_exit_upper: Fraction | None = None
    multi_origin: bool = False


def as_observation_probabilities(snapshot: ConsensusSnapshot,
                                 prefix_table: PrefixTable) -> list[AsObservation]:
    """Per-AS guard/exit selection probability, most threatening exits first.

    Each relay is attributed to a single AS (smallest ASN of its most-specific
    prefix entry) so the per-role probabilities sum to 1; uncovered addresses
    fall into the sentinel AS 0.
    """
    guard_bw: dict[int, int] = {}
    exit_bw: dict[int, int] = {}
    multi: set[int] = set()

    def asn_for(relay: RelayRecord) -> int:
        try:
            asn, is_multi = attribute_asn(relay.address, prefix_table)
        except NoMatchingPrefix:
            return SENTINEL_ASN
        if is_multi:
            multi.add(asn)
        return asn

    guard_total = 0
    exit_total = 0
    for relay in snapshot.relays:
        asn = asn_for(relay)
        if relay.is_guard:
            guard_bw[asn] = guard_bw.get(asn, 0) + relay.bandwidth
            guard_total += relay.bandwidth
        if relay.is_exit:
            exit_bw[asn] = exit_bw.get(asn, 0) + relay.bandwidth
            exit_total += relay.bandwidth
    if guard_total == 0 or exit_total == 0:
        raise ZeroTotalBandwidth("snapshot lacks guard or exit bandwidth")

    observations = []
    for asn in sorted(set(guard_bw) | set(exit_bw)):
        observations.append(AsObservation(
            asn=asn,
            guard_probability=Fraction(guard_bw.get(asn, 0), guard_total),
            exit_probability=Fraction(exit_bw.get(asn, 0), exit_total),
            multi_origin=asn in multi,
        ))
    observations.sort(key=lambda o: (-o.exit_probability, o.asn))
    return observations


def propagate_threat(observations, topology) -> list[AsObservation]:
    """One-hop provider propagation: a provider's upper bound is its own base
    probability plus the base probability of every customer it can observe.
    Providers absent from the observations enter with base 0."""
    by_asn = {o.asn: o for o in observations}
    order = [o.asn for o in observations]
    for asn in list(by_asn):
        for provider in sorted(topology.providers_of.get(asn, ())):
            if provider not in by_asn:
                by_asn[provider] = AsObservation(provider, Fraction(0), Fraction(0))
                order.append(provider)

    result = []
    for asn in order:
        obs = by_asn[asn]
        guard_upper = obs.guard_probability
        exit_upper = obs.exit_probability
        for customer in topology.customers_of.get(asn, ()):
            child = by_asn.get(customer)
            if child is not None:
                guard_upper += child.guard_probability
                exit_upper += child.exit_probability
        result.append(replace(obs, propagated_guard_upper=guard_upper,
                              propagated_exit_upper=exit_upper))
    return result


def dir_bandwidth_cost(n_clients: int, consensus_bytes: int,
                       fetches_per_client_per_day: Fraction | int = 8) -> int:
    """Directory traffic in bytes/day for n clients fetching the consensus."""
    if n_clients <= 0 or consensus_bytes <= 0 or fetches_per_client_per_day <= 0:
        raise ValueError("all inputs must be positive")
    return int(n_clients * consensus_bytes * Fraction(fetches_per_client_per_day))
