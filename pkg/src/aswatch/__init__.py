"""AS-aware endpoint safety for Tor circuits.

The pipeline: parse a consensus snapshot, attribute relay and destination
addresses to origin ASes, infer valley-free AS paths between every exit
relay and a catalog of destinations, and answer "which exits are unsafe"
for a user-supplied suspect AS set, as a library, a CLI, and an HTTP
service that emits ready-to-paste torrc exclusions.
"""

from .asdb import (
    AsBlacklist,
    AsTopology,
    PrefixEntry,
    PrefixTable,
    attribute_asn,
    detect_multi_origin,
    ip_to_asn,
    load_as_relationships,
    load_prefix_table,
    update_blacklist,
)
from .circuits import (
    AsObservation,
    Circuit,
    Role,
    as_observation_probabilities,
    circuit_constraints_ok,
    dir_bandwidth_cost,
    eligible_relays,
    propagate_threat,
    sample_circuit,
    selection_weight,
)
from .consensus import (
    ConsensusSnapshot,
    RelayRecord,
    is_live,
    parse_consensus,
    serialize_consensus,
)
from .ingest import (
    DestinationCatalog,
    TracerouteReport,
    build_path_db,
    load_catalog,
    load_path_db,
    parse_traceroute,
    refresh,
    save_path_db,
)
from .pathinfer import AsPath, RoutePref, infer_paths, mean_path_length, path_as_set
from .reports import (
    AggregateSort,
    aggregate_by_as,
    consensus_growth,
    country_distribution,
    users_per_guard,
)
from .safety import (
    PathDb,
    SuspectSet,
    UnsafeExitReport,
    circuit_is_safe,
    filter_prebuilt_circuits,
    unsafe_exits,
)
from .service import ApiService, QueryRequest, emit_torrc, handle_query

__version__ = "0.1.0"

__all__ = [
    "AggregateSort",
    "ApiService",
    "AsBlacklist",
    "AsObservation",
    "AsPath",
    "AsTopology",
    "Circuit",
    "ConsensusSnapshot",
    "DestinationCatalog",
    "PathDb",
    "PrefixEntry",
    "PrefixTable",
    "QueryRequest",
    "RelayRecord",
    "Role",
    "RoutePref",
    "SuspectSet",
    "TracerouteReport",
    "UnsafeExitReport",
    "aggregate_by_as",
    "as_observation_probabilities",
    "attribute_asn",
    "build_path_db",
    "circuit_constraints_ok",
    "circuit_is_safe",
    "consensus_growth",
    "country_distribution",
    "detect_multi_origin",
    "dir_bandwidth_cost",
    "eligible_relays",
    "emit_torrc",
    "filter_prebuilt_circuits",
    "handle_query",
    "infer_paths",
    "ip_to_asn",
    "is_live",
    "load_as_relationships",
    "load_catalog",
    "load_path_db",
    "load_prefix_table",
    "mean_path_length",
    "parse_consensus",
    "parse_traceroute",
    "path_as_set",
    "propagate_threat",
    "refresh",
    "sample_circuit",
    "save_path_db",
    "selection_weight",
    "serialize_consensus",
    "unsafe_exits",
    "update_blacklist",
    "users_per_guard",
]
