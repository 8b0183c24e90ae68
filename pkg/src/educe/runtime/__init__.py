"""Cluster runtime: node config, registries, and run bookkeeping.

Only the leaf modules are re-exported here. The engines (educe.runtime.sim,
educe.runtime.threads) and the entry point (educe.runtime.run) import the
health manager, which itself depends on this package, so they must be
imported by their full module path to keep package initialization acyclic.
"""

from .config import (
    REPLACEMENT_POLICIES,
    ClusterConfig,
    NodeConfig,
    Tier,
    TransportConfig,
    default_cluster,
    load_cluster_config,
    parse_cluster_config,
)
from .options import TRANSPORT_MODES, WORKLOADS, RunOptions
from .registry import NodeStatus, Registry, RegistryEntry
from .report import RunReport, aggregate_stats, counter_identities_ok, parse_report

__all__ = [
    "REPLACEMENT_POLICIES",
    "ClusterConfig",
    "NodeConfig",
    "Tier",
    "TransportConfig",
    "default_cluster",
    "load_cluster_config",
    "parse_cluster_config",
    "NodeStatus",
    "Registry",
    "RegistryEntry",
    "RunOptions",
    "RunReport",
    "TRANSPORT_MODES",
    "WORKLOADS",
    "aggregate_stats",
    "counter_identities_ok",
    "parse_report",
]
