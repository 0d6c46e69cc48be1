"""Trade-network construction, metrics and bootstrap significance tests."""

from .bootstrap import (
    DEFAULT_SAMPLES, STATISTICS, BootstrapResult, HitsKsResult, bootstrap_statistic,
    bootstrap_statistics, hits_ks_bootstrap, sample_edge_subnetworks, sample_node_sets,
    sample_subnetworks,
)
from .metrics import (
    DEGREE_MODES, HitsResult, degree_sequences, degree_stats, density_from_counts,
    edge_density, global_clustering, hits, triangle_and_triple_counts, undirected_projection,
)
from .network import (
    TradeNetwork, anomalous_subnetwork, build_network, empty_network, from_edges,
    read_edge_list, write_edge_list,
)
from .powerlaw import DoublePowerLawFit, PowerLawFit, fit_double_power_law, fit_power_law
from .report import MetricReport, network_report, write_centralities, write_degrees
from .stats import empirical_pvalue, ks_statistic, ks_two_sample

__all__ = [
    "DEFAULT_SAMPLES", "STATISTICS", "BootstrapResult", "HitsKsResult", "bootstrap_statistic",
    "bootstrap_statistics", "hits_ks_bootstrap", "sample_edge_subnetworks", "sample_node_sets",
    "sample_subnetworks",
    "DEGREE_MODES", "HitsResult", "degree_sequences", "degree_stats", "density_from_counts",
    "edge_density", "global_clustering", "hits", "triangle_and_triple_counts",
    "undirected_projection", "TradeNetwork", "anomalous_subnetwork", "build_network",
    "empty_network", "from_edges", "read_edge_list", "write_edge_list", "DoublePowerLawFit",
    "PowerLawFit", "fit_double_power_law", "fit_power_law", "MetricReport", "network_report",
    "write_centralities", "write_degrees", "empirical_pvalue", "ks_statistic", "ks_two_sample",
]
