"""Metric reports and plot-ready TSV exports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from ..errors import NoEdges, NoTriples, TooFewNodes, TooFewTailPoints
from .metrics import DEGREE_MODES, HitsResult, degree_stats, edge_density, global_clustering, hits
from .network import TradeNetwork
from .powerlaw import fit_power_law


@dataclass
class MetricReport:
    name: str
    n_nodes: int
    n_edges: int
    edge_density: float | None
    global_clustering: float | None
    degrees: dict
    power_law: dict
    hits: HitsResult | None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "avg_degree": self.n_edges / self.n_nodes if self.n_nodes else 0.0,
            "edge_density": self.edge_density,
            "global_clustering": self.global_clustering,
            "degrees": {m: s.to_dict() for m, s in self.degrees.items()},
            "power_law": self.power_law,
            "hits": self.hits.to_dict() if self.hits is not None else None,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def network_report(net: TradeNetwork, name: str = "network",
                   power_law_mode: str = "discrete") -> MetricReport:
    """Every metric of ``net``; undefined metrics are ``None`` with a note."""
    notes = []

    def attempt(label, fn):
        try:
            return fn()
        except (TooFewNodes, NoTriples, NoEdges, TooFewTailPoints) as exc:
            notes.append(f"{label}: {type(exc).__name__}: {exc}")
            return None

    density = attempt("edge_density", lambda: edge_density(net))
    clustering = attempt("global_clustering", lambda: global_clustering(net))
    degrees = degree_stats(net)
    power = {}
    for mode in DEGREE_MODES:
        fit = attempt(f"power_law.{mode}",
                      lambda: fit_power_law(degrees[mode].sequence, power_law_mode))
        power[mode] = fit.to_dict() if fit is not None else None
    h = attempt("hits", lambda: hits(net))
    return MetricReport(name, net.n_nodes, net.n_edges, density, clustering, degrees,
                        power, h, notes)


def write_degrees(net: TradeNetwork, report: MetricReport, dest) -> None:
    """TSV: ``user in out total``."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_degrees(net, report, fh)
        return
    w = csv.writer(dest, delimiter="\t", lineterminator="\n")
    w.writerow(["user", "in", "out", "total"])
    d = report.degrees
    for i, u in enumerate(net.nodes):
        w.writerow([u, int(d["in"].sequence[i]), int(d["out"].sequence[i]),
                    int(d["total"].sequence[i])])


def write_centralities(net: TradeNetwork, report: MetricReport, dest) -> None:
    """TSV: ``user hub authority`` (empty when HITS is undefined)."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_centralities(net, report, fh)
        return
    w = csv.writer(dest, delimiter="\t", lineterminator="\n")
    w.writerow(["user", "hub", "authority"])
    if report.hits is None:
        return
    for u, h, a in zip(net.nodes, report.hits.hub, report.hits.authority):
        w.writerow([u, repr(float(h)), repr(float(a))])
