"""Structural metrics of a trade network: density, clustering, degrees, HITS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import NoEdges, NoTriples, TooFewNodes
from .network import TradeNetwork

DEGREE_MODES = ("in", "out", "total")


def density_from_counts(n_edges: int, n_nodes: int) -> float:
    """Directed simple-graph density ``E / (N (N - 1))``."""
    if n_nodes < 2:
        raise TooFewNodes(f"density needs at least 2 nodes, got {n_nodes}")
    return n_edges / (n_nodes * (n_nodes - 1))


def edge_density(net: TradeNetwork) -> float:
    return density_from_counts(net.n_edges, net.n_nodes)


def undirected_projection(net: TradeNetwork) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency ignoring edge direction."""
    n = net.n_nodes
    ones = np.ones(net.n_edges)
    A = sp.csr_matrix((ones, (net.src, net.dst)), shape=(n, n))
    U = ((A + A.T) > 0).astype(np.int64)
    return sp.csr_matrix(U)


def triangle_and_triple_counts(net: TradeNetwork) -> tuple[int, int]:
    """``(triangles, connected triples)`` of the undirected projection."""
    U = undirected_projection(net)
    deg = np.asarray(U.sum(axis=1)).ravel()
    triples = int(np.sum(deg * (deg - 1)) // 2)
    closed = int((U @ U).multiply(U).sum())  # 6 x triangles
    return closed // 6, triples


def global_clustering(net: TradeNetwork) -> float:
    """Transitivity ``3 T / triples`` on the undirected projection."""
    tri, triples = triangle_and_triple_counts(net)
    if triples == 0:
        raise NoTriples("network has no connected triple")
    return 3 * tri / triples


def degree_sequences(net: TradeNetwork) -> dict[str, np.ndarray]:
    """Unweighted in, out and total degree per node, aligned with ``net.nodes``.

    Total degree is in + out, so a reciprocated pair contributes 2.
    """
    n = net.n_nodes
    out_deg = np.bincount(net.src, minlength=n).astype(np.int64)
    in_deg = np.bincount(net.dst, minlength=n).astype(np.int64)
    return {"in": in_deg, "out": out_deg, "total": in_deg + out_deg}


@dataclass(frozen=True)
class DegreeStats:
    mode: str
    sequence: np.ndarray
    max: int
    max_fraction: float
    mean: float

    def to_dict(self) -> dict:
        return {"mode": self.mode, "max": self.max, "max_fraction": self.max_fraction,
                "mean": self.mean}


def degree_stats(net: TradeNetwork) -> dict[str, DegreeStats]:
    out = {}
    n = net.n_nodes
    for mode, seq in degree_sequences(net).items():
        mx = int(seq.max()) if n else 0
        out[mode] = DegreeStats(mode, seq, mx, mx / n if n else 0.0,
                                float(seq.mean()) if n else 0.0)
    return out


@dataclass(frozen=True)
class HitsResult:
    hub: np.ndarray
    authority: np.ndarray
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "converged": self.converged}


def hits(net: TradeNetwork, tol: float = 1e-10, max_iter: int = 1000) -> HitsResult:
    """Hub and authority scores by alternating power iteration.

    Both vectors start at the uniform unit vector and are L2-normalized every
    round. Edge weights are ignored. Iteration stops once neither vector moves
    by more than ``tol`` in any coordinate; hitting ``max_iter`` returns the
    current iterate with ``converged=False``.
    """
    if net.n_edges == 0:
        raise NoEdges("HITS needs at least one edge")
    n = net.n_nodes
    A = sp.csr_matrix((np.ones(net.n_edges), (net.src, net.dst)), shape=(n, n))
    AT = A.T.tocsr()
    hub = np.full(n, 1.0 / np.sqrt(n))
    auth = hub.copy()
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        new_auth = AT @ hub
        new_auth /= np.linalg.norm(new_auth)
        new_hub = A @ new_auth
        new_hub /= np.linalg.norm(new_hub)
        delta = max(np.max(np.abs(new_auth - auth)), np.max(np.abs(new_hub - hub)))
        hub, auth = new_hub, new_auth
        if delta < tol:
            converged = True
            break
    return HitsResult(hub, auth, it, converged)
