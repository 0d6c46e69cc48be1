"""Directed trade network: users are nodes, an edge u -> v means u sold to v."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from ..ingest import Transaction


@dataclass(frozen=True, eq=False)
class TradeNetwork:
    """Simple directed graph with parallel trades collapsed into weights.

    ``src``/``dst`` index into ``nodes``; edges are unique, sorted, and
    free of self-loops.
    """

    nodes: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    _adj: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        for arr in (self.src, self.dst, self.weight):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return int(self.src.shape[0])

    @property
    def index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.nodes)}

    @property
    def adjacency(self) -> sp.csr_matrix:
        """CSR adjacency with trade counts as entries (row = seller)."""
        if not self._adj:
            n = self.n_nodes
            self._adj.append(sp.csr_matrix((self.weight.astype(float), (self.src, self.dst)),
                                           shape=(n, n)))
        return self._adj[0]

    def edges(self) -> list[tuple[str, str, int]]:
        return [(self.nodes[s], self.nodes[d], int(w))
                for s, d, w in zip(self.src, self.dst, self.weight)]

    def edge_set(self) -> set[tuple[str, str]]:
        return {(self.nodes[s], self.nodes[d]) for s, d in zip(self.src, self.dst)}

    def induced(self, idx) -> "TradeNetwork":
        """Subgraph induced by the node positions ``idx``."""
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        sub = self.adjacency[idx][:, idx].tocoo()
        return _from_arrays(tuple(self.nodes[i] for i in idx), sub.row, sub.col, sub.data)

    def subgraph(self, users: Iterable[str]) -> "TradeNetwork":
        pos = self.index
        return self.induced([pos[u] for u in set(users) if u in pos])

    def __eq__(self, other):
        if not isinstance(other, TradeNetwork):
            return NotImplemented
        return (self.nodes == other.nodes
                and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst)
                and np.array_equal(self.weight, other.weight))

    def __hash__(self):
        return hash((self.nodes, self.src.tobytes(), self.dst.tobytes()))


def _from_arrays(nodes, src, dst, weight) -> TradeNetwork:
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weight = np.asarray(weight).astype(np.int64)
    order = np.lexsort((dst, src))
    return TradeNetwork(tuple(nodes), src[order], dst[order], weight[order])


def from_edges(edges: Iterable[tuple], nodes: Iterable[str] | None = None) -> TradeNetwork:
    """Network from ``(src, dst)`` or ``(src, dst, weight)`` tuples.

    Repeated pairs accumulate weight; self-loops are dropped.
    """
    counts: dict[tuple[str, str], int] = {}
    node_set = set(nodes or ())
    for e in edges:
        u, v = e[0], e[1]
        w = int(e[2]) if len(e) > 2 else 1
        node_set.update((u, v))
        if u == v:
            continue
        counts[(u, v)] = counts.get((u, v), 0) + w
    ordered = tuple(sorted(node_set))
    pos = {u: i for i, u in enumerate(ordered)}
    pairs = list(counts.items())
    src = [pos[u] for (u, _), _ in pairs]
    dst = [pos[v] for (_, v), _ in pairs]
    w = [c for _, c in pairs]
    return _from_arrays(ordered, src, dst, w)


def build_network(transactions: Iterable[Transaction],
                  keep: Callable[[Transaction], bool] | None = None) -> TradeNetwork:
    """Trade network over the transactions accepted by ``keep`` (all by default)."""
    return from_edges((tx.seller_id, tx.buyer_id)
                      for tx in transactions if keep is None or keep(tx))


def empty_network() -> TradeNetwork:
    return _from_arrays((), [], [], [])


def anomalous_subnetwork(flagged_ids, transactions, delta: float, mode: str = "flagged",
                         host: TradeNetwork | None = None) -> TradeNetwork:
    """Network of users taking part in flagged trades worth at least ``delta``.

    Parameters
    ----------
    flagged_ids : set of transaction ids, or labels with ``.flagged``
    transactions : all transactions (the host market)
    delta : minimum sale price of a flagged trade
    mode : ``"flagged"`` keeps only the flagged trades themselves;
        ``"induced"`` keeps every host edge among their participants.
    host : optional prebuilt full network for ``"induced"`` mode
    """
    flagged_ids = _flagged_set(flagged_ids)
    transactions = list(transactions)
    chosen = [tx for tx in transactions
              if tx.transaction_id in flagged_ids and tx.sale_price >= delta]
    if not chosen:
        return empty_network()
    if mode == "flagged":
        return build_network(chosen)
    if mode != "induced":
        raise ValueError(f"unknown subnetwork mode {mode!r}")
    users = {tx.seller_id for tx in chosen} | {tx.buyer_id for tx in chosen}
    host = host if host is not None else build_network(transactions)
    return host.subgraph(users)


def _flagged_set(flagged) -> set[str]:
    flagged = list(flagged)
    if flagged and hasattr(flagged[0], "flagged"):
        return {lab.flip.sale_transaction.transaction_id for lab in flagged if lab.flagged}
    return set(flagged)


def write_edge_list(net: TradeNetwork, dest) -> None:
    """TSV with header ``src dst weight``."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_edge_list(net, fh)
        return
    w = csv.writer(dest, delimiter="\t", lineterminator="\n")
    w.writerow(["src", "dst", "weight"])
    for u, v, c in net.edges():
        w.writerow([u, v, c])


def read_edge_list(source) -> TradeNetwork:
    if not hasattr(source, "read"):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_edge_list(fh)
    rows = csv.DictReader(source, delimiter="\t")
    return from_edges((r["src"], r["dst"], int(r["weight"])) for r in rows)
