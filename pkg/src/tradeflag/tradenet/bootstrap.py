"""Random-subnetwork bootstraps for judging how unusual a subnetwork is."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from ..errors import EmptySample, NoEdges, NoTriples, SampleTooLarge, TooFewNodes, TooFewTailPoints
from .metrics import degree_sequences, edge_density, global_clustering, hits
from .network import TradeNetwork, _from_arrays
from .powerlaw import fit_power_law
from .stats import empirical_pvalue, ks_two_sample

DEFAULT_SAMPLES = 20_000

# metric failures on a sample (too small, no triples, ...) become NaN
_SOFT_ERRORS = (NoTriples, TooFewNodes, TooFewTailPoints, NoEdges, EmptySample)


def _streams(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def sample_node_sets(n_total: int, n_nodes: int, count: int = DEFAULT_SAMPLES,
                     seed: int = 0) -> Iterator[np.ndarray]:
    """Sorted uniform node subsets of size ``n_nodes``, one RNG stream each."""
    if n_nodes > n_total:
        raise SampleTooLarge(f"cannot draw {n_nodes} nodes from {n_total}")
    if n_nodes < 0:
        raise SampleTooLarge(f"negative sample size {n_nodes}")
    for ss in _streams(seed, count):
        rng = np.random.default_rng(ss)
        yield np.sort(rng.choice(n_total, size=n_nodes, replace=False))


def sample_subnetworks(host: TradeNetwork, n_nodes: int, count: int = DEFAULT_SAMPLES,
                       seed: int = 0) -> Iterator[TradeNetwork]:
    """Induced subnetworks on uniformly random node subsets of ``host``.

    Sample ``i`` depends only on ``(seed, i)``, so the stream is reproducible
    and can be split across workers.
    """
    for idx in sample_node_sets(host.n_nodes, n_nodes, count, seed):
        yield host.induced(idx)


def sample_edge_subnetworks(host: TradeNetwork, n_edges: int, count: int = DEFAULT_SAMPLES,
                            seed: int = 0) -> Iterator[TradeNetwork]:
    """Subnetworks made of ``n_edges`` uniformly chosen host edges and their endpoints."""
    if n_edges > host.n_edges:
        raise SampleTooLarge(f"cannot draw {n_edges} edges from {host.n_edges}")
    for ss in _streams(seed, count):
        rng = np.random.default_rng(ss)
        pick = np.sort(rng.choice(host.n_edges, size=n_edges, replace=False))
        src, dst, w = host.src[pick], host.dst[pick], host.weight[pick]
        used = np.unique(np.concatenate([src, dst]))
        remap = np.searchsorted(used, np.arange(host.n_nodes))
        yield _from_arrays(tuple(host.nodes[i] for i in used), remap[src], remap[dst], w)


def _alpha(mode):
    def stat(net):
        return fit_power_law(degree_sequences(net)[mode], "discrete").alpha
    return stat


def _max_frac(mode):
    def stat(net):
        if net.n_nodes == 0:
            raise TooFewNodes("empty network")
        return degree_sequences(net)[mode].max() / net.n_nodes
    return stat


STATISTICS: dict[str, Callable[[TradeNetwork], float]] = {
    "edge_density": edge_density,
    "global_clustering": global_clustering,
    "alpha_in": _alpha("in"),
    "alpha_out": _alpha("out"),
    "alpha_total": _alpha("total"),
    "max_in_fraction": _max_frac("in"),
    "max_out_fraction": _max_frac("out"),
    "max_total_fraction": _max_frac("total"),
}


def _safe(stat, net) -> float:
    try:
        return float(stat(net))
    except _SOFT_ERRORS:
        return float("nan")


@dataclass
class BootstrapResult:
    statistic: str
    observed: float
    samples: np.ndarray
    empirical_pvalue: float
    n_nodes: int
    seed: int
    sampler: str = "node"
    n_valid: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "observed": self.observed,
            "empirical_pvalue": self.empirical_pvalue,
            "n_samples": int(self.samples.size),
            "n_valid": self.n_valid,
            "sampler": {"kind": self.sampler, "n_nodes": self.n_nodes, "seed": self.seed},
            "samples": [None if not np.isfinite(s) else float(s) for s in self.samples],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _map_samples(fn, host, n_nodes, count, seed, n_jobs):
    sets = list(sample_node_sets(host.n_nodes, n_nodes, count, seed))
    if n_jobs <= 1:
        return [fn(host.induced(idx)) for idx in sets]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda idx: fn(host.induced(idx)), sets, chunksize=256))


def bootstrap_statistics(host: TradeNetwork, observed: TradeNetwork, statistics,
                         count: int = DEFAULT_SAMPLES, seed: int = 0,
                         n_jobs: int = 1) -> dict[str, BootstrapResult]:
    """Compare ``observed`` with node-count matched random induced subnetworks.

    Each sample is induced once and every named statistic is evaluated on it.
    Samples on which a statistic is undefined are kept as NaN and left out of
    its p-value; ``n_valid`` counts the rest.
    """
    names = list(statistics)
    fns = [STATISTICS[name] for name in names]
    rows = _map_samples(lambda net: [_safe(f, net) for f in fns], host,
                        observed.n_nodes, count, seed, n_jobs)
    values = np.array(rows, dtype=float).reshape(-1, len(names))
    out = {}
    for j, (name, fn) in enumerate(zip(names, fns)):
        obs = _safe(fn, observed)
        col = values[:, j]
        valid = int(np.isfinite(col).sum())
        p = empirical_pvalue(obs, col) if np.isfinite(obs) and valid else float("nan")
        out[name] = BootstrapResult(name, obs, col, p, observed.n_nodes, seed, "node", valid)
    return out


def bootstrap_statistic(host: TradeNetwork, observed: TradeNetwork, statistic: str,
                        count: int = DEFAULT_SAMPLES, seed: int = 0,
                        n_jobs: int = 1) -> BootstrapResult:
    """Single-statistic form of :func:`bootstrap_statistics`."""
    return bootstrap_statistics(host, observed, [statistic], count, seed, n_jobs)[statistic]


@dataclass
class HitsKsResult:
    """KS comparisons of observed HITS scores against each random subnetwork."""

    n_nodes: int
    seed: int
    hub_d: np.ndarray
    hub_p: np.ndarray
    authority_d: np.ndarray
    authority_p: np.ndarray

    def _summary(self, d, p):
        ok = np.isfinite(d)
        if not ok.any():
            return {"n_valid": 0}
        return {"n_valid": int(ok.sum()), "median_d": float(np.median(d[ok])),
                "median_p": float(np.median(p[ok])),
                "fraction_p_below_0.05": float(np.mean(p[ok] < 0.05))}

    def to_dict(self) -> dict:
        return {"n_nodes": self.n_nodes, "seed": self.seed, "n_samples": int(self.hub_d.size),
                "hub": self._summary(self.hub_d, self.hub_p),
                "authority": self._summary(self.authority_d, self.authority_p)}


def hits_ks_bootstrap(host: TradeNetwork, observed: TradeNetwork,
                      count: int = DEFAULT_SAMPLES, seed: int = 0,
                      n_jobs: int = 1) -> HitsKsResult:
    """KS distance between the observed and each sampled hub/authority distribution."""
    ref = hits(observed)

    def one(net):
        try:
            h = hits(net)
        except NoEdges:
            return (np.nan,) * 4
        dh, ph = ks_two_sample(ref.hub, h.hub)
        da, pa = ks_two_sample(ref.authority, h.authority)
        return dh, ph, da, pa

    out = np.array(_map_samples(one, host, observed.n_nodes, count, seed, n_jobs),
                   dtype=float).reshape(-1, 4)
    return HitsKsResult(observed.n_nodes, seed, out[:, 0], out[:, 1], out[:, 2], out[:, 3])
