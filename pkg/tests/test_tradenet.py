import io
import itertools
import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from tradeflag.errors import (
    EmptySample, EmptySamples, NoEdges, NoTriples, SampleTooLarge, TooFewNodes, TooFewTailPoints,
)
from tradeflag.tradenet import (
    anomalous_subnetwork, bootstrap_statistic, bootstrap_statistics, build_network,
    degree_sequences, density_from_counts, edge_density, empirical_pvalue, empty_network,
    fit_double_power_law, fit_power_law, from_edges, global_clustering, hits, hits_ks_bootstrap,
    ks_statistic, ks_two_sample, network_report, read_edge_list, sample_edge_subnetworks,
    sample_node_sets, sample_subnetworks, write_centralities, write_degrees, write_edge_list,
)

from conftest import make_tx


# -- oracles --------------------------------------------------------------------

def brute_clustering(n, edges):
    und = {frozenset(e) for e in edges if e[0] != e[1]}
    adj = {i: {j for j in range(n) if frozenset((i, j)) in und} for i in range(n)}
    tri = sum(1 for a, b, c in itertools.combinations(range(n), 3)
              if b in adj[a] and c in adj[a] and c in adj[b])
    triples = sum(len(adj[i]) * (len(adj[i]) - 1) // 2 for i in range(n))
    return tri, triples


def eigen_hits(n, edges):
    """Limit of power iteration from the uniform vector.

    Projects ``A^T 1`` onto the top eigenspace of ``A^T A`` so repeated top
    eigenvalues are handled the same way iteration handles them.
    """
    A = np.zeros((n, n))
    for u, v in edges:
        A[u, v] = 1.0
    vals, vecs = np.linalg.eigh(A.T @ A)
    top = vecs[:, vals > vals[-1] * (1 - 1e-9)]
    auth = top @ (top.T @ (A.T @ np.ones(n)))
    auth /= np.linalg.norm(auth)
    hub = A @ auth
    return hub / np.linalg.norm(hub), auth


def _net(n, edges):
    # zero-padded names keep sorted node order equal to integer order
    return from_edges([(f"n{u:04d}", f"n{v:04d}") for u, v in edges],
                      [f"n{i:04d}" for i in range(n)])


def _all_edges(n):
    return [(u, v) for u in range(n) for v in range(n) if u != v]


def _graphs(n, limit=None, seed=0):
    pairs = _all_edges(n)
    if limit is None:
        for mask in range(1 << len(pairs)):
            yield [p for k, p in enumerate(pairs) if mask >> k & 1]
    else:
        rng = np.random.default_rng(seed)
        for _ in range(limit):
            keep = rng.random(len(pairs)) < rng.uniform(0.1, 0.9)
            yield [p for p, k in zip(pairs, keep) if k]


# -- construction ---------------------------------------------------------------

def test_parallel_trades_collapse():
    txs = [make_tx(uid=f"U#{i}", seller="A", buyer="B", t=i) for i in range(3)]
    net = build_network(txs)
    assert net.n_nodes == 2 and net.n_edges == 1 and net.edges() == [("A", "B", 3)]
    assert edge_density(net) == 0.5


def test_edge_set_matches_hash_oracle(market):
    txs = market[0]
    net = build_network(txs)
    expect = {(t.seller_id, t.buyer_id) for t in txs}
    assert net.edge_set() == expect
    assert net.n_nodes == len({t.seller_id for t in txs} | {t.buyer_id for t in txs})
    assert int(net.weight.sum()) == len(txs)


def test_anomalous_subnetwork_nested_in_delta():
    txs = [make_tx(uid=f"U#{i}", seller=s, buyer=b, price=p, t=i)
           for i, (s, b, p) in enumerate([("A", "B", 5), ("B", "C", 600), ("C", "D", 1500),
                                          ("D", "E", 50), ("A", "C", 2)])]
    flagged = {txs[0].transaction_id, txs[1].transaction_id, txs[2].transaction_id}
    nets = [anomalous_subnetwork(flagged, txs, d) for d in (1, 500, 1000)]
    assert [n.n_edges for n in nets] == [3, 2, 1]
    for small, big in zip(nets[1:], nets):
        assert small.edge_set() <= big.edge_set()
    induced = anomalous_subnetwork(flagged, txs, 1, mode="induced")
    assert induced.edge_set() == {("A", "B"), ("B", "C"), ("C", "D"), ("A", "C")}


def test_empty_subnetwork():
    txs = [make_tx()]
    net = anomalous_subnetwork(set(), txs, 1)
    assert net == empty_network() and net.n_nodes == 0
    with pytest.raises(TooFewNodes):
        edge_density(net)
    rep = network_report(net)
    assert rep.edge_density is None and rep.notes


def test_edge_list_round_trip(tmp_path, market):
    net = build_network(market[0][:2000])
    write_edge_list(net, tmp_path / "a.tsv")
    again = read_edge_list(tmp_path / "a.tsv")
    assert again.edges() == net.edges()
    write_edge_list(again, tmp_path / "b.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()


# -- density and clustering -------------------------------------------------------

def test_three_cycle():
    net = _net(3, [(0, 1), (1, 2), (2, 0)])
    assert edge_density(net) == 0.5
    assert global_clustering(net) == 1.0


def test_reference_scale_density():
    d = density_from_counts(978_673, 159_598)
    assert d == 978_673 / (159_598 * 159_597)
    assert float(f"{d:.1e}") == 3.8e-5


def test_gnp_density_close_to_p():
    g = nx.gnp_random_graph(400, 0.02, seed=1, directed=True)
    net = _net(400, list(g.edges()))
    assert edge_density(net) == pytest.approx(nx.density(g))
    assert edge_density(net) == pytest.approx(0.02, rel=0.05)


def test_pendant_triangle():
    # triangle plus one pendant edge: 3 T / triples = 3 / 5
    net = _net(4, [(0, 1), (1, 2), (2, 0), (2, 3)])
    assert global_clustering(net) == pytest.approx(0.6)


def test_no_triples():
    with pytest.raises(NoTriples):
        global_clustering(_net(2, [(0, 1), (1, 0)]))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_exhaustive_small_graphs(n):
    for edges in _graphs(n):
        _check_against_oracles(n, edges)


@pytest.mark.parametrize("n", [5, 6, 8])
def test_random_small_graphs(n):
    for edges in _graphs(n, limit=300, seed=n):
        _check_against_oracles(n, edges)


def _check_against_oracles(n, edges):
    net = _net(n, edges)
    assert net.n_edges == len(edges)
    assert edge_density(net) == len(edges) / (n * (n - 1))
    deg = degree_sequences(net)
    out_o = [sum(1 for u, _ in edges if u == i) for i in range(n)]
    in_o = [sum(1 for _, v in edges if v == i) for i in range(n)]
    assert deg["out"].tolist() == out_o and deg["in"].tolist() == in_o
    assert deg["total"].tolist() == [a + b for a, b in zip(in_o, out_o)]
    tri, triples = brute_clustering(n, edges)
    if triples == 0:
        with pytest.raises(NoTriples):
            global_clustering(net)
    else:
        assert global_clustering(net) == 3 * tri / triples
        g = nx.Graph(list(edges))
        assert global_clustering(net) == pytest.approx(nx.transitivity(g), abs=1e-12)
    if not edges:
        with pytest.raises(NoEdges):
            hits(net)
        return
    res = hits(net)
    hub, auth = eigen_hits(n, edges)
    assert res.converged
    np.testing.assert_allclose(res.hub, hub, atol=1e-8)
    np.testing.assert_allclose(res.authority, auth, atol=1e-8)


# -- HITS -------------------------------------------------------------------------

def test_hits_single_edge():
    res = hits(_net(2, [(0, 1)]))
    np.testing.assert_allclose(res.hub, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(res.authority, [0.0, 1.0], atol=1e-12)


def test_hits_unit_norm_and_eigen_oracle():
    g = nx.gnp_random_graph(60, 0.08, seed=3, directed=True)
    edges = list(g.edges())
    res = hits(_net(60, edges))
    assert np.linalg.norm(res.hub) == pytest.approx(1.0)
    assert np.linalg.norm(res.authority) == pytest.approx(1.0)
    hub, auth = eigen_hits(60, edges)
    np.testing.assert_allclose(res.hub, hub, atol=1e-8)
    np.testing.assert_allclose(res.authority, auth, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.sets(st.sampled_from(_all_edges(6)), min_size=1), st.permutations(range(6)))
def test_hits_permutation_equivariant(edges, perm):
    edges = sorted(edges)
    a = hits(_net(6, edges))
    b = hits(_net(6, [(perm[u], perm[v]) for u, v in edges]))
    np.testing.assert_allclose(b.hub[list(perm)], a.hub, atol=1e-8)
    np.testing.assert_allclose(b.authority[list(perm)], a.authority, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.sets(st.sampled_from(_all_edges(7)), max_size=42))
def test_density_and_clustering_bounds(edges):
    net = _net(7, sorted(edges))
    assert 0.0 <= edge_density(net) <= 1.0
    try:
        assert 0.0 <= global_clustering(net) <= 1.0
    except NoTriples:
        pass


# -- power laws -------------------------------------------------------------------

def _pareto(alpha, n, seed, xmin=1.0):
    u = np.random.default_rng(seed).random(n)
    return xmin * (1 - u) ** (-1 / (alpha - 1))


def test_continuous_alpha_closed_form():
    x = np.array([1.0, np.e, np.e ** 2])
    fit = fit_power_law(x, "continuous", xmin=1.0, min_tail=3)
    assert fit.alpha == pytest.approx(1 + 3 / 3.0)


def test_continuous_recovery():
    fit = fit_power_law(_pareto(2.5, 100_000, 0), "continuous")
    assert abs(fit.alpha - 2.5) < 0.05


def test_discrete_matches_scalar_oracle():
    x = stats.zipf.rvs(2.5, size=5000, random_state=1).astype(float)
    fit = fit_power_law(x, "discrete", xmin=1)
    nll = lambda a: x.size * np.log(zeta(a, 1.0)) + a * np.log(x).sum()
    oracle = minimize_scalar(nll, bounds=(1.01, 6), method="bounded",
                             options={"xatol": 1e-10}).x
    assert fit.alpha == pytest.approx(oracle, abs=1e-6)
    assert abs(fit.alpha - 2.5) < 0.1


def test_discrete_scan_picks_true_xmin_region():
    x = stats.zipf.rvs(2.2, size=20_000, random_state=2).astype(float)
    fit = fit_power_law(x, "discrete")
    assert abs(fit.alpha - 2.2) < 0.1 and fit.n_tail >= 10


def test_too_few_tail_points():
    with pytest.raises(TooFewTailPoints):
        fit_power_law([1, 2, 3], "discrete")
    with pytest.raises(TooFewTailPoints):
        fit_power_law(np.ones(50), "discrete", xmin=1)
    with pytest.raises(ValueError):
        fit_power_law([1.5, 2.0], "discrete")


def stitched(a1, a2, b, n, seed, xmin=1.0):
    """Half the mass in a truncated power law on [xmin, b), half a Pareto above b."""
    rng = np.random.default_rng(seed)
    k = n // 2
    u = rng.random(k)
    c = 1 - a1
    lower = xmin * (1 + u * ((b / xmin) ** c - 1)) ** (1 / c)
    upper = _pareto(a2, n - k, seed + 1, xmin=b)
    return np.concatenate([lower, upper])


def test_double_power_law_recovery():
    fit = fit_double_power_law(stitched(2.0, 3.5, 100.0, 20_000, 5))
    assert abs(fit.alpha1 - 2.0) < 0.15
    assert abs(fit.alpha2 - 3.5) < 0.15
    assert 50 <= fit.breakpoint <= 200
    assert json.loads(json.dumps(fit.to_dict()))["diagnostics"]["n_upper"] >= 10


def test_double_power_law_single_regime():
    fit = fit_double_power_law(_pareto(2.5, 20_000, 9))
    assert abs(fit.alpha1 - 2.5) < 0.2 and abs(fit.alpha2 - 2.5) < 0.2


# -- significance -----------------------------------------------------------------

def test_empirical_pvalue_cases():
    assert empirical_pvalue(5.0, [1, 2, 3]) == 0.25
    assert empirical_pvalue(0.0, [1, 2, 3]) == 1.0
    assert empirical_pvalue(2.0, [1, 2, np.nan, 3]) == 0.75
    with pytest.raises(EmptySamples):
        empirical_pvalue(1.0, [np.nan])


def test_ks_identical_and_shifted():
    a = np.linspace(0, 1, 1001)
    assert ks_two_sample(a, a) == (0.0, 1.0)
    d, p = ks_two_sample(a, a + 0.5)
    assert d == pytest.approx(0.5, abs=2e-3) and p < 1e-10
    with pytest.raises(EmptySample):
        ks_statistic([], [1.0])


def test_ks_matches_scipy():
    rng = np.random.default_rng(4)
    a, b = rng.normal(size=300), rng.normal(0.1, 1, size=451)
    d, p = ks_two_sample(a, b)
    ref = stats.ks_2samp(a, b, method="asymp")
    assert d == pytest.approx(ref.statistic)
    assert p == pytest.approx(ref.pvalue, rel=0.05)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
       st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_ks_bounds_and_symmetry(a, b):
    d, p = ks_two_sample(a, b)
    assert 0.0 <= d <= 1.0 and 0.0 <= p <= 1.0
    assert ks_statistic(b, a) == d


# -- samplers ---------------------------------------------------------------------

def _gnp_host(n, p, seed):
    g = nx.fast_gnp_random_graph(n, p, seed=seed, directed=True)
    return _net(n, list(g.edges()))


def test_full_size_sample_is_host():
    host = _gnp_host(50, 0.1, 1)
    (s,) = sample_subnetworks(host, 50, 1, seed=0)
    assert s == host


def test_sample_mean_density_near_p():
    host = _gnp_host(2000, 0.01, 2)
    dens = [edge_density(s) for s in sample_subnetworks(host, 200, 300, seed=1)]
    assert np.mean(dens) == pytest.approx(edge_density(host), rel=0.05)


def test_sampler_determinism_and_independence():
    a = list(sample_node_sets(100, 10, 5, seed=3))
    b = list(sample_node_sets(100, 10, 5, seed=3))
    c = list(sample_node_sets(100, 10, 6, seed=3))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    # stream i does not depend on how many samples are drawn
    assert all(np.array_equal(x, y) for x, y in zip(a, c))
    with pytest.raises(SampleTooLarge):
        list(sample_node_sets(5, 6, 1))
    host = _gnp_host(30, 0.1, 4)
    with pytest.raises(SampleTooLarge):
        list(sample_edge_subnetworks(host, host.n_edges + 1, 1))
    (e,) = sample_edge_subnetworks(host, 10, 1, seed=0)
    assert e.n_edges == 10 and e.edge_set() <= host.edge_set()


def test_planted_cohort_is_significant():
    host_edges = list(nx.fast_gnp_random_graph(2000, 0.002, seed=5, directed=True).edges())
    cohort = list(range(30))
    planted = [(u, v) for u in cohort for v in cohort if u != v and (u + v) % 3]
    host = _net(2000, host_edges + planted)
    obs = host.induced(np.arange(30))
    res = bootstrap_statistics(host, obs, ["edge_density", "global_clustering"], 2000, seed=1)
    assert res["edge_density"].empirical_pvalue == 1 / 2001
    assert res["edge_density"].n_valid == 2000
    single = bootstrap_statistic(host, obs, "edge_density", 2000, seed=1)
    np.testing.assert_array_equal(single.samples, res["edge_density"].samples)
    threaded = bootstrap_statistic(host, obs, "edge_density", 2000, seed=1, n_jobs=2)
    np.testing.assert_array_equal(threaded.samples, single.samples)
    blob = json.loads(single.to_json())
    assert blob["n_samples"] == 2000


def test_undefined_sample_statistics_are_nan():
    host = _gnp_host(200, 0.005, 6)
    obs = host.induced(np.arange(5))
    res = bootstrap_statistic(host, obs, "global_clustering", 200, seed=0)
    assert res.n_valid < 200
    assert None in json.loads(res.to_json())["samples"]


def test_hits_ks_bootstrap_runs():
    host = _gnp_host(500, 0.02, 7)
    obs = host.induced(np.arange(40))
    res = hits_ks_bootstrap(host, obs, 50, seed=2).to_dict()
    assert res["hub"]["n_valid"] == 50 and 0 <= res["hub"]["median_p"] <= 1


# -- reports ----------------------------------------------------------------------

def test_report_and_tsv_exports():
    net = _net(4, [(0, 1), (1, 2), (2, 0), (2, 3)])
    rep = network_report(net, "demo")
    d = json.loads(rep.to_json())
    assert d["edge_density"] == pytest.approx(4 / 12) and d["avg_degree"] == 1.0
    assert d["global_clustering"] == pytest.approx(0.6)
    assert d["power_law"]["in"] is None  # too few tail points at this size
    buf = io.StringIO()
    write_degrees(net, rep, buf)
    assert buf.getvalue().splitlines()[:2] == ["user\tin\tout\ttotal", "n0000\t1\t1\t2"]
    buf = io.StringIO()
    write_centralities(net, rep, buf)
    assert buf.getvalue().splitlines()[0] == "user\thub\tauthority"
