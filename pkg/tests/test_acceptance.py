"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines appear
even without ``-s``.
"""
import json
import time
from contextlib import contextmanager

import networkx as nx
import numpy as np
import pytest
from scipy import stats

from tradeflag import cli
from tradeflag.anomaly import label_all
from tradeflag.features import assemble_design
from tradeflag.ingest import build_provenance, derive_flips
from tradeflag.regress import fit_ols, predict, residuals
from tradeflag.rfcde import CdeForestParams, fit_forest, predict_density, tail_probability
from tradeflag.synth import MarketConfig, generate_market
from tradeflag.tradenet import (
    bootstrap_statistic, density_from_counts, edge_density, fit_double_power_law, fit_power_law,
    from_edges, ks_two_sample,
)

from test_tradenet import _check_against_oracles, _graphs, stitched


@contextmanager
def criterion(capsys, number, title):
    """Time the body and print one PASS/FAIL line whatever the outcome."""
    info = {}
    start = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        detail = " ".join(f"{k}={v}" for k, v in info.items())
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'} {title} "
                  f"({elapsed:.1f}s) {detail}".rstrip())


def test_1_ols_recovery(capsys):
    with criterion(capsys, 1, "OLS recovery") as info:
        rng = np.random.default_rng(101)
        n, p, sigma = 50_000, 20, 2.0
        X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
        beta = rng.uniform(-3, 3, p)
        y = X @ beta + rng.normal(0, sigma, n)
        start = time.perf_counter()
        fit = fit_ols(X, y)
        elapsed = time.perf_counter() - start
        z = np.abs(fit.coefficients - beta) / fit.standard_errors
        # brute-force oracle from the normal equations
        r = y - X @ fit.coefficients
        s2 = r @ r / (n - p)
        se = np.sqrt(np.diag(np.linalg.inv(X.T @ X)) * s2)
        rel = np.max(np.abs(fit.standard_errors - se) / se)
        info.update(max_z=f"{z.max():.2f}", se_rel=f"{rel:.1e}", fit_s=f"{elapsed:.2f}")
        assert z.max() < 4
        assert rel < 1e-8
        assert elapsed < 10


def _hetero(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n)
    return x, rng.normal(0, 0.2 + x, n)


def test_2_rfcde_normalization_and_calibration(capsys):
    with criterion(capsys, 2, "RFCDE normalization and calibration") as info:
        start = time.perf_counter()
        x, z = _hetero(20_000, 201)
        forest = fit_forest(x, z, CdeForestParams(rng_seed=2))
        xh, zh = _hetero(5_000, 202)
        lo = forest.quantiles(xh, 0.05)
        hi = forest.quantiles(xh, 0.95)
        coverage = float(np.mean((zh >= lo) & (zh <= hi)))
        integrals = np.array([predict_density(forest, q).grid_integral()
                              for q in np.linspace(0, 1, 101)])
        elapsed = time.perf_counter() - start
        worst = float(np.max(np.abs(integrals - 1)))
        info.update(coverage=f"{coverage:.4f}", max_int_err=f"{worst:.1e}")
        assert worst <= 0.01
        assert abs(coverage - 0.90) <= 0.03
        assert elapsed < 120


def test_3_tail_against_trapezoid(capsys):
    with criterion(capsys, 3, "tail probability vs trapezoid") as info:
        rng = np.random.default_rng(301)
        x, z = _hetero(3_000, 302)
        forest = fit_forest(x, z, CdeForestParams(n_trees=20, rng_seed=3))
        worst = 0.0
        for _ in range(100):
            d = predict_density(forest, rng.uniform(0, 1))
            t = rng.uniform(-2, 2)
            upper = d.z.max() + 12 * d.bandwidth
            grid = np.linspace(t, max(upper, t + 1e-9), 10_000)
            expect = np.trapezoid(d.pdf(grid), grid)
            worst = max(worst, abs(tail_probability(d, t) - expect))
        info.update(max_abs_err=f"{worst:.1e}")
        assert worst <= 1e-4


def test_4_end_to_end_detection(capsys):
    with criterion(capsys, 4, "end-to-end detection") as info:
        start = time.perf_counter()
        txs, truth = generate_market(MarketConfig(rng_seed=7))
        d = assemble_design(derive_flips(build_provenance(txs)))
        fit = fit_ols(d.X, d.y, d.columns)
        forest = fit_forest(predict(fit, d.X), residuals(fit, d.X, d.y),
                            CdeForestParams(n_trees=100, rng_seed=7))
        labels, _ = label_all(d.flips, d.X, fit, forest, 0.01,
                              train_index=np.arange(len(d.flips)))
        elapsed = time.perf_counter() - start
        planted = set(truth.anomalous_transaction_ids)
        mask = np.array([lab.flip.sale_transaction.transaction_id in planted for lab in labels])
        flagged = np.array([lab.flagged for lab in labels])
        recall = float(flagged[mask].mean())
        honest = float(flagged[~mask].mean())
        info.update(recall=f"{recall:.3f}", honest_rate=f"{honest:.4f}")
        assert recall >= 0.9
        assert honest <= 0.02
        assert elapsed < 300


def test_5_graph_metric_oracles(capsys):
    with criterion(capsys, 5, "graph metric oracles") as info:
        checked = 0
        for n in (2, 3, 4):
            for edges in _graphs(n):
                _check_against_oracles(n, edges)
                checked += 1
        # 2**20 and 2**30 labelled graphs on 5 and 6 nodes; sample them instead
        for n in (5, 6):
            for edges in _graphs(n, limit=1500, seed=500 + n):
                _check_against_oracles(n, edges)
                checked += 1
        stub = from_edges([], [f"u{i}" for i in range(2)])
        d = density_from_counts(978_673, 159_598)
        assert d == 978_673 / (159_598 * 159_597)
        assert edge_density(stub) == density_from_counts(0, 2)
        info.update(graphs=checked, stub_density=f"{d:.3e}")
        assert float(f"{d:.1e}") == 3.8e-5


def test_6_power_law_mle(capsys):
    with criterion(capsys, 6, "power-law MLE") as info:
        u = np.random.default_rng(601).random(100_000)
        single = fit_power_law((1 - u) ** (-1 / 1.5), mode="continuous", xmin=1.0)
        double = fit_double_power_law(stitched(2.0, 3.5, 100.0, 20_000, 602))
        info.update(alpha=f"{single.alpha:.3f}", alpha1=f"{double.alpha1:.3f}",
                    alpha2=f"{double.alpha2:.3f}", breakpoint=f"{double.breakpoint:.1f}")
        assert abs(single.alpha - 2.5) <= 0.05
        assert abs(double.alpha1 - 2.0) <= 0.15
        assert abs(double.alpha2 - 3.5) <= 0.15
        assert 50 <= double.breakpoint <= 200


def test_7_bootstrap_machinery(capsys):
    with criterion(capsys, 7, "bootstrap significance machinery") as info:
        start = time.perf_counter()
        n_host, size = 10_000, 30
        host_edges = list(nx.fast_gnp_random_graph(n_host, 0.0005, seed=701,
                                                   directed=True).edges())
        cohort = [(u, v) for u in range(size) for v in range(size) if u != v and (u + v) % 3]
        names = [f"n{i:05d}" for i in range(n_host)]
        host = from_edges([(names[u], names[v]) for u, v in host_edges + cohort], names)
        observed = host.induced(np.arange(size))
        res = bootstrap_statistic(host, observed, "edge_density", 20_000, seed=7)

        rng = np.random.default_rng(702)
        pvals = np.array([ks_two_sample(rng.normal(size=2000), rng.normal(size=3001))[1]
                          for _ in range(1000)])
        counts = np.histogram(pvals, bins=np.linspace(0, 1, 11))[0]
        chi2 = stats.chisquare(counts).pvalue
        elapsed = time.perf_counter() - start
        info.update(density_p=f"{res.empirical_pvalue:.1e}", ks_decile_chi2_p=f"{chi2:.3f}")
        assert res.empirical_pvalue <= 0.001
        assert chi2 > 0.01
        assert elapsed < 600


def _run_pipeline(out, config):
    for stage in ("synth", "fit", "label", "net", "report"):
        assert cli.main([stage, "--out", str(out), "--config", config]) == 0, stage


def test_8_determinism(capsys, tmp_path):
    with criterion(capsys, 8, "determinism") as info:
        # default market and forest; fewer bootstrap samples keep the run short
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"seed": 7, "bootstrap_samples": 500}))
        _run_pipeline(tmp_path / "a", str(config))
        _run_pipeline(tmp_path / "b", str(config))
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
        differ = [n for n in names
                  if (tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes()]
        info.update(files=len(names), differing=len(differ))
        assert not differ, differ
