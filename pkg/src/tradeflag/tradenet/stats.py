"""Significance helpers: add-one empirical p-values and the two-sample KS test."""

from __future__ import annotations

import numpy as np
from scipy.stats import kstwobign

from ..errors import EmptySample, EmptySamples


def empirical_pvalue(observed: float, samples) -> float:
    """``(1 + #{s >= observed}) / (S + 1)`` over the finite samples."""
    s = np.asarray(samples, dtype=float).ravel()
    s = s[np.isfinite(s)]
    if s.size == 0:
        raise EmptySamples("no finite bootstrap samples")
    return (1.0 + np.count_nonzero(s >= observed)) / (s.size + 1.0)


def ks_statistic(a, b) -> float:
    """``sup |ECDF_a - ECDF_b|``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySample("KS test needs two nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    The p-value is the Kolmogorov survival function at ``sqrt(n_eff) * D``
    with ``n_eff = n m / (n + m)``.
    """
    d = ks_statistic(a, b)
    n, m = np.size(a), np.size(b)
    n_eff = n * m / (n + m)
    p = 1.0 if d == 0 else float(kstwobign.sf(np.sqrt(n_eff) * d))
    return d, min(p, 1.0)
