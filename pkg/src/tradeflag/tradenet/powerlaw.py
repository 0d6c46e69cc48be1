"""Maximum-likelihood power-law fits for degree and activity distributions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from ..errors import TooFewTailPoints

MIN_TAIL = 10
MAX_XMIN_CANDIDATES = 500
ALPHA_BOUNDS = (1.0 + 1e-9, 50.0)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    xmin: float
    ks_distance: float
    n_tail: int
    mode: str

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "xmin": self.xmin, "ks_distance": self.ks_distance,
                "n_tail": self.n_tail, "mode": self.mode}


@dataclass(frozen=True)
class DoublePowerLawFit:
    alpha1: float
    alpha2: float
    breakpoint: float
    xmin: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"alpha1": self.alpha1, "alpha2": self.alpha2, "breakpoint": self.breakpoint,
                "xmin": self.xmin, "diagnostics": self.diagnostics}


# -- continuous ---------------------------------------------------------------

def _continuous_alpha(tail: np.ndarray, xmin: float) -> float:
    s = float(np.sum(np.log(tail / xmin)))
    if s <= 0:
        raise TooFewTailPoints(f"no spread above xmin={xmin}")
    return 1.0 + tail.size / s


def _continuous_ks(tail_sorted: np.ndarray, xmin: float, alpha: float) -> float:
    n = tail_sorted.size
    model = 1.0 - (tail_sorted / xmin) ** (1.0 - alpha)
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(hi - model), np.max(model - lo)))


# -- discrete -----------------------------------------------------------------

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _discrete_alphas(n, log_sum, xmin, iterations: int = 64) -> np.ndarray:
    """Zeta-likelihood MLE for several tails at once.

    Minimizes ``n log zeta(a, xmin) + a * log_sum`` (convex in ``a``) by a
    golden-section search run in lockstep over the arrays.
    """
    n, log_sum, xmin = (np.asarray(v, dtype=float) for v in (n, log_sum, xmin))

    def nll(a):
        return n * np.log(zeta(a, xmin)) + a * log_sum

    lo = np.full(n.shape, ALPHA_BOUNDS[0])
    hi = np.full(n.shape, ALPHA_BOUNDS[1])
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = nll(c), nll(d)
    for _ in range(iterations):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = np.where(left, hi - _GOLDEN * (hi - lo), d)
        new_d = np.where(left, c, lo + _GOLDEN * (hi - lo))
        probe = np.where(left, new_c, new_d)
        fp = nll(probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = new_c, new_d
    return (lo + hi) / 2.0


def _discrete_alpha(tail: np.ndarray, xmin: float) -> float:
    if np.all(tail == xmin):
        raise TooFewTailPoints(f"no spread above xmin={xmin}")
    return float(_discrete_alphas(tail.size, np.sum(np.log(tail)), xmin))


def _discrete_ks(tail_sorted: np.ndarray, xmin: float, alpha: float) -> float:
    # both CDFs are right-continuous steps on the integers, so the sup is
    # attained at an observed value or just before the next one
    uniq = np.unique(tail_sorted)
    pts = np.unique(np.concatenate([uniq, uniq[1:] - 1]))
    emp = np.searchsorted(tail_sorted, pts, side="right") / tail_sorted.size
    model = 1.0 - zeta(alpha, pts + 1.0) / zeta(alpha, xmin)
    return float(np.max(np.abs(emp - model)))


_FITTERS = {
    "continuous": (_continuous_alpha, _continuous_ks),
    "discrete": (_discrete_alpha, _discrete_ks),
}


def _clean(data, mode: str) -> np.ndarray:
    if mode not in _FITTERS:
        raise ValueError(f"unknown mode {mode!r}")
    x = np.sort(np.asarray(data, dtype=float).ravel())
    x = x[np.isfinite(x) & (x > 0)]
    if mode == "discrete":
        x = x[x >= 1]
        if np.any(x != np.round(x)):
            raise ValueError("discrete fit needs integer data")
    return x


def _fit_at(x_sorted: np.ndarray, xmin: float, mode: str, min_tail: int) -> PowerLawFit:
    tail = x_sorted[np.searchsorted(x_sorted, xmin, side="left"):]
    if tail.size < min_tail:
        raise TooFewTailPoints(f"{tail.size} observations >= xmin={xmin}, need {min_tail}")
    alpha_fn, ks_fn = _FITTERS[mode]
    alpha = alpha_fn(tail, xmin)
    return PowerLawFit(alpha, float(xmin), ks_fn(tail, xmin, alpha), int(tail.size), mode)


def xmin_candidates(x_sorted: np.ndarray, min_tail: int = MIN_TAIL,
                    max_candidates: int = MAX_XMIN_CANDIDATES) -> np.ndarray:
    """Distinct values leaving at least ``min_tail`` points in the tail.

    More than ``max_candidates`` are thinned to quantile-spaced values.
    """
    if x_sorted.size < min_tail:
        return np.zeros(0)
    uniq = np.unique(x_sorted[: x_sorted.size - min_tail + 1])
    if uniq.size > max_candidates:
        pick = np.unique(np.linspace(0, uniq.size - 1, max_candidates).round().astype(int))
        uniq = uniq[pick]
    return uniq


def fit_power_law(data, mode: str = "discrete", xmin: float | None = None,
                  min_tail: int = MIN_TAIL,
                  max_candidates: int = MAX_XMIN_CANDIDATES) -> PowerLawFit:
    """Power-law exponent of the tail ``x >= xmin`` by maximum likelihood.

    Parameters
    ----------
    data : array_like
        Observations; non-positive values are ignored (zero degrees carry no
        tail information).
    mode : {"discrete", "continuous"}
        The continuous estimate is the closed form ``1 + n / sum(log(x/xmin))``;
        the discrete one maximizes the Hurwitz-zeta likelihood numerically.
    xmin : float, optional
        Fixed lower cutoff. When omitted, every candidate cutoff is tried and
        the one with the smallest KS distance between the fitted and empirical
        tail wins.

    Raises
    ------
    TooFewTailPoints
        Fewer than ``min_tail`` observations at or above the cutoff.
    """
    x = _clean(data, mode)
    if xmin is not None:
        return _fit_at(x, float(xmin), mode, min_tail)
    cands = xmin_candidates(x, min_tail, max_candidates)
    if mode == "discrete":
        return _scan_discrete(x, cands)
    best = None
    for cand in cands:
        try:
            fit = _fit_at(x, float(cand), mode, min_tail)
        except TooFewTailPoints:
            continue
        if best is None or fit.ks_distance < best.ks_distance:
            best = fit
    if best is None:
        raise TooFewTailPoints(f"no usable xmin among {x.size} observations")
    return best


def _scan_discrete(x: np.ndarray, cands: np.ndarray) -> PowerLawFit:
    # every candidate's exponent comes from one lockstep search
    cands = cands[cands < x[-1]] if x.size else cands
    if cands.size == 0:
        raise TooFewTailPoints(f"no usable xmin among {x.size} observations")
    start = np.searchsorted(x, cands, side="left")
    tail_log = np.concatenate([np.cumsum(np.log(x)[::-1])[::-1], [0.0]])
    alphas = _discrete_alphas(x.size - start, tail_log[start], cands)
    best = None
    for cand, k, alpha in zip(cands, start, alphas):
        tail = x[k:]
        ks = _discrete_ks(tail, float(cand), float(alpha))
        if best is None or ks < best.ks_distance:
            best = PowerLawFit(float(alpha), float(cand), ks, int(tail.size), "discrete")
    return best


# -- two regimes --------------------------------------------------------------

def _log_expm1_ratio(s: float) -> float:
    """``log(expm1(s) / s)`` without overflow, 0 at s = 0."""
    if s == 0:
        return 0.0
    if s > 0:
        return s + np.log(-np.expm1(-s)) - np.log(s)
    return np.log(-np.expm1(s)) - np.log(-s)


def _truncated_alpha(y_mean: float, L: float) -> float:
    """MLE exponent of a power law truncated to ``[a, a e^L)``.

    ``y_mean`` is the mean of ``log(x / a)``. Up to constants the per-point
    negative log-likelihood is ``alpha * y_mean + log(expm1(c L) / (c L))``
    with ``c = 1 - alpha``.
    """
    res = minimize_scalar(lambda a: a * y_mean + _log_expm1_ratio((1.0 - a) * L),
                          bounds=(-20.0, 50.0), method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def _truncated_cdf(x, a, b, alpha):
    L = np.log(b / a)
    c = 1.0 - alpha
    y = np.log(x / a)
    if abs(c * L) < 1e-12:
        return y / L
    return np.expm1(c * y) / np.expm1(c * L)


def _ks_against(sorted_x, model):
    n = sorted_x.size
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(hi - model), np.max(model - lo)))


def fit_double_power_law(data, xmin: float | None = None, min_regime: int = 10,
                         min_tail: int = 50, max_candidates: int = 200) -> DoublePowerLawFit:
    """Two-regime continuous power law with a single breakpoint.

    Below the breakpoint ``b`` the exponent ``alpha1`` is the MLE of a power
    law truncated to ``[xmin, b)``; above it ``alpha2`` is the ordinary MLE
    with cutoff ``b``. The breakpoint is the observed value minimizing the
    sum of the two regimes' KS distances, subject to ``min_regime`` points on
    each side.
    """
    x = _clean(data, "continuous")
    if xmin is None:
        xmin = float(x[0]) if x.size else 1.0
    x = x[x >= xmin]
    if x.size < max(min_tail, 2 * min_regime):
        raise TooFewTailPoints(f"{x.size} tail observations, need {max(min_tail, 2 * min_regime)}")

    logs = np.log(x / xmin)
    csum = np.concatenate([[0.0], np.cumsum(logs)])
    uniq = np.unique(x)
    lo_counts = np.searchsorted(x, uniq, side="left")
    ok = (lo_counts >= min_regime) & (x.size - lo_counts >= min_regime) & (uniq > xmin)
    cands = uniq[ok]
    if cands.size == 0:
        raise TooFewTailPoints("no breakpoint leaves enough points in both regimes")
    if cands.size > max_candidates:
        pick = np.unique(np.linspace(0, cands.size - 1, max_candidates).round().astype(int))
        cands = cands[pick]

    best = None
    for b in cands:
        k = int(np.searchsorted(x, b, side="left"))
        lower, upper = x[:k], x[k:]
        L = float(np.log(b / xmin))
        a1 = _truncated_alpha(csum[k] / k, L)
        ks1 = _ks_against(lower, _truncated_cdf(lower, xmin, b, a1))
        s2 = float(np.sum(np.log(upper / b)))
        if s2 <= 0:
            continue
        a2 = 1.0 + upper.size / s2
        ks2 = _continuous_ks(upper, b, a2)
        score = ks1 + ks2
        if best is None or score < best[0]:
            best = (score, float(b), a1, a2, ks1, ks2, k, upper.size)
    if best is None:
        raise TooFewTailPoints("no breakpoint gave a valid upper-regime fit")
    score, b, a1, a2, ks1, ks2, n1, n2 = best
    diag = {"ks_lower": ks1, "ks_upper": ks2, "ks_sum": score, "n_lower": n1,
            "n_upper": n2, "n_candidates": int(cands.size)}
    return DoublePowerLawFit(a1, a2, b, float(xmin), diag)
