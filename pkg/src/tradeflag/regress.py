"""Ordinary least squares via a pivoted QR factorization, with diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import RankDeficient, SchemaMismatch, TooFewRows

RANK_TOL = 1e-10


@dataclass(frozen=True)
class RegressionFit:
    columns: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    r_squared: float
    adjusted_r_squared: float
    residual_std_error: float
    f_statistic: float
    df_model: int
    df_residual: int
    n_observations: int
    has_intercept: bool
    rss: float
    fitted_values: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def t_values(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coefficients / self.standard_errors

    @property
    def p_values(self) -> np.ndarray:
        """Two-sided p-values; normal approximation once df exceeds 1000."""
        t = np.abs(self.t_values)
        if self.df_residual > 1000:
            return 2 * stats.norm.sf(t)
        return 2 * stats.t.sf(t, self.df_residual)

    @property
    def stars(self) -> list[str]:
        out = []
        for p in self.p_values:
            out.append("***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else "")
        return out

    @property
    def f_pvalue(self) -> float:
        if self.df_model == 0 or not np.isfinite(self.f_statistic):
            return float("nan")
        return float(stats.f.sf(self.f_statistic, self.df_model, self.df_residual))

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.columns.index(name)])

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "coefficients": [float(c) for c in self.coefficients],
            "standard_errors": [float(s) for s in self.standard_errors],
            "r_squared": self.r_squared,
            "adjusted_r_squared": self.adjusted_r_squared,
            "residual_std_error": self.residual_std_error,
            "f_statistic": self.f_statistic,
            "df_model": self.df_model,
            "df_residual": self.df_residual,
            "n_observations": self.n_observations,
            "has_intercept": self.has_intercept,
            "rss": self.rss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionFit":
        return cls(
            columns=tuple(d["columns"]),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            standard_errors=np.asarray(d["standard_errors"], dtype=float),
            r_squared=d["r_squared"],
            adjusted_r_squared=d["adjusted_r_squared"],
            residual_std_error=d["residual_std_error"],
            f_statistic=d["f_statistic"],
            df_model=d["df_model"],
            df_residual=d["df_residual"],
            n_observations=d["n_observations"],
            has_intercept=d["has_intercept"],
            rss=d["rss"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RegressionFit":
        return cls.from_dict(json.loads(text))


def _intercept_present(X: np.ndarray) -> bool:
    return bool(np.any(np.all(X == X[0:1, :], axis=0) & (X[0] != 0)))


def fit_ols(X, y, columns=None) -> RegressionFit:
    """Least-squares fit of ``y`` on ``X``.

    Uses a column-pivoted QR decomposition of the column-normalized design;
    the normal equations are never formed. A column is treated as dependent
    when its pivot falls below ``1e-10`` times the largest pivot.

    Parameters
    ----------
    X : array of shape (n, k)
        Design matrix, including an intercept column if one is wanted.
    y : array of shape (n,)
    columns : sequence of str, optional
        Column names; defaults to ``x0 .. x{k-1}``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise SchemaMismatch(f"incompatible shapes X{X.shape} and y{y.shape}")
    n, k = X.shape
    if columns is None:
        columns = [f"x{j}" for j in range(k)]
    columns = tuple(columns)
    if len(columns) != k:
        raise SchemaMismatch(f"{len(columns)} column names for {k} columns")
    if n < k or n == 0:
        raise TooFewRows(f"{n} rows for {k} columns")

    # unit-norm columns make the rank tolerance independent of feature units
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0):
        raise RankDeficient([columns[j] for j in np.flatnonzero(scale == 0)])
    Q, R, piv = scipy.linalg.qr(X / scale, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if k else 0
    if rank < k:
        raise RankDeficient([columns[j] for j in sorted(piv[rank:])])

    qty = Q.T @ y
    beta_p = scipy.linalg.solve_triangular(R, qty)
    beta = np.empty(k)
    beta[piv] = beta_p
    beta /= scale

    fitted = Q @ qty
    resid = y - fitted
    rss = float(resid @ resid)
    df_resid = n - k
    has_intercept = _intercept_present(X)
    df_model = k - 1 if has_intercept else k

    sigma2 = rss / df_resid if df_resid > 0 else float("nan")
    Rinv = scipy.linalg.solve_triangular(R, np.eye(k))
    cov_diag_p = np.sum(Rinv * Rinv, axis=1)
    se = np.empty(k)
    se[piv] = np.sqrt(cov_diag_p * sigma2)
    se /= scale

    if has_intercept:
        tss = float(np.sum((y - y.mean()) ** 2))
    else:
        tss = float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    if df_resid > 0:
        denom = n - 1 if has_intercept else n
        adj = 1.0 - (1.0 - r2) * denom / df_resid
    else:
        adj = float("nan")
    adj = min(adj, r2)
    if df_model > 0 and df_resid > 0:
        ess = tss - rss
        f_stat = (ess / df_model) / sigma2 if sigma2 > 0 else float("inf")
    else:
        f_stat = float("nan")

    return RegressionFit(
        columns=columns,
        coefficients=beta,
        standard_errors=se,
        r_squared=float(r2),
        adjusted_r_squared=float(adj),
        residual_std_error=float(np.sqrt(sigma2)) if df_resid > 0 else float("nan"),
        f_statistic=float(f_stat),
        df_model=int(df_model),
        df_residual=int(df_resid),
        n_observations=int(n),
        has_intercept=has_intercept,
        rss=rss,
        fitted_values=fitted,
    )


def predict(fit: RegressionFit, row) -> float | np.ndarray:
    """Predicted profit for one row (dict keyed by column, or vector) or a matrix."""
    if isinstance(row, dict):
        missing = set(fit.columns) - set(row)
        extra = set(row) - set(fit.columns)
        if missing or extra:
            raise SchemaMismatch(f"row keys differ from schema: missing={sorted(missing)} extra={sorted(extra)}")
        row = np.array([row[c] for c in fit.columns], dtype=float)
    arr = np.asarray(row, dtype=float)
    if arr.shape[-1] != len(fit.columns):
        raise SchemaMismatch(f"row has {arr.shape[-1]} entries, schema has {len(fit.columns)}")
    out = arr @ fit.coefficients
    return float(out) if arr.ndim == 1 else out


def residuals(fit: RegressionFit, X, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    pred = predict(fit, np.atleast_2d(np.asarray(X, dtype=float)))
    if pred.shape != y.shape:
        raise SchemaMismatch(f"{pred.shape[0]} predictions for {y.shape[0]} responses")
    return y - pred
