"""Empirical second-order statistics of integrated-variance series.

Raw and centered correlograms, absolute log-increment moments, and the
log-log scaling regression for the roughness exponent.  Conventions follow
the estimators the moment-fitting theory is built on: correlograms divide by
the full sample size N at every lag (not N - k), the log correlogram is
centered with the single global mean of ln M, and scaling moments average
over all N - k valid increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simulate import VolSeries

__all__ = [
    "Correlogram",
    "ScalingFit",
    "correlogram_M",
    "correlogram_lnM",
    "log_increment_moments",
    "scaling_fit_from_moments",
    "scaling_estimate_H",
]


@dataclass(frozen=True)
class Correlogram:
    """Empirical correlogram of a series at integer lags 0..max_lag.

    kind   "raw_M" (uncentered products) or "centered_lnM" (global-mean centered)
    delta  cell size of the underlying series
    lags   integer lags, starting at 0
    values C(n) at each lag, divisor N
    count  N, the series length
    mean   the centering mean for centered_lnM, the plain mean for raw_M
    """

    kind: str
    delta: float
    lags: np.ndarray
    values: np.ndarray
    count: int
    mean: float

    def __post_init__(self):
        if self.kind not in ("raw_M", "centered_lnM"):
            raise ValueError(f"unknown correlogram kind {self.kind!r}")
        if self.lags[0] != 0:
            raise ValueError("lags must start at 0")
        if self.count < int(self.lags[-1]) + 2:
            raise ValueError("series too short for the requested lags")
        if self.kind == "raw_M" and not self.values[0] > 0.0:
            raise ValueError("raw correlogram must be positive at lag 0")


def _autoproducts(x: np.ndarray, max_lag: int) -> np.ndarray:
    n = x.size
    out = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        out[k] = np.dot(x[: n - k], x[k:]) / n
    return out


def _check_series(series: VolSeries, max_lag: int) -> np.ndarray:
    values = np.asarray(series.values, dtype=float)
    if max_lag < 0:
        raise ValueError(f"max_lag must be nonnegative, got {max_lag}")
    if max_lag > values.size - 2:
        raise ValueError(f"max_lag={max_lag} too large for series of length {values.size}")
    return values


def correlogram_M(series: VolSeries, max_lag: int) -> Correlogram:
    """Raw correlogram of cell masses: C(n) = (1/N) sum_j M_j M_{j+n}."""
    x = _check_series(series, max_lag)
    vals = _autoproducts(x, max_lag)
    return Correlogram(
        kind="raw_M",
        delta=series.delta,
        lags=np.arange(max_lag + 1),
        values=vals,
        count=x.size,
        mean=float(x.mean()),
    )


def correlogram_lnM(series: VolSeries, max_lag: int) -> Correlogram:
    """Centered correlogram of log cell masses.

    C(n) = (1/N) sum_j (ln M_j - mu)(ln M_{j+n} - mu) with mu the global
    empirical mean of ln M.  Exactly invariant under rescaling of the series
    by any positive constant.
    """
    x = _check_series(series, max_lag)
    if not np.all(x > 0.0):
        raise ValueError("correlogram_lnM needs strictly positive values")
    y = np.log(x)
    mu = float(y.mean())
    vals = _autoproducts(y - mu, max_lag)
    return Correlogram(
        kind="centered_lnM",
        delta=series.delta,
        lags=np.arange(max_lag + 1),
        values=vals,
        count=x.size,
        mean=mu,
    )


def _lag_counts(series: VolSeries, taus) -> np.ndarray:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size == 0:
        raise ValueError("need at least one tau")
    ks = np.round(taus / series.delta).astype(int)
    if np.any(np.abs(ks * series.delta - taus) > 1e-9 * np.maximum(taus, series.delta)):
        raise ValueError("taus must be integer multiples of the cell size delta")
    n = len(series)
    if np.any(ks < 1) or np.any(ks > n - 1):
        raise ValueError(f"lags must lie in [1, {n - 1}] cells, got {ks.tolist()}")
    return ks


def log_increment_moments(series: VolSeries, q: float, taus) -> tuple[np.ndarray, np.ndarray]:
    """Empirical moments mean(|ln M(t+tau) - ln M(t)|^q) at each tau.

    taus must be integer multiples of the cell size; the average runs over
    all N - k valid increments.  Returns (taus, m_hat) as arrays.
    """
    if q <= 0.0:
        raise ValueError(f"q must be positive, got {q}")
    x = np.asarray(series.values, dtype=float)
    if not np.all(x > 0.0):
        raise ValueError("log increments need strictly positive values")
    ks = _lag_counts(series, taus)
    y = np.log(x)
    m_hat = np.empty(ks.size)
    for i, k in enumerate(ks):
        m_hat[i] = np.mean(np.abs(y[k:] - y[:-k]) ** q)
    return np.atleast_1d(np.asarray(taus, dtype=float)), m_hat


@dataclass(frozen=True)
class ScalingFit:
    """Log-log regression of q-th absolute log-increment moments on the lag.

    H_hat is slope/q.  Smoothing at the cell scale makes this estimator
    biased upward by about half the g_H log-slope over the same lag grid; it
    is used as an initializer, not as the final estimate.
    """

    q: float
    taus: np.ndarray
    m_hat: np.ndarray
    H_hat: float
    r2: float
    intercept: float

    def __post_init__(self):
        if not math.isfinite(self.H_hat):
            raise ValueError("H_hat must be finite")


def scaling_fit_from_moments(q: float, taus, m_hat, delta: float = 1.0) -> ScalingFit:
    """OLS of ln(m_hat) on ln(tau): H_hat = slope / q.

    Exposed separately so exact kernel moments can be run through the same
    regression as empirical ones.
    """
    taus = np.asarray(taus, dtype=float)
    m_hat = np.asarray(m_hat, dtype=float)
    if taus.size < 2 or np.unique(taus).size < 2:
        raise ValueError("need at least 2 distinct taus")
    if np.any(m_hat <= 0.0) or not np.all(np.isfinite(m_hat)):
        raise ValueError("degenerate regression: moments must be positive and finite")
    x = np.log(taus)
    y = np.log(m_hat)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0.0 else 1.0
    return ScalingFit(
        q=q, taus=taus, m_hat=m_hat,
        H_hat=float(slope) / q, r2=r2, intercept=float(intercept),
    )


def scaling_estimate_H(series: VolSeries, q: float, tau_range) -> ScalingFit:
    """Scaling estimator of the roughness exponent from a series."""
    taus, m_hat = log_increment_moments(series, q, tau_range)
    return scaling_fit_from_moments(q, taus, m_hat, delta=series.delta)
