"""Moment-matching estimation of (H, nu^2) from volatility correlograms.

Two estimator variants: matching the raw correlogram of cell masses M to
K2 * rtilde, or the centered correlogram of ln M to K1 + dtilde + V1 1{n=0}.
The V1 spike absorbs measurement noise in the volatility proxy together with
the lag-0 mismatch of the limit formula.  Moments live on a geometric lag
grid; their long-run covariance is estimated by a Bartlett-weighted
Newey-West sum over per-time residual contributions, and the weighted
quadratic form is minimized with box-constrained quasi-Newton from a
scaling-estimator initialization plus deterministic restarts (lowest
objective wins; ties go to the smaller H).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .estimators import Correlogram, correlogram_M, correlogram_lnM, scaling_estimate_H
from .kernels import dtilde_profile, rtilde_profile
from .simulate import VolSeries

__all__ = [
    "GMM_LNM",
    "GMM_M",
    "GmmSpec",
    "GmmFit",
    "default_lags",
    "model_corr_lnM",
    "model_corr_M",
    "newey_west_weight",
    "fit",
    "fit_from_correlogram",
]

GMM_LNM = "gmm_lnM"
GMM_M = "gmm_M"

_H_BOUNDS = (0.0, 0.499)
_NU2_BOUNDS = (1e-8, 1e6)
_TIE_TOL = 1e-12


def default_lags(method: str) -> tuple:
    """Geometric lag grid floor(sqrt(2^k)), k = 0..18, deduplicated.

    The log-measure variant prepends lag 0, whose variance spike is carried
    by the V1 parameter; the raw-measure variant starts at lag 1.
    """
    base = sorted({int(math.isqrt(1 << k)) for k in range(19)})
    if method == GMM_LNM:
        return tuple([0] + base)
    if method == GMM_M:
        return tuple(base)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class GmmSpec:
    """Configuration of one moment-matching fit.

    method        "gmm_lnM" or "gmm_M"
    lags          strictly increasing integer lags; None selects the default grid
    hac_lag       Newey-West lag; None selects floor(N^{1/3}) at fit time
    bounds        parameter box overrides, keyed by parameter name
    init          starting-point overrides, keyed by parameter name
    weight_steps  1 = identity weight only, 2 = two-step (default), more iterates
    restarts      deterministic perturbed restarts beyond the base start
    max_iter      quasi-Newton iteration cap per start
    """

    method: str
    lags: Optional[tuple] = None
    hac_lag: Optional[int] = None
    bounds: Optional[dict] = None
    init: Optional[dict] = None
    weight_steps: int = 2
    restarts: int = 3
    max_iter: int = 400

    def __post_init__(self):
        if self.method not in (GMM_LNM, GMM_M):
            raise ValueError(f"unknown method {self.method!r}")
        lags = self.lags if self.lags is not None else default_lags(self.method)
        lags = tuple(int(v) for v in lags)
        if any(v < 0 for v in lags):
            raise ValueError("lags must be nonnegative")
        if any(b <= a for a, b in zip(lags, lags[1:])):
            raise ValueError("lags must be strictly increasing")
        if len(lags) < len(self.param_names(self.method)):
            raise ValueError("need at least as many moments as free parameters")
        object.__setattr__(self, "lags", lags)
        if self.weight_steps < 1:
            raise ValueError("weight_steps must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")

    @staticmethod
    def param_names(method: str) -> tuple:
        return ("H", "nu2", "K1", "V1") if method == GMM_LNM else ("H", "nu2", "K2")

    def bound_list(self) -> list:
        defaults = {
            "H": _H_BOUNDS,
            "nu2": _NU2_BOUNDS,
            "K1": (None, None),
            "V1": (0.0, None),
            "K2": (1e-12, None),
        }
        if self.bounds:
            defaults.update(self.bounds)
        return [defaults[name] for name in self.param_names(self.method)]


@dataclass(frozen=True)
class GmmFit:
    """Result of one moment-matching fit.

    lambda2_hat = H_hat (1 - 2 H_hat) nu2_hat is the intermittency estimate;
    it stays well determined even where H and nu2 individually trade off
    along a ridge near H = 0.
    """

    method: str
    H_hat: float
    nu2_hat: float
    lambda2_hat: float
    nuisance: dict
    objective: float
    converged: bool
    iterations: int
    weight_matrix: str
    lags: tuple
    hac_lag: Optional[int]

    def __post_init__(self):
        if self.lambda2_hat < 0.0:
            raise ValueError("lambda2_hat must be nonnegative")
        if self.objective < 0.0:
            raise ValueError("objective must be nonnegative")

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "H": self.H_hat,
            "nu2": self.nu2_hat,
            "lambda2": self.lambda2_hat,
            "nuisance": dict(self.nuisance),
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
            "weight_matrix": self.weight_matrix,
            "lags": list(self.lags),
            "hac_lag": self.hac_lag,
        }


def model_corr_lnM(theta, n: int) -> float:
    """Model log-measure correlogram K1 + dtilde(n) + V1 1{n=0} at integer lag n.

    theta = (H, nu2, K1, V1).  The n = 0 value uses the limit formula
    dtilde(0) = -nu2/((2H+1)(2H+2)); V1 absorbs the discontinuity between
    that limit and the empirical lag-0 point.
    """
    if n < 0:
        raise ValueError(f"lag must be nonnegative, got {n}")
    h, nu2, k1, v1 = (float(v) for v in theta)
    value = k1 + float(dtilde_profile(h, nu2, [n])[0])
    if n == 0:
        value += v1
    return value


def model_corr_M(theta, n: int) -> float:
    """Model raw-measure correlogram K2 * rtilde(n); theta = (H, nu2, K2)."""
    if n < 0:
        raise ValueError(f"lag must be nonnegative, got {n}")
    h, nu2, k2 = (float(v) for v in theta)
    return k2 * float(rtilde_profile(h, nu2, [n])[0])


def _model_vector(method: str, x: np.ndarray, lags: np.ndarray) -> np.ndarray:
    if method == GMM_LNM:
        vals = x[2] + dtilde_profile(x[0], x[1], lags)
        return vals + np.where(lags == 0, x[3], 0.0)
    return x[2] * rtilde_profile(x[0], x[1], lags)


def newey_west_weight(moment_contributions, hac_lag: int) -> np.ndarray:
    """Inverse long-run covariance of moment contributions, Bartlett weights.

    S = Gamma_0 + sum_{l=1..hac_lag} (1 - l/(hac_lag+1)) (Gamma_l + Gamma_l'),
    Gamma_l uncentered; returns pinv(S) with relative eigenvalue cutoff 1e-10.
    """
    u = np.asarray(moment_contributions, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[0] < 2:
        raise ValueError("need a (T, q) contribution array with T >= 2")
    if hac_lag < 0:
        raise ValueError(f"hac_lag must be nonnegative, got {hac_lag}")
    if not np.any(u):
        raise ValueError("moment contributions are identically zero")
    t = u.shape[0]
    s = u.T @ u / t
    for lag in range(1, min(hac_lag, t - 1) + 1):
        w = 1.0 - lag / (hac_lag + 1.0)
        g = u[lag:].T @ u[:-lag] / t
        s += w * (g + g.T)
    return np.linalg.pinv(s, rcond=1e-10, hermitian=True)


def _num_grad(fun, x: np.ndarray, bounds: list, f0: Optional[float] = None) -> np.ndarray:
    """Central differences, relative step 1e-6, one-sided at active bounds."""
    g = np.empty_like(x)
    for i in range(x.size):
        h = 1e-6 * max(abs(x[i]), 1e-2)
        lo, hi = bounds[i]
        up_ok = hi is None or x[i] + h <= hi
        dn_ok = lo is None or x[i] - h >= lo
        xp = x.copy()
        xm = x.copy()
        if up_ok and dn_ok:
            xp[i] += h
            xm[i] -= h
            g[i] = (fun(xp) - fun(xm)) / (2.0 * h)
        elif up_ok:
            if f0 is None:
                f0 = fun(x)
            xp[i] += h
            g[i] = (fun(xp) - f0) / h
        elif dn_ok:
            if f0 is None:
                f0 = fun(x)
            xm[i] -= h
            g[i] = (f0 - fun(xm)) / h
        else:
            g[i] = 0.0
    return g


def _clip_to_bounds(x: np.ndarray, bounds: list) -> np.ndarray:
    out = x.copy()
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None:
            out[i] = max(out[i], lo)
        if hi is not None:
            out[i] = min(out[i], hi)
    return out


def _nuisance_start(method: str, h: float, nu2: float, c_hat: np.ndarray,
                    lags: np.ndarray, c0: float) -> list:
    """Moment-matching starting values for the linear nuisance parameters.

    c0 is the empirical correlogram at lag 0 (available even when 0 is not in
    the moment set).
    """
    if method == GMM_LNM:
        d = dtilde_profile(h, nu2, lags)
        k1 = float(c_hat[-1] - d[-1])
        d0 = float(dtilde_profile(h, nu2, [0])[0])
        v1 = max(c0 - k1 - d0, 0.0)
        return [k1, v1]
    r0 = float(rtilde_profile(h, nu2, [0])[0])
    k2 = c0 / r0 if r0 > 0.0 and c0 > 0.0 else 1.0
    return [max(k2, 1e-12)]


def _starts(method: str, h0: float, nu2_0: float, restarts: int,
            c_hat: np.ndarray, lags: np.ndarray, c0: float,
            init_override: Optional[dict]) -> list:
    seeds = [
        (h0, nu2_0),
        (min(2.0 * h0 + 0.01, 0.45), 0.5 * nu2_0),
        (max(0.5 * h0, 0.005), 2.0 * nu2_0),
        (0.25, nu2_0),
    ][: restarts + 1]
    starts = []
    names = GmmSpec.param_names(method)
    for h, nu2 in seeds:
        x = [h, nu2] + _nuisance_start(method, h, nu2, c_hat, lags, c0)
        starts.append(np.asarray(x, dtype=float))
    if init_override:
        for key, val in init_override.items():
            if key not in names:
                raise ValueError(f"unknown init parameter {key!r}")
            starts[0][names.index(key)] = float(val)
    return starts


def _minimize_step(method: str, c_hat: np.ndarray, lags: np.ndarray,
                   weight: np.ndarray, starts: list, bounds: list,
                   max_iter: int) -> tuple:
    def objective(x):
        r = c_hat - _model_vector(method, x, lags)
        return float(r @ weight @ r)

    def gradient(x):
        return _num_grad(objective, x, bounds)

    best = None
    for x0 in starts:
        res = minimize(
            objective,
            _clip_to_bounds(x0, bounds),
            jac=gradient,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_iter, "ftol": 1e-14, "gtol": 1e-9},
        )
        cand = (float(res.fun), float(res.x[0]), res)
        if best is None:
            best = cand
        elif cand[0] < best[0] - _TIE_TOL:
            best = cand
        elif abs(cand[0] - best[0]) <= _TIE_TOL and cand[1] < best[1]:
            best = cand
    return best[2], best[0]


def _contributions(method: str, corr: Correlogram, series_values: np.ndarray,
                   x: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Per-time residual contributions over the common index range."""
    model = _model_vector(method, x, lags)
    if method == GMM_LNM:
        data = np.log(series_values) - corr.mean
    else:
        data = series_values
    max_lag = int(lags[-1])
    t_common = data.size - max_lag
    u = np.empty((t_common, lags.size))
    for k, lag in enumerate(lags):
        u[:, k] = data[:t_common] * data[lag : lag + t_common] - model[k]
    return u


def _result(method: str, spec_lags: tuple, hac_lag: Optional[int], res,
            objective: float, provenance: str) -> GmmFit:
    names = GmmSpec.param_names(method)
    x = res.x
    h, nu2 = float(x[0]), float(x[1])
    nuisance = {name: float(v) for name, v in zip(names[2:], x[2:])}
    return GmmFit(
        method=method,
        H_hat=h,
        nu2_hat=nu2,
        lambda2_hat=h * (1.0 - 2.0 * h) * nu2,
        nuisance=nuisance,
        objective=objective,
        converged=bool(res.success),
        iterations=int(res.nit),
        weight_matrix=provenance,
        lags=spec_lags,
        hac_lag=hac_lag,
    )


def fit_from_correlogram(corr: Correlogram, spec: GmmSpec,
                         series_values: Optional[np.ndarray] = None) -> GmmFit:
    """Deterministic core fit against an already-computed correlogram.

    With series_values supplied, weight_steps >= 2 re-weights by the
    Newey-West long-run covariance of the residual contributions; without
    them only the identity-weight step runs.
    """
    expected = "centered_lnM" if spec.method == GMM_LNM else "raw_M"
    if corr.kind != expected:
        raise ValueError(f"{spec.method} needs a {expected} correlogram, got {corr.kind}")
    lags = np.asarray(spec.lags, dtype=int)
    if lags[-1] > int(corr.lags[-1]):
        raise ValueError("correlogram does not cover the requested lags")
    c_hat = corr.values[lags]
    c0 = float(corr.values[0])

    init = dict(spec.init or {})
    h0 = float(init.pop("H", 0.1))
    nu2_0 = float(init.pop("nu2", 1.0))
    h0 = min(max(h0, 0.005), 0.45)
    nu2_0 = min(max(nu2_0, 1e-3), 1e4)
    bounds = spec.bound_list()
    starts = _starts(spec.method, h0, nu2_0, spec.restarts, c_hat, lags, c0, init)

    weight = np.eye(lags.size)
    provenance = "identity"
    res, objective = _minimize_step(
        spec.method, c_hat, lags, weight, starts, bounds, spec.max_iter
    )
    steps = spec.weight_steps if series_values is not None else 1
    hac_lag = spec.hac_lag
    for _ in range(1, steps):
        if hac_lag is None:
            hac_lag = int(math.floor(corr.count ** (1.0 / 3.0)))
        u = _contributions(spec.method, corr, series_values, res.x, lags)
        weight = newey_west_weight(u, hac_lag)
        provenance = f"newey_west(lag={hac_lag})"
        x1 = res.x.copy()
        restarts = [x1]
        for factor in (0.7, 1.3):
            h = min(max(x1[0] * factor, 0.005), 0.45)
            alt = [h, x1[1]] + _nuisance_start(spec.method, h, x1[1], c_hat, lags, c0)
            restarts.append(np.asarray(alt, dtype=float))
        res, objective = _minimize_step(
            spec.method, c_hat, lags, weight, restarts, bounds, spec.max_iter
        )
    return _result(spec.method, spec.lags, hac_lag, res, objective, provenance)


def fit(series: VolSeries, spec: GmmSpec) -> GmmFit:
    """Two-step moment fit of a volatility series.

    Step 1 minimizes the identity-weighted moment distance from a
    scaling-estimator initialization with deterministic restarts; step 2
    re-minimizes under the Newey-West weight computed at the step-1 optimum.
    """
    n = len(series)
    max_lag = int(max(spec.lags))
    if n < 2 * max_lag:
        raise ValueError(f"series of length {n} too short for max lag {max_lag}")

    if spec.method == GMM_LNM:
        corr = correlogram_lnM(series, max_lag)
        corr_ln = corr
    else:
        corr = correlogram_M(series, max_lag)
        corr_ln = correlogram_lnM(series, 1)

    # scaling-regression initialization for H, clipped into the interior
    taus = [series.delta * k for k in (1, 2, 4, 8, 16, 32) if k <= max(2, n // 4)]
    try:
        h0 = scaling_estimate_H(series, 2.0, taus).H_hat
    except ValueError:
        h0 = 0.1
    h0 = min(max(h0, 0.005), 0.45)

    # nu2 from the lag-1 drop of the centered log correlogram
    lnm0, lnm1 = float(corr_ln.values[0]), float(corr_ln.values[1])
    beta0 = 2.0 * h0 + 2.0
    c2 = (2.0 * h0 + 1.0) * (2.0 * h0 + 2.0)
    denom = 2.0**beta0 - 4.0
    nu2_0 = (lnm0 - lnm1) * 2.0 * c2 / denom if denom > 0.0 else 1.0
    if not (np.isfinite(nu2_0) and nu2_0 > 0.0):
        nu2_0 = 1.0

    init = {"H": h0, "nu2": nu2_0}
    init.update(spec.init or {})
    inner = GmmSpec(
        method=spec.method,
        lags=spec.lags,
        hac_lag=spec.hac_lag,
        bounds=spec.bounds,
        init=init,
        weight_steps=spec.weight_steps,
        restarts=spec.restarts,
        max_iter=spec.max_iter,
    )
    return fit_from_correlogram(corr, inner, series_values=np.asarray(series.values, dtype=float))
