"""Analytic kernels of the log S-fBM volatility family.

The model: a stationary Gaussian log volatility omega with covariance

    C_omega(tau) = (nu^2 / 2) (T^{2H} - |tau|^{2H})   for |tau| < T,  0 beyond,

and the random measure M(dt) = e^{omega(t)} dt built from it.  The roughness
exponent H ranges over [0, 1/2); H = 0 is the log-correlated multifractal
limit, reached at fixed intermittency lambda^2 = H(1 - 2H) nu^2.  This module
exposes the deterministic second-order functions of that family: the
covariance kernels of omega, of cell masses M and of ln M, the scale function
g_H of squared log-measure increments, the correlation shape F used by the
moment fitter, and the small-sample bias of the log-log scaling regression.

All functions are pure.  Second differences of x^{2H+2}-type terms are the
numerically delicate part (catastrophic cancellation for lags much larger
than the cell size); they are evaluated through an even binomial series, a
local expansion near the equal-scale point, or log-space composition with
expm1, never by naive subtraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import gauss_abs_moment, kummer_u_1, log_lower_incomplete_gamma

__all__ = [
    "ModelParams",
    "LagGrid",
    "cov_omega",
    "cov_omega_mrm",
    "g_H",
    "cov_lnM",
    "m_q",
    "F_of_z",
    "corr_M",
    "dtilde_lnM",
    "rtilde_M",
    "scaling_bias",
    "dtilde_profile",
    "rtilde_profile",
    "H_ZERO_THRESHOLD",
    "H_GAMMA_MIN",
]

# below this the H = 0 (multifractal) limit formulas are used
H_ZERO_THRESHOLD = 1e-10
# below this the incomplete-gamma shape a = 1/(2H) exceeds its supported range,
# so F-based kernels switch to the H = 0 analytic branch instead
H_GAMMA_MIN = 5e-5


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the log S-fBM volatility model.

    H        roughness exponent, 0 <= H < 1/2 (H = 0: multifractal limit)
    lambda2  intermittency coefficient lambda^2 > 0
    T        correlation length, in the same time unit as lags
    sigma2   unit-time mean variance E[M([0, 1])] > 0
    """

    H: float
    lambda2: float
    T: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.H < 0.5:
            raise ValueError(f"H must lie in [0, 0.5), got {self.H}")
        if not self.lambda2 > 0.0:
            raise ValueError(f"lambda2 must be positive, got {self.lambda2}")
        if not self.T > 0.0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def is_mrm(self) -> bool:
        """True when the parameters select the H = 0 multifractal limit."""
        return self.H < H_ZERO_THRESHOLD

    @property
    def nu2(self) -> float:
        """nu^2 = lambda^2 / (H(1 - 2H)); infinite in the H = 0 limit."""
        if self.is_mrm:
            return math.inf
        return self.lambda2 / (self.H * (1.0 - 2.0 * self.H))

    @property
    def k2(self) -> float:
        """nu^2 / 2, the coefficient of -|tau|^{2H} in C_omega."""
        return 0.5 * self.nu2

    @property
    def var_omega(self) -> float:
        """Stationary variance of the log volatility, C_omega(0) = (nu^2/2) T^{2H}."""
        if self.is_mrm:
            raise ValueError(
                "the H = 0 log volatility has no scale-free variance; it is set "
                "by the regularization scale ell at simulation time"
            )
        return self.k2 * self.T ** (2.0 * self.H)

    @property
    def log_mean(self) -> float:
        """Mean of the log volatility: ln(sigma2) - var_omega/2.

        Chosen so that E[e^omega] = sigma2 and hence E[M([0, delta])] =
        sigma2 * delta exactly.
        """
        return math.log(self.sigma2) - 0.5 * self.var_omega


@dataclass(frozen=True)
class LagGrid:
    """An ordered grid of nonnegative lags observed at cell size delta."""

    lags: tuple
    delta: float

    def __init__(self, lags, delta: float):
        lag_tuple = tuple(float(v) for v in lags)
        if not delta > 0.0:
            raise ValueError(f"delta must be positive, got {delta}")
        if any(v < 0.0 for v in lag_tuple):
            raise ValueError("lags must be nonnegative")
        if any(b <= a for a, b in zip(lag_tuple, lag_tuple[1:])):
            raise ValueError("lags must be strictly increasing")
        object.__setattr__(self, "lags", lag_tuple)
        object.__setattr__(self, "delta", float(delta))


def cov_omega(p: ModelParams, tau: float) -> float:
    """Covariance of the stationary log volatility at lag tau (H > 0).

    (nu^2/2)(T^{2H} - |tau|^{2H}) for |tau| < T, exactly 0 beyond the
    correlation length; even in tau and continuous at |tau| = T.
    """
    if p.is_mrm:
        raise ValueError("cov_omega requires H > 0; use cov_omega_mrm for the H = 0 limit")
    at = abs(tau)
    if at >= p.T:
        return 0.0
    two_h = 2.0 * p.H
    return p.k2 * (p.T**two_h - at**two_h)


def cov_omega_mrm(lambda2: float, T: float, ell: float, tau: float) -> float:
    """Covariance of the H = 0 log volatility regularized at scale ell.

    lambda^2 ln(T/tau) on ell <= tau <= T, the linear cap
    lambda^2 (ln(T/ell) + 1 - tau/ell) below ell, and 0 beyond T.
    """
    if ell <= 0.0:
        raise ValueError(f"regularization scale ell must be positive, got {ell}")
    if not ell < T:
        raise ValueError(f"need ell < T, got ell={ell}, T={T}")
    if lambda2 <= 0.0:
        raise ValueError(f"lambda2 must be positive, got {lambda2}")
    at = abs(tau)
    if at > T:
        return 0.0
    if at <= ell:
        return lambda2 * (math.log(T / ell) + 1.0 - at / ell)
    return lambda2 * math.log(T / at)


def _sdiff_ratio(beta: float, z: float) -> float:
    """((1+z)^beta + |1-z|^beta - 2) / z^2, stable for all z > 0.

    For z <= 1/2 uses the even-order binomial series (no cancellation, terms
    decay geometrically); inside |z-1| < 1e-6 a 4th-order local expansion plus
    the exact |1-z|^beta term; plain evaluation elsewhere.
    """
    if z <= 0.5:
        # 2 * [C(beta,2) + C(beta,4) z^2 + C(beta,6) z^4 + ...]
        coeff = beta * (beta - 1.0) / 2.0
        total = 2.0 * coeff
        z2 = z * z
        zpow = 1.0
        for j in range(2, 200):
            coeff *= (beta - (2 * j - 2)) * (beta - (2 * j - 1)) / ((2 * j - 1) * (2 * j))
            zpow *= z2
            term = 2.0 * coeff * zpow
            total += term
            if abs(term) <= 1e-17 * abs(total):
                break
        return total
    e = z - 1.0
    if abs(e) < 1e-6:
        two_b = 2.0**beta
        c1 = beta / 2.0
        c2 = beta * (beta - 1.0) / 8.0
        c3 = beta * (beta - 1.0) * (beta - 2.0) / 48.0
        c4 = beta * (beta - 1.0) * (beta - 2.0) * (beta - 3.0) / 384.0
        smooth = two_b * (1.0 + e * (c1 + e * (c2 + e * (c3 + e * c4)))) - 2.0
        rough = abs(e) ** beta if e != 0.0 else 0.0
        return (smooth + rough) / (z * z)
    return ((1.0 + z) ** beta + abs(1.0 - z) ** beta - 2.0) / (z * z)


def _g0(z: float) -> float:
    """H = 0 limit of g_H: ((1+z)^2 ln(1+z) + (1-z)^2 ln|1-z| - 2 z^2 ln z) / z^2."""
    if z < 0.5:
        # (1+z)^2 ln(1+z) + (1-z)^2 ln(1-z) = (1+z^2) ln(1-z^2) + 4 z atanh(z)
        core = (1.0 + z * z) * math.log1p(-z * z) + 4.0 * z * math.atanh(z)
        return core / (z * z) - 2.0 * math.log(z)
    e = z - 1.0
    rough = e * e * math.log(abs(e)) if abs(e) > 1e-12 else 0.0
    return ((1.0 + z) ** 2 * math.log1p(z) + rough - 2.0 * z * z * math.log(z)) / (z * z)


def g_H(H: float, z: float) -> float:
    """Scale function of squared log-measure increments at scale ratio z = delta/tau.

    For H > 0:
        (|1+z|^{2H+2} + |1-z|^{2H+2} - 2 z^{2H+2} - 2) /
            (z^2 H (1-2H) (2H+1) (2H+2)),
    with the logarithmic limit formula at H = 0.  Tends to 1/(H(1-2H)) as
    z -> 0 (approached slowly, at rate z^{2H}) and is continuous across z = 1.
    """
    if z <= 0.0:
        raise ValueError(f"z must be positive, got {z}")
    if not 0.0 <= H < 0.5:
        raise ValueError(f"H must lie in [0, 0.5), got {H}")
    if H < H_ZERO_THRESHOLD:
        return _g0(z)
    beta = 2.0 * H + 2.0
    num = _sdiff_ratio(beta, z) - 2.0 * z ** (2.0 * H)
    return num / (H * (1.0 - 2.0 * H) * (2.0 * H + 1.0) * (2.0 * H + 2.0))


def _xxlog_sdiff(tau: float, delta: float) -> float:
    """[f(tau+delta) + f(|tau-delta|) - 2 f(tau)] / delta^2 for f(x) = x^2 ln x.

    Used by the H = 0 branch of cov_lnM; f(0) ln 0 is taken as 0.
    """
    z = delta / tau
    if z < 0.5:
        core = (1.0 + z * z) * math.log1p(-z * z) + 4.0 * z * math.atanh(z)
        return 2.0 * math.log(tau) + core / (z * z)
    return 2.0 * math.log(tau) + _g0(z) + 2.0 * math.log(z)


def _cov_lnm_mrm(lambda2: float, T: float, delta: float, tau: float) -> float:
    """H = 0 limit of cov_lnM: lambda^2 [ln T + 3/2 - xxlog_sdiff/2]."""
    if tau == 0.0:
        return lambda2 * (math.log(T / delta) + 1.5)
    return lambda2 * (math.log(T) + 1.5 - 0.5 * _xxlog_sdiff(tau, delta))


def cov_lnM(p: ModelParams, delta: float, tau: float) -> float:
    """Covariance of ln cell masses at scale delta and lag tau (first order in lambda^2).

    nu^2/2 * ( T^{2H} - [(tau+d)^{2H+2} + |tau-d|^{2H+2} - 2 tau^{2H+2}]
               / (d^2 (2H+1)(2H+2)) ),
    equal to the double average of C_omega over two cells of length delta at
    distance tau; the H = 0 branch is the logarithmic limit.  Only defined up
    to tau + delta <= T (beyond that the truncated kernel enters the averaging
    window and the closed form no longer applies).
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if tau < 0.0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    if tau + delta > p.T:
        raise ValueError(f"cov_lnM requires tau + delta <= T, got tau={tau}, delta={delta}, T={p.T}")
    if p.is_mrm:
        return _cov_lnm_mrm(p.lambda2, p.T, delta, tau)
    two_h = 2.0 * p.H
    beta = two_h + 2.0
    c2 = (two_h + 1.0) * (two_h + 2.0)
    if tau == 0.0:
        bracket = 2.0 * delta**two_h
    else:
        z = delta / tau
        bracket = tau**two_h * _sdiff_ratio(beta, z)
    return p.k2 * (p.T**two_h - bracket / c2)


def m_q(p: ModelParams, q: float, tau: float, delta: float) -> float:
    """Analytic moment E|ln M(t+tau) - ln M(t)|^q, first order in lambda^2.

    2^{q/2} Gamma((q+1)/2) / sqrt(pi) * lambda^q tau^{qH} g_H(delta/tau)^{q/2}.
    """
    if q <= 0.0:
        raise ValueError(f"q must be positive, got {q}")
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    lam_q = p.lambda2 ** (0.5 * q)
    return gauss_abs_moment(q) * lam_q * tau ** (q * p.H) * g_H(p.H, delta / tau) ** (0.5 * q)


def _log_f_gamma(H: float, k2: float, z: float) -> float:
    """ln F(|z|) for H > 0 via the incomplete-gamma form.

    F(z) = z k2^{-a} gamma(a, x) - k2^{-2a} gamma(2a, x),  a = 1/(2H),
    x = k2 |z|^{2H}.  Series regime (x < a + 1): the equivalent Kummer form
    U(1,1+a,x) - U(1,1+2a,x)/2 keeps every factor O(1) for arbitrarily large
    a.  Continued-fraction regime: log-space composition of the two terms.
    """
    az = abs(z)
    if az == 0.0:
        return -math.inf
    a = 0.5 / H
    x = k2 * az ** (2.0 * H)
    if x < a + 1.0:
        u1 = kummer_u_1(a + 1.0, x)
        u2 = kummer_u_1(2.0 * a + 1.0, x)
        return 2.0 * math.log(az) - x + math.log(2.0 * H) + math.log(u1 - 0.5 * u2)
    lg1, _ = log_lower_incomplete_gamma(a, x)
    lg2, _ = log_lower_incomplete_gamma(2.0 * a, x)
    la = math.log(az) - a * math.log(k2) + lg1
    lb = -2.0 * a * math.log(k2) + lg2
    return la + math.log1p(-math.exp(lb - la))


def _log_f_mrm(lambda2: float, z: float) -> float:
    """ln F(|z|) in the H = 0 limit: F(z) = |z|^{2-lambda^2} / ((2-lambda^2)(1-lambda^2))."""
    if lambda2 >= 1.0:
        raise ValueError(f"the H = 0 correlation shape requires lambda2 < 1, got {lambda2}")
    az = abs(z)
    if az == 0.0:
        return -math.inf
    return (2.0 - lambda2) * math.log(az) - math.log((2.0 - lambda2) * (1.0 - lambda2))


def _log_f(H: float, lambda2: float, z: float) -> float:
    """ln F(|z|), dispatching on the roughness regime.

    Below H_GAMMA_MIN the gamma shape a = 1/(2H) leaves its supported range,
    so the H = 0 analytic branch takes over (with the actual lambda^2).
    """
    if H < H_GAMMA_MIN:
        return _log_f_mrm(lambda2, z)
    k2 = 0.5 * lambda2 / (H * (1.0 - 2.0 * H))
    return _log_f_gamma(H, k2, z)


def F_of_z(p: ModelParams, z: float) -> float:
    """Correlation shape F at (possibly negative) argument z; F(z) = F(|z|), F(0) = 0.

    Normalized so that corr_M(delta, tau) = K1 (F(tau+delta) + F(tau-delta)
    - 2 F(tau)) with K1 = sigma2^2 e^{(nu^2/2) T^{2H}} / (2H) for H > 0 and
    K1 = sigma2^2 T^{lambda^2} at H = 0.  F itself carries no T dependence;
    it is monotone increasing in |z|.
    """
    lf = _log_f(p.H, p.lambda2, z)
    if lf == -math.inf:
        return 0.0
    return math.exp(lf)


def _f_second_diff(H: float, lambda2: float, delta: float, tau: float) -> tuple[float, float]:
    """F(tau+delta) + F(|tau-delta|) - 2 F(tau) as (log_scale, factor).

    The value equals exp(log_scale) * factor; callers fold constants such as
    ln K1 into log_scale before exponentiating.  expm1 keeps the cancellation
    of the second difference under control for tau >> delta.
    """
    lp = _log_f(H, lambda2, tau + delta)
    lm = _log_f(H, lambda2, abs(tau - delta))
    if tau == 0.0:
        return lp, 2.0
    l0 = _log_f(H, lambda2, tau)
    if tau >= delta:
        return l0, math.expm1(lp - l0) + math.expm1(lm - l0)
    # tau < delta: no near-cancellation, factor out the largest term
    term_m = math.exp(lm - lp) if lm != -math.inf else 0.0
    return lp, 1.0 + term_m - 2.0 * math.exp(l0 - lp)


def _log_k1(p: ModelParams) -> float:
    """ln K1, the normalization multiplying second differences of F in corr_M."""
    if p.H < H_GAMMA_MIN:
        return 2.0 * math.log(p.sigma2) + p.lambda2 * math.log(p.T)
    return 2.0 * math.log(p.sigma2) + p.var_omega - math.log(2.0 * p.H)


def corr_M(p: ModelParams, delta: float, tau: float) -> float:
    """Second moment E[M(t, t+delta) M(t+tau, t+tau+delta)] of cell masses.

    K1 (F(tau+delta) + F(tau-delta) - 2 F(tau)) for |tau| <= T, and the
    independence value sigma2^2 delta^2 beyond the correlation length.
    Symmetric in tau and continuous at tau = delta (F(0) = 0).
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    at = abs(tau)
    if at > p.T:
        return p.sigma2**2 * delta**2
    log_scale, factor = _f_second_diff(p.H, p.lambda2, delta, at)
    return math.exp(_log_k1(p) + log_scale) * factor


def _dtilde(H: float, nu2: float, n: float) -> float:
    """-nu^2 (|n+1|^{2H+2} + |n-1|^{2H+2} - 2 n^{2H+2}) / (2 (2H+1)(2H+2)).

    Defined for any H in [0, 1/2) and n >= 0; at n = 0 the bracket is exactly
    2, giving -nu^2 / ((2H+1)(2H+2)).
    """
    beta = 2.0 * H + 2.0
    c2 = (2.0 * H + 1.0) * (2.0 * H + 2.0)
    if n == 0:
        return -nu2 / c2
    bracket = n ** (2.0 * H) * _sdiff_ratio(beta, 1.0 / n)
    return -nu2 * bracket / (2.0 * c2)


def dtilde_lnM(p: ModelParams, n: int) -> float:
    """Model log-measure covariance decay at integer lag n >= 1 (unit cell size).

    Negative and shrinking in magnitude as n grows.  Note the exact identity
    cov_lnM(1, n) - cov_lnM(1, 0) = dtilde_lnM(n) - dtilde(0) where dtilde(0)
    = -nu^2/((2H+1)(2H+2)) is the n = 0 formula value: the T-dependent terms
    cancel in the difference, but the constant dtilde(0) does not.
    """
    if n < 1:
        raise ValueError(f"dtilde_lnM requires n >= 1, got {n}")
    if p.is_mrm:
        raise ValueError(
            "dtilde_lnM requires H > 0 (nu^2 is infinite at H = 0); "
            "the moment fitter handles the H = 0 limit in its lambda^2 form"
        )
    return _dtilde(p.H, p.nu2, float(n))


def rtilde_M(p: ModelParams, n: int) -> float:
    """Normalized measure-correlation shape F(n+1) + F(n-1) - 2 F(n) at integer lags.

    n >= 0; the even extension gives rtilde_M(0) = 2 F(1).  Positive and,
    like F, free of T; multiplied by a free constant it models measure
    correlograms at unit cell size.
    """
    if n < 0:
        raise ValueError(f"rtilde_M requires n >= 0, got {n}")
    log_scale, factor = _f_second_diff(p.H, p.lambda2, 1.0, float(n))
    return math.exp(log_scale) * factor


def dtilde_profile(H: float, nu2: float, lags) -> np.ndarray:
    """dtilde values over an array of integer lags >= 0 (n = 0 formula value included).

    Low-level vector form used by the moment fitter; analytic in H on
    [0, 1/2) with nu^2 as a free coefficient.
    """
    return np.array([_dtilde(H, nu2, float(n)) for n in np.asarray(lags).ravel()])


def rtilde_profile(H: float, nu2: float, lags) -> np.ndarray:
    """rtilde values over an array of integer lags >= 0, parameterized by (H, nu^2)."""
    lambda2 = max(H * (1.0 - 2.0 * H) * nu2, 1e-300)
    out = []
    for n in np.asarray(lags).ravel():
        log_scale, factor = _f_second_diff(H, lambda2, 1.0, float(n))
        out.append(math.exp(log_scale) * factor)
    return np.array(out)


def scaling_bias(H: float, delta: float, tau_range) -> tuple[float, float]:
    """OLS fit of ln g_H(delta/tau) on ln(tau/delta) over a lag grid.

    Returns (B_H, intercept).  The log-log scaling regression of q-th moments
    inherits the slope bias B_H: its H estimate approaches H + B_H/2.
    """
    taus = np.asarray(tau_range, dtype=float)
    if taus.size < 2:
        raise ValueError(f"tau_range needs at least 2 points, got {taus.size}")
    if taus.min() <= delta:
        raise ValueError("tau_range must lie strictly above delta")
    x = np.log(taus / delta)
    y = np.array([math.log(g_H(H, delta / t)) for t in taus])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)
