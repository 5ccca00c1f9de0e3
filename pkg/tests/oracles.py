"""Independent numerical references for the test suite.

Everything here re-derives model quantities from their defining integrals or
from scipy special functions, without calling into the package. Covariances
come from adaptive quadrature, F from scipy's incomplete gamma / Kummer U,
synthetic processes from a self-contained spectral sampler. The point is
redundancy: a bug in the library cannot leak into its own reference values.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special
from scipy.signal import lfilter

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-11, limit=200)


# ------------------------------------------------------- log-vol covariance

def omega_kernel(H: float, lambda2: float, T: float, w: float) -> float:
    """Pointwise truncated power-law covariance of the log volatility.

    (nu^2/2)(T^{2H} - |w|^{2H}) inside the correlation length, 0 beyond; the
    H = 0 variant is the logarithmic kernel lambda^2 ln(T/|w|).
    """
    aw = abs(w)
    if aw >= T:
        return 0.0
    if H == 0.0:
        if aw == 0.0:
            return math.inf
        return lambda2 * math.log(T / aw)
    nu2 = lambda2 / (H * (1.0 - 2.0 * H))
    return 0.5 * nu2 * (T ** (2.0 * H) - aw ** (2.0 * H))


def cov_omega_cone(lambda2: float, H: float, T: float, tau: float) -> float:
    """Log-vol covariance via the cone-overlap area construction.

    Two cones of height T whose apexes sit tau apart share, at height h, a
    horizontal segment of length (h - tau)^+ capped at (T - tau); integrating
    that overlap against the intensity lambda^2 h^{2H-2} dh gives

        lambda^2 [ int_tau^T h^{2H-2}(h - tau) dh
                   + (T - tau) int_T^inf h^{2H-2} dh ].

    The tail integral is T^{2H-1}/(1-2H) in closed form; the finite part is
    integrated adaptively. Valid for 0 < tau < T.
    """
    tau = abs(tau)
    if tau >= T:
        return 0.0
    if tau == 0.0:
        raise ValueError("use the closed-form variance at tau = 0")
    val, _ = integrate.quad(
        lambda h: h ** (2.0 * H - 2.0) * (h - tau), tau, T, **_QUAD_OPTS
    )
    tail = (T - tau) * T ** (2.0 * H - 1.0) / (1.0 - 2.0 * H)
    return lambda2 * (val + tail)


# ------------------------------------- double averages over a pair of cells

def _cell_pair_integral(f, delta: float, tau: float, T: float) -> float:
    """integral over [0, delta]^2 of f(tau + u - v), by nested quadrature.

    f is assumed smooth except for kinks where its argument crosses 0 or
    +-T; those locations are handed to the integrator as breakpoints, both
    for the inner v-integral and (where a breakpoint enters or leaves the
    square) for the outer u-integral.
    """
    crossings = (0.0, T, -T)

    def inner(u):
        pts = []
        for w0 in crossings:
            v = tau + u - w0
            if 0.0 < v < delta:
                pts.append(v)
        val, _ = integrate.quad(
            lambda v: f(tau + u - v), 0.0, delta,
            points=sorted(pts) if pts else None, **_QUAD_OPTS
        )
        return val

    outer_pts = []
    for w0 in crossings:
        for u in (w0 - tau, w0 - tau + delta):
            if 0.0 < u < delta:
                outer_pts.append(u)
    val, _ = integrate.quad(
        inner, 0.0, delta,
        points=sorted(outer_pts) if outer_pts else None, **_QUAD_OPTS
    )
    return val


def corr_M_quad(H: float, lambda2: float, T: float, sigma2: float,
                delta: float, tau: float) -> float:
    """E[M(t, delta) M(t+tau, delta)] by 2-d quadrature of the lognormal moment.

    For jointly Gaussian omega with E e^omega = sigma2 per unit time,
    E[e^{omega(s)} e^{omega(s')}] = sigma2^2 e^{C(s - s')}, so the cell-mass
    product moment is sigma2^2 times the double integral of e^C over the two
    cells.
    """
    f = lambda w: math.exp(omega_kernel(H, lambda2, T, w))
    return sigma2 ** 2 * _cell_pair_integral(f, delta, tau, T)


def cov_lnM_quad(H: float, lambda2: float, T: float, delta: float,
                 tau: float) -> float:
    """Gaussian-order covariance of ln cell masses: the double average of C.

    (1/delta^2) times the integral of the log-vol covariance over two cells
    at distance tau, the defining first-order expression behind the closed
    form under test.
    """
    f = lambda w: omega_kernel(H, lambda2, T, w)
    return _cell_pair_integral(f, delta, tau, T) / delta ** 2


# --------------------------------------------- F via scipy special functions

def f_gamma_ref(H: float, lambda2: float, z: float) -> float:
    """Incomplete-gamma form of the correlation shape F, via scipy.

    F(z) = z k2^{-a} gamma(a, x) - k2^{-2a} gamma(2a, x) with a = 1/(2H) and
    x = k2 |z|^{2H}.
    """
    az = abs(z)
    if az == 0.0:
        return 0.0
    a = 0.5 / H
    k2 = 0.5 * lambda2 / (H * (1.0 - 2.0 * H))
    x = k2 * az ** (2.0 * H)
    g1 = special.gammainc(a, x) * special.gamma(a)
    g2 = special.gammainc(2.0 * a, x) * special.gamma(2.0 * a)
    return az * k2 ** (-a) * g1 - k2 ** (-2.0 * a) * g2


def f_kummer_ref(H: float, lambda2: float, z: float) -> float:
    """Kummer form of F: 2H z^2 e^{-x} (M(1, 1+a, x) - M(1, 1+2a, x)/2).

    Equivalent to the incomplete-gamma form through
    gamma(s, x) = s^{-1} x^s e^{-x} M(1, s+1, x), M being Kummer's confluent
    hypergeometric function (the one with the 1 + z/b large-b asymptote);
    evaluated with scipy.special.hyp1f1 so it shares no code with the
    package.
    """
    az = abs(z)
    if az == 0.0:
        return 0.0
    a = 0.5 / H
    k2 = 0.5 * lambda2 / (H * (1.0 - 2.0 * H))
    x = k2 * az ** (2.0 * H)
    u1 = special.hyp1f1(1.0, 1.0 + a, x)
    u2 = special.hyp1f1(1.0, 1.0 + 2.0 * a, x)
    return 2.0 * H * az * az * math.exp(-x) * (u1 - 0.5 * u2)


def lower_gamma_quad(a: float, z: float) -> float:
    """gamma(a, z) by adaptive quadrature of t^{a-1} e^{-t} on [0, z]."""
    if z == 0.0:
        return 0.0
    val, _ = integrate.quad(lambda t: t ** (a - 1.0) * math.exp(-t), 0.0, z,
                            **_QUAD_OPTS)
    return val


# ---------------------------------------------- limiting correlogram profile

def limit_profile_diff(H: float, nu2: float, n: int, big_l: float = 4096.0) -> float:
    """C(n) - C(0) for the limiting log-measure fluctuation covariance.

    C(k) = (nu^2/2) [ L^{2H} / ((1+2H)(1+H))
                      - (|k+1|^{b} + |k-1|^{b} - 2|k|^{b}) / ((2H+1)(2H+2)) ],
    b = 2H + 2. The L term drops out of the difference, which is what the
    decay functions under test model.
    """
    beta = 2.0 * H + 2.0
    c2 = (2.0 * H + 1.0) * (2.0 * H + 2.0)

    def c_of(k: float) -> float:
        bracket = abs(k + 1) ** beta + abs(k - 1) ** beta - 2.0 * abs(k) ** beta
        return 0.5 * nu2 * (big_l ** (2.0 * H) / ((1.0 + 2.0 * H) * (1.0 + H))
                            - bracket / c2)

    return c_of(float(n)) - c_of(0.0)


# ----------------------------------------------------- synthetic processes

def ar1_path(rho: float, n: int, seed: int, sigma_e: float = 1.0) -> np.ndarray:
    """Stationary AR(1) sample path, burn-in discarded."""
    rng = np.random.default_rng(seed)
    burn = 500
    e = rng.standard_normal(n + burn) * sigma_e
    x = lfilter([1.0], [1.0, -rho], e)
    return x[burn:]


def ar1_long_run_variance(rho: float, sigma_e: float = 1.0) -> float:
    """Analytic long-run variance sigma_e^2 / (1 - rho)^2."""
    return sigma_e ** 2 / (1.0 - rho) ** 2


def fgn(H: float, n: int, seed: int) -> np.ndarray:
    """Fractional Gaussian noise with unit-variance steps, spectral sampling.

    Autocovariance gamma(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2; the
    circulant embedding of this sequence is nonnegative definite for every
    H in (0, 1), so no clamping is needed.
    """
    m = 1 << max(int(n - 1).bit_length(), 1)
    k = np.arange(m + 1, dtype=float)
    two_h = 2.0 * H
    gamma = 0.5 * ((k + 1) ** two_h - 2.0 * k ** two_h + np.abs(k - 1) ** two_h)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eigs = np.fft.fft(row).real
    eigs = np.maximum(eigs, 0.0)  # strip float dust only
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, eigs.size))
    spectrum = (z[0] + 1j * z[1]) * np.sqrt(eigs / eigs.size)
    return np.fft.fft(spectrum).real[:n]


def fbm(H: float, n: int, seed: int) -> np.ndarray:
    """Fractional Brownian path on 0..n: Var[X(t+k) - X(t)] = k^{2H} exactly."""
    return np.concatenate([[0.0], np.cumsum(fgn(H, n, seed))])


# ------------------------------------------------------------ small helpers

def mc_se(a) -> float:
    """Standard error of the mean of a sample."""
    a = np.asarray(a, dtype=float)
    return float(a.std(ddof=1) / math.sqrt(a.size))


def gamma_mean_abs_dev(k: float) -> float:
    """E|X - 1| for X ~ Gamma(shape k, scale 1/k): 2 k^{k-1} e^{-k} / Gamma(k).

    This is the exact mean absolute error of a chi-square realized-variance
    ratio with 2k degrees of freedom around its mean.
    """
    return 2.0 * math.exp((k - 1.0) * math.log(k) - k - math.lgamma(k))
