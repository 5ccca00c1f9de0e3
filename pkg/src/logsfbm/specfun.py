"""Special functions backing the analytic kernels.

Only three things are needed: the lower incomplete gamma function
``gamma(a, z)`` with shape parameters as large as ``a = 1/(2H)`` (which grows
without bound as the roughness exponent H approaches 0), Kummer's confluent
hypergeometric function restricted to ``U(1, b, z)``, and the absolute moments
of a standard normal.  Everything is evaluated in log space internally so that
large-``a`` regimes neither overflow nor underflow before the final
exponentiation.

The incomplete gamma uses the classic split: a power series in ``z`` below
``z = a + 1`` and a continued fraction for the upper complement above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "SpecFunResult",
    "lower_incomplete_gamma",
    "lower_incomplete_gamma_detail",
    "log_lower_incomplete_gamma",
    "kummer_u_1",
    "gauss_abs_moment",
]

TERM_TOL = 1e-14          # stop series/continued fraction at this relative term size
MAX_ITER = 1_000_000
SUPPORTED_A_MAX = 1e4     # accuracy is only certified for a in (0, 1e4]
_TINY = 1e-300            # Lentz guard against zero denominators


@dataclass(frozen=True)
class SpecFunResult:
    """Value of a special function together with an accuracy estimate.

    ``achieved_rel_error`` is an internal convergence estimate, not a proven
    bound; ``accuracy_loss`` is set when the inputs fall outside the supported
    range or the value cannot be represented at full relative accuracy.
    """

    value: float
    achieved_rel_error: float
    accuracy_loss: bool = False


def _series_sum(a: float, z: float) -> tuple[float, float]:
    """Sum S = 1 + z/(a+1) + z^2/((a+1)(a+2)) + ...

    Converges for any z >= 0 but is used only for z < a + 1, where terms decay
    at least geometrically with ratio z/(a+1) < 1.  Returns (S, rel_error).
    """
    term = 1.0
    total = 1.0
    for k in range(1, MAX_ITER + 1):
        term *= z / (a + k)
        total += term
        if term < TERM_TOL * total:
            return total, max(term / total, 1e-15)
    return total, term / total


def _upper_cf(a: float, z: float) -> tuple[float, float]:
    """Continued fraction C with Gamma(a, z) = e^{-z} z^a * C, by modified Lentz.

    Valid and rapidly convergent for z >= a + 1.  Returns (C, rel_error).
    """
    b = z + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0.0 else 1.0 / _TINY
    h = d
    delta = 0.0
    for i in range(1, MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < TERM_TOL:
            return h, max(abs(delta - 1.0), 1e-15)
    return h, abs(delta - 1.0)


def log_lower_incomplete_gamma(a: float, z: float) -> tuple[float, float]:
    """Natural log of gamma(a, z) = int_0^z t^{a-1} e^{-t} dt.

    Returns (log_value, rel_error_of_value); log_value is -inf at z = 0.
    Working in log space keeps the result usable for shape parameters far
    beyond the point where gamma(a, z) itself leaves the double range.
    """
    if a <= 0.0:
        raise ValueError(f"shape parameter must be positive, got a={a}")
    if z < 0.0:
        raise ValueError(f"argument must be nonnegative, got z={z}")
    if z == 0.0:
        return -math.inf, 0.0
    if z < a + 1.0:
        s, err = _series_sum(a, z)
        return a * math.log(z) - z - math.log(a) + math.log(s), err
    cf, err = _upper_cf(a, z)
    # regularized upper tail Q = Gamma(a,z)/Gamma(a), guaranteed in (0, 1) here
    log_q = a * math.log(z) - z - math.lgamma(a) + math.log(cf)
    q = math.exp(log_q)
    if q >= 1.0:
        q = math.nextafter(1.0, 0.0)
    return math.lgamma(a) + math.log1p(-q), max(err, 1e-15)


def lower_incomplete_gamma_detail(a: float, z: float) -> SpecFunResult:
    """Lower incomplete gamma with accuracy diagnostics."""
    log_value, err = log_lower_incomplete_gamma(a, z)
    loss = not (0.0 < a <= SUPPORTED_A_MAX)
    if log_value == -math.inf:
        return SpecFunResult(0.0, 0.0, loss)
    try:
        value = math.exp(log_value)
    except OverflowError:
        value = math.inf
    if value == 0.0 or math.isinf(value):
        # true value falls outside the double range; only its log is reliable
        return SpecFunResult(value, 1.0, True)
    return SpecFunResult(value, max(err, 1e-15), loss or err > 1e-10)


def lower_incomplete_gamma(a: float, z: float) -> float:
    """Lower incomplete gamma function gamma(a, z)."""
    return lower_incomplete_gamma_detail(a, z).value


def kummer_u_1(b: float, z: float) -> float:
    """Kummer confluent hypergeometric function U(1, b, z) for b > 1, z > 0.

    With s = b - 1 this satisfies gamma(s, z) = s^{-1} z^s e^{-z} U(1, s+1, z),
    which is also how the z >= s + 1 regime is evaluated; below that the series
    U(1, s+1, z) = sum_k z^k / ((s+1)...(s+k)) applies directly.  U is O(1)
    for all supported inputs (it decays like 1/z for large z), so no log-space
    output is needed.
    """
    if b <= 1.0:
        raise ValueError(f"kummer_u_1 requires b > 1, got b={b}")
    if z <= 0.0:
        raise ValueError(f"kummer_u_1 requires z > 0, got z={z}")
    s = b - 1.0
    if z < s + 1.0:
        value, _ = _series_sum(s, z)
        return value
    log_g, _ = log_lower_incomplete_gamma(s, z)
    return math.exp(math.log(s) - s * math.log(z) + z + log_g)


def gauss_abs_moment(q: float) -> float:
    """E|N(0,1)|^q = 2^{q/2} Gamma((q+1)/2) / sqrt(pi) for q > 0."""
    if q <= 0.0:
        raise ValueError(f"moment order must be positive, got q={q}")
    return math.exp(0.5 * q * math.log(2.0) + math.lgamma(0.5 * (q + 1.0))) / math.sqrt(math.pi)
