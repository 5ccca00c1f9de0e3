"""Exact simulation of the log S-fBM volatility and its derived series.

The stationary Gaussian log volatility is sampled by circulant embedding of
its covariance on the fine grid.  Because the covariance vanishes identically
beyond the correlation length T, padding the embedding circle so that its
half-length reaches T makes the circulant row an exact periodization of a
positive-semidefinite compactly supported function — its eigenvalues are then
nonnegative up to float roundoff.  The sampler therefore starts from the
smallest power-of-two embedding and doubles the circle until the eigenvalues
pass the admissibility rule, never exceeding that guaranteed size.

Cell masses are left-point Riemann sums of e^omega over each coarse cell; the
price path is the time-changed Brownian motion, drawn as independent normals
scaled by the local variance density e^omega, and its per-cell sum of squared
increments is the realized-variance proxy for the cell mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericalError
from .kernels import ModelParams, cov_omega_mrm

__all__ = [
    "SimConfig",
    "VolSeries",
    "PricePath",
    "SimResult",
    "sample_omega",
    "sample_omega_mrm",
    "build_measure",
    "build_price_and_rv",
    "generate",
]

MAX_FINE_POINTS = 1 << 24          # memory guard for a single path
_CHOLESKY_MAX = 4096               # largest grid for the dense fallback
_EIG_CLAMP_REL = 1e-8              # negatives within this of the max are zeroed
_EIG_CACHE: dict = {}              # (key) -> (eigenvalues, circle size)
_EIG_CACHE_SLOTS = 4


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one simulated path.

    L            observation length, in the same time unit as delta and T
    delta        coarse cell size; L/delta must be an integer >= 2
    subdivisions fine sub-steps per cell (left-point Riemann rule)
    seed         64-bit base seed; omega and price noise use independent
                 child streams spawned from it
    emit_price   draw the price path and realized-variance proxy as well
    ell          regularization scale for the H = 0 limit; defaults to the
                 fine step
    """

    params: ModelParams
    L: float
    delta: float = 1.0
    subdivisions: int = 32
    seed: int = 0
    emit_price: bool = False
    ell: Optional[float] = None

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        ratio = self.L / self.delta
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 2:
            raise ValueError(f"L/delta must be an integer >= 2, got L={self.L}, delta={self.delta}")
        if self.subdivisions < 1:
            raise ValueError(f"subdivisions must be >= 1, got {self.subdivisions}")
        if self.n_fine > MAX_FINE_POINTS:
            raise ValueError(
                f"fine grid of {self.n_fine} points exceeds the {MAX_FINE_POINTS} budget"
            )
        if self.ell is not None and self.ell <= 0.0:
            raise ValueError(f"ell must be positive, got {self.ell}")

    @property
    def n_cells(self) -> int:
        return int(round(self.L / self.delta))

    @property
    def fine_dt(self) -> float:
        return self.delta / self.subdivisions

    @property
    def n_fine(self) -> int:
        return self.n_cells * self.subdivisions


@dataclass(frozen=True)
class VolSeries:
    """Equally spaced positive integrated-variance observations at scale delta."""

    delta: float
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("VolSeries needs a 1-d array of length >= 2")
        if not np.all(values > 0.0):
            raise ValueError("VolSeries values must be strictly positive")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class PricePath:
    """Fine-grid log-price increments of the time-changed Brownian motion."""

    fine_dt: float
    log_returns: np.ndarray


@dataclass(frozen=True)
class SimResult:
    measure: VolSeries
    price: Optional[PricePath] = None
    rv_proxy: Optional[VolSeries] = None


def _cov_vector(cfg: SimConfig, m: int) -> np.ndarray:
    """Covariance of omega at fine-grid lags 0..m, vectorized."""
    p = cfg.params
    taus = np.arange(m + 1) * cfg.fine_dt
    if p.is_mrm:
        ell = cfg.ell if cfg.ell is not None else cfg.fine_dt
        return _cov_mrm_vector(p.lambda2, p.T, ell, taus)
    two_h = 2.0 * p.H
    c = p.k2 * (p.T**two_h - taus**two_h)
    c[taus >= p.T] = 0.0
    return c


def _cov_mrm_vector(lambda2: float, T: float, ell: float, taus: np.ndarray) -> np.ndarray:
    cov_omega_mrm(lambda2, T, ell, 0.0)  # validate arguments once
    taus = np.abs(taus)
    c = np.where(
        taus <= ell,
        lambda2 * (math.log(T / ell) + 1.0 - taus / ell),
        lambda2 * np.log(np.maximum(T / np.maximum(taus, 1e-300), 1.0)),
    )
    c[taus > T] = 0.0
    return c


def _eig_key(cfg: SimConfig) -> tuple:
    p = cfg.params
    ell = cfg.ell if cfg.ell is not None else cfg.fine_dt
    return (p.H, p.lambda2, p.T, cfg.fine_dt, cfg.n_fine, ell if p.is_mrm else None)


def _circulant_eigenvalues(cfg: SimConfig) -> tuple[np.ndarray, int]:
    """Eigenvalues of an admissible circulant embedding, with escalation.

    Returns (eigenvalues of the 2m-circle, m).  Raises NumericalError naming
    the most negative eigenvalue if even the guaranteed padding fails (only
    reachable through float pathologies).
    """
    key = _eig_key(cfg)
    hit = _EIG_CACHE.get(key)
    if hit is not None:
        return hit
    m = 1 << max(int(cfg.n_fine - 1).bit_length(), 1)
    m_guarantee = max(m, 1 << int(math.ceil(cfg.params.T / cfg.fine_dt) - 1).bit_length())
    worst = math.inf
    while True:
        c = _cov_vector(cfg, m)
        row = np.concatenate([c, c[-2:0:-1]])
        eigs = np.fft.fft(row).real
        mn = float(eigs.min())
        mx = float(eigs.max())
        if mn >= -_EIG_CLAMP_REL * mx:
            eigs = np.maximum(eigs, 0.0)
            if len(_EIG_CACHE) >= _EIG_CACHE_SLOTS:
                _EIG_CACHE.pop(next(iter(_EIG_CACHE)))
            _EIG_CACHE[key] = (eigs, m)
            return eigs, m
        worst = min(worst, mn)
        if m >= m_guarantee:
            raise NumericalError(
                f"circulant embedding failed at guaranteed padding m={m}: "
                f"most negative eigenvalue {worst:.6e} (max {mx:.6e})"
            )
        m = min(2 * m, m_guarantee)
        m = 1 << int(m - 1).bit_length()


def _draw_stationary(eigs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """One zero-mean stationary Gaussian sample of length n from circle eigenvalues."""
    n2 = eigs.size
    z = rng.standard_normal((2, n2))
    spectrum = (z[0] + 1j * z[1]) * np.sqrt(eigs / n2)
    return np.fft.fft(spectrum).real[:n]


def _cholesky_path(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Dense fallback for small grids: Cholesky with tiny diagonal jitter."""
    n = cfg.n_fine
    c = _cov_vector(cfg, n - 1)
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    cov = c[idx] + 1e-12 * np.eye(n)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance matrix is not positive definite: {exc}") from exc
    return chol @ rng.standard_normal(n)


def _omega_rng(cfg: SimConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[0])


def _price_rng(cfg: SimConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[1])


def sample_omega(cfg: SimConfig) -> np.ndarray:
    """Sample the stationary log volatility on the fine grid (H > 0).

    Exact in distribution: mean ln(sigma2) - C_omega(0)/2 and covariance
    C_omega at all fine-grid lags.  Deterministic in cfg.seed.
    """
    p = cfg.params
    if p.is_mrm:
        raise ValueError("sample_omega requires H > 0; use sample_omega_mrm for the H = 0 limit")
    rng = _omega_rng(cfg)
    if cfg.n_fine <= _CHOLESKY_MAX:
        try:
            eigs, _ = _circulant_eigenvalues(cfg)
            path = _draw_stationary(eigs, cfg.n_fine, rng)
        except NumericalError:
            path = _cholesky_path(cfg, rng)
    else:
        eigs, _ = _circulant_eigenvalues(cfg)
        path = _draw_stationary(eigs, cfg.n_fine, rng)
    return path + p.log_mean


def sample_omega_mrm(lambda2: float, T: float, ell: float, grid: tuple,
                     seed: int = 0, sigma2: float = 1.0) -> np.ndarray:
    """Sample the H = 0 (multifractal) log volatility on a uniform grid.

    grid is (n_points, dt); ell is the regularization scale, normally set to
    dt.  The mean is ln(sigma2) - Var/2 with Var = lambda^2 (ln(T/ell) + 1),
    so each cell of e^omega has unit expected density times sigma2.
    """
    n_points, dt = int(grid[0]), float(grid[1])
    if n_points < 1:
        raise ValueError(f"grid needs at least one point, got {n_points}")
    var = cov_omega_mrm(lambda2, T, ell, 0.0)
    # reuse the embedding machinery through a minimal H = 0 configuration
    cells = max(n_points, 2)
    cfg = SimConfig(
        params=ModelParams(H=0.0, lambda2=lambda2, T=T, sigma2=sigma2),
        L=float(cells) * dt,
        delta=dt,
        subdivisions=1,
        seed=seed,
        ell=ell,
    )
    rng = _omega_rng(cfg)
    if cfg.n_fine <= _CHOLESKY_MAX:
        try:
            eigs, _ = _circulant_eigenvalues(cfg)
            path = _draw_stationary(eigs, cfg.n_fine, rng)
        except NumericalError:
            path = _cholesky_path(cfg, rng)
    else:
        eigs, _ = _circulant_eigenvalues(cfg)
        path = _draw_stationary(eigs, cfg.n_fine, rng)
    return path[:n_points] + (math.log(sigma2) - 0.5 * var)


def _omega_for(cfg: SimConfig) -> np.ndarray:
    """Dispatch on the roughness regime, preserving cfg's seed contract."""
    if cfg.params.is_mrm:
        ell = cfg.ell if cfg.ell is not None else cfg.fine_dt
        return sample_omega_mrm(
            cfg.params.lambda2, cfg.params.T, ell, (cfg.n_fine, cfg.fine_dt),
            seed=cfg.seed, sigma2=cfg.params.sigma2,
        )
    return sample_omega(cfg)


def build_measure(omega_path: np.ndarray, cfg: SimConfig) -> VolSeries:
    """Cell masses: left-point Riemann sums of e^omega times the fine step.

    E[cell mass] = sigma2 * delta by the log-mean convention.
    """
    omega_path = np.asarray(omega_path, dtype=float)
    if omega_path.size % cfg.subdivisions != 0:
        raise ValueError(
            f"path length {omega_path.size} is not divisible by subdivisions={cfg.subdivisions}"
        )
    cells = np.exp(omega_path).reshape(-1, cfg.subdivisions).sum(axis=1) * cfg.fine_dt
    meta = {"kind": "simulated_measure", "seed": cfg.seed, "params": _params_meta(cfg)}
    return VolSeries(delta=cfg.delta, values=cells, meta=meta)


def build_price_and_rv(omega_path: np.ndarray, cfg: SimConfig) -> tuple[PricePath, VolSeries]:
    """Time-changed Brownian price increments and the realized-variance proxy.

    Each fine increment is sqrt(e^{omega(s_i)} dt) xi_i with xi i.i.d. standard
    normal, independent of omega; summing squared increments over a coarse
    cell gives the proxy for that cell's mass.
    """
    if not cfg.emit_price:
        raise ValueError("build_price_and_rv requires emit_price=True")
    omega_path = np.asarray(omega_path, dtype=float)
    if omega_path.size % cfg.subdivisions != 0:
        raise ValueError(
            f"path length {omega_path.size} is not divisible by subdivisions={cfg.subdivisions}"
        )
    rng = _price_rng(cfg)
    xi = rng.standard_normal(omega_path.size)
    increments = np.sqrt(np.exp(omega_path) * cfg.fine_dt) * xi
    rv = (increments**2).reshape(-1, cfg.subdivisions).sum(axis=1)
    meta = {"kind": "rv_proxy", "seed": cfg.seed, "params": _params_meta(cfg)}
    return PricePath(cfg.fine_dt, increments), VolSeries(cfg.delta, rv, meta)


def _params_meta(cfg: SimConfig) -> dict:
    p = cfg.params
    return {
        "H": p.H, "lambda2": p.lambda2, "T": p.T, "sigma2": p.sigma2,
        "L": cfg.L, "delta": cfg.delta, "subdivisions": cfg.subdivisions,
    }


def generate(cfg: SimConfig) -> SimResult:
    """Sample one full replication: measure, and price + proxy when requested."""
    omega = _omega_for(cfg)
    measure = build_measure(omega, cfg)
    if not cfg.emit_price:
        return SimResult(measure=measure)
    price, rv = build_price_and_rv(omega, cfg)
    return SimResult(measure=measure, price=price, rv_proxy=rv)
