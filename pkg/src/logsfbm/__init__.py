"""Log S-fBM volatility modeling: kernels, exact simulation, and estimation.

A stationary Gaussian log volatility with truncated power-law covariance
drives the random measure M(dt) = e^omega dt.  The roughness exponent H
spans rough (0 < H < 1/2) and multifractal (H = 0) regimes under a single
intermittency parameter lambda^2 = H(1 - 2H) nu^2.  The package provides
the analytic second-order kernels of the family, exact path simulation,
correlogram and scaling estimators, moment-matching fits of (H, nu^2), and
ingestion of market OHLC / intraday data into volatility proxy series.
"""

from .errors import DataError, NumericalError
from .kernels import (
    LagGrid,
    ModelParams,
    F_of_z,
    corr_M,
    cov_lnM,
    cov_omega,
    cov_omega_mrm,
    dtilde_lnM,
    g_H,
    m_q,
    rtilde_M,
    scaling_bias,
)
from .simulate import (
    PricePath,
    SimConfig,
    SimResult,
    VolSeries,
    build_measure,
    build_price_and_rv,
    generate,
    sample_omega,
    sample_omega_mrm,
)
from .estimators import (
    Correlogram,
    ScalingFit,
    correlogram_M,
    correlogram_lnM,
    log_increment_moments,
    scaling_estimate_H,
)
from .gmm import GmmFit, GmmSpec, fit, model_corr_M, model_corr_lnM, newey_west_weight

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "NumericalError",
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
    "SimConfig",
    "VolSeries",
    "PricePath",
    "SimResult",
    "sample_omega",
    "sample_omega_mrm",
    "build_measure",
    "build_price_and_rv",
    "generate",
    "Correlogram",
    "ScalingFit",
    "correlogram_M",
    "correlogram_lnM",
    "log_increment_moments",
    "scaling_estimate_H",
    "GmmSpec",
    "GmmFit",
    "fit",
    "model_corr_lnM",
    "model_corr_M",
    "newey_west_weight",
    "__version__",
]
