import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def stationary_gaussian(cov, n: int, rng) -> np.ndarray:
    """Circulant-embedding draw of a stationary Gaussian path.

    cov[k] is the autocovariance at integer lag k, k = 0..n-1.  Even
    reflection; tiny negative eigenvalues from roundoff are clipped, real
    negative mass fails the assert.
    """
    cov = np.asarray(cov, dtype=float)
    m = 2 * (n - 1)
    row = np.concatenate([cov, cov[-2:0:-1]])
    lam = np.fft.fft(row).real
    assert lam.min() > -1e-8 * lam.max(), "covariance not embeddable"
    e = np.sqrt(np.clip(lam, 0.0, None) / m)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(e * z)[:n].real
