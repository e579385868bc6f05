import numpy as np
import pytest

from dxl.hermitian import crandn, dagger


def random_point(rng, n, floor=0.0):
    """Random strictly positive unit-trace Hermitian matrix."""
    g = crandn(rng, n, n)
    x = g @ dagger(g) + floor * np.eye(n)
    return x / np.real(np.trace(x))


def random_herm(rng, n, scale=1.0):
    g = crandn(rng, n, n)
    return scale * (g + dagger(g)) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def independent_entries(a):
    """Real and imaginary parts of the upper triangle (the free Hermitian entries)."""
    n = a.shape[-1]
    iu = np.triu_indices(n)
    upper = a[..., iu[0], iu[1]]
    off = iu[0] != iu[1]
    return np.concatenate([upper.real, upper[..., off].imag], axis=-1)


def se_band(samples, truth, k=3.0):
    """Per-entry ``|mean - truth| / standard error`` for Hermitian samples."""
    x = independent_entries(np.asarray(samples))
    t = independent_entries(np.asarray(truth))
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])
    z = np.abs(mean - t) / np.where(se > 0, se, np.inf)
    exact = (se == 0) & np.isclose(mean, t, rtol=0, atol=1e-12)
    return np.where(exact, 0.0, np.where(se > 0, z, np.inf))
