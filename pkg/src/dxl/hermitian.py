"""Dense complex Hermitian matrices and the matrix functions built on them.

Every function acts on the last two axes, so stacks of matrices with shape
``(..., n, n)`` are processed in one call.  Matrix functions go through a full
Hermitian eigendecomposition; the dimensions used throughout the package are
small (a handful of antennas), so this is both the simplest and the most
accurate route, and it keeps the eigenbasis available for divided-difference
formulas.
"""

import numpy as np

from .errors import DimensionError, DomainError, NumericError

#: Eigenvalue floor used by :func:`herm_log` and :func:`vn_entropy`.
EPS_FLOOR = 1e-300
#: Tolerance on the smallest eigenvalue when checking positive semidefiniteness.
EPS_PSD = 1e-10
#: Tolerance on the unit-trace constraint of a spectrahedron point.
EPS_TRACE = 1e-12


def dagger(a):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def _check_square(a):
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {a.shape}")


def hermitian(a):
    """Return ``(a + a^H) / 2`` as a complex array.

    Near-Hermitian numerical input is symmetrized rather than rejected.
    """
    a = np.asarray(a, dtype=complex)
    _check_square(a)
    return 0.5 * (a + dagger(a))


def is_hermitian(a, atol=1e-12):
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        return False
    return bool(np.allclose(a, dagger(a), rtol=0.0, atol=atol))


def identity_like(a):
    n = a.shape[-1]
    return np.broadcast_to(np.eye(n, dtype=complex), a.shape).copy()


def eigh(a):
    """Hermitian eigendecomposition ``a = U diag(w) U^H``.

    Raises
    ------
    NumericError
        If LAPACK fails to converge; the message carries the dimension and a
        crude conditioning estimate of the offending input.
    """
    a = np.asarray(a)
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        finite = np.all(np.isfinite(a))
        scale = float(np.max(np.abs(a))) if finite else float("inf")
        raise NumericError(
            f"Hermitian eigensolver failed (dim={a.shape[-1]}, "
            f"max|entry|={scale:.3g}, finite={finite}): {exc}"
        ) from exc


def from_eig(w, u):
    """Rebuild ``U diag(w) U^H`` from eigenpairs (``w`` may be complex)."""
    return (u * w[..., None, :]) @ dagger(u)


def herm_func(a, func):
    """Apply a scalar function to the spectrum of a Hermitian matrix."""
    w, u = eigh(hermitian(a))
    return from_eig(func(w), u)


def herm_exp(a):
    """Matrix exponential of a Hermitian matrix."""
    return herm_func(a, np.exp)


def herm_log(x, clamp=True):
    """Matrix logarithm of a positive-definite Hermitian matrix.

    With ``clamp`` set (the default), eigenvalues are floored at
    :data:`EPS_FLOOR` so rank-deficient points evaluate finitely.  Without it,
    a non-positive eigenvalue raises :class:`DomainError`.
    """
    w, u = eigh(hermitian(x))
    if clamp:
        w = np.maximum(w, EPS_FLOOR)
    elif np.any(w <= 0):
        raise DomainError(
            f"matrix logarithm needs positive eigenvalues, min is {w.min():.3g}"
        )
    return from_eig(np.log(w), u)


def herm_pow(x, s):
    """Fractional power ``x**s`` of a positive-semidefinite matrix."""
    w, u = eigh(hermitian(x))
    return from_eig(np.maximum(w, 0.0) ** s, u)


def log_partition(y):
    """``log tr exp(y)`` computed without overflow."""
    w = np.linalg.eigvalsh(hermitian(y))
    top = w.max(axis=-1)
    return top + np.log(np.exp(w - top[..., None]).sum(axis=-1))


def exp_project(y):
    """Exponential projection ``exp(y) / tr exp(y)`` onto the spectrahedron.

    The largest eigenvalue is subtracted before exponentiating; the result is
    unchanged because the map is invariant under ``y -> y + c I``.
    """
    w, u = eigh(hermitian(y))
    e = np.exp(w - w.max(axis=-1, keepdims=True))
    e /= e.sum(axis=-1, keepdims=True)
    return from_eig(e, u)


def log_exp_project(y):
    """``log exp_project(y)`` evaluated as ``y - log tr exp(y) I``.

    Accurate even when the projected point has eigenvalues far below machine
    precision, where taking the logarithm of the projected matrix is not.
    """
    y = hermitian(y)
    lse = log_partition(y)
    return y - lse[..., None, None] * identity_like(y)


def vn_entropy(x):
    """Negative von Neumann entropy ``tr(x log x)``, with ``0 log 0 = 0``.

    The value lies in ``[-log n, 0]`` for every point of the spectrahedron.
    """
    w = np.linalg.eigvalsh(hermitian(x))
    safe = np.where(w > EPS_FLOOR, w, 1.0)
    return np.sum(np.where(w > EPS_FLOOR, w * np.log(safe), 0.0), axis=-1)


def trace_inner(a, b):
    """Real part of ``tr(a b)``, the Frobenius pairing of Hermitian matrices."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return np.real(np.einsum("...ij,...ji->...", a, b))


def traceless(a):
    """Project onto the trace-zero subspace: ``a - tr(a)/n I``."""
    n = a.shape[-1]
    tr = np.trace(a, axis1=-2, axis2=-1)
    return a - (tr / n)[..., None, None] * identity_like(a)


def spectral_norm(a):
    """Largest absolute eigenvalue of a Hermitian matrix."""
    return np.abs(np.linalg.eigvalsh(hermitian(a))).max(axis=-1)


def frobenius(a):
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def check_spectra_point(x, psd_tol=EPS_PSD, trace_tol=EPS_TRACE):
    """Validate that ``x`` is Hermitian, PSD and has unit trace.

    Returns the symmetrized matrix; raises :class:`DomainError` otherwise.
    """
    x = np.asarray(x, dtype=complex)
    _check_square(x)
    if not is_hermitian(x, atol=1e-10):
        raise DomainError("spectrahedron point is not Hermitian")
    x = hermitian(x)
    lam_min = np.linalg.eigvalsh(x).min()
    if lam_min < -psd_tol:
        raise DomainError(f"spectrahedron point not PSD (min eigenvalue {lam_min:.3g})")
    tr = np.real(np.trace(x, axis1=-2, axis2=-1))
    if np.any(np.abs(tr - 1.0) > trace_tol):
        raise DomainError(f"spectrahedron point has trace {tr} != 1")
    return x


def uniform_point(n):
    """The barycenter ``I/n`` of the spectrahedron."""
    return np.eye(n, dtype=complex) / n


def crandn(rng, *shape):
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(dim, bound, seed):
    """Deterministic random Hermitian matrix with spectral norm ``bound``.

    Built as ``(G + G^H)/2`` from a complex Gaussian ``G`` and rescaled so its
    spectral norm equals ``bound`` exactly.
    """
    if dim < 1:
        raise DomainError("dim must be >= 1")
    if bound <= 0:
        raise DomainError("bound must be positive")
    rng = np.random.default_rng(seed)
    a = hermitian(crandn(rng, dim, dim))
    norm = spectral_norm(a)
    if norm == 0.0:
        return np.zeros((dim, dim), dtype=complex)
    return a * (bound / norm)
