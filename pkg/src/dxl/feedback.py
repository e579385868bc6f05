"""Unbiased gradient feedback from noisy signal and channel measurements.

The receiver estimates the precision matrix ``W^-1`` from samples of the
received signal; each transmitter combines that broadcast estimate with
independent noisy measurements of its own channel.  Products of independent
unbiased factors stay unbiased, which is why the two estimators below only
pair *distinct* channel measurements.

All estimators accept leading batch axes so Monte Carlo trials vectorize.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, NumericError
from .hermitian import crandn, dagger, frobenius, herm_pow, hermitian
from .learning import GradientOracle
from .mimo import aggregate_covariance


@lru_cache(maxsize=None)
def _noise_masks(n):
    upper = np.triu(np.ones((n, n)), 1) / (n * np.sqrt(2))
    return upper, np.eye(n) / n


def hermitian_noise(rng, shape):
    """Gaussian Hermitian matrices with ``E ||E||_F^2 = 1``.

    Distributed like a scaled ``(G + G^H)/2``: every diagonal entry and every
    off-diagonal complex entry has variance ``1/n^2``.
    """
    *batch, n = shape
    # n^2 real draws: diagonal, real parts from the upper triangle, imaginary from the lower
    a = rng.standard_normal((*batch, n, n))
    upper, diag = _noise_masks(n)
    re = a * upper
    re += np.swapaxes(re, -1, -2)
    re += a * diag
    im = np.swapaxes(a, -1, -2) * upper
    im -= np.swapaxes(im, -1, -2)
    return np.stack([re, im], axis=-1).view(complex)[..., 0]


def additive_noise_oracle(V, eta, rng):
    """``V + eta ||V||_F E`` with zero-mean Hermitian ``E`` of unit RMS norm.

    ``eta`` is the relative error level: the ratio of the perturbation's
    standard deviation to the Frobenius norm of ``V``.
    """
    if eta < 0:
        raise DomainError("error level must be non-negative")
    V = np.asarray(V)
    if eta == 0:
        return V
    scale = eta * frobenius(V)
    return V + np.asarray(scale)[..., None, None] * hermitian_noise(rng, V.shape[:-1])


class NoisyOracle(GradientOracle):
    """Wrap an oracle with relative additive Gaussian noise."""

    def __init__(self, base, eta):
        self.base = base
        self.eta = eta
        self.depends_on_point = getattr(base, "depends_on_point", True)

    def __call__(self, X, epoch, rng):
        return additive_noise_oracle(self.base(X, epoch, rng), self.eta, rng)


def sample_covariance(samples):
    """``(1/S) sum_s y_s y_s^H`` over the second-to-last axis.

    No ``S/(S-1)`` correction: the signal mean is known to be zero.
    """
    y = np.asarray(samples)
    if y.ndim < 2 or y.shape[-2] < 1:
        raise DomainError("need at least one sample vector")
    S = y.shape[-2]
    return hermitian(np.einsum("...si,...sj->...ij", y, y.conj()) / S)


def precision_factor(S, N, real=False):
    """Scale turning ``inv(W_hat)`` into an unbiased precision estimate.

    For complex circular Gaussian samples ``E[inv(W_hat)] = S/(S-N) W^-1``;
    for real Gaussian samples it is ``S/(S-N-1) W^-1``.
    """
    if S <= N + 1:
        raise DomainError(f"need more than N + 1 = {N + 1} samples, got {S}")
    return (S - N - 1) / S if real else (S - N) / S


def unbiased_precision(W_hat, S, N, real=False):
    """Unbiased estimate of ``W^-1`` from a zero-mean sample covariance.

    Parameters
    ----------
    W_hat : ndarray
        Sample covariance built from ``S`` independent signal vectors.
    S, N : int
        Sample count and signal dimension; ``S > N + 1`` is required so the
        estimate also has finite variance.
    real : bool
        Use the real-valued Wishart correction ``(S - N - 1)/S`` instead of
        the complex one ``(S - N)/S``.
    """
    factor = precision_factor(S, N, real)
    try:
        inv = np.linalg.inv(W_hat)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"sample covariance is singular (N={N}, S={S})") from exc
    return hermitian(factor * inv)


def _measurements(measurements):
    Hs = np.asarray(measurements, dtype=complex)
    if Hs.ndim < 3 or Hs.shape[-3] < 2:
        raise DomainError("need at least two independent channel measurements")
    return Hs


def unbiased_gradient_pairwise(measurements, P_hat):
    """Consecutive-pair estimator of ``H^H W^-1 H``.

    ``(1 / (2 (S-1))) sum_j (H_j^H P H_{j+1} + H_{j+1}^H P H_j)`` with
    measurements stacked along axis ``-3``.
    """
    Hs = _measurements(measurements)
    S = Hs.shape[-3]
    P_hat = np.asarray(P_hat)[..., None, :, :]
    cross = dagger(Hs[..., :-1, :, :]) @ P_hat @ Hs[..., 1:, :, :]
    total = cross.sum(axis=-3)
    return (total + dagger(total)) / (2 * (S - 1))


def unbiased_gradient_alldistinct(measurements, P_hat):
    """All-distinct-pairs estimator ``(1/(S(S-1))) sum_{s != s'} H_s^H P H_s'``.

    Uses ``sum_{s != s'} = (sum_s H_s)^H P (sum_s H_s) - sum_s H_s^H P H_s``.
    """
    Hs = _measurements(measurements)
    S = Hs.shape[-3]
    P_hat = np.asarray(P_hat)
    total = Hs.sum(axis=-3)
    full = dagger(total) @ P_hat @ total
    diag = (dagger(Hs) @ P_hat[..., None, :, :] @ Hs).sum(axis=-3)
    return hermitian((full - diag) / (S * (S - 1)))


@dataclass(eq=False)
class SignalSampler:
    """Draws received-signal snapshots ``y = sum_k H_k x_k + z``.

    ``x_k`` is circular complex Gaussian with covariance ``P_k X_k`` and ``z``
    is standard complex Gaussian noise.
    """

    channel: object
    profile: tuple
    S: int
    seed: object = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.S < 1:
            raise DomainError("need at least one signal sample")
        self.rng = np.random.default_rng(self.seed)
        self._roots = [
            np.sqrt(p) * herm_pow(x, 0.5) for p, x in zip(self.channel.P, self.profile)
        ]

    def draw(self, trials=None):
        """Samples of shape ``(S, N)`` or ``(trials, S, N)``."""
        batch = () if trials is None else (trials,)
        y = crandn(self.rng, *batch, self.S, self.channel.N)
        for h, root in zip(self.channel.H, self._roots):
            x = crandn(self.rng, *batch, self.S, h.shape[1]) @ root.T
            y = y + x @ h.T
        return y

    def true_covariance(self):
        return aggregate_covariance(self.channel, self.profile)


@dataclass(eq=False)
class ChannelMeasurementModel:
    """Noisy channel measurements ``H + eta ||H||_F / sqrt(N M) E``."""

    H: np.ndarray
    eta: float
    seed: object = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.eta < 0:
            raise DomainError("error level must be non-negative")
        self.H = np.asarray(self.H, dtype=complex)
        self.rng = np.random.default_rng(self.seed)

    @property
    def scale(self):
        N, M = self.H.shape
        return self.eta * frobenius(self.H) / np.sqrt(N * M)

    def measure(self, S, trials=None):
        """``S`` independent measurements stacked on axis ``-3``."""
        batch = () if trials is None else (trials,)
        E = crandn(self.rng, *batch, S, *self.H.shape)
        return self.H + self.scale * E


def sampled_gradients(channel, profile, signal_samples, channel_samples, eta, rng,
                      estimator="all-distinct", real=False):
    """One round of estimated rate gradients ``P_k H_k^H W^-1 H_k``.

    The precision estimate comes only from received-signal samples and the
    channel measurements are drawn separately, so the two are independent.
    """
    sampler = SignalSampler(channel, profile, signal_samples, seed=rng)
    W_hat = sample_covariance(sampler.draw())
    P_hat = unbiased_precision(W_hat, signal_samples, channel.N, real=real)
    combine = (
        unbiased_gradient_alldistinct if estimator == "all-distinct"
        else unbiased_gradient_pairwise
    )
    grads = []
    for h, p in zip(channel.H, channel.P):
        Hs = ChannelMeasurementModel(h, eta, seed=rng).measure(channel_samples)
        grads.append(p * combine(Hs, P_hat))
    return tuple(grads)
