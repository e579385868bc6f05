"""Gaussian MIMO multiple-access channel: covariances, rates and rate gradients.

User ``k`` transmits with covariance ``Q_k = P_k X_k`` where ``X_k`` is a point
of the unit-trace spectrahedron.  The receiver sees

    W = I + sum_k P_k H_k X_k H_k^H

and the sum rate ``log det W`` (in nats) is the common potential of the rate
maximization game.  ``sum_rate_potential`` returns its negative, the convex
function that the learning scheme minimizes.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .hermitian import crandn, dagger, hermitian, uniform_point

#: Upper clamp for reported efficiencies; values above 1 flag inaccurate extrema.
EFFICIENCY_CEILING = 1.05


class EfficiencyWarning(UserWarning):
    """An efficiency above 1 was computed, so the reference extrema are off."""


@dataclass(frozen=True, eq=False)
class ChannelState:
    """Channel matrices ``H[k]`` (``N x M_k``) and transmit powers ``P[k]``."""

    H: tuple
    P: np.ndarray

    def __post_init__(self):
        H = tuple(np.asarray(h, dtype=complex) for h in self.H)
        P = np.asarray(self.P, dtype=float).reshape(-1)
        if not H:
            raise DimensionError("need at least one user")
        if P.size == 1 and len(H) > 1:
            P = np.full(len(H), P.item())
        if P.shape != (len(H),):
            raise DimensionError(f"{len(H)} users but {P.size} power levels")
        N = H[0].shape[0]
        for k, h in enumerate(H):
            if h.ndim != 2 or h.shape[0] != N:
                raise DimensionError(f"user {k}: channel shape {h.shape}, expected ({N}, M)")
            if not np.all(np.isfinite(h)):
                raise DomainError(f"user {k}: non-finite channel entries")
        if np.any(P <= 0):
            raise DomainError("transmit powers must be positive")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "P", P)

    @property
    def K(self):
        return len(self.H)

    @property
    def N(self):
        return self.H[0].shape[0]

    @property
    def M(self):
        return tuple(h.shape[1] for h in self.H)

    def with_channels(self, H):
        return ChannelState(tuple(H), self.P)


def random_channel(rng, K, N, M, P=1.0):
    """I.i.d. unit-variance complex Gaussian channels.

    ``M`` is either one antenna count for every user or a sequence of them.
    """
    M = [int(M)] * K if np.isscalar(M) else [int(m) for m in M]
    return ChannelState(tuple(crandn(rng, N, m) for m in M), P)


def uniform_profile(channel):
    return tuple(uniform_point(m) for m in channel.M)


def _check_profile(channel, profile):
    if len(profile) != channel.K:
        raise DimensionError(f"profile has {len(profile)} users, channel {channel.K}")
    for k, (x, m) in enumerate(zip(profile, channel.M)):
        if np.shape(x) != (m, m):
            raise DimensionError(f"user {k}: covariance shape {np.shape(x)}, expected ({m}, {m})")


def _check_user(channel, k):
    if not 0 <= k < channel.K:
        raise DomainError(f"user index {k} outside 0..{channel.K - 1}")


def _logdet(a):
    sign, value = np.linalg.slogdet(a)
    return value


def user_term(channel, profile, k):
    """``P_k H_k X_k H_k^H``, user ``k``'s contribution to the received covariance."""
    h = channel.H[k]
    return channel.P[k] * h @ profile[k] @ dagger(h)


def aggregate_covariance(channel, profile):
    """``W = I + sum_k P_k H_k X_k H_k^H``; Hermitian with ``W >= I``."""
    _check_profile(channel, profile)
    W = np.eye(channel.N, dtype=complex)
    for k in range(channel.K):
        W += user_term(channel, profile, k)
    return hermitian(W)


def mui_matrix(channel, profile, k):
    """Interference-plus-noise covariance seen by user ``k``."""
    _check_user(channel, k)
    _check_profile(channel, profile)
    W = np.eye(channel.N, dtype=complex)
    for ell in range(channel.K):
        if ell != k:
            W += user_term(channel, profile, ell)
    return hermitian(W)


def sum_rate(channel, profile):
    """``log det W`` in nats."""
    return _logdet(aggregate_covariance(channel, profile))


def user_rate(channel, profile, k):
    """Single-user-decoding rate ``log det W - log det W_{-k}`` (nats)."""
    return _logdet(aggregate_covariance(channel, profile)) - _logdet(
        mui_matrix(channel, profile, k)
    )


def user_rates(channel, profile):
    """All single-user-decoding rates from one aggregate covariance."""
    W = aggregate_covariance(channel, profile)
    total = _logdet(W)
    return [total - _logdet(W - user_term(channel, profile, k)) for k in range(channel.K)]


def sum_rate_potential(channel, profile):
    """Convex potential ``-log det W`` (one channel realization)."""
    return -sum_rate(channel, profile)


def rate_gradient(channel, profile, k):
    """Gradient of ``log det W`` with respect to ``X_k``: ``P_k H_k^H W^-1 H_k``."""
    _check_user(channel, k)
    W = aggregate_covariance(channel, profile)
    h = channel.H[k]
    return hermitian(channel.P[k] * dagger(h) @ np.linalg.solve(W, h))


def rate_gradients(channel, profile, W_inv=None):
    """All users' rate gradients from a single inversion of ``W``.

    ``W_inv`` may be supplied (e.g. a broadcast estimate of the precision matrix).
    """
    if W_inv is None:
        W_inv = np.linalg.inv(aggregate_covariance(channel, profile))
    return tuple(
        hermitian(p * dagger(h) @ W_inv @ h) for h, p in zip(channel.H, channel.P)
    )


def effective_channel(channel, profile, k, W=None):
    """Whitened channel Gram matrix ``H_k^H W_{-k}^-1 H_k``.

    Passing the aggregate covariance ``W`` avoids rebuilding the interference sum.
    """
    h = channel.H[k]
    if W is None:
        mui = mui_matrix(channel, profile, k)
    else:
        _check_user(channel, k)
        mui = W - user_term(channel, profile, k)
    return hermitian(dagger(h) @ np.linalg.solve(mui, h))


def efficiency(phi_n, phi_max, phi_min):
    """Normalized sum-rate progress ``(phi_n - phi_min) / (phi_max - phi_min)``.

    Inputs are sum rates (larger is better), so 1 means the optimum.  The
    result is clamped to ``[0, 1.05]``; anything above 1 raises an
    :class:`EfficiencyWarning` because it means the reference extrema are
    inaccurate.
    """
    if not phi_max > phi_min:
        raise DomainError(f"degenerate extrema: max {phi_max} <= min {phi_min}")
    value = (phi_n - phi_min) / (phi_max - phi_min)
    if value > 1.0 + 1e-9:
        warnings.warn(
            f"efficiency {value:.6f} exceeds 1; reference extrema are inaccurate",
            EfficiencyWarning,
            stacklevel=2,
        )
    return float(np.clip(value, 0.0, EFFICIENCY_CEILING))
