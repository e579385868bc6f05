"""Iterative and simultaneous water-filling for the rate maximization game.

A best response whitens the interference seen by user ``k`` and water-fills
its power over the eigenmodes of ``H_k^H W_{-k}^-1 H_k``.  Iterative
water-filling (IWF) lets users respond one after the other and converges to
the sum capacity; simultaneous water-filling (SWF) lets everyone respond to
the previous profile at once and may oscillate forever.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .feedback import additive_noise_oracle
from .hermitian import eigh, frobenius, from_eig
from .mimo import aggregate_covariance, effective_channel, sum_rate

DEFAULT_TOL = 1e-8
DEFAULT_SWEEPS = 200


def single_user_waterfill(gains, P):
    """Classical water-filling ``q_i = max(0, mu - 1/g_i)`` with ``sum q = P``.

    Channels exactly at the water level get zero power.
    """
    g = np.asarray(gains, dtype=float)
    if P <= 0:
        raise DomainError("power budget must be positive")
    if np.any(g < 0):
        raise DomainError("gains must be non-negative")
    if not np.any(g > 0):
        raise DomainError("water-filling needs at least one positive gain")
    order = np.argsort(-g, kind="stable")
    q = np.zeros_like(g)
    positive = order[g[order] > 0]
    for n in range(len(positive), 0, -1):
        active = positive[:n]
        inv = 1.0 / g[active]
        mu = (P + inv.sum()) / n
        if mu - inv[-1] > 0:
            q[active] = mu - inv
            return q
    raise AssertionError("unreachable: the strongest channel always gets power")


def water_level(gains, q):
    """Water level ``mu`` of an allocation (from any channel with power)."""
    g = np.asarray(gains, dtype=float)
    on = q > 0
    return float(np.mean(q[on] + 1.0 / g[on]))


def best_response(channel, profile, k, eta=0.0, rng=None, W=None):
    """Rate-maximizing ``X_k`` against the other users' fixed covariances.

    With ``eta > 0`` the whitened channel Gram matrix is observed through
    relative additive Gaussian noise before water-filling.  ``W`` optionally
    supplies the aggregate covariance of ``profile``.
    """
    G = effective_channel(channel, profile, k, W)
    if eta > 0:
        G = additive_noise_oracle(G, eta, rng)
    w, u = eigh(G)
    w = np.maximum(w, 0.0)
    P = channel.P[k]
    if not np.any(w > 0):
        return from_eig(np.full_like(w, 1.0 / len(w)), u)
    q = single_user_waterfill(w, P)
    return from_eig(q / P, u)


@dataclass
class WaterfillRun:
    """Profiles after every update, the matching sum rates, and the stop flag.

    For IWF ``profiles`` has one entry per individual user update (so
    ``K`` per sweep); for SWF one per sweep.  ``profiles[0]`` is the start.
    """

    profiles: list
    sum_rates: list
    converged: bool
    sweeps: int

    @property
    def final(self):
        return self.profiles[-1]


def _change(a, b):
    return float(np.sqrt(sum(frobenius(x - y) ** 2 for x, y in zip(a, b))))


def iwf_run(channel, start, max_sweeps=DEFAULT_SWEEPS, tol=DEFAULT_TOL, eta=0.0, rng=None):
    """Round-robin best responses until a sweep changes the profile by < tol."""
    profile = tuple(start)
    profiles = [profile]
    rates = [sum_rate(channel, profile)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        before = profile
        for k in range(channel.K):
            updated = list(profile)
            updated[k] = best_response(channel, profile, k, eta, rng)
            profile = tuple(updated)
            profiles.append(profile)
            rates.append(sum_rate(channel, profile))
        if _change(before, profile) < tol:
            converged = True
            break
    return WaterfillRun(profiles, rates, converged, sweeps)


def swf_run(channel, start, max_sweeps=DEFAULT_SWEEPS, tol=DEFAULT_TOL, eta=0.0, rng=None):
    """Simultaneous best responses against the previous profile."""
    profile = tuple(start)
    profiles = [profile]
    rates = [sum_rate(channel, profile)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        W = aggregate_covariance(channel, profile)
        new = tuple(best_response(channel, profile, k, eta, rng, W) for k in range(channel.K))
        change = _change(profile, new)
        profile = new
        profiles.append(profile)
        rates.append(sum_rate(channel, profile))
        if change < tol:
            converged = True
            break
    return WaterfillRun(profiles, rates, converged, sweeps)
