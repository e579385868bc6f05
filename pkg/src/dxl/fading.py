"""Channel fading processes: static, i.i.d. Rayleigh block fading, and Jakes.

Every process is a deterministic function of its seed and the integer epoch,
so samples can be drawn in any order.  The Jakes process is the
sum-of-sinusoids construction with in-phase and quadrature branches at
arrival angles ``(2 pi n - pi + theta) / (4 N_osc)``; each entry has unit
average power and Doppler spread ``f_d = v f / c``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError
from .hermitian import crandn

SPEED_OF_LIGHT = 2.998e8
FADING_KINDS = ("static", "iid-gaussian", "jakes")


@dataclass(frozen=True)
class FadingProcess:
    kind: str = "static"
    carrier_hz: float = 2e9
    velocity_mps: float = 5 / 3.6
    period_s: float = 3e-3
    oscillators: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.kind not in FADING_KINDS:
            raise ConfigError(f"unknown fading kind {self.kind!r}")
        if self.carrier_hz <= 0 or self.period_s <= 0:
            raise ConfigError("carrier frequency and update period must be positive")
        if self.velocity_mps < 0:
            raise ConfigError("velocity must be non-negative")
        if self.oscillators < 1:
            raise ConfigError("need at least one oscillator")

    @property
    def doppler_hz(self):
        return self.velocity_mps * self.carrier_hz / SPEED_OF_LIGHT

    @property
    def coherence_s(self):
        """Clarke's rule of thumb ``9 / (16 pi f_d)``; infinite without motion."""
        fd = self.doppler_hz
        return np.inf if fd == 0 else 9 / (16 * np.pi * fd)


@lru_cache(maxsize=64)
def _jakes_parameters(process, N, M):
    rng = np.random.default_rng(process.seed)
    total = sum(M)
    n = np.arange(1, process.oscillators + 1)
    theta = rng.uniform(-np.pi, np.pi, size=(N, total, 1))
    alpha = (2 * np.pi * n - np.pi + theta) / (4 * process.oscillators)
    phase_i = rng.uniform(-np.pi, np.pi, size=(N, total, process.oscillators))
    phase_q = rng.uniform(-np.pi, np.pi, size=(N, total, process.oscillators))
    return np.cos(alpha), np.sin(alpha), phase_i, phase_q


def _split(G, M):
    edges = np.cumsum((0,) + tuple(M))
    return [G[:, a:b].copy() for a, b in zip(edges[:-1], edges[1:])]


def fading_sample(process, N, M, t):
    """Channel matrices of every user at epoch ``t``.

    Parameters
    ----------
    process : FadingProcess
    N : int
        Receive antennas.
    M : sequence of int
        Transmit antennas per user.
    t : int
        Epoch index; physical time is ``t * process.period_s``.

    Returns
    -------
    list of ndarray
        One ``N x M_k`` complex matrix per user, entries of unit average power.
    """
    if t < 0:
        raise DomainError("epoch must be non-negative")
    M = tuple(int(m) for m in M)
    if process.kind == "static":
        rng = np.random.default_rng(process.seed)
        return _split(crandn(rng, N, sum(M)), M)
    if process.kind == "iid-gaussian":
        rng = np.random.default_rng([process.seed, int(t)])
        return _split(crandn(rng, N, sum(M)), M)
    cos_a, sin_a, phase_i, phase_q = _jakes_parameters(process, N, M)
    omega_t = 2 * np.pi * process.doppler_hz * t * process.period_s
    inphase = np.cos(omega_t * cos_a + phase_i).sum(axis=-1)
    quadrature = np.cos(omega_t * sin_a + phase_q).sum(axis=-1)
    G = (inphase + 1j * quadrature) / np.sqrt(process.oscillators)
    return _split(G, M)
