"""Reference extrema of the sum rate over the product of spectrahedra.

The maximum solves a concave program and is found by projected gradient
ascent.  The minimum of a concave function over a compact convex set sits at
an extreme point, i.e. a profile of rank-one covariances, so it is searched by
coordinate descent over rank-one profiles from many random starts.
"""

from dataclasses import dataclass

import numpy as np

from ..hermitian import crandn, dagger, eigh, from_eig, hermitian
from ..mimo import rate_gradients, sum_rate, uniform_profile

DEGENERATE_RANGE = 1e-12


def project_simplex(v):
    """Euclidean projection of each row of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    idx = np.arange(1, v.shape[-1] + 1)
    cond = u - css / idx > 0
    rho = cond.shape[-1] - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(v - theta, 0.0)


def project_spectrahedron(a):
    """Frobenius projection onto ``{X >= 0, tr X = 1}``."""
    w, u = eigh(hermitian(a))
    return from_eig(project_simplex(w), u)


def _pg_residual(channel, profile, grads):
    step = [project_spectrahedron(x + g) for x, g in zip(profile, grads)]
    return float(np.sqrt(sum(np.sum(np.abs(x - s) ** 2) for x, s in zip(profile, step))))


def _norm(mats):
    return float(np.sqrt(sum(np.sum(np.abs(m) ** 2) for m in mats)))


def maximize_sum_rate(channel, start, tol=1e-8, max_iters=5000):
    """Projected gradient ascent on ``log det W`` with an adaptive step.

    The step is halved until it is below the inverse of the local Lipschitz
    estimate ``||grad(trial) - grad(x)|| / ||trial - x||``.  Unlike a
    function-value line search this stays informative close to the optimum,
    where differences of ``log det`` vanish in rounding error.

    Returns ``(value, profile, residual)`` where ``residual`` is the norm of
    the projected-gradient mapping at the returned profile.
    """
    profile = tuple(start)
    grads = rate_gradients(channel, profile)
    step = 1.0 / max(float(np.max(channel.P)), 1e-12)
    residual = np.inf
    for _ in range(max_iters):
        residual = _pg_residual(channel, profile, grads)
        if residual < tol:
            break
        while True:
            trial = tuple(project_spectrahedron(x + step * g) for x, g in zip(profile, grads))
            trial_grads = rate_gradients(channel, trial)
            moved = _norm([t - x for t, x in zip(trial, profile)])
            change = _norm([a - b for a, b in zip(trial_grads, grads)])
            if step * change <= moved or step < 1e-12:
                break
            step *= 0.5
        profile, grads = trial, trial_grads
        step *= 2.0
    return sum_rate(channel, profile), profile, residual


def _random_rank_one(rng, M, R):
    vecs = []
    for m in M:
        u = crandn(rng, R, m)
        vecs.append(u / np.linalg.norm(u, axis=-1, keepdims=True))
    return vecs


def minimize_sum_rate(channel, restarts=1000, seed=0, max_sweeps=50):
    """Best rank-one profile found by coordinate descent from random starts.

    Holding the others fixed, user ``k`` minimizes its contribution by
    beaming along the weakest eigenvector of ``H_k^H W_{-k}^-1 H_k``.  All
    restarts are advanced together as one batch.  Returns ``(value, profile)``.
    """
    rng = np.random.default_rng(seed)
    N = channel.N
    R = max(int(restarts), 1)
    vecs = _random_rank_one(rng, channel.M, R)
    cols = [u @ h.T for u, h in zip(vecs, channel.H)]  # (R, N): H_k u_k
    W = np.broadcast_to(np.eye(N, dtype=complex), (R, N, N)).copy()
    for a, p in zip(cols, channel.P):
        W += p * a[:, :, None] * a.conj()[:, None, :]
    previous = np.linalg.slogdet(W)[1]
    for _ in range(max_sweeps):
        for k, (h, p) in enumerate(zip(channel.H, channel.P)):
            a = cols[k]
            W_minus = W - p * a[:, :, None] * a.conj()[:, None, :]
            B = dagger(h) @ np.linalg.solve(W_minus, np.broadcast_to(h, (R,) + h.shape))
            _, U = np.linalg.eigh(hermitian(B))
            vecs[k] = U[..., 0]
            cols[k] = vecs[k] @ h.T
            a = cols[k]
            W = W_minus + p * a[:, :, None] * a.conj()[:, None, :]
        current = np.linalg.slogdet(W)[1]
        if np.all(previous - current < 1e-12):
            previous = current
            break
        previous = current
    best = int(np.argmin(previous))
    profile = tuple(np.outer(v[best], v[best].conj()) for v in vecs)
    return sum_rate(channel, profile), profile


@dataclass
class Extrema:
    """Reference sum-rate extrema of one channel realization (nats)."""

    max_sum_rate: float
    min_sum_rate: float
    max_profile: tuple
    min_profile: tuple
    residual: float
    approximate: bool

    def __iter__(self):
        yield self.max_sum_rate
        yield self.min_sum_rate

    @property
    def degenerate(self):
        return self.max_sum_rate - self.min_sum_rate < DEGENERATE_RANGE


def reference_extrema(channel, tol=1e-8, starts=5, min_restarts=1000, seed=0,
                      max_iters=5000, warm_start=None):
    """Maximum and minimum sum rate over all feasible transmit profiles.

    Parameters
    ----------
    channel : ChannelState
        A single (static) channel realization.
    tol : float
        Target projected-gradient residual for the maximization.
    starts : int
        Number of ascent starts: the uniform profile (or ``warm_start``)
        followed by random full-rank profiles.
    min_restarts : int
        Random rank-one starts for the minimization.
    seed : int
        Seed for all random starts.

    Returns
    -------
    Extrema
        ``approximate`` is set when no ascent run reached ``tol``.
    """
    rng = np.random.default_rng(seed)
    best = None
    for i in range(max(int(starts), 1)):
        if i == 0:
            start = warm_start if warm_start is not None else uniform_profile(channel)
        else:
            start = []
            for m in channel.M:
                g = crandn(rng, m, m)
                x = g @ dagger(g)
                start.append(x / np.real(np.trace(x)))
        value, profile, residual = maximize_sum_rate(channel, start, tol, max_iters)
        if best is None or value > best[0]:
            best = (value, profile, residual)
    min_value, min_profile = minimize_sum_rate(channel, min_restarts, seed)
    value, profile, residual = best
    return Extrema(value, min(min_value, value), profile, min_profile, residual,
                   approximate=residual >= tol)
