"""Discounted matrix exponential learning on the unit-trace spectrahedron.

The recursion minimizes a convex objective ``F`` through noisy gradient
observations ``V``::

    Y <- Y - gamma_n * (V + tau * Y)
    X <- exp(Y) / tr exp(Y)

Its rest points solve the entropy-regularized problem
``min F(X) + tau * tr(X log X)``.  For a linear objective ``F(X) = tr(C X)``
the unique solution is the Gibbs state ``exp(-C/tau) / tr exp(-C/tau)``.

Callers that maximize (rates, utilities) must negate their gradients before
handing them to this module.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionError, DomainError
from .hermitian import (
    dagger,
    eigh,
    exp_project,
    frobenius,
    from_eig,
    herm_log,
    hermitian,
    identity_like,
    log_exp_project,
    spectral_norm,
    trace_inner,
    traceless,
    vn_entropy,
)

#: Eigenvalue gaps (in log space) below which divided differences use their limit.
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class StepSchedule:
    """Step-size sequence ``gamma_n`` for ``n = 1, 2, ...``.

    ``constant`` keeps ``gamma0``; ``harmonic`` is ``gamma0 / n``; ``power`` is
    ``gamma0 * n**(-exponent)``.  With ``harmonic`` and ``gamma0 = 1/tau`` the
    score matrix is exactly the running average of ``-V/tau``.
    """

    kind: str = "harmonic"
    gamma0: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic", "power"):
            raise ConfigError(f"unknown step schedule {self.kind!r}")
        if np.any(np.asarray(self.gamma0) <= 0):
            raise ConfigError("gamma0 must be positive")
        if self.kind == "power" and not 0 < self.exponent <= 1:
            raise ConfigError("power schedule exponent must lie in (0, 1]")

    def __call__(self, n):
        if n < 1:
            raise DomainError("step index starts at 1")
        if self.kind == "constant":
            return self.gamma0
        if self.kind == "harmonic":
            return self.gamma0 / n
        return self.gamma0 * n ** (-self.exponent)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of a single-agent run.

    ``tau`` and ``schedule.gamma0`` may be arrays broadcastable against a batch
    of independent problems (shape ``batch + (1, 1)``).  ``residual_tol = 0``
    disables early stopping.
    """

    tau: float
    schedule: StepSchedule = field(default_factory=StepSchedule)
    max_iters: int = 10_000
    residual_tol: float = 1e-10
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        tau = np.asarray(self.tau)
        if np.any(tau <= 0):
            raise ConfigError("tau must be positive")
        if self.schedule.kind == "constant" and np.any(
            np.asarray(self.schedule.gamma0) * tau >= 1
        ):
            raise ConfigError("constant step needs gamma0 < 1/tau")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.residual_tol < 0:
            raise ConfigError("residual_tol must be non-negative")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")


@dataclass(frozen=True, eq=False)
class AgentState:
    """Score matrix ``Y``, the primal point it induces, and the step count."""

    Y: np.ndarray
    iter: int = 0

    @cached_property
    def X(self):
        return exp_project(self.Y)

    @cached_property
    def log_X(self):
        return log_exp_project(self.Y)

    @classmethod
    def initial(cls, dim, batch=()):
        return cls(np.zeros(tuple(batch) + (dim, dim), dtype=complex))


class GradientOracle:
    """Stochastic first-order oracle for the objective being minimized.

    Subclasses implement ``__call__(X, epoch, rng)`` and return a Hermitian
    estimate of the gradient at ``X``.  ``bound`` is the declared almost-sure
    bound on the spectral norm of the returned matrices.  Oracles whose output
    does not depend on ``X`` set ``depends_on_point = False`` and are then
    called with ``X=None``, which saves an eigendecomposition per step.
    """

    bound = np.inf
    depends_on_point = True

    def __call__(self, X, epoch, rng):
        raise NotImplementedError


class LinearOracle(GradientOracle):
    """Exact gradient of ``F(X) = tr(C X)``, i.e. the constant matrix ``C``."""

    depends_on_point = False

    def __init__(self, C):
        self.C = hermitian(C)
        self.bound = float(np.max(spectral_norm(self.C)))

    def __call__(self, X, epoch, rng):
        return self.C

    def value(self, X):
        return trace_inner(self.C, X)


class FunctionOracle(GradientOracle):
    """Adapter turning a plain ``f(X, epoch, rng)`` callable into an oracle."""

    def __init__(self, func: Callable, bound=np.inf):
        self.func = func
        self.bound = bound

    def __call__(self, X, epoch, rng):
        return self.func(X, epoch, rng)


@dataclass
class Trajectory:
    """Recorded states of a run plus its residual history."""

    states: list
    residuals: list
    converged: bool

    @property
    def final(self):
        return self.states[-1]

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)


def dxl_step(state, V, gamma, tau):
    """One discounted exponential-learning step.

    Parameters
    ----------
    state : AgentState
        Current score matrix.
    V : ndarray
        Gradient estimate of the objective being minimized.
    gamma : float
        Step size.
    tau : float
        Discount parameter.

    Returns
    -------
    AgentState
        ``Y' = Y - gamma (V + tau Y)`` with the step counter incremented.
    """
    V = np.asarray(V)
    if V.shape[-2:] != state.Y.shape[-2:]:
        raise DimensionError(f"gradient shape {V.shape} vs state {state.Y.shape}")
    Y = (1 - gamma * tau) * state.Y - gamma * V
    return AgentState(hermitian(Y), state.iter + 1)


def _score_residual(Vbar, Y, tau):
    # log X = Y - lse(Y) I and the identity drops out of the traceless part,
    # so the first-order residual only needs V + tau Y.
    g = Vbar + tau * Y
    n = g.shape[-1]
    tr = np.real(np.trace(g, axis1=-2, axis2=-1))
    sq = np.sum(g.real**2 + g.imag**2, axis=(-2, -1)) - tr**2 / n
    return np.sqrt(np.maximum(sq, 0.0))


def solve(oracle, dim, config, batch=()):
    """Run the discounted recursion from ``Y = 0``.

    Parameters
    ----------
    oracle : GradientOracle or callable
        Called as ``oracle(X, n, rng)`` at step ``n = 1, 2, ...``.
    dim : int
        Matrix dimension.
    config : SolverConfig
        Discount, schedule, stopping rule and seed.
    batch : tuple of int
        Leading shape for running independent problems side by side.

    Returns
    -------
    Trajectory
        States recorded every ``config.record_every`` steps (plus the initial
        and final ones) and the residual at each recorded step, so
        ``residuals[i]`` belongs to ``states[i + 1]``.  The run stops after
        ``max_iters`` steps or when the first-order residual against the
        running mean of the observed gradients falls below ``residual_tol``.
    """
    rng = np.random.default_rng(config.seed)
    tau = config.tau
    state = AgentState.initial(dim, batch)
    states = [state]
    residuals = []
    vbar = np.zeros_like(state.Y)
    needs_point = getattr(oracle, "depends_on_point", True)
    converged = False
    for n in range(1, config.max_iters + 1):
        V = oracle(state.X if needs_point else None, n, rng)
        vbar += (V - vbar) / n
        state = dxl_step(state, V, config.schedule(n), tau)
        record = n == config.max_iters or n % config.record_every == 0
        if not (record or config.residual_tol > 0):
            continue
        res = float(np.max(_score_residual(vbar, state.Y, tau)))
        converged = config.residual_tol > 0 and res < config.residual_tol
        if record or converged:
            states.append(state)
            residuals.append(res)
        if converged:
            break
    return Trajectory(states, residuals, converged)


def perturbed_objective(F_value, X, tau):
    """``F(X) + tau * tr(X log X)``."""
    return F_value + tau * vn_entropy(X)


def fixed_point_residual(V, X, tau, log_x=None):
    """Norm of the traceless part of ``V + tau (log X + I)``.

    Zero exactly when ``X`` satisfies the first-order optimality condition of
    the regularized problem for gradient ``V``.  Pass ``log_x`` when an
    accurate logarithm is already known (e.g. from the score matrix); taking
    the logarithm of a nearly singular ``X`` loses precision.
    """
    if log_x is None:
        w, u = eigh(hermitian(X))
        if np.any(w <= 0):
            raise DomainError("fixed-point residual needs a positive-definite X")
        log_x = from_eig(np.log(w), u)
    g = np.asarray(V) + tau * (log_x + identity_like(log_x))
    return frobenius(traceless(g))


def gibbs_solution(C, tau):
    """Minimizer of ``tr(C X) + tau tr(X log X)`` over the spectrahedron."""
    if np.any(np.asarray(tau) <= 0):
        raise DomainError("tau must be positive")
    return exp_project(-hermitian(C) / tau)


def primal_vector_field(X, V_tau):
    """Continuous-time primal dynamics of the discounted scheme.

    Returns ``-int_0^1 X^(1-s) V_tau X^s ds + tr(X V_tau) X`` where
    ``V_tau = V + tau log X``.  The integral is evaluated in the eigenbasis of
    ``X`` through the divided differences of ``exp`` at ``y = log(eig X)``.
    """
    w, u = eigh(hermitian(X))
    if np.any(w <= 0):
        raise DomainError("primal vector field needs a positive-definite X")
    y = np.log(w)
    vt = dagger(u) @ hermitian(V_tau) @ u
    dy = y[..., :, None] - y[..., None, :]
    dw = w[..., :, None] - w[..., None, :]
    degenerate = np.abs(dy) < DEGENERATE_GAP
    kernel = np.where(
        degenerate,
        np.broadcast_to(w[..., :, None], dy.shape),
        dw / np.where(degenerate, 1.0, dy),
    )
    integral = u @ (vt * kernel) @ dagger(u)
    drift = trace_inner(X, V_tau)
    return hermitian(-integral + np.asarray(drift)[..., None, None] * X)


def integrate_primal_flow(C, tau, dt=1e-3, max_steps=200_000, tol=1e-6, X0=None):
    """Explicit-Euler integration of the primal flow for ``F(X) = tr(C X)``.

    Returns the sequence of regularized objective values and the final
    residual.  Used to check that the regularized objective is a Lyapunov
    function of the continuous dynamics.
    """
    C = hermitian(C)
    X = np.eye(C.shape[-1], dtype=complex) / C.shape[-1] if X0 is None else X0
    values = []
    res = np.inf
    for _ in range(max_steps):
        log_x = herm_log(X, clamp=False)
        values.append(float(perturbed_objective(trace_inner(C, X), X, tau)))
        res = float(fixed_point_residual(C, X, tau, log_x=log_x))
        if res < tol:
            break
        X = hermitian(X + dt * primal_vector_field(X, C + tau * log_x))
    return np.asarray(values), res
