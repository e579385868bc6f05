"""Multi-agent discounted learning with private update timers and stale feedback.

Asynchrony is simulated logically: global epochs ``n = 1, 2, ...`` index the
merged stream of update events, ``next_update_set`` says which agents act at
each epoch, and a delay model says how many epochs old the joint profile fed
to each agent's oracle is.  Each agent uses the step size indexed by its own
update counter, not by the global epoch.

Agents are numbered from 0.
"""

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ContractError, DomainError
from .learning import AgentState, StepSchedule, dxl_step

SCHEDULE_KINDS = ("round-robin", "all-at-once", "poisson")
DELAY_KINDS = ("zero", "fixed", "uniform-random")


@dataclass(frozen=True, eq=False)
class UpdateSchedule:
    """Which agents update at each global epoch.

    ``poisson`` gives every agent an exponential clock with the given rate;
    epochs are the merged clock ticks, so exactly one agent (chosen with
    probability proportional to its rate) acts per epoch.  ``times`` holds the
    continuous event times for ``poisson`` and ``1, 2, ...`` otherwise.
    """

    kind: str
    n_agents: int
    horizon: int
    rates: tuple = ()
    seed: int = 0
    times: np.ndarray = field(init=False, repr=False)
    _agents: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown update schedule {self.kind!r}")
        if self.n_agents < 1 or self.horizon < 1:
            raise ConfigError("need at least one agent and one epoch")
        if self.kind == "poisson":
            rates = np.asarray(self.rates if self.rates else [1.0] * self.n_agents, float)
            if rates.shape != (self.n_agents,) or np.any(rates <= 0):
                raise ConfigError("poisson schedule needs one positive rate per agent")
            rng = np.random.default_rng(self.seed)
            gaps = rng.exponential(1.0 / rates.sum(), size=self.horizon)
            agents = rng.choice(self.n_agents, size=self.horizon, p=rates / rates.sum())
            object.__setattr__(self, "rates", tuple(rates))
            object.__setattr__(self, "times", np.cumsum(gaps))
            object.__setattr__(self, "_agents", agents)
        else:
            object.__setattr__(self, "times", np.arange(1, self.horizon + 1, dtype=float))
            object.__setattr__(self, "_agents", None)

    def sets(self):
        for n in range(1, self.horizon + 1):
            yield next_update_set(self, n)


def next_update_set(schedule, epoch):
    """Agents updating at global epoch ``epoch`` (1-based)."""
    if not 1 <= epoch <= schedule.horizon:
        raise DomainError(f"epoch {epoch} outside 1..{schedule.horizon}")
    if schedule.kind == "round-robin":
        return frozenset({(epoch - 1) % schedule.n_agents})
    if schedule.kind == "all-at-once":
        return frozenset(range(schedule.n_agents))
    return frozenset({int(schedule._agents[epoch - 1])})


@dataclass(frozen=True)
class DelayModel:
    """Bounded observation delays ``d_k(n) <= max_delay``."""

    kind: str = "zero"
    max_delay: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DELAY_KINDS:
            raise ConfigError(f"unknown delay model {self.kind!r}")
        if self.max_delay < 0:
            raise ConfigError("max_delay must be non-negative")

    def realize(self, horizon, n_agents):
        """Delay table of shape ``(horizon, n_agents)``."""
        if self.kind == "zero" or self.max_delay == 0:
            return np.zeros((horizon, n_agents), dtype=int)
        if self.kind == "fixed":
            return np.full((horizon, n_agents), self.max_delay, dtype=int)
        rng = np.random.default_rng(self.seed)
        return rng.integers(0, self.max_delay + 1, size=(horizon, n_agents))


@dataclass(frozen=True, eq=False)
class MultiAgentState:
    """Joint state of all agents at a global epoch.

    ``history`` holds the most recent joint profiles (newest last), at least
    ``max_delay + 1`` of them once enough epochs have elapsed.
    """

    agents: tuple
    epoch: int = 0
    active: frozenset = frozenset()
    history: tuple = ()

    @property
    def counts(self):
        return tuple(a.iter for a in self.agents)

    @property
    def profile(self):
        return tuple(a.X for a in self.agents)

    @classmethod
    def initial(cls, dims):
        agents = tuple(AgentState.initial(d) for d in dims)
        return cls(agents, history=(tuple(a.X for a in agents),))


def async_step(state, k, V, schedule, tau):
    """Update agent ``k`` only, using the step size of its local counter.

    Raises
    ------
    ContractError
        If ``k`` is not in the update set of the current epoch.
    """
    if k not in state.active:
        raise ContractError(f"agent {k} is not updating at epoch {state.epoch}")
    agent = state.agents[k]
    gamma = schedule(agent.iter + 1)
    agents = list(state.agents)
    agents[k] = dxl_step(agent, V, gamma, tau)
    return replace(state, agents=tuple(agents))


@dataclass
class AsyncTrajectory:
    states: list
    times: np.ndarray
    delays: list  # (epoch, agent, delay actually used)
    update_sets: list


def run_async(
    oracles,
    dims,
    schedule,
    delays,
    tau,
    step=None,
    seed=0,
    record_every=1,
):
    """Simulate asynchronous discounted learning.

    Parameters
    ----------
    oracles : sequence of callables
        ``oracles[k](profile, n, rng)`` returns agent ``k``'s gradient estimate
        given a (possibly stale) joint profile, a tuple of primal points.
    dims : sequence of int
        Matrix dimension of each agent.
    schedule : UpdateSchedule
    delays : DelayModel
    tau : float
        Discount parameter.
    step : StepSchedule, optional
        Defaults to the harmonic schedule ``gamma_m = 1/m``.
    seed : int
        Seed of the generator handed to the oracles.
    record_every : int
        Record one joint state every this many epochs (plus first and last).

    Returns
    -------
    AsyncTrajectory
    """
    if len(oracles) != schedule.n_agents or len(dims) != schedule.n_agents:
        raise ConfigError("need one oracle and one dimension per agent")
    step = step or StepSchedule("harmonic", 1.0)
    rng = np.random.default_rng(seed)
    table = delays.realize(schedule.horizon, schedule.n_agents)
    state = MultiAgentState.initial(dims)
    history = deque(state.history, maxlen=delays.max_delay + 1)
    states = [state]
    used = []
    sets = []
    for n in range(1, schedule.horizon + 1):
        active = next_update_set(schedule, n)
        sets.append(active)
        state = replace(state, epoch=n, active=active)
        for k in sorted(active):
            d = min(int(table[n - 1, k]), len(history) - 1)
            profile = history[-1 - d]
            used.append((n, k, d))
            state = async_step(state, k, oracles[k](profile, n, rng), step, tau)
        history.append(state.profile)
        state = replace(state, history=tuple(history))
        if n % record_every == 0 or n == schedule.horizon:
            states.append(state)
    return AsyncTrajectory(states, schedule.times, used, sets)
