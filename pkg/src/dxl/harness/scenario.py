"""Scenario and problem configuration documents.

Configurations are JSON objects with a mandatory ``schema`` field.  Unknown
keys are rejected, and every error message names the offending key path (and
the line/column for malformed JSON).

Two document types exist:

``dxl-scenario/1``
    A multi-user MIMO experiment (synchronous, asynchronous, noisy or fading).
``dxl-problem/1``
    An abstract linear semidefinite problem ``min tr(C X)`` for ``solve``.
"""

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..asynchronous import DELAY_KINDS, SCHEDULE_KINDS
from ..errors import ConfigError
from ..fading import FADING_KINDS

SCENARIO_SCHEMA = "dxl-scenario/1"
PROBLEM_SCHEMA = "dxl-problem/1"
NOISE_KINDS = ("none", "additive", "sampled")
ENGINES = ("sync", "async")
BASELINES = ("iwf", "swf")


def _take(doc, path, allowed, required=()):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(doc).__name__}")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"{path or '<root>'}: unknown key(s) {', '.join(unknown)}")
    for key in required:
        if key not in doc:
            raise ConfigError(f"{path or '<root>'}: missing required key {key!r}")
    return doc


def _num(doc, key, path, default=None, positive=False, nonneg=False, integer=False):
    value = doc.get(key, default)
    where = f"{path}.{key}" if path else key
    if value is None:
        raise ConfigError(f"{where}: missing value")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{where}: must be positive, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(f"{where}: must be non-negative, got {value!r}")
    return int(value) if integer else float(value)


def _choice(doc, key, path, choices, default):
    value = doc.get(key, default)
    if value not in choices:
        raise ConfigError(f"{path}.{key}: expected one of {list(choices)}, got {value!r}")
    return value


@dataclass(frozen=True)
class SystemSpec:
    K: int
    N: int
    M: object  # int, list of ints, or ("uniform", lo, hi)
    P: object  # float or list of floats

    def antennas(self, rng):
        if isinstance(self.M, int):
            return [self.M] * self.K
        if isinstance(self.M, tuple):
            _, lo, hi = self.M
            return [int(m) for m in rng.integers(lo, hi + 1, size=self.K)]
        return list(self.M)

    def powers(self):
        return np.full(self.K, self.P, dtype=float) if np.isscalar(self.P) else np.asarray(self.P, float)


@dataclass(frozen=True)
class FadingSpec:
    kind: str = "static"
    carrier_hz: float = 2e9
    velocity_mps: float = 5 / 3.6
    period_s: float = 3e-3
    oscillators: int = 16


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str = "harmonic"
    gamma0: float = 1.0
    exponent: float = 1.0


@dataclass(frozen=True)
class SolverSpec:
    tau: float = 1e-3
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    residual_tol: float = 0.0


@dataclass(frozen=True)
class UpdateSpec:
    kind: str = "all-at-once"
    rates: tuple = ()


@dataclass(frozen=True)
class DelaySpec:
    kind: str = "zero"
    max_delay: int = 0


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    eta: float = 0.0
    signal_samples: int = 0
    channel_samples: int = 0
    estimator: str = "all-distinct"


@dataclass(frozen=True)
class ExtremaSpec:
    tol: float = 1e-8
    starts: int = 5
    min_restarts: int = 1000
    pinned_max: object = None
    pinned_min: object = None


@dataclass(frozen=True)
class Scenario:
    name: str
    system: SystemSpec
    fading: FadingSpec = field(default_factory=FadingSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    schedule: UpdateSpec = field(default_factory=UpdateSpec)
    delays: DelaySpec = field(default_factory=DelaySpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    extrema: ExtremaSpec = field(default_factory=ExtremaSpec)
    baselines: tuple = ()
    engine: str = "sync"
    sweep: tuple = ()  # (parameter, values)
    iters: int = 100
    seed: int = 0

    def canonical(self):
        """Canonical JSON text of the resolved configuration."""
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"), default=list)

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def points(self):
        """Expand the sweep into concrete single-run scenarios."""
        if not self.sweep:
            return [self]
        param, values = self.sweep
        runs = []
        for v in values:
            if param == "tau":
                s = replace(self, solver=replace(self.solver, tau=v), sweep=())
            elif param == "K":
                s = replace(self, system=replace(self.system, K=int(v)), sweep=())
            else:
                s = replace(self, noise=replace(self.noise, eta=v), sweep=())
            runs.append(replace(s, name=f"{self.name}-{param}={v:g}"))
        return runs


@dataclass(frozen=True)
class Problem:
    """Abstract linear problem ``min tr(C X) + tau tr(X log X)``."""

    name: str
    C: np.ndarray
    solver: SolverSpec
    noise_eta: float = 0.0
    iters: int = 1000
    seed: int = 0

    def canonical(self):
        doc = {
            "name": self.name,
            "C": [[[z.real, z.imag] for z in row] for row in np.asarray(self.C)],
            "solver": asdict(self.solver),
            "noise_eta": self.noise_eta,
            "iters": self.iters,
            "seed": self.seed,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _parse_system(doc):
    _take(doc, "system", ("K", "N", "M", "P"), required=("K", "N", "M"))
    K = _num(doc, "K", "system", positive=True, integer=True)
    N = _num(doc, "N", "system", positive=True, integer=True)
    M = doc["M"]
    if isinstance(M, dict):
        _take(M, "system.M", ("uniform",), required=("uniform",))
        bounds = M["uniform"]
        if not (isinstance(bounds, list) and len(bounds) == 2
                and all(isinstance(b, int) and not isinstance(b, bool) for b in bounds)):
            raise ConfigError("system.M.uniform: expected [lo, hi] integers")
        lo, hi = bounds
        if not 1 <= lo <= hi:
            raise ConfigError("system.M.uniform: need 1 <= lo <= hi")
        M = ("uniform", lo, hi)
    elif isinstance(M, list):
        if len(M) != K or any(not isinstance(m, int) or m < 1 for m in M):
            raise ConfigError("system.M: explicit list needs K positive integers")
        M = tuple(M)
    elif not isinstance(M, int) or isinstance(M, bool) or M < 1:
        raise ConfigError(f"system.M: expected an integer, list or {{'uniform': [lo, hi]}}, got {M!r}")
    P = doc.get("P", 1.0)
    if isinstance(P, list):
        if len(P) != K or any(not isinstance(p, (int, float)) or p <= 0 for p in P):
            raise ConfigError("system.P: explicit list needs K positive numbers")
        P = tuple(float(p) for p in P)
    else:
        P = _num(doc, "P", "system", default=1.0, positive=True)
    return SystemSpec(K, N, M, P)


def _parse_solver(doc):
    _take(doc, "solver", ("tau", "schedule", "residual_tol"))
    sched = doc.get("schedule", {})
    _take(sched, "solver.schedule", ("kind", "gamma0", "exponent"))
    schedule = ScheduleSpec(
        kind=_choice(sched, "kind", "solver.schedule", ("constant", "harmonic", "power"), "harmonic"),
        gamma0=_num(sched, "gamma0", "solver.schedule", default=1.0, positive=True),
        exponent=_num(sched, "exponent", "solver.schedule", default=1.0, positive=True),
    )
    tau = _num(doc, "tau", "solver", default=1e-3, positive=True)
    if schedule.kind == "constant" and schedule.gamma0 * tau >= 1:
        raise ConfigError("solver: constant step needs gamma0 < 1/tau")
    return SolverSpec(tau, schedule, _num(doc, "residual_tol", "solver", default=0.0, nonneg=True))


def _parse_fading(doc):
    _take(doc, "fading", ("kind", "carrier_hz", "velocity_mps", "velocity_kmh", "period_s", "oscillators"))
    if "velocity_kmh" in doc and "velocity_mps" in doc:
        raise ConfigError("fading: give velocity_mps or velocity_kmh, not both")
    v = (
        _num(doc, "velocity_kmh", "fading", nonneg=True) / 3.6
        if "velocity_kmh" in doc
        else _num(doc, "velocity_mps", "fading", default=5 / 3.6, nonneg=True)
    )
    return FadingSpec(
        kind=_choice(doc, "kind", "fading", FADING_KINDS, "static"),
        carrier_hz=_num(doc, "carrier_hz", "fading", default=2e9, positive=True),
        velocity_mps=v,
        period_s=_num(doc, "period_s", "fading", default=3e-3, positive=True),
        oscillators=_num(doc, "oscillators", "fading", default=16, positive=True, integer=True),
    )


def _parse_noise(doc):
    _take(doc, "noise", ("kind", "eta", "signal_samples", "channel_samples", "estimator"))
    kind = _choice(doc, "kind", "noise", NOISE_KINDS, "none")
    spec = NoiseSpec(
        kind=kind,
        eta=_num(doc, "eta", "noise", default=0.0, nonneg=True),
        signal_samples=_num(doc, "signal_samples", "noise", default=0, nonneg=True, integer=True),
        channel_samples=_num(doc, "channel_samples", "noise", default=0, nonneg=True, integer=True),
        estimator=_choice(doc, "estimator", "noise", ("all-distinct", "pairwise"), "all-distinct"),
    )
    if kind == "sampled" and spec.channel_samples < 2:
        raise ConfigError("noise.channel_samples: sampled feedback needs at least 2")
    return spec


def _parse_extrema(doc):
    _take(doc, "extrema", ("tol", "starts", "min_restarts", "pinned"))
    pinned = doc.get("pinned")
    pmax = pmin = None
    if pinned is not None:
        _take(pinned, "extrema.pinned", ("max", "min"), required=("max", "min"))
        pmax = _num(pinned, "max", "extrema.pinned")
        pmin = _num(pinned, "min", "extrema.pinned")
    return ExtremaSpec(
        tol=_num(doc, "tol", "extrema", default=1e-8, positive=True),
        starts=_num(doc, "starts", "extrema", default=5, positive=True, integer=True),
        min_restarts=_num(doc, "min_restarts", "extrema", default=1000, positive=True, integer=True),
        pinned_max=pmax,
        pinned_min=pmin,
    )


def parse_scenario(doc):
    """Validate a ``dxl-scenario/1`` document and build a :class:`Scenario`."""
    doc = copy.deepcopy(doc)
    _take(
        doc, "",
        ("schema", "name", "system", "fading", "solver", "schedule", "delays", "noise",
         "extrema", "baselines", "engine", "sweep", "iters", "seed"),
        required=("schema", "name", "system"),
    )
    if doc["schema"] != SCENARIO_SCHEMA:
        raise ConfigError(f"schema: expected {SCENARIO_SCHEMA!r}, got {doc['schema']!r}")
    name = doc["name"]
    if not isinstance(name, str) or not name or "/" in name:
        raise ConfigError("name: expected a non-empty string without '/'")
    system = _parse_system(doc["system"])

    sched = doc.get("schedule", {})
    _take(sched, "schedule", ("kind", "rates"))
    rates = tuple(float(r) for r in sched.get("rates", ()))
    update = UpdateSpec(_choice(sched, "kind", "schedule", SCHEDULE_KINDS, "all-at-once"), rates)
    if update.kind == "poisson" and rates and (len(rates) != system.K or min(rates) <= 0):
        raise ConfigError("schedule.rates: need K positive rates")

    delays = doc.get("delays", {})
    _take(delays, "delays", ("kind", "max_delay"))
    delay = DelaySpec(
        _choice(delays, "kind", "delays", DELAY_KINDS, "zero"),
        _num(delays, "max_delay", "delays", default=0, nonneg=True, integer=True),
    )

    baselines = doc.get("baselines", [])
    if not isinstance(baselines, list) or any(b not in BASELINES for b in baselines):
        raise ConfigError(f"baselines: expected a subset of {list(BASELINES)}, got {baselines!r}")

    sweep = doc.get("sweep")
    sweep_spec = ()
    if sweep is not None:
        _take(sweep, "sweep", ("tau", "K", "eta"))
        if len(sweep) != 1:
            raise ConfigError("sweep: exactly one parameter may be swept")
        (param, values), = sweep.items()
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{param}: expected a non-empty list")
        for v in values:
            _num({param: v}, param, "sweep", positive=param != "eta", nonneg=True)
        sweep_spec = (param, tuple(values))
        if param == "K" and (isinstance(doc["system"]["M"], list) or isinstance(doc["system"].get("P"), list)):
            raise ConfigError("sweep.K: per-user M or P lists cannot follow a varying K")

    scenario = Scenario(
        name=name,
        system=system,
        fading=_parse_fading(doc.get("fading", {})),
        solver=_parse_solver(doc.get("solver", {})),
        schedule=update,
        delays=delay,
        noise=_parse_noise(doc.get("noise", {})),
        extrema=_parse_extrema(doc.get("extrema", {})),
        baselines=tuple(baselines),
        engine=_choice(doc, "engine", "", ENGINES, "sync"),
        sweep=sweep_spec,
        iters=_num(doc, "iters", "", default=100, positive=True, integer=True),
        seed=_num(doc, "seed", "", default=0, nonneg=True, integer=True),
    )
    if sweep_spec and sweep_spec[0] == "tau" and scenario.solver.schedule.kind == "constant":
        if max(sweep_spec[1]) * scenario.solver.schedule.gamma0 >= 1:
            raise ConfigError("sweep.tau: constant step needs gamma0 < 1/tau for every tau")
    return scenario


def parse_problem(doc):
    """Validate a ``dxl-problem/1`` document and build a :class:`Problem`.

    ``problem.C`` is either a real matrix (list of rows), a complex matrix
    given as ``{"re": rows, "im": rows}``, or ``{"random": {"dim", "bound"}}``.
    """
    doc = copy.deepcopy(doc)
    _take(doc, "", ("schema", "name", "problem", "solver", "noise", "iters", "seed"),
          required=("schema", "name", "problem"))
    if doc["schema"] != PROBLEM_SCHEMA:
        raise ConfigError(f"schema: expected {PROBLEM_SCHEMA!r}, got {doc['schema']!r}")
    seed = _num(doc, "seed", "", default=0, nonneg=True, integer=True)
    prob = _take(doc["problem"], "problem", ("C",), required=("C",))
    C = prob["C"]
    if isinstance(C, dict) and "random" in C:
        _take(C, "problem.C", ("random",))
        spec = _take(C["random"], "problem.C.random", ("dim", "bound"), required=("dim",))
        from ..hermitian import random_hermitian

        C = random_hermitian(
            _num(spec, "dim", "problem.C.random", positive=True, integer=True),
            _num(spec, "bound", "problem.C.random", default=1.0, positive=True),
            seed,
        )
    elif isinstance(C, dict):
        _take(C, "problem.C", ("re", "im"), required=("re",))
        C = np.asarray(C["re"], float) + 1j * np.asarray(C.get("im", 0.0), float)
    else:
        C = np.asarray(C, dtype=float).astype(complex)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ConfigError(f"problem.C: expected a square matrix, got shape {C.shape}")
    if not np.allclose(C, C.conj().T, atol=1e-12):
        raise ConfigError("problem.C: matrix is not Hermitian")
    noise = doc.get("noise", {})
    _take(noise, "noise", ("kind", "eta"))
    kind = _choice(noise, "kind", "noise", ("none", "additive"), "none")
    eta = _num(noise, "eta", "noise", default=0.0, nonneg=True) if kind == "additive" else 0.0
    return Problem(
        name=doc["name"],
        C=C,
        solver=_parse_solver(doc.get("solver", {})),
        noise_eta=eta,
        iters=_num(doc, "iters", "", default=1000, positive=True, integer=True),
        seed=seed,
    )


def load_json(path):
    """Read a JSON file, turning syntax errors into line-level diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_config(path):
    """Load either document type, dispatching on its ``schema`` field."""
    doc = load_json(path)
    schema = doc.get("schema") if isinstance(doc, dict) else None
    try:
        if schema == PROBLEM_SCHEMA:
            return parse_problem(doc)
        if schema == SCENARIO_SCHEMA:
            return parse_scenario(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: schema must be {SCENARIO_SCHEMA!r} or {PROBLEM_SCHEMA!r}, got {schema!r}")


def apply_overrides(config, seed=None, iters=None, tau=None):
    """Return ``config`` with command-line overrides applied.

    A ``tau`` override replaces any ``tau`` sweep.  Works for both
    :class:`Scenario` and :class:`Problem`.
    """
    changes = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"--seed: must be non-negative, got {seed}")
        changes["seed"] = seed
    if iters is not None:
        if iters < 1:
            raise ConfigError(f"--iters: must be positive, got {iters}")
        changes["iters"] = iters
    if tau is not None:
        if not tau > 0:
            raise ConfigError(f"--tau: must be positive, got {tau}")
        sched = config.solver.schedule
        if sched.kind == "constant" and sched.gamma0 * tau >= 1:
            raise ConfigError("--tau: constant step needs gamma0 < 1/tau")
        changes["solver"] = replace(config.solver, tau=tau)
        if isinstance(config, Scenario) and config.sweep and config.sweep[0] == "tau":
            changes["sweep"] = ()
    return replace(config, **changes)
