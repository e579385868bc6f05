"""Scenario execution: DXL engines, water-filling baselines and flat-file output."""

import csv
import io
import json
import os
import platform
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..asynchronous import DelayModel, UpdateSchedule, run_async
from ..errors import ConfigError, DomainError
from ..fading import FadingProcess, fading_sample
from ..feedback import additive_noise_oracle, sampled_gradients
from ..hermitian import frobenius
from ..learning import AgentState, StepSchedule, dxl_step, fixed_point_residual
from ..mimo import (
    ChannelState,
    EfficiencyWarning,
    aggregate_covariance,
    efficiency,
    random_channel,
    rate_gradients,
    sum_rate,
    uniform_profile,
    user_rates,
)
from ..waterfilling import best_response, iwf_run, swf_run
from .extrema import Extrema, maximize_sum_rate, minimize_sum_rate, reference_extrema

BASE_COLUMNS = ("iteration", "broadcasts", "time_ms", "sum_rate_nats", "potential", "efficiency")
FADING_COLUMNS = ("max_sum_rate_nats", "uniform_sum_rate_nats")
TARGET_EFFICIENCY = 0.99
MANIFEST_SCHEMA = "dxl-manifest/1"

# Independent random streams derived from the scenario seed.
_CHANNEL, _EXTREMA, _NOISE, _SCHEDULE, _DELAYS, _BASELINE = range(6)


def columns_for(K, fading=False):
    cols = list(BASE_COLUMNS)
    cols += [f"rate_user_{k}" for k in range(1, K + 1)]
    cols += [f"residual_user_{k}" for k in range(1, K + 1)]
    return cols + list(FADING_COLUMNS) if fading else cols


@dataclass
class RunRecord:
    """Per-iteration rows of one run plus its metadata."""

    name: str
    method: str
    columns: list
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        return self.rows[:, self.columns.index(name)]

    @property
    def efficiency(self):
        return self.column("efficiency")

    @property
    def broadcasts(self):
        return self.column("broadcasts")

    def broadcasts_to(self, target=TARGET_EFFICIENCY):
        """First broadcast count with efficiency at least ``target`` (None if never)."""
        hits = np.nonzero(self.efficiency >= target)[0]
        return None if hits.size == 0 else int(self.broadcasts[hits[0]])

    def efficiency_at(self, broadcasts):
        """Efficiency after ``broadcasts`` broadcasts (held after the run ends)."""
        idx = np.searchsorted(self.broadcasts, broadcasts, side="right") - 1
        return float(self.efficiency[max(idx, 0)])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(c, v) for c, v in zip(self.columns, row)])
        return buf.getvalue()


def _fmt(column, value):
    if column in ("iteration", "broadcasts"):
        return str(int(value))
    return repr(float(value))


class _Setup:
    """Concrete channel(s), extrema and noise for one scenario point."""

    def __init__(self, scenario):
        self.scenario = scenario
        system = scenario.system
        rng = np.random.default_rng([scenario.seed, _CHANNEL])
        self.M = system.antennas(rng)
        self.P = system.powers()
        fad = scenario.fading
        self.fading = fad.kind != "static"
        if self.fading:
            self.process = FadingProcess(
                fad.kind, fad.carrier_hz, fad.velocity_mps, fad.period_s, fad.oscillators,
                seed=scenario.seed,
            )
            self._static = None
        else:
            self._static = random_channel(rng, system.K, system.N, self.M, self.P)
        self._extrema = {}
        self._warm = None

    def channel(self, n):
        if self._static is not None:
            return self._static
        return ChannelState(tuple(fading_sample(self.process, self.scenario.system.N, self.M, n)), self.P)

    def extrema(self, n):
        """Reference ``(max, min)`` sum rates for the channel at epoch ``n``."""
        key = 0 if self._static is not None else n
        if key in self._extrema:
            return self._extrema[key]
        spec = self.scenario.extrema
        channel = self.channel(n)
        seed = [self.scenario.seed, _EXTREMA, key]
        if spec.pinned_max is not None and self._static is not None:
            ext = Extrema(spec.pinned_max, spec.pinned_min, None, None, 0.0, False)
        elif self._static is not None:
            ext = reference_extrema(channel, spec.tol, spec.starts, spec.min_restarts, seed)
        else:
            # Consecutive realizations are strongly correlated: warm-start the
            # ascent from the previous maximizer.
            start = self._warm if self._warm is not None else uniform_profile(channel)
            vmax, pmax, res = maximize_sum_rate(channel, start, spec.tol)
            vmin, pmin = minimize_sum_rate(channel, spec.min_restarts, seed)
            self._warm = pmax
            ext = Extrema(vmax, min(vmin, vmax), pmax, pmin, res, res >= spec.tol)
        if ext.degenerate:
            raise DomainError(
                f"degenerate sum-rate range at epoch {n}: max {ext.max_sum_rate} equals min "
                f"{ext.min_sum_rate}, efficiency undefined"
            )
        self._extrema[key] = ext
        return ext

    def time_ms(self, t):
        return 1000.0 * t * self.scenario.fading.period_s


def _row(setup, epoch, iteration, broadcasts, t, profile, residuals):
    channel = setup.channel(epoch)
    ext = setup.extrema(epoch)
    rate = sum_rate(channel, profile)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EfficiencyWarning)
        eff = efficiency(rate, ext.max_sum_rate, ext.min_sum_rate)
    setup.overshoot = getattr(setup, "overshoot", 0) + len(caught)
    rates = user_rates(channel, profile)
    row = [iteration, broadcasts, setup.time_ms(t), rate, -rate, eff, *rates, *residuals]
    if setup.fading:
        row += [ext.max_sum_rate, sum_rate(channel, uniform_profile(channel))]
    return row


def _observe(setup, channel, profile, exact, rng):
    noise = setup.scenario.noise
    if noise.kind == "additive":
        return tuple(additive_noise_oracle(v, noise.eta, rng) for v in exact)
    if noise.kind == "sampled":
        return sampled_gradients(
            channel, profile, noise.signal_samples, noise.channel_samples, noise.eta, rng,
            estimator=noise.estimator,
        )
    return exact


def _step_schedule(scenario):
    s = scenario.solver.schedule
    return StepSchedule(s.kind, s.gamma0, s.exponent)


def _residuals(agents, grads, tau):
    return [
        fixed_point_residual(-g, a.X, tau, log_x=a.log_X) for a, g in zip(agents, grads)
    ]


def _run_sync(setup):
    """Every user updates once per broadcast of the precision matrix."""
    scenario = setup.scenario
    tau = scenario.solver.tau
    step = _step_schedule(scenario)
    rng = np.random.default_rng([scenario.seed, _NOISE])
    agents = [AgentState.initial(m) for m in setup.M]
    rows = []
    for n in range(scenario.iters + 1):
        channel = setup.channel(n)
        profile = tuple(a.X for a in agents)
        exact = rate_gradients(channel, profile)
        rows.append(_row(setup, n, n, n, n, profile, _residuals(agents, exact, tau)))
        if n == scenario.iters:
            break
        observed = _observe(setup, channel, profile, exact, rng)
        gamma = step(n + 1)
        agents = [dxl_step(a, -v, gamma, tau) for a, v in zip(agents, observed)]
    return rows


def _run_async(setup):
    """Users update on private timers against possibly stale broadcasts."""
    scenario = setup.scenario
    K = scenario.system.K
    tau = scenario.solver.tau
    schedule = UpdateSchedule(
        scenario.schedule.kind, K, scenario.iters, scenario.schedule.rates,
        seed=int(np.random.default_rng([scenario.seed, _SCHEDULE]).integers(2**63)),
    )
    delays = DelayModel(
        scenario.delays.kind, scenario.delays.max_delay,
        seed=int(np.random.default_rng([scenario.seed, _DELAYS]).integers(2**63)),
    )
    cache = {}

    def oracle(k):
        def call(profile, n, rng):
            key = (n, id(profile))
            if key not in cache:
                cache.clear()
                channel = setup.channel(n)
                exact = rate_gradients(channel, profile)
                cache[key] = _observe(setup, channel, profile, exact, rng)
            return -cache[key][k]

        return call

    noise_seed = int(np.random.default_rng([scenario.seed, _NOISE]).integers(2**63))
    traj = run_async(
        [oracle(k) for k in range(K)], setup.M, schedule, delays, tau,
        step=_step_schedule(scenario), seed=noise_seed,
    )
    rows = []
    for n, state in enumerate(traj.states):
        channel = setup.channel(n)
        profile = state.profile
        exact = rate_gradients(channel, profile)
        t = 0.0 if n == 0 else traj.times[n - 1]
        rows.append(_row(setup, n, n, n, t, profile, _residuals(state.agents, exact, tau)))
    return rows


def _br_gaps(channel, profile):
    W = aggregate_covariance(channel, profile)
    return [
        frobenius(profile[k] - best_response(channel, profile, k, W=W)) for k in range(channel.K)
    ]


def _baseline_rows(setup, method):
    """IWF counts one broadcast per individual update, SWF one per sweep."""
    scenario = setup.scenario
    channel = setup.channel(0)
    rng = np.random.default_rng([scenario.seed, _BASELINE, BASELINE_IDS[method]])
    eta = scenario.noise.eta if scenario.noise.kind != "none" else 0.0
    start = uniform_profile(channel)
    budget = scenario.iters
    if method == "iwf":
        run = iwf_run(channel, start, max_sweeps=-(-budget // channel.K), eta=eta, rng=rng)
    else:
        run = swf_run(channel, start, max_sweeps=budget, eta=eta, rng=rng)
    profiles = run.profiles[: budget + 1]
    rows = [
        _row(setup, 0, b, b, b, profile, _br_gaps(channel, profile))
        for b, profile in enumerate(profiles)
    ]
    return rows, run.converged


BASELINE_IDS = {"iwf": 0, "swf": 1}


def _metadata(setup, method, started, converged, rows):
    scenario = setup.scenario
    ext = setup.extrema(0)
    final = rows[-1]
    K = scenario.system.K
    return {
        "scenario": scenario.name,
        "scenario_hash": scenario.hash,
        "method": method,
        "seed": scenario.seed,
        "K": K,
        "N": scenario.system.N,
        "M": list(setup.M),
        "tau": scenario.solver.tau,
        "phi_max": ext.max_sum_rate,
        "phi_min": ext.min_sum_rate,
        "extrema_residual": ext.residual,
        "extrema_approximate": bool(ext.approximate),
        "extrema_per_epoch": setup.fading,
        "efficiency_overshoots": getattr(setup, "overshoot", 0),
        "final_efficiency": final[5],
        "final_max_residual": max(final[6 + K: 6 + 2 * K]),
        "converged": bool(converged),
        "wall_time_s": time.perf_counter() - started,
    }


def _dxl_record(setup):
    scenario = setup.scenario
    started = time.perf_counter()
    setup.overshoot = 0
    rows = _run_async(setup) if scenario.engine == "async" else _run_sync(setup)
    K = scenario.system.K
    tol = scenario.solver.residual_tol
    converged = tol == 0 or max(rows[-1][6 + K: 6 + 2 * K]) <= tol
    method = f"dxl-{scenario.engine}"
    return RunRecord(
        scenario.name, method, columns_for(K, setup.fading), np.array(rows, dtype=float),
        _metadata(setup, method, started, converged, rows),
    )


def _check(scenario):
    if scenario.baselines and scenario.fading.kind != "static":
        raise ConfigError("baselines: only supported on static channels")
    if scenario.engine == "sync" and (
        scenario.schedule.kind != "all-at-once" or scenario.delays.kind != "zero"
    ):
        raise ConfigError("engine: sync runs need the all-at-once schedule and zero delays")


def run_point(scenario):
    """Run one (unswept) scenario: DXL first, then each requested baseline."""
    _check(scenario)
    setup = _Setup(scenario)
    records = [_dxl_record(setup)]
    for method in scenario.baselines:
        started = time.perf_counter()
        setup.overshoot = 0
        rows, converged = _baseline_rows(setup, method)
        records.append(
            RunRecord(
                scenario.name, method, columns_for(scenario.system.K), np.array(rows, dtype=float),
                _metadata(setup, method, started, converged, rows),
            )
        )
    return records


def run_scenario(scenario, out=None):
    """Run every sweep point of ``scenario``; optionally write CSVs and a manifest.

    Returns the list of :class:`RunRecord` (one DXL record per sweep point,
    followed by that point's baseline records).
    """
    records = []
    for point in scenario.points():
        records.extend(run_point(point))
    if out is not None:
        write_outputs(records, out, scenario)
    return records


def comparison_table(records):
    """Efficiency of every method on a common broadcasts axis."""
    horizon = int(max(r.broadcasts[-1] for r in records))
    axis = np.arange(horizon + 1)
    table = {"broadcasts": axis}
    for r in records:
        table[r.method] = np.array([r.efficiency_at(b) for b in axis])
    return table


def compare_baselines(scenario, out=None):
    """DXL against IWF/SWF on the gradient-broadcast axis.

    Returns ``(records, table, summary)``; ``summary`` maps each method to
    its broadcasts-to-0.99 count and its final efficiency.
    """
    if not scenario.baselines:
        raise ConfigError("baselines: the scenario lists no baselines to compare")
    if scenario.sweep:
        raise ConfigError("sweep: baseline comparisons take a single scenario point")
    records = run_point(scenario)
    table = comparison_table(records)
    summary = {
        r.method: {
            "broadcasts_to_target": r.broadcasts_to(),
            "final_efficiency": float(r.efficiency[-1]),
            "converged": r.metadata["converged"],
        }
        for r in records
    }
    if out is not None:
        write_outputs(records, out, scenario, table=table, summary=summary)
    return records, table, summary


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def record_filename(record):
    stem = record.name if record.method.startswith("dxl") else f"{record.name}-{record.method}"
    return f"{stem}.csv"


def table_csv(table):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    keys = list(table)
    writer.writerow(keys)
    for i in range(len(table["broadcasts"])):
        writer.writerow([str(int(table[k][i])) if k == "broadcasts" else repr(float(table[k][i])) for k in keys])
    return buf.getvalue()


def write_outputs(records, out, scenario, table=None, summary=None, extra=None):
    """Write one CSV per record, an optional comparison CSV and ``manifest.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    for r in records:
        name = record_filename(r)
        _atomic_write(out / name, r.to_csv())
        runs.append({"csv": name, "rows": len(r.rows), **r.metadata,
                     "broadcasts_to_0.99": r.broadcasts_to()})
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "scenario": scenario.name,
        "scenario_hash": scenario.hash,
        "seed": scenario.seed,
        "config": json.loads(scenario.canonical()),
        "software": {
            "dxl": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "runs": runs,
    }
    if table is not None:
        _atomic_write(out / "comparison.csv", table_csv(table))
        manifest["comparison"] = {"csv": "comparison.csv", "summary": summary}
    if extra:
        manifest.update(extra)
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, default=_json_default) + "\n")
    return out / "manifest.json"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
