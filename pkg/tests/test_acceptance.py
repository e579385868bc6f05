"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (or ``python3 tests/test_acceptance.py``).
The summary lines go straight to the terminal even when pytest captures output.
"""

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from dxl.asynchronous import DelayModel, UpdateSchedule, run_async
from dxl.feedback import (
    ChannelMeasurementModel,
    NoisyOracle,
    SignalSampler,
    sample_covariance,
    unbiased_gradient_alldistinct,
    unbiased_gradient_pairwise,
    unbiased_precision,
)
from dxl.harness.cli import main as cli_main
from dxl.harness.runner import compare_baselines, run_scenario
from dxl.harness.scenario import load_config
from dxl.hermitian import dagger, frobenius, herm_pow, random_hermitian, trace_inner
from dxl.learning import (
    LinearOracle,
    SolverConfig,
    StepSchedule,
    gibbs_solution,
    integrate_primal_flow,
    solve,
)
from dxl.mimo import aggregate_covariance, random_channel, rate_gradient, sum_rate

from conftest import random_herm, random_point, se_band

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
TAUS = (0.01, 0.1, 1.0)
N_PROBLEMS = 50


def problems():
    """The 50 seeded linear objectives, dimensions cycling through 2..6."""
    return [random_hermitian(2 + i % 5, 1.0, 1000 + i) for i in range(N_PROBLEMS)]


@contextmanager
def criterion(capsys, label):
    ok = False
    try:
        yield
        ok = True
    finally:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {label}")


class TestAcceptance:
    def test_01_gibbs_fixed_point(self, capsys):
        with criterion(capsys, "1 gibbs fixed point (50 problems x 3 tau, 1e-6, <=1e4 iters, <30 s)"):
            start = time.perf_counter()
            worst, longest = 0.0, 0
            for C in problems():
                for tau in TAUS:
                    config = SolverConfig(tau, StepSchedule("harmonic", 1 / tau), max_iters=10_000)
                    traj = solve(LinearOracle(C), C.shape[0], config)
                    worst = max(worst, frobenius(traj.final.X - gibbs_solution(C, tau)))
                    longest = max(longest, traj.final.iter)
            elapsed = time.perf_counter() - start
            assert worst <= 1e-6, worst
            assert longest <= 10_000
            assert elapsed < 30, elapsed

    def test_02_stochastic_convergence(self, capsys):
        label = "2 noisy convergence (eta=1, 20 seeds, 1e5 iters, seed-averaged iterate <=1e-2, <5 min)"
        with criterion(capsys, label):
            start = time.perf_counter()
            seeds = 20
            averaged, spread = [], []
            by_dim = {}
            for C in problems():
                by_dim.setdefault(C.shape[0], []).append(C)
            for dim, Cs in by_dim.items():
                # batch axis: problem x tau x seed, every entry with its own noise stream
                shape = (len(Cs), len(TAUS), seeds)
                C = np.broadcast_to(np.stack(Cs)[:, None, None], shape + (dim, dim)).reshape(-1, dim, dim)
                tau = np.broadcast_to(np.array(TAUS)[None, :, None], shape).reshape(-1, 1, 1)
                config = SolverConfig(tau, StepSchedule("harmonic", 1 / tau), max_iters=100_000,
                                      residual_tol=0.0, seed=dim, record_every=100_000)
                traj = solve(NoisyOracle(LinearOracle(C), 1.0), dim, config, batch=(len(C),))
                X = traj.final.X.reshape(shape + (dim, dim))
                G = gibbs_solution(C, tau).reshape(shape + (dim, dim))
                averaged.append(frobenius(X.mean(axis=2) - G[:, :, 0]).max())
                spread.append(frobenius(X - G).mean(axis=2).max())
            elapsed = time.perf_counter() - start
            with capsys.disabled():
                print(f"\n  seed-averaged error {max(averaged):.3g}, mean per-seed error "
                      f"{max(spread):.3g}, {elapsed:.0f} s")
            assert max(averaged) <= 1e-2, max(averaged)
            assert elapsed < 300, elapsed

    def test_03_matrix_jensen(self, capsys):
        with criterion(capsys, "3 matrix Jensen (1e4 triples, no violation below -1e-9)"):
            rng = np.random.default_rng(3)
            worst = np.inf
            for _ in range(10_000):
                n = int(rng.integers(1, 7))
                X = random_point(rng, n, floor=1e-3)
                W = random_herm(rng, n, scale=float(rng.uniform(0.1, 10)))
                s = rng.uniform()
                lhs = trace_inner(herm_pow(X, 1 - s) @ W @ herm_pow(X, s), W)
                worst = min(worst, lhs - trace_inner(X, W) ** 2)
            assert worst >= -1e-9, worst

    def test_04_lyapunov(self, capsys):
        with criterion(capsys, "4 Lyapunov decrease (20 objectives, per-step slack 1e-9)"):
            worst = -np.inf
            for i in range(20):
                C = random_hermitian(2 + i % 4, 1.0, 400 + i)
                tau = (0.1, 1.0)[i % 2]
                values, _ = integrate_primal_flow(C, tau, dt=1e-2, max_steps=5_000)
                worst = max(worst, np.diff(values).max())
            assert worst <= 1e-9, worst

    def test_05_estimators_unbiased(self, capsys):
        with criterion(capsys, "5 estimator unbiasedness (1e5 trials, 3 SE) and naive-inverse bias witness"):
            start = time.perf_counter()
            trials, chunk = 100_000, 10_000
            failures = []
            for N in (2, 4):
                for S in sorted({N + 2, 2 * N, 8 * N}):
                    rng = np.random.default_rng([5, N, S])
                    channel = random_channel(rng, 2, N, 2, 1.0)
                    profile = tuple(random_point(rng, 2, floor=0.1) for _ in range(2))
                    W = aggregate_covariance(channel, profile)
                    H = channel.H[0]
                    sampler = SignalSampler(channel, profile, S, seed=rng)
                    meter = ChannelMeasurementModel(H, 0.5, seed=rng)
                    parts = {"P": [], "naive": [], "pairwise": [], "alldistinct": []}
                    for _ in range(trials // chunk):
                        W_hat = sample_covariance(sampler.draw(chunk))
                        P_hat = unbiased_precision(W_hat, S, N)
                        Hs = meter.measure(3, chunk)
                        parts["P"].append(P_hat)
                        parts["naive"].append(np.linalg.inv(W_hat))
                        parts["pairwise"].append(unbiased_gradient_pairwise(Hs, P_hat))
                        parts["alldistinct"].append(unbiased_gradient_alldistinct(Hs, P_hat))
                    draws = {k: np.concatenate(v) for k, v in parts.items()}
                    precision = np.linalg.inv(W)
                    gram = dagger(H) @ precision @ H
                    for name, truth in (("P", precision), ("pairwise", gram), ("alldistinct", gram)):
                        z = se_band(draws[name], truth).max()
                        if z >= 3:
                            failures.append((N, S, name, z))
                    if se_band(draws["naive"], precision).max() < 3:
                        failures.append((N, S, "naive inverse inside band", None))
            elapsed = time.perf_counter() - start
            assert not failures, failures
            assert elapsed < 120, elapsed

    def test_06_gradient_finite_differences(self, capsys):
        with criterion(capsys, "6 rate gradient vs central differences (100 instances, 1e-6)"):
            rng = np.random.default_rng(6)
            h = 1e-5
            worst = 0.0
            for _ in range(100):
                K, N = int(rng.integers(1, 5)), int(rng.integers(1, 6))
                M = rng.integers(1, 5, size=K)
                channel = random_channel(rng, K, N, M, rng.uniform(0.1, 10, size=K))
                profile = tuple(random_point(rng, m, floor=0.1) for m in M)
                k = int(rng.integers(K))
                G = rate_gradient(channel, profile, k)
                D = random_herm(rng, M[k])
                shifted = [list(profile), list(profile)]
                shifted[0][k] = profile[k] + h * D
                shifted[1][k] = profile[k] - h * D
                fd = (sum_rate(channel, shifted[0]) - sum_rate(channel, shifted[1])) / (2 * h)
                worst = max(worst, abs(fd - trace_inner(G, D)))
            assert worst <= 1e-6, worst

    def test_07_discount_sweep(self, capsys):
        with criterion(capsys, "7 discount sweep (efficiency non-increasing in tau, tau=1e-3 >= 0.99)"):
            records = run_scenario(load_config(SCENARIOS / "discount-sweep.json"))
            taus = [r.metadata["tau"] for r in records]
            final = [r.efficiency[-1] for r in records]
            assert taus == sorted(taus)
            assert np.all(np.diff(final) <= 0), final
            assert final[0] >= 0.99, final

    def test_08_scaling_and_baselines(self, capsys):
        with criterion(capsys, "8 K scaling (0.99 within 10 broadcasts) and IWF slower than DXL at K=25"):
            records = run_scenario(load_config(SCENARIOS / "k-scaling.json"))
            assert [r.metadata["K"] for r in records] == [10, 25, 50, 100]
            needed = [r.broadcasts_to(0.99) for r in records]
            assert all(b is not None and b <= 10 for b in needed), needed
            _, _, summary = compare_baselines(load_config(SCENARIOS / "baselines.json"))
            dxl, iwf = summary["dxl-sync"]["broadcasts_to_target"], summary["iwf"]["broadcasts_to_target"]
            assert dxl is not None
            assert iwf is None or iwf > dxl, (iwf, dxl)

    def test_09_noise_robustness(self, capsys):
        with criterion(capsys, "9 noise robustness at eta=1 (gain >= 0.3 and above SWF at broadcast 500)"):
            records, _, _ = compare_baselines(load_config(SCENARIOS / "noisy.json"))
            dxl = next(r for r in records if r.method == "dxl-sync")
            swf = next(r for r in records if r.method == "swf")
            at500 = dxl.efficiency_at(500)
            assert at500 >= dxl.efficiency[0] + 0.3, (at500, dxl.efficiency[0])
            assert at500 > swf.efficiency_at(500), (at500, swf.efficiency_at(500))

    def test_10_async_equivalence(self, capsys):
        with criterion(capsys, "10 async equivalence (3 schedules x delay 0/3/5, 10 seeds, 1e-3)"):
            tau, horizon = 0.5, 400
            step = StepSchedule("constant", 1.0)
            worst = 0.0
            for seed in range(10):
                Cs = [random_hermitian(d, 1.0, [10, seed, d]) for d in (2, 3)]
                oracles = [lambda profile, n, rng, C=C: C for C in Cs]
                limits = []
                for kind in ("round-robin", "all-at-once", "poisson"):
                    for max_delay in (0, 3, 5):
                        schedule = UpdateSchedule(kind, 2, horizon, seed=seed)
                        delays = DelayModel("uniform-random", max_delay, seed=seed)
                        traj = run_async(oracles, (2, 3), schedule, delays, tau, step=step, seed=seed)
                        limits.append(traj.states[-1].profile)
                for a in limits:
                    for b in limits:
                        worst = max(worst, max(frobenius(x - y) for x, y in zip(a, b)))
            assert worst <= 1e-3, worst

    def test_11_determinism(self, capsys, tmp_path):
        with criterion(capsys, "11 determinism (bitwise-identical CSV on re-run)"):
            commands = {"async.json": "mimo-async", "sampled-feedback.json": "mimo-noisy",
                        "baselines.json": "baseline"}
            for name, command in commands.items():
                outputs = []
                for run in ("a", "b"):
                    out = tmp_path / run / name
                    argv = [command, "--config", str(SCENARIOS / name), "--out", str(out),
                            "--iters", "40", "--quiet"]
                    assert cli_main(argv) == 0
                    outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
                assert outputs[0] and outputs[0] == outputs[1], name


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
