import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dxl.errors import DimensionError, DomainError
from dxl.fading import FadingProcess, fading_sample
from dxl.hermitian import trace_inner
from dxl.mimo import (
    ChannelState,
    EfficiencyWarning,
    aggregate_covariance,
    efficiency,
    mui_matrix,
    random_channel,
    rate_gradient,
    sum_rate,
    sum_rate_potential,
    uniform_profile,
    user_rate,
    user_rates,
    user_term,
)
from dxl.waterfilling import best_response

from conftest import random_herm, random_point

seeds = st.integers(0, 2**32 - 1)


def scalar_channel(*gains, P=1.0):
    return ChannelState(tuple(np.array([[g]], dtype=complex) for g in gains), P)


ONE = (np.array([[1.0]]),)


def random_instance(seed, K=3, N=3, M=(2, 3, 1)):
    rng = np.random.default_rng(seed)
    channel = random_channel(rng, K, N, M[:K], P=rng.uniform(0.5, 2.0, K))
    return channel, tuple(random_point(rng, m) for m in channel.M)


class TestCovariance:
    def test_single_scalar(self):
        np.testing.assert_allclose(aggregate_covariance(scalar_channel(1.0), ONE), [[2.0]])

    def test_zero_channels(self):
        channel = ChannelState((np.zeros((3, 2)), np.zeros((3, 1))), 1.0)
        np.testing.assert_allclose(aggregate_covariance(channel, uniform_profile(channel)), np.eye(3))
        assert sum_rate_potential(channel, uniform_profile(channel)) == 0.0

    def test_two_scalars(self):
        channel = scalar_channel(1.0, 2.0)
        np.testing.assert_allclose(aggregate_covariance(channel, ONE * 2), [[6.0]])
        np.testing.assert_allclose(mui_matrix(channel, ONE * 2, 0), [[5.0]])

    def test_single_user_has_no_interference(self):
        channel, profile = random_instance(0, K=1)
        np.testing.assert_allclose(mui_matrix(channel, profile, 0), np.eye(3))

    @given(seeds)
    def test_decomposition(self, seed):
        channel, profile = random_instance(seed)
        for k in range(channel.K):
            np.testing.assert_allclose(
                mui_matrix(channel, profile, k) + user_term(channel, profile, k),
                aggregate_covariance(channel, profile), atol=1e-12,
            )

    @given(seeds)
    def test_dominates_identity(self, seed):
        channel, profile = random_instance(seed)
        assert np.linalg.eigvalsh(aggregate_covariance(channel, profile)).min() >= 1 - 1e-12

    def test_dimension_checks(self):
        with pytest.raises(DimensionError):
            ChannelState((np.ones((2, 2)), np.ones((3, 2))), 1.0)
        with pytest.raises(DimensionError):
            aggregate_covariance(scalar_channel(1.0, 1.0), ONE)
        with pytest.raises(DomainError):
            ChannelState((np.ones((2, 2)),), -1.0)


class TestRates:
    def test_scalar_examples(self):
        assert user_rate(scalar_channel(1.0), ONE, 0) == pytest.approx(np.log(2))
        assert sum_rate_potential(scalar_channel(1.0), ONE) == pytest.approx(-np.log(2))
        assert user_rate(scalar_channel(1.0, 2.0), ONE * 2, 0) == pytest.approx(np.log(6) - np.log(5))

    def test_zero_channel_rate(self):
        assert user_rate(scalar_channel(0.0, 2.0), ONE * 2, 0) == 0.0

    @given(seeds)
    def test_non_negative_and_batched(self, seed):
        channel, profile = random_instance(seed)
        rates = user_rates(channel, profile)
        assert min(rates) >= -1e-12
        np.testing.assert_allclose(rates, [user_rate(channel, profile, k) for k in range(channel.K)], atol=1e-12)

    def test_best_response_improves_potential(self):
        for seed in range(20):
            channel, profile = random_instance(seed)
            for k in range(channel.K):
                improved = list(profile)
                improved[k] = best_response(channel, profile, k)
                assert sum_rate_potential(channel, tuple(improved)) <= sum_rate_potential(channel, profile) + 1e-12

    @given(seeds)
    def test_potential_convex_along_segments(self, seed):
        rng = np.random.default_rng(seed)
        channel, a = random_instance(seed)
        b = tuple(random_point(rng, m) for m in channel.M)
        t = np.linspace(0, 1, 21)
        phi = [sum_rate_potential(channel, tuple((1 - s) * x + s * y for x, y in zip(a, b))) for s in t]
        assert np.min(np.diff(phi, 2)) >= -1e-8


class TestGradient:
    def test_scalar(self):
        np.testing.assert_allclose(rate_gradient(scalar_channel(1.0), ONE, 0), [[0.5]])

    def test_zero_channel(self):
        np.testing.assert_allclose(rate_gradient(scalar_channel(0.0, 1.0), ONE * 2, 0), [[0.0]])

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        channel, profile = random_instance(seed)
        h = 1e-5
        for k in range(channel.K):
            G = rate_gradient(channel, profile, k)
            for _ in range(10):
                D = random_herm(rng, channel.M[k])
                plus, minus = list(profile), list(profile)
                plus[k] = profile[k] + h * D
                minus[k] = profile[k] - h * D
                fd = (sum_rate(channel, tuple(plus)) - sum_rate(channel, tuple(minus))) / (2 * h)
                assert fd == pytest.approx(trace_inner(G, D), abs=1e-6)


class TestEfficiency:
    def test_examples(self):
        assert efficiency(3.0, 3.0, 1.0) == 1.0
        assert efficiency(1.0, 3.0, 1.0) == 0.0
        assert efficiency(2.0, 3.0, 1.0) == 0.5

    def test_degenerate(self):
        with pytest.raises(DomainError):
            efficiency(1.0, 1.0, 1.0)

    def test_overshoot_warns_and_clamps(self):
        with pytest.warns(EfficiencyWarning):
            assert efficiency(10.0, 3.0, 1.0) == 1.05

    def test_undershoot_clamps_silently(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert efficiency(0.0, 3.0, 1.0) == 0.0


class TestFading:
    M = (2, 3)

    def test_static_is_time_invariant(self):
        p = FadingProcess("static", seed=3)
        for a, b in zip(fading_sample(p, 3, self.M, 0), fading_sample(p, 3, self.M, 10**6)):
            np.testing.assert_array_equal(a, b)

    def test_jakes_without_motion_is_constant(self):
        p = FadingProcess("jakes", velocity_mps=0.0, seed=1)
        for a, b in zip(fading_sample(p, 3, self.M, 0), fading_sample(p, 3, self.M, 977)):
            np.testing.assert_array_equal(a, b)

    def test_jakes_unit_power(self):
        p = FadingProcess("jakes", carrier_hz=2e9, velocity_mps=5 / 3.6, seed=2)
        power = np.mean([np.abs(fading_sample(p, 2, (2,), t)[0]) ** 2 for t in range(0, 100_000, 1)], axis=0)
        assert np.all((power > 0.95) & (power < 1.05))

    def test_jakes_correlation_decays(self):
        p = FadingProcess("jakes", seed=5)
        h0 = fading_sample(p, 4, (4,), 0)[0]
        near = fading_sample(p, 4, (4,), 1)[0]
        assert np.linalg.norm(near - h0) < 0.5 * np.linalg.norm(h0)
        assert p.doppler_hz == pytest.approx(5 / 3.6 * 2e9 / 2.998e8)

    def test_iid_draws_differ_and_replay(self):
        p = FadingProcess("iid-gaussian", seed=4)
        a, b = fading_sample(p, 2, (2,), 1)[0], fading_sample(p, 2, (2,), 2)[0]
        assert not np.allclose(a, b)
        np.testing.assert_array_equal(a, fading_sample(FadingProcess("iid-gaussian", seed=4), 2, (2,), 1)[0])

    def test_shapes(self):
        out = fading_sample(FadingProcess("jakes"), 3, (1, 4), 7)
        assert [h.shape for h in out] == [(3, 1), (3, 4)]
