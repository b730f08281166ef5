"""
Tests for pmac/sic.py.

Covers:
- Sum-rate identity against the potential
- Order invariance of the sum and telescoping of per-user rates
- Rates at equilibria of both games, including the capped fallback
"""
from unittest.mock import patch

import numpy as np
import pytest

from pmac.errors import StructuralError
from pmac.model import CsProfile, cs_to_power, GainMatrix, GameConfig, nse, potential, PowerProfile
from pmac.pa_solver import PaSolution
from pmac.sic import DecodingOrder, sic_capacity_at_ne, sic_nse, sic_user_rates
from pmac.tests.conftest import random_instance


def _random_profile(rng: np.random.Generator, config: GameConfig) -> PowerProfile:
    shares = rng.dirichlet(np.ones(config.num_channels), size=config.num_players)
    return PowerProfile(shares * config.max_power[:, None] * rng.uniform(0.2, 1.0, (config.num_players, 1)))


class TestDecodingOrder:
    """Test decoding-order validation."""

    def test_permutation_required(self):
        with pytest.raises(StructuralError):
            DecodingOrder((0, 0, 2))

    def test_reversed(self):
        assert DecodingOrder((2, 0, 1)).reversed().order == (1, 0, 2)

    def test_random_is_permutation(self, rng):
        assert sorted(DecodingOrder.random(6, rng).order) == list(range(6))


class TestSicRates:
    """Test per-user SIC rates."""

    def test_identity_over_random_instances(self, rng):
        """Sum rate equals the potential minus the noise constant for every order."""
        for _ in range(200):
            config, gains = random_instance(rng)
            profile = _random_profile(rng, config)
            report = sic_user_rates(profile, gains, config, DecodingOrder.random(config.num_players, rng))
            noise_constant = float(config.fractions @ np.log2(config.noise_powers))
            assert report.sum_rate == pytest.approx(potential(profile, gains, config) - noise_constant,
                                                    abs=1e-10)
            assert report.potential_identity_residual <= 1e-10

    def test_order_changes_split_not_sum(self, small_instance):
        config, gains = small_instance
        profile = PowerProfile.uniform(config)
        forward = sic_user_rates(profile, gains, config)
        backward = sic_user_rates(profile, gains, config, DecodingOrder.identity(3).reversed())
        assert forward.sum_rate == pytest.approx(backward.sum_rate, abs=1e-12)
        assert not np.allclose(forward.per_user_rates, backward.per_user_rates)

    def test_last_decoded_sees_no_interference(self, small_instance):
        """The last player in the order gets its single-user rate."""
        config, gains = small_instance
        profile = PowerProfile.uniform(config)
        report = sic_user_rates(profile, gains, config, DecodingOrder((1, 2, 0)))
        alone = config.fractions @ np.log2(1.0 + profile.powers[0] * gains.gains[0] / config.noise_powers)
        assert report.per_user_rates[0] == pytest.approx(alone)

    def test_single_player_matches_nse(self, rng):
        config = GameConfig.uniform(1, 3, noise_density=0.3)
        gains = GainMatrix(rng.exponential(1.0, (1, 3)))
        profile = PowerProfile([[0.2, 0.5, 0.3]])
        report = sic_user_rates(profile, gains, config)
        assert report.sum_rate == pytest.approx(nse(profile, gains, config))

    def test_sum_at_least_treating_interference_as_noise(self, rng):
        for _ in range(100):
            config, gains = random_instance(rng)
            profile = _random_profile(rng, config)
            assert sic_nse(profile, gains, config) >= nse(profile, gains, config) - 1e-12

    def test_order_length_checked(self, small_instance):
        config, gains = small_instance
        with pytest.raises(StructuralError):
            sic_user_rates(PowerProfile.zeros(config), gains, config, DecodingOrder((1, 0)))


class TestSicAtEquilibrium:
    """Test SIC rates at game equilibria."""

    def test_orthogonal_cs_equilibrium(self):
        """On separated channels SIC gains nothing over the game's own rates."""
        config = GameConfig.uniform(2, 2)
        gains = GainMatrix([[4.0, 1.0], [1.0, 4.0]])
        report = sic_capacity_at_ne(gains, config, "b")
        expected = nse(cs_to_power(CsProfile((0, 1)), config), gains, config)
        assert report.game == "b"
        assert not report.degraded
        assert report.sum_rate == pytest.approx(expected)

    def test_power_allocation_game(self, small_instance):
        config, gains = small_instance
        report = sic_capacity_at_ne(gains, config, "a")
        assert report.game == "a"
        assert not report.degraded
        assert report.potential_identity_residual <= 1e-10

    def test_cap_fallback_is_degraded(self, small_instance):
        config, gains = small_instance
        report = sic_capacity_at_ne(gains, config, "b", cap=4, rng=np.random.default_rng(3))
        assert report.degraded
        assert report.per_user_rates.shape == (3,)

    def test_unconverged_solver_is_degraded(self, small_instance):
        config, gains = small_instance
        stalled = PaSolution(profile=PowerProfile.uniform(config), rounds_used=1, residual=1.0, converged=False)
        with patch("pmac.sic.solve_pa_ne", return_value=stalled):
            report = sic_capacity_at_ne(gains, config, "a")
        assert report.degraded

    def test_unknown_game(self, small_instance):
        config, gains = small_instance
        with pytest.raises(StructuralError):
            sic_capacity_at_ne(gains, config, "c")
