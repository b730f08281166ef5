"""
Pytest configuration for pmac tests.

Fixtures build small instances from fixed seeds; loguru sinks installed by
a test are removed after it.
"""
import numpy as np
import pytest

from pmac.analytic import ChannelQuad
from pmac.model import GainMatrix, GameConfig
from pmac.schema import dump_instance
from pmac.sim_utils.logging import reset_logging


@pytest.fixture(autouse=True)
def _isolated_logging():
    yield
    reset_logging()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def b8_quad():
    """Quad whose power-allocation equilibrium lies in B8 at SNR 1."""
    return ChannelQuad(1.0, 2.0, 3.0, 4.0)


@pytest.fixture
def b5_quad():
    """Quad inside B5 (and B'5) at 20, 30 and 40 dB."""
    return ChannelQuad(1.0, 0.5, 2.0, 1.5)


@pytest.fixture
def small_instance():
    """K=3, S=2 instance with distinct gains."""
    config = GameConfig.uniform(3, 2, p_max=1.0, noise_density=0.1)
    gains = GainMatrix([[1.2, 0.4], [0.3, 2.0], [0.9, 0.8]])
    return config, gains


@pytest.fixture
def instance_file(tmp_path, small_instance):
    path = tmp_path / "instance.json"
    dump_instance(path, *small_instance)
    return path


def random_instance(rng: np.random.Generator, max_players: int = 4, max_channels: int = 3,
                    snr: float | None = None) -> tuple[GameConfig, GainMatrix]:
    """Rayleigh instance with random K, S, budgets and bandwidths."""
    k = int(rng.integers(1, max_players + 1))
    s = int(rng.integers(1, max_channels + 1))
    if snr is None:
        config = GameConfig(k, s, rng.uniform(0.5, 2.0, k), rng.uniform(0.05, 1.0), rng.uniform(0.5, 2.0, s))
    else:
        config = GameConfig.for_channel_snr(k, s, snr)
    gains = GainMatrix(rng.exponential(1.0, (k, s)))
    return config, gains
