"""
Channel sampling and per-trial random streams.

Every trial owns a counter-based (Philox) stream keyed by
(seed, trial index, stream id), so a trial draws the same numbers no matter
which worker runs it or in what order.
"""
import numpy as np

from pmac.analytic import ChannelQuad
from pmac.errors import StructuralError
from pmac.model import GainMatrix


def trial_rng(seed: int, trial_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one trial.

    Args:
        seed: Experiment seed (nonnegative, up to 64 bits)
        trial_index: Draw index within the experiment
        stream: Sub-stream id, for independent uses inside one trial
    """
    if seed < 0 or trial_index < 0 or stream < 0:
        raise StructuralError("seed, trial_index and stream must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial_index, stream])))


def rayleigh_power_gains(shape, rng: np.random.Generator) -> np.ndarray:
    """|h|^2 for h circularly-symmetric complex Gaussian with unit variance."""
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)
    return np.abs(h) ** 2


def sample_gains(num_players: int, num_channels: int, rng: np.random.Generator) -> GainMatrix:
    """K x S i.i.d. Rayleigh power gains (exponential with unit mean)."""
    if num_players < 1 or num_channels < 1:
        raise StructuralError(f"need K >= 1 and S >= 1, got K={num_players}, S={num_channels}")
    return GainMatrix(rayleigh_power_gains((num_players, num_channels), rng))


def sample_quad(rng: np.random.Generator, snr: float = 1.0, p_max: float = 1.0) -> ChannelQuad:
    """A 2x2 Rayleigh instance at linear SNR p_max / sigma^2."""
    g11, g12, g21, g22 = rayleigh_power_gains(4, rng)
    return ChannelQuad.from_snr(g11, g12, g21, g22, snr, p_max)
