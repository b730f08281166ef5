"""
Core data model and evaluation functions of the parallel multiple-access game.

K transmitters share S orthogonal channels. Each transmitter splits (or,
in the channel-selection game, concentrates) its power budget across the
channels and is scored by its single-user-decoding spectral efficiency.

Types are immutable value objects; the evaluation functions are pure.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from pmac.config import Tolerances
from pmac.errors import InfeasibleProfileError, StructuralError

_LN2 = np.log(2.0)


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise StructuralError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StructuralError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


# =============================================================================
# Configuration and channel state
# =============================================================================

@dataclass(frozen=True, eq=False)
class GameConfig:
    """Static parameters of a game instance.

    Attributes:
        num_players: K
        num_channels: S
        max_power: Per-player power budgets p_{k,max} (W), length K
        noise_density: N0 (W/Hz)
        bandwidths: Per-channel bandwidths B_s (Hz), length S
    """
    num_players: int
    num_channels: int
    max_power: np.ndarray
    noise_density: float
    bandwidths: np.ndarray

    def __post_init__(self):
        if int(self.num_players) < 1 or int(self.num_channels) < 1:
            raise StructuralError(f"need K >= 1 and S >= 1, got K={self.num_players}, S={self.num_channels}")
        object.__setattr__(self, "num_players", int(self.num_players))
        object.__setattr__(self, "num_channels", int(self.num_channels))
        max_power = np.broadcast_to(np.asarray(self.max_power, dtype=float), (self.num_players,))
        bandwidths = np.broadcast_to(np.asarray(self.bandwidths, dtype=float), (self.num_channels,))
        object.__setattr__(self, "max_power", _frozen_array(max_power, 1, "max_power"))
        object.__setattr__(self, "bandwidths", _frozen_array(bandwidths, 1, "bandwidths"))
        object.__setattr__(self, "noise_density", float(self.noise_density))
        if np.any(self.max_power <= 0):
            raise StructuralError("max_power entries must be positive")
        if np.any(self.bandwidths <= 0):
            raise StructuralError("bandwidths must be positive")
        if not (np.isfinite(self.noise_density) and self.noise_density > 0):
            raise StructuralError("noise_density must be positive")

    # -------------------------------------------------------------------------
    # Constructors
    # -------------------------------------------------------------------------

    @classmethod
    def uniform(cls, num_players: int, num_channels: int, p_max: float = 1.0,
                noise_density: float = 1.0, bandwidth: float = 1.0) -> "GameConfig":
        """Equal budgets and equal per-channel bandwidths."""
        return cls(num_players, num_channels, p_max, noise_density, bandwidth)

    @classmethod
    def for_channel_snr(cls, num_players: int, num_channels: int, snr: float,
                        p_max: float = 1.0) -> "GameConfig":
        """Equal 1 Hz channels with p_max / sigma^2_s == snr on every channel."""
        if snr <= 0:
            raise StructuralError(f"snr must be positive, got {snr}")
        return cls(num_players, num_channels, p_max, p_max / snr, 1.0)

    @classmethod
    def for_band_snr_db(cls, num_players: int, num_channels: int, snr_db: float,
                        p_max: float = 1.0,
                        bandwidths: Sequence[float] | None = None) -> "GameConfig":
        """Set N0 so that 10 log10(p_max / (N0 B)) == snr_db over the total band.

        Args:
            bandwidths: Per-channel bandwidths; defaults to S channels of 1/S Hz
        """
        if bandwidths is None:
            bandwidths = np.full(num_channels, 1.0 / num_channels)
        total = float(np.sum(bandwidths))
        noise_density = p_max / (10.0 ** (snr_db / 10.0) * total)
        return cls(num_players, num_channels, p_max, noise_density, bandwidths)

    # -------------------------------------------------------------------------
    # Derived quantities
    # -------------------------------------------------------------------------

    @cached_property
    def total_bandwidth(self) -> float:
        return float(np.sum(self.bandwidths))

    @cached_property
    def fractions(self) -> np.ndarray:
        """b_s = B_s / B."""
        b = self.bandwidths / self.total_bandwidth
        b.flags.writeable = False
        return b

    @cached_property
    def noise_powers(self) -> np.ndarray:
        """sigma^2_s = N0 B_s."""
        sigma2 = self.noise_density * self.bandwidths
        sigma2.flags.writeable = False
        return sigma2

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_players, self.num_channels

    @property
    def channel_snr(self) -> float:
        """p_max / sigma^2 for configs with one budget and one noise level."""
        if np.ptp(self.max_power) > 0 or np.ptp(self.noise_powers) > 0:
            raise StructuralError("channel_snr needs uniform max_power and uniform noise powers")
        return float(self.max_power[0] / self.noise_powers[0])

    @property
    def band_snr_db(self) -> float:
        """10 log10(p_max / (N0 B)) for configs with one budget."""
        if np.ptp(self.max_power) > 0:
            raise StructuralError("band_snr_db needs uniform max_power")
        return float(10.0 * np.log10(self.max_power[0] / (self.noise_density * self.total_bandwidth)))


@dataclass(frozen=True, eq=False)
class GainMatrix:
    """K x S nonnegative channel power gains g_{k,s} = |h_{k,s}|^2."""
    gains: np.ndarray

    def __post_init__(self):
        gains = _frozen_array(self.gains, 2, "gains")
        if np.any(gains < 0):
            raise StructuralError("channel gains must be nonnegative")
        object.__setattr__(self, "gains", gains)

    @property
    def shape(self) -> tuple[int, int]:
        return self.gains.shape

    def check(self, config: GameConfig) -> None:
        if self.gains.shape != config.shape:
            raise StructuralError(f"gains shape {self.gains.shape} does not match (K, S) = {config.shape}")


# =============================================================================
# Action profiles
# =============================================================================

@dataclass(frozen=True, eq=False)
class PowerProfile:
    """K x S nonnegative power allocation (an action profile of the PA game)."""
    powers: np.ndarray

    def __post_init__(self):
        powers = _frozen_array(self.powers, 2, "powers")
        if np.any(powers < 0):
            raise StructuralError("powers must be nonnegative")
        object.__setattr__(self, "powers", powers)

    @classmethod
    def zeros(cls, config: GameConfig) -> "PowerProfile":
        return cls(np.zeros(config.shape))

    @classmethod
    def uniform(cls, config: GameConfig) -> "PowerProfile":
        """Every player spreads p_{k,max}/S over all channels."""
        return cls(np.repeat(config.max_power[:, None] / config.num_channels, config.num_channels, axis=1))

    @property
    def shape(self) -> tuple[int, int]:
        return self.powers.shape

    def row_sums(self) -> np.ndarray:
        return self.powers.sum(axis=1)

    def is_feasible(self, config: GameConfig, slack: float = Tolerances.feasibility_slack) -> bool:
        return self.shape == config.shape and bool(np.all(self.row_sums() <= config.max_power + slack))

    def check(self, config: GameConfig, slack: float = Tolerances.feasibility_slack) -> None:
        """Raise unless the profile fits the config and respects every budget."""
        if self.shape != config.shape:
            raise StructuralError(f"profile shape {self.shape} does not match (K, S) = {config.shape}")
        excess = self.row_sums() - config.max_power
        if np.any(excess > slack):
            k = int(np.argmax(excess))
            raise InfeasibleProfileError(f"player {k} exceeds its budget by {excess[k]:.3e}")


@dataclass(frozen=True)
class CsProfile:
    """Channel choice per player (an action profile of the CS game).

    Choices are 0-based channel indices; `labels` gives the 1-based form.
    """
    choices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))

    @classmethod
    def from_labels(cls, labels: Iterable[int]) -> "CsProfile":
        """Build from 1-based channel labels, e.g. (1, 2)."""
        return cls(tuple(int(c) - 1 for c in labels))

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.choices)

    def __len__(self) -> int:
        return len(self.choices)

    def check(self, config: GameConfig) -> None:
        if len(self.choices) != config.num_players:
            raise StructuralError(f"profile has {len(self.choices)} choices for K={config.num_players}")
        if any(c < 0 or c >= config.num_channels for c in self.choices):
            raise StructuralError(f"channel index out of range in {self.labels} for S={config.num_channels}")

    def to_power(self, config: GameConfig) -> PowerProfile:
        return cs_to_power(self, config)

    def __str__(self) -> str:
        return "(" + ",".join(str(c) for c in self.labels) + ")"


# =============================================================================
# Equilibrium reports
# =============================================================================

@dataclass(frozen=True)
class NeEntry:
    """One pure equilibrium with its scores."""
    profile: CsProfile
    potential: float
    utilities: tuple[float, ...]
    nse: float
    label: str  # "potential-max" or "local"


@dataclass(frozen=True)
class NeReport:
    """Equilibria of one channel-selection instance.

    `exhaustive` is False when the set comes from best-response descent
    samples rather than full enumeration; the bound then says nothing about
    completeness. Exact ties (`near_ties` > 0) admit weak equilibria beyond
    the bound.
    """
    equilibria: tuple[NeEntry, ...]
    bound: int
    exhaustive: bool = True
    profiles_checked: int = 0
    near_ties: int = 0

    def __post_init__(self):
        object.__setattr__(self, "equilibria", tuple(self.equilibria))
        if self.exhaustive and self.near_ties == 0 and self.count > self.bound:
            raise StructuralError(f"{self.count} equilibria exceed the bound {self.bound}")

    @property
    def count(self) -> int:
        return len(self.equilibria)

    @property
    def profiles(self) -> list[CsProfile]:
        return [e.profile for e in self.equilibria]

    def potential_maximizer(self) -> NeEntry:
        return max(self.equilibria, key=lambda e: e.potential)

    def best_by_nse(self) -> NeEntry:
        return max(self.equilibria, key=lambda e: e.nse)

    def worst_by_nse(self) -> NeEntry:
        return min(self.equilibria, key=lambda e: e.nse)


# =============================================================================
# Evaluation
# =============================================================================

def _checked(profile: PowerProfile, gains: GainMatrix, config: GameConfig) -> np.ndarray:
    gains.check(config)
    profile.check(config)
    return profile.powers * gains.gains


def _check_player(config: GameConfig, k: int) -> None:
    if not 0 <= k < config.num_players:
        raise StructuralError(f"player index {k} out of range for K={config.num_players}")


def sinr_matrix(profile: PowerProfile, gains: GainMatrix, config: GameConfig) -> np.ndarray:
    """K x S matrix of gamma_{k,s} under single-user decoding."""
    received = _checked(profile, gains, config)
    interference = config.noise_powers + (received.sum(axis=0) - received)
    return received / interference


def sinr(profile: PowerProfile, gains: GainMatrix, config: GameConfig, k: int, s: int) -> float:
    """gamma_{k,s} = p_{k,s} g_{k,s} / (sigma^2_s + sum_{j != k} p_{j,s} g_{j,s})."""
    _check_player(config, k)
    if not 0 <= s < config.num_channels:
        raise StructuralError(f"channel index {s} out of range for S={config.num_channels}")
    received = _checked(profile, gains, config)
    if received[k, s] == 0.0:
        return 0.0
    interference = config.noise_powers[s] + (received[:, s].sum() - received[k, s])
    return float(received[k, s] / interference)


def utilities(profile: PowerProfile, gains: GainMatrix, config: GameConfig) -> np.ndarray:
    """Spectral efficiency of every player (bps/Hz)."""
    gamma = sinr_matrix(profile, gains, config)
    return (np.log1p(gamma) / _LN2) @ config.fractions


def utility(profile: PowerProfile, gains: GainMatrix, config: GameConfig, k: int) -> float:
    """u_k = sum_s b_s log2(1 + gamma_{k,s})."""
    _check_player(config, k)
    return float(utilities(profile, gains, config)[k])


def potential(profile: PowerProfile, gains: GainMatrix, config: GameConfig) -> float:
    """phi = sum_s b_s log2(sigma^2_s + sum_k p_{k,s} g_{k,s})."""
    received = _checked(profile, gains, config)
    totals = config.noise_powers + received.sum(axis=0)
    return float(config.fractions @ (np.log(totals) / _LN2))


def nse(profile: PowerProfile, gains: GainMatrix, config: GameConfig) -> float:
    """Network spectral efficiency: the sum of all utilities."""
    return float(np.sum(utilities(profile, gains, config)))


def cs_to_power(cs: CsProfile, config: GameConfig) -> PowerProfile:
    """Row k becomes p_{k,max} on the chosen channel and zero elsewhere."""
    cs.check(config)
    powers = np.zeros(config.shape)
    powers[np.arange(config.num_players), list(cs.choices)] = config.max_power
    return PowerProfile(powers)


def power_to_cs(profile: PowerProfile, config: GameConfig,
                slack: float = Tolerances.feasibility_slack) -> CsProfile:
    """Inverse of cs_to_power; every row must be a saturated single-channel action."""
    profile.check(config, slack)
    choices = []
    for k, row in enumerate(profile.powers):
        positive = np.flatnonzero(row > slack)
        if len(positive) != 1 or abs(row[positive[0]] - config.max_power[k]) > slack:
            raise StructuralError(f"row {k} is not a full-power single-channel action")
        choices.append(int(positive[0]))
    return CsProfile(tuple(choices))
