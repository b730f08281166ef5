"""
Large-system limit of the channel-selection game.

As K grows with B/K -> mu, the potential depends on a profile only through
the fraction x_s of players on each channel. Up to a constant it becomes

    phi~(x) = sum_s b_s log2(mu N0 b_s + x_s p_max Omega_s)

and its maximizer over the simplex is a water-filling over fractions,

    x_s = b_s [w - mu N0 / (p_max Omega_s)]^+,

with one global water level w chosen so that sum_s x_s = 1.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import bisect
from scipy.special import xlogy

from pmac.config import Solver, Tolerances
from pmac.errors import SolverError, StructuralError
from pmac.model import CsProfile, GameConfig

_LN2 = np.log(2.0)


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise StructuralError(f"{name} must be a finite vector")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LargeSystemParams:
    """Limit parameters: bandwidth per player mu, channel fractions b, mean gains Omega."""
    mu: float
    b: np.ndarray
    omega: np.ndarray
    p_max: float = 1.0
    n0: float = 1.0

    def __post_init__(self):
        b = _frozen(self.b, "b")
        omega = _frozen(self.omega, "omega")
        if b.shape != omega.shape:
            raise StructuralError(f"b and omega lengths differ: {b.shape} vs {omega.shape}")
        if np.any(b < 0) or abs(b.sum() - 1.0) > Tolerances.fraction_sum:
            raise StructuralError(f"b must be nonnegative and sum to 1, got sum {b.sum():.15g}")
        if np.any(omega <= 0):
            raise StructuralError("omega entries must be positive")
        if min(self.mu, self.p_max, self.n0) <= 0:
            raise StructuralError("mu, p_max and n0 must be positive")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def from_config(cls, config: GameConfig, omega: Sequence[float] | None = None) -> "LargeSystemParams":
        """Limit parameters matching a finite game (mu = B/K); Omega defaults to 1."""
        if np.ptp(config.max_power) > 0:
            raise StructuralError("the large-system limit needs a single p_max")
        omega = np.ones(config.num_channels) if omega is None else omega
        return cls(mu=config.total_bandwidth / config.num_players, b=config.fractions, omega=omega,
                   p_max=float(config.max_power[0]), n0=config.noise_density)

    @property
    def num_channels(self) -> int:
        return len(self.b)

    @property
    def floors(self) -> np.ndarray:
        """mu N0 / (p_max Omega_s): the water level a channel needs before it gets players."""
        return self.mu * self.n0 / (self.p_max * self.omega)


@dataclass(frozen=True, eq=False)
class FractionVector:
    """Share of players on each channel."""
    x: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x, "x")
        if np.any(x < 0):
            raise StructuralError("fractions must be nonnegative")
        object.__setattr__(self, "x", x)

    def is_normalized(self, tol: float = Tolerances.fraction_sum) -> bool:
        return abs(float(self.x.sum()) - 1.0) <= tol


def _check_dims(x: FractionVector, params: LargeSystemParams) -> None:
    if x.x.shape != params.b.shape:
        raise StructuralError(f"fraction vector has {len(x.x)} entries for S={params.num_channels}")


def asymptotic_potential(x: FractionVector, params: LargeSystemParams) -> float:
    """sum_s b_s log2(mu N0 b_s + x_s p_max Omega_s)."""
    _check_dims(x, params)
    inner = params.mu * params.n0 * params.b + x.x * params.p_max * params.omega
    # Channels with b_s = 0 contribute nothing, even when empty.
    return float(np.sum(xlogy(params.b, inner)) / _LN2)


def asymptotic_potential_gradient(x: FractionVector, params: LargeSystemParams) -> np.ndarray:
    """Partial derivatives of asymptotic_potential with respect to each x_s."""
    _check_dims(x, params)
    gain = params.p_max * params.omega
    inner = (params.mu * params.n0 * params.b + x.x * gain) * _LN2
    return np.divide(params.b * gain, inner, out=np.zeros_like(inner), where=params.b > 0)


def fraction_kkt_residual(x: FractionVector, params: LargeSystemParams) -> float:
    """Relative KKT violation: spread of the marginals over occupied channels plus any
    empty channel whose marginal beats the smallest occupied one."""
    marginal = asymptotic_potential_gradient(x, params)
    occupied = x.x > 0
    if not occupied.any():
        return float("inf")
    top = float(np.max(marginal[occupied]))
    low = float(np.min(marginal[occupied]))
    spread = (top - low) / top
    if occupied.all():
        return spread
    excess = max(0.0, float(np.max(marginal[~occupied])) - low) / top
    return max(spread, excess)


def solve_fractions(params: LargeSystemParams, tol: float = Solver.kkt_tolerance) -> FractionVector:
    """
    Maximize the asymptotic potential over the simplex.

    Bisection on the water level locates the set of occupied channels; the
    level is then solved exactly on that set so the fractions sum to one to
    rounding.

    Raises:
        SolverError: The bisection or the KKT check failed
    """
    b, floors = params.b, params.floors
    usable = b > 0

    def excess(level: float) -> float:
        return float(np.sum(b * np.maximum(level - floors, 0.0)) - 1.0)

    lo = float(np.min(floors[usable]))
    hi = float(np.max(floors[usable]) + 2.0 / np.min(b[usable]))
    level, info = bisect(excess, lo, hi, xtol=Solver.bisection_tolerance * hi,
                         maxiter=Solver.max_bisection_iters, full_output=True, disp=False)
    if not info.converged:
        width = (hi - lo) / 2.0 ** info.iterations
        raise SolverError("fraction water-level bisection did not converge",
                          bracket=(level - width, level + width), iterations=info.iterations)

    on = usable & (level - floors > 0)
    if not on.any():
        on = usable & (floors == np.min(floors[usable]))
    while True:
        level = (1.0 + np.sum(b[on] * floors[on])) / np.sum(b[on])
        x = np.where(on, b * (level - floors), 0.0)
        if not np.any(x < 0):
            break
        on &= ~(x < 0)

    result = FractionVector(x)
    residual = fraction_kkt_residual(result, params)
    if residual > tol:
        raise SolverError(f"fraction solution violates KKT conditions by {residual:.3e}")
    return result


def empirical_fractions(profile: CsProfile, config: GameConfig) -> FractionVector:
    """Share of players on each channel in a channel-selection profile."""
    profile.check(config)
    counts = np.bincount(np.array(profile.choices, dtype=int), minlength=config.num_channels)
    return FractionVector(counts / config.num_players)
