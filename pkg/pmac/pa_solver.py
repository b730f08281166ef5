"""
Nash equilibrium of the power-allocation game by water-filling best responses.

The game is an exact potential game with a strictly concave potential, so
sequential best responses climb the potential and stop at its maximizer,
which is the (almost surely unique) pure equilibrium.
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import bisect

from pmac.config import Solver, Tolerances
from pmac.errors import SolverError, StructuralError
from pmac.model import GainMatrix, GameConfig, PowerProfile
from pmac.sim_utils.logging import LogOnce, log_event

_log_once = LogOnce(period_sec=60)
_LN2 = np.log(2.0)

InitialProfile = PowerProfile | Literal["uniform", "random"]


@dataclass(frozen=True)
class WaterfillParams:
    """Limits for the water-level bisection and the best-response sweeps."""
    bisection_tolerance: float = Solver.bisection_tolerance
    max_bisection_iters: int = Solver.max_bisection_iters
    br_sweep_tolerance: float = Solver.br_sweep_tolerance
    max_rounds: int = Solver.max_rounds

    def __post_init__(self):
        if self.bisection_tolerance <= 0 or self.br_sweep_tolerance <= 0:
            raise StructuralError("tolerances must be positive")
        if self.max_bisection_iters < 1 or self.max_rounds < 1:
            raise StructuralError("iteration caps must be at least 1")


DEFAULT_PARAMS = WaterfillParams()


@dataclass(frozen=True, eq=False)
class WaterfillResult:
    """One player's best response.

    Attributes:
        powers: Length-S allocation
        water_level: 1/beta_k (0 for an inactive player)
        inactive: True when every gain of the player is zero
    """
    powers: np.ndarray
    water_level: float
    inactive: bool = False


@dataclass(frozen=True, eq=False)
class PaSolution:
    """Outcome of best-response dynamics.

    `residual` is the largest max-norm distance between a player's row and
    its water-filling response to the final profile.
    """
    profile: PowerProfile
    rounds_used: int
    residual: float
    converged: bool
    potential_trace: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class PaVerification:
    residuals: np.ndarray
    max_residual: float
    is_ne: bool


# =============================================================================
# Single-player water-filling
# =============================================================================

def _waterfill_row(gain_row: np.ndarray, interference: np.ndarray, weights: np.ndarray,
                   p_max: float, params: WaterfillParams) -> tuple[np.ndarray, float]:
    """Water-fill p_max over channels with positive gain.

    Returns (powers, water_level); the caller handles all-zero gain rows.
    """
    active = gain_row > 0
    floors = interference[active] / gain_row[active]
    w = weights[active]

    def excess(level: float) -> float:
        return float(np.maximum(w * level - floors, 0.0).sum() - p_max)

    lo = float(np.min(floors / w))
    hi = float(np.max(floors / w) + p_max / np.min(w))
    level, info = bisect(excess, lo, hi,
                         xtol=params.bisection_tolerance * max(hi, np.finfo(float).tiny),
                         maxiter=params.max_bisection_iters,
                         full_output=True, disp=False)
    if not info.converged:
        width = (hi - lo) / 2.0 ** info.iterations
        raise SolverError("water-level bisection did not converge",
                          bracket=(level - width, level + width), iterations=info.iterations)

    # Solve the active set exactly so the budget saturates to rounding.
    on = w * level - floors > 0
    if not on.any():
        on = floors / w == np.min(floors / w)
    while True:
        level = (p_max + floors[on].sum()) / w[on].sum()
        alloc = np.where(on, w * level - floors, 0.0)
        negative = alloc < 0
        if not negative.any():
            break
        on &= ~negative

    powers = np.zeros_like(gain_row, dtype=float)
    powers[active] = alloc
    return powers, float(level)


def waterfill_br(gains: GainMatrix, config: GameConfig, k: int, profile: PowerProfile,
                 params: WaterfillParams = DEFAULT_PARAMS) -> WaterfillResult:
    """
    Best response of player k: water-filling against the other rows of `profile`.

    Row k of `profile` is ignored.

    Args:
        gains: Channel gains
        config: Game configuration
        k: Player index (0-based)
        profile: Current profile; supplies the other players' powers
        params: Bisection limits

    Returns:
        WaterfillResult whose powers sum to p_{k,max} unless the player is inactive
    """
    gains.check(config)
    profile.check(config)
    if not 0 <= k < config.num_players:
        raise StructuralError(f"player index {k} out of range for K={config.num_players}")
    received = profile.powers * gains.gains
    interference = config.noise_powers + received.sum(axis=0) - received[k]
    return _best_response(gains.gains[k], interference, config, k, params)


def _best_response(gain_row: np.ndarray, interference: np.ndarray, config: GameConfig,
                   k: int, params: WaterfillParams) -> WaterfillResult:
    if not np.any(gain_row > 0):
        _log_once.warning("pa_solver", "inactive_player", f"player {k} has no usable channel", player=k)
        return WaterfillResult(np.zeros(config.num_channels), 0.0, inactive=True)
    powers, level = _waterfill_row(gain_row, interference, config.fractions,
                                   float(config.max_power[k]), params)
    return WaterfillResult(powers, level)


# =============================================================================
# Best-response dynamics
# =============================================================================

def _initial_powers(config: GameConfig, initial: InitialProfile,
                    rng: np.random.Generator | None) -> np.ndarray:
    if isinstance(initial, PowerProfile):
        initial.check(config)
        return initial.powers.copy()
    if initial == "uniform":
        return PowerProfile.uniform(config).powers.copy()
    if initial == "random":
        if rng is None:
            raise StructuralError("initial='random' needs an rng")
        shares = rng.dirichlet(np.ones(config.num_channels), size=config.num_players)
        return shares * config.max_power[:, None]
    raise StructuralError(f"unknown initial profile: {initial!r}")


def _fixed_point_residuals(powers: np.ndarray, gains: np.ndarray, config: GameConfig,
                           params: WaterfillParams) -> np.ndarray:
    received = powers * gains
    totals = config.noise_powers + received.sum(axis=0)
    residuals = np.empty(config.num_players)
    for k in range(config.num_players):
        br = _best_response(gains[k], totals - received[k], config, k, params)
        residuals[k] = np.max(np.abs(br.powers - powers[k]))
    return residuals


def solve_pa_ne(gains: GainMatrix, config: GameConfig,
                params: WaterfillParams = DEFAULT_PARAMS,
                initial: InitialProfile = "uniform",
                rng: np.random.Generator | None = None,
                trace: bool = False) -> PaSolution:
    """
    Round-robin water-filling until the profile stops moving.

    Players update in index order, one at a time. A round that moves the
    profile by less than `br_sweep_tolerance` (max-norm) ends the search once
    the fixed-point residual is also below that tolerance.

    Args:
        gains: Channel gains
        config: Game configuration
        params: Tolerances and caps
        initial: "uniform", "random" (needs `rng`) or an explicit PowerProfile
        rng: Generator for random starts
        trace: Record the potential after every single update

    Returns:
        PaSolution; `converged` is False when max_rounds ran out
    """
    gains.check(config)
    g = gains.gains
    powers = _initial_powers(config, initial, rng)
    received = powers * g
    totals = config.noise_powers + received.sum(axis=0)
    phi_trace: list[float] = []
    if trace:
        phi_trace.append(float(config.fractions @ (np.log(totals) / _LN2)))

    converged = False
    residual = float("inf")
    rounds = 0
    for rounds in range(1, params.max_rounds + 1):
        change = 0.0
        for k in range(config.num_players):
            br = _best_response(g[k], totals - received[k], config, k, params)
            change = max(change, float(np.max(np.abs(br.powers - powers[k]))))
            new_received = br.powers * g[k]
            totals = totals + (new_received - received[k])
            powers[k] = br.powers
            received[k] = new_received
            if trace:
                phi_trace.append(float(config.fractions @ (np.log(totals) / _LN2)))
        if change < params.br_sweep_tolerance:
            residual = float(np.max(_fixed_point_residuals(powers, g, config, params)))
            if residual <= params.br_sweep_tolerance:
                converged = True
                break
        # Channel totals drift through repeated updates; rebuild once per round.
        totals = config.noise_powers + received.sum(axis=0)

    if not converged:
        residual = float(np.max(_fixed_point_residuals(powers, g, config, params)))
        log_event("pa_solver", "not_converged",
                  {"rounds": rounds, "residual": residual, "K": config.num_players,
                   "S": config.num_channels}, "warning")

    return PaSolution(
        profile=PowerProfile(np.maximum(powers, 0.0)),
        rounds_used=rounds,
        residual=residual,
        converged=converged,
        potential_trace=tuple(phi_trace),
    )


def verify_pa_ne(profile: PowerProfile, gains: GainMatrix, config: GameConfig,
                 tol: float = Tolerances.saturation,
                 params: WaterfillParams = DEFAULT_PARAMS) -> PaVerification:
    """Distance of every row from its water-filling response; NE iff all are within tol."""
    gains.check(config)
    profile.check(config)
    residuals = _fixed_point_residuals(profile.powers, gains.gains, config, params)
    max_residual = float(np.max(residuals))
    return PaVerification(residuals=residuals, max_residual=max_residual, is_ne=max_residual <= tol)
