"""
Successive interference cancellation at the receiver.

With perfect cancellation the sum rate over all decoding orders is the same
and equals the potential minus a noise constant; the order only decides how
the sum is split among players.
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from pmac.config import Tolerances
from pmac.cs_enumerator import enumerate_cs_ne, sample_cs_ne
from pmac.errors import CapExceededError, StructuralError
from pmac.model import GainMatrix, GameConfig, PowerProfile, cs_to_power, potential
from pmac.pa_solver import DEFAULT_PARAMS, WaterfillParams, solve_pa_ne
from pmac.sim_utils.logging import log_event

_LN2 = np.log(2.0)


@dataclass(frozen=True)
class DecodingOrder:
    """order[i] is the player decoded i-th (0-based)."""
    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(k) for k in self.order)
        if sorted(order) != list(range(len(order))):
            raise StructuralError(f"decoding order {order} is not a permutation of 0..{len(order) - 1}")
        object.__setattr__(self, "order", order)

    @classmethod
    def identity(cls, num_players: int) -> "DecodingOrder":
        return cls(tuple(range(num_players)))

    @classmethod
    def random(cls, num_players: int, rng: np.random.Generator) -> "DecodingOrder":
        return cls(tuple(int(k) for k in rng.permutation(num_players)))

    def reversed(self) -> "DecodingOrder":
        return DecodingOrder(tuple(reversed(self.order)))

    def __len__(self) -> int:
        return len(self.order)


@dataclass(frozen=True, eq=False)
class SicReport:
    """Per-player SIC rates (indexed by player, not by decoding position)."""
    per_user_rates: np.ndarray
    sum_rate: float
    potential_identity_residual: float
    order: DecodingOrder
    game: str | None = None
    degraded: bool = False


def sic_nse(profile: PowerProfile, gains: GainMatrix, config: GameConfig) -> float:
    """sum_s b_s log2(1 + sum_k p_{k,s} g_{k,s} / sigma^2_s)."""
    gains.check(config)
    profile.check(config)
    received = (profile.powers * gains.gains).sum(axis=0)
    return float(config.fractions @ (np.log1p(received / config.noise_powers) / _LN2))


def sic_user_rates(profile: PowerProfile, gains: GainMatrix, config: GameConfig,
                   order: DecodingOrder | None = None) -> SicReport:
    """
    Rate of every player when the receiver decodes in `order`.

    A player only sees interference from the players decoded after it.
    The residual compares the rate sum with sic_nse and sic_nse with the
    potential identity; both are zero in exact arithmetic.
    """
    gains.check(config)
    profile.check(config)
    order = DecodingOrder.identity(config.num_players) if order is None else order
    if len(order) != config.num_players:
        raise StructuralError(f"decoding order has {len(order)} players for K={config.num_players}")

    received = profile.powers * gains.gains
    rates = np.zeros(config.num_players)
    later = np.zeros(config.num_channels)
    for k in reversed(order.order):
        rates[k] = config.fractions @ (np.log1p(received[k] / (config.noise_powers + later)) / _LN2)
        later = later + received[k]

    total = sic_nse(profile, gains, config)
    noise_constant = float(config.fractions @ (np.log(config.noise_powers) / _LN2))
    sum_rate = float(rates.sum())
    residual = max(abs(sum_rate - total),
                   abs(total - (potential(profile, gains, config) - noise_constant)))
    if residual > Tolerances.potential_identity:
        log_event("sic", "identity_residual", {"residual": residual}, "warning")
    return SicReport(per_user_rates=rates, sum_rate=sum_rate,
                     potential_identity_residual=residual, order=order)


def sic_capacity_at_ne(gains: GainMatrix, config: GameConfig, game: Literal["a", "b"],
                       params: WaterfillParams = DEFAULT_PARAMS,
                       order: DecodingOrder | None = None,
                       cap: int | None = None,
                       rng: np.random.Generator | None = None) -> SicReport:
    """
    SIC rates at an equilibrium of the chosen game.

    Game "a" uses the power-allocation equilibrium. Game "b" uses the
    channel-selection equilibrium with the largest potential; when the
    profile space exceeds `cap` the best of a best-response descent sample
    is used instead and the report is marked degraded.
    """
    gains.check(config)
    degraded = False
    if game == "a":
        solution = solve_pa_ne(gains, config, params)
        profile = solution.profile
        degraded = not solution.converged
    elif game == "b":
        try:
            report = enumerate_cs_ne(gains, config, cap=cap)
        except CapExceededError as e:
            log_event("sic", "degraded", {"size": e.size, "cap": e.cap}, "warning")
            report = sample_cs_ne(gains, config, rng if rng is not None else np.random.default_rng(0))
            degraded = True
        profile = cs_to_power(report.potential_maximizer().profile, config)
    else:
        raise StructuralError(f"game must be 'a' or 'b', got {game!r}")

    result = sic_user_rates(profile, gains, config, order)
    return SicReport(per_user_rates=result.per_user_rates, sum_rate=result.sum_rate,
                     potential_identity_residual=result.potential_identity_residual,
                     order=result.order, game=game, degraded=degraded)
