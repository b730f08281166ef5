"""
Closed-form results for two players and two channels.

Both players share p_max and the noise level sigma^2, and the channels have
equal bandwidth. With SNR = p_max / sigma^2 and psi(x) = 1 + SNR * x:

- classify_pa_2x2 locates the power-allocation equilibrium in one of eight
  regions (or on the degenerate continuum g11 g22 = g12 g21).
- classify_cs_2x2 lists the channel-selection equilibria (regions A1..A4;
  A1 and A4 together give two equilibria).
- low_snr_limit_ne, high_snr_cs_ne and high_snr_pa_region give the SNR
  limits, and braess_gap measures how much the channel-selection
  equilibrium beats the power-allocation one.

Every ratio inequality is evaluated cross-multiplied, as a relative margin
(positive means satisfied), so zero gains never divide.

Power-allocation profiles are reported through (p11, p22): player 1 plays
(p11, p_max - p11) and player 2 plays (p_max - p22, p22).
"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
import pandas as pd

from pmac.config import Tolerances
from pmac.errors import ClassificationError, StructuralError, TieError
from pmac.model import CsProfile, GainMatrix, GameConfig, PowerProfile, cs_to_power, nse, potential
from pmac.sim_utils.logging import log_event


# =============================================================================
# Instance
# =============================================================================

@dataclass(frozen=True)
class ChannelQuad:
    """Gains (g11, g12, g21, g22) with a shared budget and noise level."""
    g11: float
    g12: float
    g21: float
    g22: float
    p_max: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        for name in ("g11", "g12", "g21", "g22", "p_max", "sigma2"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise StructuralError(f"{name} must be finite and nonnegative, got {value}")
            object.__setattr__(self, name, value)
        if self.p_max <= 0 or self.sigma2 <= 0:
            raise StructuralError("p_max and sigma2 must be positive")

    @classmethod
    def from_snr(cls, g11: float, g12: float, g21: float, g22: float, snr: float,
                 p_max: float = 1.0) -> "ChannelQuad":
        return cls(g11, g12, g21, g22, p_max, p_max / snr)

    @classmethod
    def from_snr_db(cls, g11: float, g12: float, g21: float, g22: float, snr_db: float,
                    p_max: float = 1.0) -> "ChannelQuad":
        return cls.from_snr(g11, g12, g21, g22, 10.0 ** (snr_db / 10.0), p_max)

    @classmethod
    def from_instance(cls, config: GameConfig, gains: GainMatrix) -> "ChannelQuad":
        gains.check(config)
        if config.shape != (2, 2):
            raise StructuralError(f"need a 2x2 instance, got {config.shape}")
        if np.ptp(config.max_power) > 0 or np.ptp(config.bandwidths) > 0:
            raise StructuralError("closed forms need equal budgets and equal bandwidths")
        (g11, g12), (g21, g22) = gains.gains
        return cls(g11, g12, g21, g22, float(config.max_power[0]), float(config.noise_powers[0]))

    def to_instance(self) -> tuple[GameConfig, GainMatrix]:
        """Two 1 Hz channels with N0 = sigma2."""
        config = GameConfig.uniform(2, 2, p_max=self.p_max, noise_density=self.sigma2, bandwidth=1.0)
        return config, GainMatrix([[self.g11, self.g12], [self.g21, self.g22]])

    @property
    def snr(self) -> float:
        return self.p_max / self.sigma2

    @property
    def snr_db(self) -> float:
        return 10.0 * np.log10(self.snr)

    @property
    def gains(self) -> tuple[float, float, float, float]:
        return self.g11, self.g12, self.g21, self.g22

    def psi(self, x: float) -> float:
        return 1.0 + self.snr * x

    def with_snr(self, snr: float) -> "ChannelQuad":
        if snr <= 0:
            raise StructuralError(f"snr must be positive, got {snr}")
        return replace(self, sigma2=self.p_max / snr)

    def swapped_channels(self) -> "ChannelQuad":
        """Relabel channel 1 as channel 2 and vice versa."""
        return replace(self, g11=self.g12, g12=self.g11, g21=self.g22, g22=self.g21)

    def profile(self, p11: float, p22: float) -> PowerProfile:
        return PowerProfile([[p11, self.p_max - p11], [self.p_max - p22, p22]])


# =============================================================================
# Margins
# =============================================================================

def _margin(lhs: float, rhs: float) -> float:
    """Relative margin of lhs >= rhs."""
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0.0 else (lhs - rhs) / scale


def _region_margins(pairs: Sequence[tuple[float, float]]) -> tuple[float, ...]:
    return tuple(_margin(lhs, rhs) for lhs, rhs in pairs)


def _select(margins: dict, order: Sequence, slack: float) -> tuple[list, bool]:
    """Regions whose every margin passes, and whether any region sits on its boundary."""
    passing = [r for r in order if min(margins[r]) >= -slack]
    boundary = any(abs(min(margins[r])) <= slack for r in order)
    return passing, boundary


def _residual_report(margins: dict) -> dict[str, tuple[float, ...]]:
    return {str(region.value): values for region, values in margins.items()}


# =============================================================================
# Power-allocation game
# =============================================================================

class PaRegion(str, Enum):
    """Location of the power-allocation equilibrium."""
    B1 = "B1"
    B2 = "B2"
    B3 = "B3"
    B4 = "B4"
    B5 = "B5"
    B6 = "B6"
    B7 = "B7"
    B8 = "B8"
    DEGENERATE = "DegenerateContinuum"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Continuum:
    """Line of equilibria p11 = intercept + slope * p22 on a degenerate quad.

    `alpha` is the common ratio g11/g12 = g21/g22; the line exists inside the
    open square when 1/(1 + SNR(g12 + g22)) < alpha < 1 + SNR(g11 + g21).
    """
    alpha: float
    slope: float
    intercept: float
    p22_interval: tuple[float, float]
    p_max: float

    def p11(self, p22: float) -> float:
        return self.intercept + self.slope * p22

    def point(self, p22: float) -> PowerProfile:
        lo, hi = self.p22_interval
        if not lo <= p22 <= hi:
            raise StructuralError(f"p22={p22} outside the continuum interval [{lo}, {hi}]")
        p11 = self.p11(p22)
        return PowerProfile([[p11, self.p_max - p11], [self.p_max - p22, p22]])


@dataclass(frozen=True, eq=False)
class PaClassification:
    region: PaRegion
    p11: float | None
    p22: float | None
    profile: PowerProfile | None
    continuum: Continuum | None = None
    boundary: bool = False
    margins: dict | None = None

    @property
    def equilibrium(self) -> PowerProfile | Continuum:
        return self.continuum if self.region is PaRegion.DEGENERATE else self.profile


def _pa_margins(q: ChannelQuad) -> dict[PaRegion, tuple[float, ...]]:
    g11, g12, g21, g22 = q.gains
    a = q.snr
    psi11, psi12, psi21, psi22 = q.psi(g11), q.psi(g12), q.psi(g21), q.psi(g22)
    c2 = 1.0 + a * (g11 + g21)
    c3 = 1.0 + a * (g12 + g22)
    d_ge = (g11 * g22, g12 * g21)  # g11/g12 >= g21/g22
    d_le = (g12 * g21, g11 * g22)
    return {
        PaRegion.B1: _region_margins([(g11 * psi22, g12 * psi11), (g22 * psi11, g21 * psi22)]),
        PaRegion.B2: _region_margins([(g11, g12 * c2), (g21, g22 * c2)]),
        PaRegion.B3: _region_margins([(g12, g11 * c3), (g22, g21 * c3)]),
        PaRegion.B4: _region_margins([(g12 * psi21, g11 * psi12), (g21 * psi12, g22 * psi21)]),
        PaRegion.B5: _region_margins([d_ge, (g21 * psi22, g22 * psi11), (g22 * c2, g21)]),
        PaRegion.B6: _region_margins([d_ge, (g11 * c3, g12), (g12 * psi11, g11 * psi22)]),
        PaRegion.B7: _region_margins([d_le, (g11 * psi12, g12 * psi21), (g12 * c2, g11)]),
        PaRegion.B8: _region_margins([d_le, (g21 * c3, g22), (g22 * psi21, g21 * psi12)]),
    }


def pa_equilibrium(q: ChannelQuad, region: PaRegion) -> tuple[float, float]:
    """(p11, p22) of the closed-form equilibrium attached to a region."""
    g11, g12, g21, g22 = q.gains
    p, s2 = q.p_max, q.sigma2
    if region is PaRegion.B1:
        return p, p
    if region is PaRegion.B2:
        return p, 0.0
    if region is PaRegion.B3:
        return 0.0, p
    if region is PaRegion.B4:
        return 0.0, 0.0
    if region is PaRegion.B5:
        return p, 0.5 * (p - s2 / g22 + (s2 + g11 * p) / g21)
    if region is PaRegion.B6:
        return 0.5 * (p - s2 / g11 + (s2 + p * g22) / g12), p
    if region is PaRegion.B7:
        return 0.5 * (p - (s2 + p * g21) / g11 + s2 / g12), 0.0
    if region is PaRegion.B8:
        return 0.0, 0.5 * (p - (s2 + g12 * p) / g22 + s2 / g21)
    raise StructuralError(f"no single equilibrium for region {region}")


def _continuum(q: ChannelQuad, degeneracy_tol: float) -> Continuum | None:
    g11, g12, g21, g22 = q.gains
    scale = max(g11 * g22, g12 * g21)
    if min(q.gains) <= 0 or abs(g11 * g22 - g12 * g21) > degeneracy_tol * scale:
        return None
    alpha = g11 / g12
    if not 1.0 / (1.0 + q.snr * (g12 + g22)) < alpha < 1.0 + q.snr * (g11 + g21):
        return None
    slope = g21 / g11
    intercept = 0.5 * (q.p_max * (1.0 - slope) + q.sigma2 * (1.0 / g12 - 1.0 / g11))
    lo = max(0.0, -intercept / slope)
    hi = min(q.p_max, (q.p_max - intercept) / slope)
    return Continuum(alpha=alpha, slope=slope, intercept=intercept, p22_interval=(lo, hi), p_max=q.p_max)


def classify_pa_2x2(q: ChannelQuad, boundary_tol: float = Tolerances.boundary_slack,
                    degeneracy_tol: float = Tolerances.degeneracy) -> PaClassification:
    """
    Region and closed-form equilibrium of the power-allocation game.

    Args:
        q: The instance
        boundary_tol: Relative slack on every region inequality
        degeneracy_tol: Relative slack on g11 g22 = g12 g21

    Returns:
        PaClassification; `boundary` is set when any region test is within slack

    Raises:
        ClassificationError: No region passes (carries every margin)
    """
    continuum = _continuum(q, degeneracy_tol)
    if continuum is not None:
        return PaClassification(PaRegion.DEGENERATE, None, None, None, continuum=continuum)

    margins = _pa_margins(q)
    passing, boundary = _select(margins, list(margins), boundary_tol)
    if not passing:
        raise ClassificationError(f"no power-allocation region matches {q.gains} at SNR={q.snr:.6g}",
                                  _residual_report(margins))
    region = passing[0]
    boundary = boundary or len(passing) > 1
    if boundary:
        log_event("analytic", "boundary", {"game": "pa", "regions": [r.value for r in passing],
                                           "gains": list(q.gains), "snr": q.snr}, "debug")
    p11, p22 = pa_equilibrium(q, region)
    return PaClassification(region, p11, p22, q.profile(p11, p22), boundary=boundary, margins=margins)


# =============================================================================
# Channel-selection game
# =============================================================================

class CsRegion(str, Enum):
    """Equilibrium regions of the channel-selection game."""
    A1 = "A1"  # (ch1, ch2)
    A2 = "A2"  # (ch1, ch1)
    A3 = "A3"  # (ch2, ch2)
    A4 = "A4"  # (ch2, ch1)

    def __str__(self) -> str:
        return self.value


CS_REGION_PROFILES: dict[CsRegion, CsProfile] = {
    CsRegion.A1: CsProfile((0, 1)),
    CsRegion.A2: CsProfile((0, 0)),
    CsRegion.A3: CsProfile((1, 1)),
    CsRegion.A4: CsProfile((1, 0)),
}


@dataclass(frozen=True)
class CsClassification:
    regions: tuple[CsRegion, ...]
    equilibria: tuple[CsProfile, ...]
    multiple: bool
    boundary: bool = False


def _cs_margins(q: ChannelQuad) -> dict[CsRegion, tuple[float, ...]]:
    g11, g12, g21, g22 = q.gains
    psi11, psi12, psi21, psi22 = q.psi(g11), q.psi(g12), q.psi(g21), q.psi(g22)
    # A4 reads g11/g12 <= 1 + SNR g21: the mirror of A1 under swapping the
    # channels, and the form the A1/A4 overlap condition uses.
    return {
        CsRegion.A1: _region_margins([(g11 * psi22, g12), (g22 * psi11, g21)]),
        CsRegion.A2: _region_margins([(g11, g12 * psi21), (g21, g22 * psi11)]),
        CsRegion.A3: _region_margins([(g12, g11 * psi22), (g22, g21 * psi12)]),
        CsRegion.A4: _region_margins([(g12 * psi21, g11), (g21 * psi12, g22)]),
    }


def classify_cs_2x2(q: ChannelQuad, boundary_tol: float = Tolerances.boundary_slack) -> CsClassification:
    """Every channel-selection equilibrium of the quad, by region test."""
    margins = _cs_margins(q)
    passing, boundary = _select(margins, list(CsRegion), boundary_tol)
    if not passing:
        raise ClassificationError(f"no channel-selection region matches {q.gains} at SNR={q.snr:.6g}",
                                  _residual_report(margins))
    return CsClassification(
        regions=tuple(passing),
        equilibria=tuple(CS_REGION_PROFILES[r] for r in passing),
        multiple=CsRegion.A1 in passing and CsRegion.A4 in passing,
        boundary=boundary,
    )


def potential_table_2x2(q: ChannelQuad) -> np.ndarray:
    """Potential of the four channel-selection profiles; rows: player 1's channel."""
    config, gains = q.to_instance()
    table = np.empty((2, 2))
    for c1 in range(2):
        for c2 in range(2):
            table[c1, c2] = potential(cs_to_power(CsProfile((c1, c2)), config), gains, config)
    return table


# =============================================================================
# SNR limits
# =============================================================================

@dataclass(frozen=True, eq=False)
class LowSnrLimit:
    """Shared low-SNR equilibrium of both games: each player on its stronger channel."""
    cs: CsProfile
    power: PowerProfile


def low_snr_limit_ne(q: ChannelQuad) -> LowSnrLimit:
    if q.g11 == q.g12 or q.g21 == q.g22:
        raise TieError(f"a player has equal gains on both channels: {q.gains}")
    cs = CsProfile((0 if q.g11 > q.g12 else 1, 0 if q.g21 > q.g22 else 1))
    config, _ = q.to_instance()
    return LowSnrLimit(cs=cs, power=cs_to_power(cs, config))


@dataclass(frozen=True)
class HighSnrCsEquilibria:
    """The two channel-selection equilibria that survive as SNR grows, keyed by region."""
    a1: CsProfile
    a4: CsProfile

    def as_tuple(self) -> tuple[CsProfile, CsProfile]:
        return self.a1, self.a4


def high_snr_cs_ne(q: ChannelQuad) -> HighSnrCsEquilibria:
    """Orthogonal profiles (ch1, ch2) and (ch2, ch1); independent of the gains."""
    return HighSnrCsEquilibria(a1=CS_REGION_PROFILES[CsRegion.A1], a4=CS_REGION_PROFILES[CsRegion.A4])


class HighSnrRegion(str, Enum):
    """Limits of the power-allocation regions as SNR grows."""
    B1 = "B'1"
    B4 = "B'4"
    B5 = "B'5"
    B6 = "B'6"
    B7 = "B'7"
    B8 = "B'8"

    def __str__(self) -> str:
        return self.value

    @property
    def finite_snr_region(self) -> PaRegion:
        return PaRegion[self.name]


@dataclass(frozen=True, eq=False)
class HighSnrPaClassification:
    region: HighSnrRegion
    p11: float
    p22: float
    profile: PowerProfile


def _high_snr_margins(q: ChannelQuad) -> dict[HighSnrRegion, tuple[float, ...]]:
    g11, g12, g21, g22 = q.gains
    d_ge = (g11 * g22, g12 * g21)
    d_le = (g12 * g21, g11 * g22)
    return {
        HighSnrRegion.B1: _region_margins([(g22, g12), (g11, g21)]),
        HighSnrRegion.B4: _region_margins([(g21, g11), (g12, g22)]),
        HighSnrRegion.B5: _region_margins([d_ge, (g21, g11)]),
        HighSnrRegion.B6: _region_margins([d_ge, (g12, g22)]),
        HighSnrRegion.B7: _region_margins([d_le, (g11, g21)]),
        # Limit of B8's upper bound psi(g21)/psi(g12): g12 < g22.
        HighSnrRegion.B8: _region_margins([d_le, (g22, g12)]),
    }


def high_snr_pa_region(q: ChannelQuad, tie_tol: float = Tolerances.boundary_slack) -> HighSnrPaClassification:
    """
    High-SNR region of the power-allocation equilibrium.

    The equilibrium is the closed form of the matching finite-SNR region
    evaluated at the quad's own noise level, clipped to [0, p_max].

    Raises:
        TieError: The gains sit on a region boundary
    """
    margins = _high_snr_margins(q)
    passing, boundary = _select(margins, list(HighSnrRegion), tie_tol)
    if boundary or len(passing) != 1:
        raise TieError(f"high-SNR region of {q.gains} is ambiguous", _residual_report(margins))
    region = passing[0]
    p11, p22 = (float(np.clip(v, 0.0, q.p_max)) for v in pa_equilibrium(q, region.finite_snr_region))
    return HighSnrPaClassification(region, p11, p22, q.profile(p11, p22))


# =============================================================================
# Equilibrium gap
# =============================================================================

def _log2(x: float) -> float:
    return float(np.log2(x))


def _gap_b5(q: ChannelQuad) -> float:
    """NSE of (ch1, ch2) minus NSE of the power-allocation equilibrium, for quads in B5."""
    r = q.g21 / q.g22
    psi11, psi22 = q.psi(q.g11), q.psi(q.g22)
    return 0.5 * (2.0
                  - 2.0 * _log2(1.0 + r * psi22 / psi11)
                  + _log2(r + q.psi(q.g21 - q.g11))
                  - _log2(1.0 + psi11 / (r * psi22)))


def braess_gap_closed_form(q: ChannelQuad, which: int,
                           pa: PaClassification | None = None) -> float | None:
    """
    Closed form of braess_gap where one exists.

    Gap 1 has a closed form when the power-allocation equilibrium lies in
    B5; gap 4 when it lies in B8 (B5 after swapping the channels).
    Returns None elsewhere.
    """
    if which not in (1, 4):
        raise StructuralError(f"which must be 1 or 4, got {which}")
    pa = classify_pa_2x2(q) if pa is None else pa
    if which == 1 and pa.region is PaRegion.B5:
        return _gap_b5(q)
    if which == 4 and pa.region is PaRegion.B8:
        return _gap_b5(q.swapped_channels())
    return None


def braess_gap(q: ChannelQuad, which: int, snr_override: float | None = None) -> float:
    """
    NSE at a high-SNR channel-selection equilibrium minus NSE at the
    power-allocation equilibrium.

    Args:
        q: The instance
        which: 1 compares against (ch1, ch2), 4 against (ch2, ch1)
        snr_override: Evaluate at this linear SNR instead of the quad's own

    Raises:
        StructuralError: `which` not in {1, 4}
        ClassificationError: The power-allocation equilibrium is a continuum,
            or the closed form disagrees with direct evaluation
    """
    if which not in (1, 4):
        raise StructuralError(f"which must be 1 or 4, got {which}")
    if snr_override is not None:
        q = q.with_snr(snr_override)
    pa = classify_pa_2x2(q)
    if pa.region is PaRegion.DEGENERATE:
        raise ClassificationError("power-allocation equilibrium is not unique on the degenerate continuum")

    config, gains = q.to_instance()
    equilibria = high_snr_cs_ne(q)
    cs = equilibria.a1 if which == 1 else equilibria.a4
    gap = nse(cs_to_power(cs, config), gains, config) - nse(pa.profile, gains, config)

    closed = braess_gap_closed_form(q, which, pa)
    if closed is not None and abs(closed - gap) > Tolerances.closed_form_agreement:
        raise ClassificationError(
            f"closed-form gap {closed:.12g} disagrees with direct evaluation {gap:.12g}",
            {str(pa.region.value): (closed - gap,)},
        )
    return float(gap)


# =============================================================================
# Region maps
# =============================================================================

def region_map(snr: float, ratios_1: Sequence[float], ratios_2: Sequence[float] | None = None,
               reference_gain: float = 1.0, p_max: float = 1.0) -> pd.DataFrame:
    """
    Region labels over a grid of gain ratios.

    g12 = g22 = reference_gain, g11 = ratio_1 * reference_gain and
    g21 = ratio_2 * reference_gain.

    Returns:
        DataFrame with columns ratio_1, ratio_2, pa_region, cs_regions,
        multiple, boundary (one row per grid point, ratio_2 fastest)
    """
    ratios_2 = ratios_1 if ratios_2 is None else ratios_2
    rows = []
    for r1 in ratios_1:
        for r2 in ratios_2:
            q = ChannelQuad.from_snr(r1 * reference_gain, reference_gain,
                                     r2 * reference_gain, reference_gain, snr, p_max)
            pa = classify_pa_2x2(q)
            cs = classify_cs_2x2(q)
            rows.append({
                "ratio_1": float(r1),
                "ratio_2": float(r2),
                "pa_region": pa.region.value,
                "cs_regions": "+".join(r.value for r in cs.regions),
                "multiple": cs.multiple,
                "boundary": pa.boundary or cs.boundary,
            })
    return pd.DataFrame(rows, columns=["ratio_1", "ratio_2", "pa_region", "cs_regions", "multiple", "boundary"])
