"""
JSON interchange documents.

Every file the CLI reads or writes has a msgspec Struct here. Channel and
player indices in documents are 1-based labels.
"""
from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import msgspec
import numpy as np
import pandas as pd

from pmac.errors import StructuralError
from pmac.model import GainMatrix, GameConfig
from pmac.sim_utils.io import atomic_write_json

if TYPE_CHECKING:
    from pmac.model import NeReport
    from pmac.pa_solver import PaSolution
    from pmac.sic import SicReport


class InstanceDoc(msgspec.Struct):
    """A game instance: configuration plus channel gains (row-major, player-major)."""
    K: int
    S: int
    p_max: list[float]
    N0: float
    B: list[float]
    gains: list[list[float]]


class QuadDoc(msgspec.Struct):
    """A 2x2 instance under equal budgets and equal noise."""
    g11: float
    g12: float
    g21: float
    g22: float
    p_max: float = 1.0
    sigma2: float = 1.0


class LargeSystemDoc(msgspec.Struct):
    """Parameters of the large-system fraction problem."""
    b: list[float]
    omega: list[float]
    mu: float = 1.0
    p_max: float = 1.0
    N0: float = 1.0


class PaSolutionDoc(msgspec.Struct):
    profile: list[list[float]]
    rounds: int
    residual: float
    converged: bool


class NeEntryDoc(msgspec.Struct):
    profile: list[int]
    potential: float
    utilities: list[float]
    nse: float
    label: str


class NeReportDoc(msgspec.Struct):
    equilibria: list[NeEntryDoc]
    count: int
    bound: int
    exhaustive: bool
    near_ties: int


class SicReportDoc(msgspec.Struct):
    rates: list[float]
    sum_rate: float
    order: list[int]


# =============================================================================
# Instances
# =============================================================================

def instance_to_doc(config: GameConfig, gains: GainMatrix) -> InstanceDoc:
    gains.check(config)
    return InstanceDoc(
        K=config.num_players,
        S=config.num_channels,
        p_max=config.max_power.tolist(),
        N0=config.noise_density,
        B=config.bandwidths.tolist(),
        gains=gains.gains.tolist(),
    )


def instance_from_doc(doc: InstanceDoc) -> tuple[GameConfig, GainMatrix]:
    if len(doc.p_max) not in (1, doc.K) or len(doc.B) not in (1, doc.S):
        raise StructuralError(f"p_max/B lengths do not match K={doc.K}, S={doc.S}")
    config = GameConfig(doc.K, doc.S, doc.p_max, doc.N0, doc.B)
    gains = GainMatrix(doc.gains)
    gains.check(config)
    return config, gains


def load_instance(path: Path | str) -> tuple[GameConfig, GainMatrix]:
    """Read an instance document from disk."""
    doc = msgspec.json.decode(Path(path).read_bytes(), type=InstanceDoc)
    return instance_from_doc(doc)


def dump_instance(path: Path | str, config: GameConfig, gains: GainMatrix) -> None:
    atomic_write_json(Path(path), instance_to_doc(config, gains))


# =============================================================================
# Reports
# =============================================================================

def pa_solution_doc(solution: PaSolution) -> PaSolutionDoc:
    return PaSolutionDoc(
        profile=solution.profile.powers.tolist(),
        rounds=solution.rounds_used,
        residual=solution.residual,
        converged=solution.converged,
    )


def ne_report_doc(report: NeReport) -> NeReportDoc:
    return NeReportDoc(
        equilibria=[
            NeEntryDoc(
                profile=list(e.profile.labels),
                potential=e.potential,
                utilities=list(e.utilities),
                nse=e.nse,
                label=e.label,
            )
            for e in report.equilibria
        ],
        count=report.count,
        bound=report.bound,
        exhaustive=report.exhaustive,
        near_ties=report.near_ties,
    )


def sic_report_doc(report: SicReport) -> SicReportDoc:
    return SicReportDoc(
        rates=[float(r) for r in report.per_user_rates],
        sum_rate=report.sum_rate,
        order=[k + 1 for k in report.order.order],
    )


# =============================================================================
# Flat tables (for --format csv)
# =============================================================================

def pa_solution_table(doc: PaSolutionDoc) -> pd.DataFrame:
    """One row per (player, channel) power."""
    return pd.DataFrame([
        {"player": k + 1, "channel": s + 1, "power": p}
        for k, row in enumerate(doc.profile) for s, p in enumerate(row)
    ], columns=["player", "channel", "power"])


def ne_report_table(doc: NeReportDoc) -> pd.DataFrame:
    """One row per equilibrium: label, potential, NSE, then each player's channel and utility."""
    rows = []
    for i, entry in enumerate(doc.equilibria):
        row = {"equilibrium": i + 1, "label": entry.label, "potential": entry.potential, "nse": entry.nse}
        row.update({f"channel_{k + 1}": c for k, c in enumerate(entry.profile)})
        row.update({f"utility_{k + 1}": u for k, u in enumerate(entry.utilities)})
        rows.append(row)
    return pd.DataFrame(rows)


def sic_report_table(doc: SicReportDoc) -> pd.DataFrame:
    """Per-player rate and position in the decoding order (both 1-based)."""
    position = {player: i + 1 for i, player in enumerate(doc.order)}
    return pd.DataFrame({
        "player": np.arange(1, len(doc.rates) + 1),
        "decode_position": [position[k + 1] for k in range(len(doc.rates))],
        "rate": doc.rates,
    })
