"""
pmac: power allocation and channel selection games on the parallel
multiple-access channel.

    from pmac import GameConfig, GainMatrix, solve_pa_ne, enumerate_cs_ne
"""
from pmac.analytic import (
    braess_gap,
    braess_gap_closed_form,
    ChannelQuad,
    classify_cs_2x2,
    classify_pa_2x2,
    CsRegion,
    high_snr_cs_ne,
    high_snr_pa_region,
    HighSnrRegion,
    low_snr_limit_ne,
    PaRegion,
    potential_table_2x2,
    region_map,
)
from pmac.asymptotics import (
    asymptotic_potential,
    asymptotic_potential_gradient,
    empirical_fractions,
    fraction_kkt_residual,
    FractionVector,
    LargeSystemParams,
    solve_fractions,
)
from pmac.cs_enumerator import (
    br_descent_cs,
    build_cs_graph,
    CsGraph,
    enumerate_cs_ne,
    ne_fraction_estimate,
    ne_upper_bound,
    orient_by_potential,
    ProfileCodec,
    sample_cs_ne,
)
from pmac.errors import (
    CapExceededError,
    ClassificationError,
    InfeasibleProfileError,
    PmacError,
    SolverError,
    StructuralError,
    TieError,
)
from pmac.model import (
    cs_to_power,
    CsProfile,
    GainMatrix,
    GameConfig,
    NeEntry,
    NeReport,
    nse,
    potential,
    PowerProfile,
    power_to_cs,
    sinr,
    utilities,
    utility,
)
from pmac.pa_solver import PaSolution, solve_pa_ne, verify_pa_ne, waterfill_br, WaterfillParams
from pmac.sic import DecodingOrder, sic_capacity_at_ne, sic_user_rates, SicReport

__version__ = "0.1.0"

__all__ = [
    # Model
    "GameConfig",
    "GainMatrix",
    "PowerProfile",
    "CsProfile",
    "NeEntry",
    "NeReport",
    "sinr",
    "utility",
    "utilities",
    "potential",
    "nse",
    "cs_to_power",
    "power_to_cs",
    # Power allocation
    "WaterfillParams",
    "PaSolution",
    "waterfill_br",
    "solve_pa_ne",
    "verify_pa_ne",
    # Channel selection
    "ProfileCodec",
    "CsGraph",
    "enumerate_cs_ne",
    "build_cs_graph",
    "orient_by_potential",
    "br_descent_cs",
    "sample_cs_ne",
    "ne_upper_bound",
    "ne_fraction_estimate",
    # 2x2 closed forms
    "ChannelQuad",
    "PaRegion",
    "CsRegion",
    "HighSnrRegion",
    "classify_pa_2x2",
    "classify_cs_2x2",
    "potential_table_2x2",
    "low_snr_limit_ne",
    "high_snr_cs_ne",
    "high_snr_pa_region",
    "braess_gap",
    "braess_gap_closed_form",
    "region_map",
    # Large-system limit
    "LargeSystemParams",
    "FractionVector",
    "asymptotic_potential",
    "asymptotic_potential_gradient",
    "fraction_kkt_residual",
    "solve_fractions",
    "empirical_fractions",
    # SIC
    "DecodingOrder",
    "SicReport",
    "sic_user_rates",
    "sic_capacity_at_ne",
    # Errors
    "PmacError",
    "StructuralError",
    "InfeasibleProfileError",
    "SolverError",
    "CapExceededError",
    "ClassificationError",
    "TieError",
]
