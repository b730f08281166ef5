"""
Centralized configuration for the pmac solvers and experiments.

All tunable constants live here so solvers, runners and the CLI agree on
tolerances and caps.

Categories:
- Paths: data, cache and log locations
- Tolerances: feasibility, identity, degeneracy and boundary slacks
- Solver: water-filling bisection and best-response sweep limits
- Enumeration: profile caps, chunking and best-response descent limits
- Experiments: Monte-Carlo sizes and figure parameters
- Exit codes: CLI process status
"""
import os
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path


# =============================================================================
# Paths
# =============================================================================

DATA_DIR = Path(os.environ.get("PMAC_DATA_DIR", Path.home() / ".pmac" / "data"))
CACHE_DIR = DATA_DIR / "cache"
LOG_FILE = DATA_DIR / "pmac-events.jsonl"


# =============================================================================
# Numerical tolerances
# =============================================================================

@dataclass(frozen=True)
class ToleranceConfig:
    """Slack values shared by the model, solvers and classifiers."""
    feasibility_slack: float = 1e-9  # Row-sum power constraint
    potential_identity: float = 1e-10  # |du - dphi| for unilateral deviations
    degeneracy: float = 1e-9  # Relative |g12*g21 - g11*g22| for the continuum path
    boundary_slack: float = 1e-12  # Relative region-inequality margin
    saturation: float = 1e-8  # Row sums at a water-filling fixed point
    closed_form_agreement: float = 1e-8  # Closed-form gap vs direct evaluation
    fraction_sum: float = 1e-12  # Bandwidth fractions must sum to one


Tolerances = ToleranceConfig()


# =============================================================================
# Water-filling and best-response dynamics
# =============================================================================

@dataclass(frozen=True)
class SolverConfig:
    """Water-filling best-response limits."""
    bisection_tolerance: float = 1e-13  # Relative, on the water level
    max_bisection_iters: int = 200
    br_sweep_tolerance: float = 1e-9  # Max-norm profile change per round
    max_rounds: int = 10_000
    kkt_tolerance: float = 1e-10  # Fraction-solver KKT residual


Solver = SolverConfig()


# =============================================================================
# Channel-selection enumeration
# =============================================================================

@dataclass(frozen=True)
class EnumerationConfig:
    """Caps and chunking for exhaustive profile enumeration."""
    max_profiles: int = int(os.environ.get("PMAC_ENUM_CAP", str(2 ** 24)))
    max_graph_vertices: int = 2 ** 16
    chunk_size: int = 2 ** 15  # Profiles decoded per vectorized block
    decode_cache_size: int = 64  # LRU entries of decoded choice blocks
    br_max_sweeps: int = 10_000
    sample_starts: int = 8  # Random BR-descent starts for sampled NE reports
    workers: int = int(os.environ.get("PMAC_WORKERS", "1"))


Enumeration = EnumerationConfig()


# =============================================================================
# Experiments
# =============================================================================

@dataclass(frozen=True)
class ExperimentConfig:
    """Monte-Carlo sizes and figure parameters."""
    default_trials: int = 500
    crossval_trials: int = 10_000
    figure_players: int = 10
    figure_loads: tuple[float, ...] = (0.5, 1.0, 1.5)
    snr_grid_db: tuple[float, ...] = (-20.0, -10.0, 0.0, 10.0, 20.0, 30.0)
    pmf_snr_grid_db: tuple[float, ...] = (-30.0, 0.0, 30.0)
    fraction_players: int = 60
    fraction_bandwidths: tuple[float, ...] = (0.25, 0.11, 0.20, 0.05, 0.25, 0.14)
    fraction_snr_db: float = 10.0
    float_format: str = "%.12g"  # CSV float rendering


Experiments = ExperimentConfig()


# =============================================================================
# Exit codes
# =============================================================================

class ExitCode(IntEnum):
    """Process status returned by the CLI."""
    OK = 0
    USAGE = 1
    NOT_CONVERGED = 2
    CAP_EXCEEDED = 3


# =============================================================================
# JSON Serialization (msgspec)
# =============================================================================

import msgspec

_encoder = msgspec.json.Encoder()


def fast_json_dumps(obj) -> bytes:
    """Fast JSON encode using msgspec."""
    return _encoder.encode(obj)
