"""
Experiment specifications.

An ExperimentSpec is read from JSON; unset fields take the figure defaults
of its kind via `resolved()`.
"""
from enum import Enum
from pathlib import Path

import msgspec

from pmac.config import Enumeration, Experiments
from pmac.errors import StructuralError
from pmac.sim_utils.io import stable_hash


class ExperimentKind(str, Enum):
    NSE_VS_SNR = "nse_vs_snr"
    NSE_VS_LOAD = "nse_vs_load"
    NE_COUNT_PMF = "ne_count_pmf"
    FRACTIONS = "fractions"
    CROSS_VALIDATE = "cross_validate_2x2"

    def __str__(self) -> str:
        return self.value


# Largest S^K enumerated per trial; bigger games fall back to descent samples.
HARNESS_CAP = 2 ** 16


class ExperimentSpec(msgspec.Struct, kw_only=True, omit_defaults=True):
    """
    Parameters of one experiment.

    Attributes:
        kind: Which experiment to run
        seed: Root of every per-trial random stream
        trials: Draws per grid point
        snr_grid_db: SNR points (dB)
        num_players: K (nse_vs_snr, fractions)
        num_channels: S (nse_vs_load)
        loads: eta = K/S values (nse_vs_snr, nse_vs_load)
        shapes: Explicit [K, S] pairs (ne_count_pmf)
        bandwidths: Channel bandwidth fractions (fractions)
        cap: Largest S^K enumerated exhaustively
        descent_starts: Best-response descent starts when S^K exceeds the cap
        workers: Threads running trials
        resume: Reuse per-trial results cached by an earlier run
        output_path: Table destination (empty: do not write)
        format: "csv" or "json"
    """
    kind: ExperimentKind
    seed: int = 0
    trials: int | None = None
    snr_grid_db: list[float] = msgspec.field(default_factory=list)
    num_players: int | None = None
    num_channels: int | None = None
    loads: list[float] = msgspec.field(default_factory=list)
    shapes: list[list[int]] = msgspec.field(default_factory=list)
    bandwidths: list[float] = msgspec.field(default_factory=list)
    cap: int = HARNESS_CAP
    descent_starts: int = Enumeration.sample_starts
    workers: int = 1
    resume: bool = False
    output_path: str = ""
    format: str = "csv"

    def resolved(self) -> "ExperimentSpec":
        """Copy with the kind's defaults filled in, validated."""
        kind = self.kind
        updates: dict = {}
        if self.trials is None:
            updates["trials"] = Experiments.crossval_trials if kind is ExperimentKind.CROSS_VALIDATE \
                else Experiments.default_trials
        if not self.snr_grid_db:
            updates["snr_grid_db"] = {
                ExperimentKind.NSE_VS_SNR: list(Experiments.snr_grid_db),
                ExperimentKind.NSE_VS_LOAD: [0.0, 10.0, 20.0],
                ExperimentKind.NE_COUNT_PMF: list(Experiments.pmf_snr_grid_db),
                ExperimentKind.FRACTIONS: [Experiments.fraction_snr_db],
                ExperimentKind.CROSS_VALIDATE: [10.0],
            }[kind]
        if self.num_players is None:
            if kind is ExperimentKind.NSE_VS_SNR:
                updates["num_players"] = Experiments.figure_players
            elif kind is ExperimentKind.FRACTIONS:
                updates["num_players"] = Experiments.fraction_players
        if self.num_channels is None and kind is ExperimentKind.NSE_VS_LOAD:
            updates["num_channels"] = 4
        if not self.loads:
            if kind is ExperimentKind.NSE_VS_SNR:
                updates["loads"] = list(Experiments.figure_loads)
            elif kind is ExperimentKind.NSE_VS_LOAD:
                updates["loads"] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        if not self.shapes and kind is ExperimentKind.NE_COUNT_PMF:
            updates["shapes"] = [[3, 2], [3, 3]]
        if not self.bandwidths and kind is ExperimentKind.FRACTIONS:
            updates["bandwidths"] = list(Experiments.fraction_bandwidths)
        spec = msgspec.structs.replace(self, **updates)
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.trials is not None and self.trials < 1:
            raise StructuralError(f"trials must be >= 1, got {self.trials}")
        if not self.snr_grid_db:
            raise StructuralError("snr_grid_db must not be empty")
        if self.workers < 1 or self.cap < 1 or self.descent_starts < 1:
            raise StructuralError("workers, cap and descent_starts must be >= 1")
        if self.format not in ("csv", "json"):
            raise StructuralError(f"format must be csv or json, got {self.format!r}")
        if any(eta <= 0 for eta in self.loads):
            raise StructuralError("loads must be positive")
        if self.kind is ExperimentKind.NE_COUNT_PMF:
            for shape in self.shapes:
                if len(shape) != 2 or min(shape) < 1:
                    raise StructuralError(f"shape {shape} is not a [K, S] pair")
                if shape[1] ** shape[0] > self.cap:
                    raise StructuralError(f"shape {shape} exceeds the enumeration cap {self.cap}")

    def fingerprint(self) -> str:
        """Hash of every field that changes results (not paths, format, workers or resume)."""
        core = msgspec.structs.replace(self, output_path="", format="csv", workers=1, resume=False)
        return stable_hash(msgspec.json.encode(core))


def load_spec(path: Path | str) -> ExperimentSpec:
    return msgspec.json.decode(Path(path).read_bytes(), type=ExperimentSpec)
