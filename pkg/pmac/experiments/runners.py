"""
Monte-Carlo experiment runners.

Each runner turns an ExperimentSpec into a table. Work is split into tasks
(one gain draw each, evaluated at every SNR point of the grid); a task's
rows depend only on (seed, task index), so thread count and resume do not
change the output. Failing SNR points are recorded in an `error` column and
the run continues.
"""
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from pmac.analytic import classify_cs_2x2, classify_pa_2x2, PaRegion
from pmac.asymptotics import LargeSystemParams, empirical_fractions, solve_fractions
from pmac.cs_enumerator import (
    br_descent_cs, enumerate_cs_ne, ne_upper_bound, ProfileCodec, sample_cs_ne,
)
from pmac.errors import PmacError, StructuralError
from pmac.experiments.sampling import sample_gains, sample_quad, trial_rng
from pmac.experiments.spec import ExperimentKind, ExperimentSpec
from pmac.model import GainMatrix, GameConfig, nse
from pmac.pa_solver import solve_pa_ne
from pmac.sim_utils.cache import TrialCache
from pmac.sim_utils.io import write_table
from pmac.sim_utils.logging import log_event, LogOnce

_log_once = LogOnce(period_sec=60)

# Sub-streams of a trial's generator
_GAIN_STREAM = 0
_DESCENT_STREAM = 1

# Closed-form and iterative 2x2 powers must agree to this (times p_max)
_CROSSVAL_POWER_TOL = 1e-6


# =============================================================================
# Per-trial evaluation
# =============================================================================

@dataclass(frozen=True, eq=False)
class TrialResult:
    """Outcome of both games on one gain draw at one SNR point.

    `fractions` is the share of players per channel at the potential-maximizing
    channel-selection equilibrium.
    """
    draw_index: int
    nse_pa: float
    nse_cs_best: float
    nse_cs_worst: float
    nse_cs_potmax: float
    ne_count: int
    exhaustive: bool
    pa_converged: bool
    fractions: np.ndarray

    def __post_init__(self):
        if self.ne_count < 1:
            raise StructuralError(f"a trial needs at least one equilibrium, got {self.ne_count}")
        if self.nse_cs_best < self.nse_cs_worst:
            raise StructuralError(
                f"best equilibrium NSE {self.nse_cs_best} is below the worst {self.nse_cs_worst}")
        fractions = np.array(self.fractions, dtype=float)
        fractions.flags.writeable = False
        object.__setattr__(self, "fractions", fractions)


def evaluate_draw(gains: GainMatrix, config: GameConfig, draw_index: int, rng: np.random.Generator,
                  cap: int, descent_starts: int) -> TrialResult:
    """
    NSE of the power-allocation equilibrium and of the channel-selection equilibria.

    The channel-selection game is enumerated when S^K fits under `cap`;
    otherwise equilibria come from best-response descent started at
    `descent_starts` random profiles.
    """
    pa = solve_pa_ne(gains, config)
    if ProfileCodec.for_config(config).size <= cap:
        report = enumerate_cs_ne(gains, config, cap=cap, workers=1)
    else:
        report = sample_cs_ne(gains, config, rng, starts=descent_starts)
    potmax = report.potential_maximizer()
    return TrialResult(
        draw_index=draw_index,
        nse_pa=nse(pa.profile, gains, config),
        nse_cs_best=report.best_by_nse().nse,
        nse_cs_worst=report.worst_by_nse().nse,
        nse_cs_potmax=potmax.nse,
        ne_count=report.count,
        exhaustive=report.exhaustive,
        pa_converged=pa.converged,
        fractions=empirical_fractions(potmax.profile, config).x,
    )


def _failed_row(base: dict, exc: PmacError) -> dict:
    _log_once.warning("experiments", "trial_error", str(exc), error_type=type(exc).__name__)
    return {**base, "error": f"{type(exc).__name__}: {exc}"}


def _nse_task(spec: ExperimentSpec, task: tuple[float, int, int, int]) -> list[dict]:
    eta, num_players, num_channels, trial = task
    gains = sample_gains(num_players, num_channels, trial_rng(spec.seed, trial, _GAIN_STREAM))
    rng = trial_rng(spec.seed, trial, _DESCENT_STREAM)
    rows = []
    for snr_db in spec.snr_grid_db:
        base = {"eta": eta, "K": num_players, "S": num_channels, "snr_db": snr_db, "trial": trial}
        config = GameConfig.for_channel_snr(num_players, num_channels, 10.0 ** (snr_db / 10.0))
        try:
            r = evaluate_draw(gains, config, trial, rng, spec.cap, spec.descent_starts)
        except PmacError as e:
            rows.append(_failed_row(base, e))
            continue
        if r.exhaustive and not 1 <= r.ne_count <= ne_upper_bound(num_players, num_channels).L_max:
            log_event("experiments", "ne_count_out_of_range",
                      {**base, "ne_count": r.ne_count}, "error")
        rows.append({**base, "nse_pa": r.nse_pa, "nse_cs_best": r.nse_cs_best,
                     "nse_cs_worst": r.nse_cs_worst, "nse_cs_potmax": r.nse_cs_potmax,
                     "ne_count": r.ne_count, "exhaustive": r.exhaustive,
                     "pa_converged": r.pa_converged, "error": ""})
    return rows


def _pmf_task(spec: ExperimentSpec, task: tuple[int, int, int]) -> list[dict]:
    num_players, num_channels, trial = task
    gains = sample_gains(num_players, num_channels, trial_rng(spec.seed, trial, _GAIN_STREAM))
    rows = []
    for snr_db in spec.snr_grid_db:
        base = {"K": num_players, "S": num_channels, "snr_db": snr_db, "trial": trial}
        config = GameConfig.for_channel_snr(num_players, num_channels, 10.0 ** (snr_db / 10.0))
        try:
            report = enumerate_cs_ne(gains, config, cap=spec.cap, workers=1)
        except PmacError as e:
            rows.append(_failed_row(base, e))
            continue
        rows.append({**base, "ne_count": report.count, "error": ""})
    return rows


def _fraction_task(spec: ExperimentSpec, trial: int) -> list[dict]:
    gains = sample_gains(spec.num_players, len(spec.bandwidths), trial_rng(spec.seed, trial, _GAIN_STREAM))
    rng = trial_rng(spec.seed, trial, _DESCENT_STREAM)
    rows = []
    for snr_db in spec.snr_grid_db:
        config = GameConfig.for_band_snr_db(spec.num_players, len(spec.bandwidths), snr_db,
                                            bandwidths=spec.bandwidths)
        base = {"snr_db": snr_db, "trial": trial}
        try:
            descent = br_descent_cs(gains, config, rng)
        except PmacError as e:
            rows.append(_failed_row(base, e))
            continue
        if not descent.converged:
            rows.append({**base, "error": f"descent did not converge in {descent.sweeps} sweeps"})
            continue
        x = empirical_fractions(descent.profile, config).x
        rows.extend({**base, "channel": s + 1, "x_empirical": float(x[s]), "error": ""}
                    for s in range(len(x)))
    return rows


def _crossval_task(spec: ExperimentSpec, task: tuple[float, int]) -> list[dict]:
    snr_db, trial = task
    q = sample_quad(trial_rng(spec.seed, trial, _GAIN_STREAM), snr=10.0 ** (snr_db / 10.0))
    config, gains = q.to_instance()
    base = {"snr_db": snr_db, "trial": trial}
    try:
        pa = classify_pa_2x2(q)
        cs = classify_cs_2x2(q)
        solved = solve_pa_ne(gains, config)
        enumerated = enumerate_cs_ne(gains, config)
    except PmacError as e:
        return [_failed_row(base, e)]
    if pa.region is PaRegion.DEGENERATE:
        pa_error = float("nan")
    else:
        pa_error = float(np.max(np.abs(pa.profile.powers - solved.profile.powers)))
    return [{
        **base,
        "pa_region": str(pa.region),
        "cs_regions": "+".join(str(r) for r in cs.regions),
        "boundary": pa.boundary or cs.boundary,
        "pa_error": pa_error,
        "pa_match": bool(pa_error <= _CROSSVAL_POWER_TOL * q.p_max),
        "cs_match": set(cs.equilibria) == set(enumerated.profiles),
        "error": "",
    }]


# =============================================================================
# Task execution
# =============================================================================

def _run_tasks(spec: ExperimentSpec, tasks: list, work: Callable[[ExperimentSpec, object], list[dict]],
               cache_dir: Path | None = None) -> pd.DataFrame:
    """Run every task, in order, reusing cached rows when `spec.resume` is set."""
    cache = TrialCache(spec.fingerprint(), cache_dir) if spec.resume else None

    def run(indexed: tuple[int, object]) -> list[dict]:
        index, task = indexed
        if cache is not None:
            cached = cache.get(index)
            if cached is not None:
                return cached
        rows = work(spec, task)
        if cache is not None:
            cache.put(index, rows)
        return rows

    try:
        if spec.workers > 1:
            with ThreadPoolExecutor(max_workers=spec.workers) as pool:
                chunks = list(pool.map(run, enumerate(tasks)))
        else:
            chunks = [run(item) for item in enumerate(tasks)]
    finally:
        if cache is not None:
            cache.close()

    frame = pd.DataFrame([row for chunk in chunks for row in chunk])
    if "error" in frame:
        frame["error"] = frame["error"].fillna("")
        failures = int((frame["error"] != "").sum())
        if failures:
            log_event("experiments", "trial_failures", {"kind": str(spec.kind), "count": failures}, "warning")
    return frame


def _successful(trials: pd.DataFrame, columns: list[str]) -> pd.DataFrame:
    """Rows without an error, with `columns` present even when every row failed."""
    ok = trials[trials["error"] == ""] if "error" in trials else trials
    missing = [c for c in columns if c not in ok]
    if not missing:
        return ok
    return ok.reindex(columns=[*ok.columns, *missing]).astype({c: float for c in missing})


def _summarize(trials: pd.DataFrame, keys: list[str], columns: list[str]) -> pd.DataFrame:
    """Mean, standard deviation and standard error of `columns` per group, over successful trials.

    Every group of `trials` gets a row; a group whose trials all failed
    reports zero trials and NaN statistics.
    """
    everything = trials.groupby(keys, sort=False)
    out = everything.size().rename("total").to_frame()
    grouped = _successful(trials, [*keys, *columns]).groupby(keys, sort=False)
    out["trials"] = grouped.size().reindex(out.index, fill_value=0)
    for col in columns:
        stats = grouped[col].agg(["mean", "std"]).reindex(out.index)
        out[f"{col}_mean"] = stats["mean"]
        out[f"{col}_std"] = stats["std"].where(out["trials"] != 1, 0.0)
        out[f"{col}_sem"] = out[f"{col}_std"] / np.sqrt(out["trials"].where(out["trials"] > 0))
    out["failed"] = (out["total"] - out["trials"]).astype(int)
    return out.drop(columns="total").reset_index()


# =============================================================================
# Runners
# =============================================================================

def _load_shapes(spec: ExperimentSpec) -> list[tuple[float, int, int]]:
    """(eta, K, S) per load; K is fixed and S = round(K / eta), or the reverse for load sweeps."""
    shapes = []
    for eta in spec.loads:
        if spec.kind is ExperimentKind.NSE_VS_LOAD:
            num_channels = spec.num_channels
            num_players = max(1, round(eta * num_channels))
        else:
            num_players = spec.num_players
            num_channels = max(1, round(num_players / eta))
        shapes.append((num_players / num_channels, num_players, num_channels))
    return shapes


def collect_nse_trials(spec: ExperimentSpec, cache_dir: Path | None = None) -> pd.DataFrame:
    """Per-trial rows behind the NSE-versus-SNR and NSE-versus-load tables."""
    spec = spec.resolved()
    tasks = [(eta, k, s, trial) for eta, k, s in _load_shapes(spec) for trial in range(spec.trials)]
    return _run_tasks(spec, tasks, _nse_task, cache_dir)


def run_nse_vs_snr(spec: ExperimentSpec, cache_dir: Path | None = None) -> pd.DataFrame:
    """
    Mean NSE of both games against SNR for each load eta = K/S.

    The realized eta (after rounding S) is reported. Columns: eta, K, S,
    snr_db, trials, {nse_pa, nse_cs_best, nse_cs_worst, nse_cs_potmax}_{mean,std,sem},
    ne_count_mean and failed.
    """
    trials = collect_nse_trials(spec, cache_dir)
    return _summarize(trials, ["eta", "K", "S", "snr_db"],
                      ["nse_pa", "nse_cs_best", "nse_cs_worst", "nse_cs_potmax", "ne_count"])


def run_nse_vs_load(spec: ExperimentSpec, cache_dir: Path | None = None) -> pd.DataFrame:
    """Mean NSE of both games against eta at a fixed channel count, one curve per SNR."""
    trials = collect_nse_trials(spec, cache_dir)
    return _summarize(trials, ["snr_db", "eta", "K", "S"],
                      ["nse_pa", "nse_cs_best", "nse_cs_worst", "ne_count"])


def collect_pmf_trials(spec: ExperimentSpec, cache_dir: Path | None = None) -> pd.DataFrame:
    spec = spec.resolved()
    tasks = [(k, s, trial) for k, s in spec.shapes for trial in range(spec.trials)]
    return _run_tasks(spec, tasks, _pmf_task, cache_dir)


def run_ne_count_pmf(spec: ExperimentSpec, cache_dir: Path | None = None) -> pd.DataFrame:
    """
    Empirical distribution of the number of channel-selection equilibria.

    One row per (K, S, snr_db, ne_count) with its probability, the trial
    count, the upper bound L and the largest count observed.
    """
    trials = collect_pmf_trials(spec, cache_dir)
    ok = _successful(trials, ["K", "S", "snr_db", "ne_count"])
    rows = []
    for (k, s, snr_db), group in ok.groupby(["K", "S", "snr_db"], sort=False):
        bound = ne_upper_bound(int(k), int(s)).L_max
        observed_max = int(group["ne_count"].max())
        if observed_max > bound:
            log_event("experiments", "ne_count_above_bound",
                      {"K": k, "S": s, "snr_db": snr_db, "observed": observed_max, "bound": bound}, "error")
        counts = group["ne_count"].value_counts().sort_index()
        rows.extend({
            "K": int(k), "S": int(s), "snr_db": snr_db, "ne_count": int(count),
            "probability": hits / len(group), "trials": len(group),
            "bound": bound, "observed_max": observed_max,
        } for count, hits in counts.items())
    return pd.DataFrame(rows, columns=["K", "S", "snr_db", "ne_count", "probability",
                                       "trials", "bound", "observed_max"])


def run_fractions(spec: ExperimentSpec, cache_dir: Path | None = None) -> pd.DataFrame:
    """
    Large-system channel fractions against best-response descent.

    For each SNR point, one row per channel with the bandwidth fraction b_s,
    the closed-form fraction and the mean and spread of the empirical
    fraction over trials.
    """
    spec = spec.resolved()
    trials = _run_tasks(spec, list(range(spec.trials)), _fraction_task, cache_dir)
    ok = _successful(trials, ["snr_db", "channel", "x_empirical"])
    num_channels = len(spec.bandwidths)
    rows = []
    for snr_db in spec.snr_grid_db:
        config = GameConfig.for_band_snr_db(spec.num_players, num_channels, snr_db,
                                            bandwidths=spec.bandwidths)
        formula = solve_fractions(LargeSystemParams.from_config(config)).x
        at_snr = ok[ok["snr_db"] == snr_db]
        for s in range(num_channels):
            x = at_snr.loc[at_snr["channel"] == s + 1, "x_empirical"]
            rows.append({
                "snr_db": snr_db, "channel": s + 1, "b_s": float(config.fractions[s]),
                "x_formula": float(formula[s]),
                "x_empirical_mean": float(x.mean()) if len(x) else float("nan"),
                "x_empirical_std": float(x.std(ddof=1)) if len(x) > 1 else 0.0,
                "trials": len(x),
            })
    return pd.DataFrame(rows)


def cross_validate_2x2(spec: ExperimentSpec, cache_dir: Path | None = None) -> pd.DataFrame:
    """
    Agreement of the 2x2 closed forms with the iterative solvers.

    Draws quads at each SNR; boundary draws are counted apart and left out
    of the agreement rates.
    """
    spec = spec.resolved()
    tasks = [(snr_db, trial) for snr_db in spec.snr_grid_db for trial in range(spec.trials)]
    trials = _run_tasks(spec, tasks, _crossval_task, cache_dir)
    rows = []
    for snr_db, group in trials.groupby("snr_db", sort=False):
        ok = _successful(group, ["boundary", "pa_error", "pa_match", "cs_match"])
        clean = ok[~ok["boundary"].astype(bool)]
        rows.append({
            "snr_db": snr_db, "trials": len(group), "failed": len(group) - len(ok),
            "boundary_draws": len(ok) - len(clean),
            "pa_agreement": float(clean["pa_match"].mean()) if len(clean) else float("nan"),
            "cs_agreement": float(clean["cs_match"].mean()) if len(clean) else float("nan"),
            "pa_max_error": float(clean["pa_error"].max()) if len(clean) else float("nan"),
        })
    return pd.DataFrame(rows)


RUNNERS: dict[ExperimentKind, Callable[..., pd.DataFrame]] = {
    ExperimentKind.NSE_VS_SNR: run_nse_vs_snr,
    ExperimentKind.NSE_VS_LOAD: run_nse_vs_load,
    ExperimentKind.NE_COUNT_PMF: run_ne_count_pmf,
    ExperimentKind.FRACTIONS: run_fractions,
    ExperimentKind.CROSS_VALIDATE: cross_validate_2x2,
}


def run_experiment(spec: ExperimentSpec, cache_dir: Path | None = None) -> pd.DataFrame:
    """Run the experiment `spec.kind` names and write its table to `spec.output_path` if set."""
    spec = spec.resolved()
    log_event("experiments", "started",
              {"kind": str(spec.kind), "trials": spec.trials, "seed": spec.seed,
               "fingerprint": spec.fingerprint()})
    table = RUNNERS[spec.kind](spec, cache_dir)
    if spec.output_path:
        write_table(table, spec.output_path, spec.format)
    log_event("experiments", "finished",
              {"kind": str(spec.kind), "rows": len(table), "output": spec.output_path})
    return table
