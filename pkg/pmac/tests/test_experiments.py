"""
Tests for pmac/experiments (sampling, specs and runners).

Runner tests use a handful of trials; figure-scale checks are marked slow.
"""
from unittest.mock import patch

import msgspec
import numpy as np
import pandas as pd
import pytest

from pmac.asymptotics import empirical_fractions
from pmac.cs_enumerator import enumerate_cs_ne
from pmac.errors import SolverError, StructuralError
from pmac.experiments import (
    cross_validate_2x2,
    evaluate_draw,
    ExperimentKind,
    ExperimentSpec,
    HARNESS_CAP,
    load_spec,
    run_experiment,
    run_fractions,
    run_ne_count_pmf,
    run_nse_vs_load,
    run_nse_vs_snr,
    sample_gains,
    sample_quad,
    trial_rng,
    TrialResult,
)
from pmac.sim_utils.io import render_table


def _nse_spec(**overrides) -> ExperimentSpec:
    fields = dict(kind=ExperimentKind.NSE_VS_SNR, seed=7, trials=3, num_players=3,
                  loads=[1.0], snr_grid_db=[0.0, 20.0])
    fields.update(overrides)
    return ExperimentSpec(**fields)


class TestSampling:
    """Test channel draws and random streams."""

    def test_streams_are_reproducible(self):
        a = trial_rng(5, 12, 1).standard_normal(4)
        b = trial_rng(5, 12, 1).standard_normal(4)
        assert np.array_equal(a, b)

    def test_streams_are_distinct(self):
        base = trial_rng(5, 12, 0).standard_normal(4)
        assert not np.array_equal(base, trial_rng(5, 12, 1).standard_normal(4))
        assert not np.array_equal(base, trial_rng(5, 13, 0).standard_normal(4))
        assert not np.array_equal(base, trial_rng(6, 12, 0).standard_normal(4))

    def test_negative_seed_rejected(self):
        with pytest.raises(StructuralError):
            trial_rng(-1, 0)

    def test_rayleigh_power_gains_are_unit_exponential(self):
        gains = sample_gains(400, 500, trial_rng(1, 0)).gains
        assert gains.shape == (400, 500)
        assert gains.mean() == pytest.approx(1.0, abs=0.01)
        assert gains.var() == pytest.approx(1.0, abs=0.03)
        assert gains.min() >= 0.0

    def test_empty_shape_rejected(self):
        with pytest.raises(StructuralError):
            sample_gains(0, 2, trial_rng(1, 0))

    def test_quad_snr(self):
        q = sample_quad(trial_rng(1, 0), snr=100.0, p_max=2.0)
        assert q.snr == pytest.approx(100.0)
        assert q.p_max == 2.0


class TestExperimentSpec:
    """Test spec defaults, validation and fingerprints."""

    def test_nse_vs_snr_defaults(self):
        spec = ExperimentSpec(kind=ExperimentKind.NSE_VS_SNR).resolved()
        assert spec.trials == 500
        assert spec.num_players == 10
        assert spec.loads == [0.5, 1.0, 1.5]
        assert spec.snr_grid_db == [-20.0, -10.0, 0.0, 10.0, 20.0, 30.0]

    def test_other_defaults(self):
        assert ExperimentSpec(kind=ExperimentKind.NSE_VS_LOAD).resolved().num_channels == 4
        assert ExperimentSpec(kind=ExperimentKind.NE_COUNT_PMF).resolved().shapes == [[3, 2], [3, 3]]
        fractions = ExperimentSpec(kind=ExperimentKind.FRACTIONS).resolved()
        assert fractions.num_players == 60
        assert fractions.bandwidths == [0.25, 0.11, 0.20, 0.05, 0.25, 0.14]
        assert ExperimentSpec(kind=ExperimentKind.CROSS_VALIDATE).resolved().trials == 10_000

    def test_explicit_values_kept(self):
        spec = _nse_spec().resolved()
        assert spec.trials == 3
        assert spec.snr_grid_db == [0.0, 20.0]

    @pytest.mark.parametrize("overrides", [
        {"trials": 0},
        {"format": "xml"},
        {"workers": 0},
        {"loads": [0.0]},
    ])
    def test_invalid_specs(self, overrides):
        with pytest.raises(StructuralError):
            _nse_spec(**overrides).resolved()

    def test_pmf_shape_above_cap(self):
        spec = ExperimentSpec(kind=ExperimentKind.NE_COUNT_PMF, shapes=[[20, 3]])
        with pytest.raises(StructuralError):
            spec.resolved()

    def test_fingerprint_ignores_delivery_fields(self):
        spec = _nse_spec()
        moved = msgspec.structs.replace(spec, output_path="elsewhere.csv", workers=4, resume=True, format="json")
        assert spec.fingerprint() == moved.fingerprint()
        assert spec.fingerprint() != msgspec.structs.replace(spec, seed=8).fingerprint()

    def test_load_spec(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text('{"kind": "fractions", "trials": 3, "seed": 11}')
        spec = load_spec(path)
        assert spec.kind is ExperimentKind.FRACTIONS
        assert (spec.trials, spec.seed) == (3, 11)

    def test_load_spec_unknown_kind(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text('{"kind": "nope"}')
        with pytest.raises(msgspec.ValidationError):
            load_spec(path)


class TestEvaluateDraw:
    """Test the per-draw evaluation record."""

    def _result(self, **overrides) -> TrialResult:
        fields = dict(draw_index=0, nse_pa=1.0, nse_cs_best=2.0, nse_cs_worst=1.5, nse_cs_potmax=2.0,
                      ne_count=2, exhaustive=True, pa_converged=True, fractions=[0.5, 0.5])
        fields.update(overrides)
        return TrialResult(**fields)

    def test_fractions_follow_potential_maximizer(self, small_instance, rng):
        config, gains = small_instance
        result = evaluate_draw(gains, config, 0, rng, cap=HARNESS_CAP, descent_starts=4)
        best = enumerate_cs_ne(gains, config).potential_maximizer()
        assert np.array_equal(result.fractions, empirical_fractions(best.profile, config).x)
        assert result.fractions.sum() == pytest.approx(1.0)
        assert not result.fractions.flags.writeable
        assert result.ne_count >= 1
        assert result.nse_cs_best >= result.nse_cs_worst
        assert result.nse_cs_potmax == pytest.approx(best.nse)

    def test_needs_an_equilibrium(self):
        with pytest.raises(StructuralError):
            self._result(ne_count=0)

    def test_best_not_below_worst(self):
        with pytest.raises(StructuralError):
            self._result(nse_cs_best=1.0, nse_cs_worst=1.5)


class TestNseRunners:
    """Test the NSE experiments at toy scale."""

    def test_nse_vs_snr_table(self):
        table = run_nse_vs_snr(_nse_spec())
        assert list(table.columns[:5]) == ["eta", "K", "S", "snr_db", "trials"]
        assert len(table) == 2
        assert (table["trials"] == 3).all()
        assert (table["failed"] == 0).all()
        assert (table["nse_pa_mean"] > 0).all()
        assert (table["nse_cs_best_mean"] >= table["nse_cs_worst_mean"]).all()
        assert (table["ne_count_mean"] >= 1).all()

    def test_realized_load_is_reported(self):
        table = run_nse_vs_snr(_nse_spec(num_players=4, loads=[1.5], snr_grid_db=[10.0], trials=1))
        assert table.loc[0, "S"] == 3
        assert table.loc[0, "eta"] == pytest.approx(4 / 3)

    def test_nse_vs_load_fixes_channels(self):
        spec = ExperimentSpec(kind=ExperimentKind.NSE_VS_LOAD, trials=2, num_channels=2,
                              loads=[0.5, 1.0, 1.5], snr_grid_db=[10.0])
        table = run_nse_vs_load(spec)
        assert table["K"].tolist() == [1, 2, 3]
        assert (table["S"] == 2).all()

    def test_deterministic_output(self):
        first = render_table(run_nse_vs_snr(_nse_spec()))
        second = render_table(run_nse_vs_snr(_nse_spec()))
        assert first == second

    def test_workers_do_not_change_output(self):
        serial = render_table(run_nse_vs_snr(_nse_spec(trials=4)))
        threaded = render_table(run_nse_vs_snr(_nse_spec(trials=4, workers=3)))
        assert serial == threaded

    def test_resume_reuses_cached_trials(self, tmp_path):
        spec = _nse_spec(resume=True)
        first = run_nse_vs_snr(spec, cache_dir=tmp_path)
        with patch("pmac.experiments.runners._nse_task", side_effect=AssertionError("recomputed")):
            second = run_nse_vs_snr(spec, cache_dir=tmp_path)
        pd.testing.assert_frame_equal(first, second)

    def test_failures_are_recorded(self):
        """A failing solver marks the trials failed and the run still returns a table."""
        with patch("pmac.experiments.runners.evaluate_draw", side_effect=SolverError("stalled")):
            table = run_nse_vs_snr(_nse_spec())
        assert len(table) == 2
        assert (table["failed"] == 3).all()
        assert (table["trials"] == 0).all()
        assert table["nse_pa_mean"].isna().all()

    @pytest.mark.slow
    @pytest.mark.parametrize("eta", [0.5, 1.0, 1.5])
    def test_game_ordering_by_load(self, eta):
        """High SNR: one channel per player wins for eta >= 1 and loses at eta = 1/2.
        Low SNR: both games agree within two standard errors."""
        spec = _nse_spec(num_players=10, trials=100, loads=[eta], snr_grid_db=[-20.0, 30.0], workers=4)
        table = run_nse_vs_snr(spec).set_index("snr_db")
        assert (table["failed"] == 0).all()

        low = table.loc[-20.0]
        spread = np.hypot(low["nse_pa_sem"], low["nse_cs_best_sem"])
        assert abs(low["nse_cs_best_mean"] - low["nse_pa_mean"]) <= 2 * spread

        high = table.loc[30.0]
        if eta >= 1.0:
            assert high["nse_cs_best_mean"] >= high["nse_pa_mean"]
        else:
            assert high["nse_pa_mean"] >= high["nse_cs_best_mean"]


class TestNeCountPmf:
    """Test the equilibrium-count distribution."""

    def test_low_snr_has_one_equilibrium(self):
        spec = ExperimentSpec(kind=ExperimentKind.NE_COUNT_PMF, shapes=[[3, 2]], snr_grid_db=[-30.0],
                              trials=30, seed=3)
        table = run_ne_count_pmf(spec)
        assert list(table.columns) == ["K", "S", "snr_db", "ne_count", "probability",
                                       "trials", "bound", "observed_max"]
        assert table["probability"].sum() == pytest.approx(1.0)
        assert (table["bound"] == 4).all()
        single = table.loc[table["ne_count"] == 1, "probability"]
        assert float(single.sum()) >= 0.9

    def test_counts_within_bound(self):
        spec = ExperimentSpec(kind=ExperimentKind.NE_COUNT_PMF, shapes=[[3, 2], [3, 3]],
                              snr_grid_db=[30.0], trials=40, seed=9)
        table = run_ne_count_pmf(spec)
        assert (table["observed_max"] <= table["bound"]).all()
        assert set(table["bound"]) == {4, 7}


class TestFractionRunner:
    """Test the large-system fraction experiment."""

    def test_small_table(self):
        spec = ExperimentSpec(kind=ExperimentKind.FRACTIONS, num_players=12, bandwidths=[0.5, 0.5],
                              snr_grid_db=[10.0], trials=3)
        table = run_fractions(spec)
        assert table["channel"].tolist() == [1, 2]
        assert table["x_formula"].tolist() == pytest.approx([0.5, 0.5], abs=1e-10)
        assert table["x_empirical_mean"].sum() == pytest.approx(1.0)
        assert (table["trials"] == 3).all()

    @pytest.mark.slow
    def test_figure_fractions_follow_bandwidths(self):
        spec = ExperimentSpec(kind=ExperimentKind.FRACTIONS, trials=100, seed=2)
        table = run_fractions(spec)
        assert np.max(np.abs(table["x_empirical_mean"] - table["b_s"])) <= 0.05
        assert np.max(np.abs(table["x_formula"] - table["b_s"])) <= 1e-10


class TestCrossValidation:
    """Test the 2x2 closed forms against the iterative solvers."""

    def test_agreement(self):
        spec = ExperimentSpec(kind=ExperimentKind.CROSS_VALIDATE, trials=60, seed=4)
        table = cross_validate_2x2(spec)
        row = table.iloc[0]
        assert row["trials"] == 60
        assert row["failed"] == 0
        assert row["pa_agreement"] >= 0.99
        assert row["cs_agreement"] >= 0.99
        assert row["pa_max_error"] <= 1e-6

    @pytest.mark.slow
    def test_agreement_at_full_scale(self):
        """10^4 Rayleigh quads at 10 dB agree on at least 99.9% of the non-boundary draws."""
        spec = ExperimentSpec(kind=ExperimentKind.CROSS_VALIDATE, trials=10_000, seed=11,
                              snr_grid_db=[10.0], workers=4)
        row = cross_validate_2x2(spec).iloc[0]
        assert row["trials"] == 10_000
        assert row["failed"] == 0
        assert 0 <= row["boundary_draws"] < 100
        assert row["pa_agreement"] >= 0.999
        assert row["cs_agreement"] >= 0.999


class TestRunExperiment:
    """Test dispatch and table output."""

    def test_writes_csv(self, tmp_path):
        out = tmp_path / "nse.csv"
        table = run_experiment(_nse_spec(output_path=str(out)))
        assert out.read_bytes() == render_table(table)
        assert out.read_text().startswith("eta,K,S,snr_db,trials,")

    def test_writes_json(self, tmp_path):
        out = tmp_path / "pmf.json"
        spec = ExperimentSpec(kind=ExperimentKind.NE_COUNT_PMF, shapes=[[2, 2]], snr_grid_db=[0.0],
                              trials=5, output_path=str(out), format="json")
        run_experiment(spec)
        records = msgspec.json.decode(out.read_bytes())
        assert sum(r["probability"] for r in records) == pytest.approx(1.0)
