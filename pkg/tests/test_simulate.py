"""Structural data generator and the rejection-rate harness."""

import numpy as np
import pytest

from ivlingam.core import InvalidSpec, RandomSource
from ivlingam.extests import TestConfig
from ivlingam.normality import moment_summary
from ivlingam.regress import first_stage_F, ols
from ivlingam.simulate import (
    PowerTable,
    SimulationSpec,
    generate,
    power_analysis,
    save_power_csv,
    worker_count,
)

FAST_CONFIG = TestConfig(bootstrap_replicates=99, permutation_replicates=99)


class TestSimulationSpec:
    def test_rejects_tiny_n(self):
        with pytest.raises(InvalidSpec):
            SimulationSpec(n=5)

    def test_rejects_infinite_variance_df(self):
        with pytest.raises(InvalidSpec):
            SimulationSpec(df=2.0)


class TestGenerate:
    def test_deterministic_per_seed(self):
        a = generate(SimulationSpec(n=200, seed=11))
        b = generate(SimulationSpec(n=200, seed=11))
        for name in a.names:
            assert np.array_equal(a.column(name), b.column(name))

    def test_independent_structure_uncorrelated(self):
        spec = SimulationSpec(n=2500, alpha_zx=0.0, alpha_zy=0.0, alpha_xy=0.0, seed=1)
        ds = generate(spec)
        bound = 3.0 / np.sqrt(ds.n)
        for a, b in (("z", "x"), ("z", "y"), ("x", "y")):
            corr = np.corrcoef(ds.column(a), ds.column(b))[0, 1]
            assert abs(corr) < bound

    def test_outcome_equation_is_plain_regression(self):
        # the outcome equation is a literal regression given the system, so
        # OLS of y on (x, z) must recover the structural coefficients
        ds = generate(SimulationSpec(n=2000, alpha_zy=0.3, seed=2))
        fit = ols(ds.column("y"), [ds.column("x"), ds.column("z")], names=["x", "z"])
        assert fit.coefficients["x"] == pytest.approx(0.5, abs=0.1)
        assert fit.coefficients["z"] == pytest.approx(0.3, abs=0.1)

    def test_strong_instrument_first_stage(self):
        strong = sum(
            first_stage_F(generate(SimulationSpec(n=500, seed=s))).statistic > 100
            for s in range(200)
        )
        assert strong >= 190  # >= 95% of seeds

    def test_error_kurtosis_matches_t5(self):
        # single-seed smoke check: t(5) excess kurtosis is 6. The estimator
        # itself is heavy-tailed (its dispersion needs the 8th moment), so
        # this is a distribution-shape check, not a convergence statement.
        z = generate(SimulationSpec(n=100_000, alpha_zx=0.0, alpha_zy=0.0, seed=1)).column("z")
        assert moment_summary(z).kurtosis == pytest.approx(9.0, abs=1.0)


class TestPowerAnalysis:
    def test_single_replicate_rates_are_binary(self):
        table = power_analysis(
            [0.0], [60], reps=1, config=FAST_CONFIG, rng=RandomSource(3)
        )
        cell = table.cell(0.0, 60)
        for rate in cell.rates.values():
            assert rate in (0.0, 1.0)

    def test_detects_large_violation_at_modest_scale(self):
        table = power_analysis(
            [0.0, 0.8], [80], reps=6, config=FAST_CONFIG, rng=RandomSource(4)
        )
        null_cell = table.cell(0.0, 80)
        hit_cell = table.cell(0.8, 80)
        assert hit_cell.rates["LikelihoodRatio"] >= null_cell.rates["LikelihoodRatio"]
        assert hit_cell.rates["Permutation"] >= 0.5

    def test_deterministic_at_any_worker_count(self, monkeypatch):
        results = []
        for threads in ("1", "2"):
            monkeypatch.setenv("IVLINGAM_THREADS", threads)
            table = power_analysis(
                [0.3], [60], reps=4, config=FAST_CONFIG, rng=RandomSource(5)
            )
            results.append(table.to_dict())
        assert results[0] == results[1]

    def test_round_trip(self):
        table = power_analysis([0.0], [60], reps=2, config=FAST_CONFIG, rng=RandomSource(6))
        assert PowerTable.from_dict(table.to_dict()).to_dict() == table.to_dict()

    def test_csv_export_layout(self, tmp_path):
        table = power_analysis([0.0], [60], reps=2, config=FAST_CONFIG, rng=RandomSource(7))
        path = tmp_path / "power.csv"
        save_power_csv(table, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "alpha_zy,n,test,rate,reps"
        assert len(lines) == 1 + 5  # one row per test

    def test_empty_grid_rejected(self):
        with pytest.raises(InvalidSpec):
            power_analysis([], [100], reps=1, rng=RandomSource(0))

    def test_invalid_thread_env(self, monkeypatch):
        monkeypatch.setenv("IVLINGAM_THREADS", "zero")
        with pytest.raises(InvalidSpec):
            worker_count()
