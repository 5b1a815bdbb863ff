"""OLS, first-stage strength, exogeneity residual check, and 2SLS."""

import itertools
import math

import numpy as np
import pytest

from conftest import make_dataset
from helpers import parallel_map
from ivlingam.core import Decision, RandomSource, RankDeficient, TooFewObservations
from ivlingam.independence import center_gram, gaussian_gram, hsic_from_grams, median_heuristic
from ivlingam.regress import exogeneity_check, first_stage_F, ols, tsls
from ivlingam.simulate import SimulationSpec, generate


class TestOls:
    def test_exact_line(self):
        x = np.linspace(-3, 3, 40)
        fit = ols(2.0 * x, x, names=["x"])
        assert fit.coefficients["x"] == pytest.approx(2.0, abs=1e-12)
        assert np.max(np.abs(fit.residuals)) < 1e-12
        assert fit.r2 == pytest.approx(1.0)

    def test_closed_form_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(120)
        y = 0.8 * x + rng.standard_normal(120)
        fit = ols(y, x, names=["x"])
        xc = x - x.mean()
        yc = y - y.mean()
        assert fit.coefficients["x"] == pytest.approx(float(xc @ yc / (xc @ xc)), abs=1e-12)

    def test_orthogonal_regressor(self):
        # construct x exactly orthogonal to y after centering
        rng = np.random.default_rng(1)
        y = rng.standard_normal(60)
        x = rng.standard_normal(60)
        yc = y - y.mean()
        x = x - x.mean()
        x -= (x @ yc / (yc @ yc)) * yc
        fit = ols(y, x)
        assert abs(fit.coefficients["x0"]) < 1e-12
        assert fit.F < 1e-20

    def test_residuals_orthogonal_to_regressors(self):
        rng = np.random.default_rng(2)
        n = 300
        X = rng.standard_normal((n, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + rng.standard_normal(n)
        fit = ols(y, X)
        Xc = X - X.mean(axis=0)
        for j in range(3):
            assert abs(float(fit.residuals @ Xc[:, j])) <= 1e-8 * n

    def test_rank_deficient(self):
        x = np.arange(30.0)
        with pytest.raises(RankDeficient):
            ols(x**2, [x, 2.0 * x])

    def test_too_few_observations(self):
        with pytest.raises(TooFewObservations):
            ols(np.array([1.0, 2.0, 3.0]), [np.array([1.0, 2.0, 4.0]), np.array([2.0, 1.0, 5.0])])


class TestFirstStageF:
    def test_strong_dgp_large_F(self):
        out = first_stage_F(generate(SimulationSpec(n=500, seed=0)))
        assert out.statistic > 100
        assert out.payload["strength"] == "Strong"
        assert out.decision is Decision.REJECT

    def test_rescaling_invariance(self, valid_dataset):
        base = first_stage_F(valid_dataset).statistic
        scaled = make_dataset(
            1234.5 * valid_dataset.column("z"),
            valid_dataset.column("x"),
            valid_dataset.column("y"),
        )
        rescaled = first_stage_F(scaled).statistic
        assert abs(base - rescaled) <= 1e-8 * abs(base)

    def test_irrelevant_instrument_flags_weak(self):
        weak = sum(
            first_stage_F(generate(SimulationSpec(n=500, alpha_zx=0.0, seed=s))).payload[
                "strength"
            ]
            == "Weak"
            for s in range(500)
        )
        assert weak >= 475  # >= 95% of 500 seeds


def _tsls_worker(seed):
    return tsls(generate(SimulationSpec(n=2000, seed=seed))).coefficients["x"]


def _exo_size_worker(seed):
    ds = generate(SimulationSpec(n=200, seed=seed))
    return exogeneity_check(ds, 199, RandomSource(seed)).decision is Decision.NON_REJECT


def _exo_power_worker(seed):
    gen = RandomSource(seed).substream("dgp-quad", 0)
    z = gen.standard_t(5, 500)
    x = 0.7 * z + 0.5 * z**2 + gen.standard_t(5, 500)
    y = 0.5 * x + gen.standard_t(5, 500)
    ds = make_dataset(z, x, y)
    return exogeneity_check(ds, 199, RandomSource(seed)).decision is Decision.REJECT


class TestExogeneityCheck:
    def test_size_when_instrument_exogenous(self):
        hits = sum(parallel_map(_exo_size_worker, range(100)))
        assert hits >= 90

    def test_power_against_quadratic_dependence(self):
        hits = sum(parallel_map(_exo_power_worker, range(100)))
        assert hits >= 80

    def test_exhaustive_matches_enumeration(self):
        # n=7 keeps the 5040-permutation enumeration tractable
        gen = RandomSource(3).substream("small", 0)
        z = gen.standard_normal(7)
        x = 0.9 * z + gen.standard_normal(7)
        y = 0.5 * x + gen.standard_normal(7)
        ds = make_dataset(z, x, y)
        out = exogeneity_check(ds, 99, RandomSource(0), exhaustive=True)

        first = ols(ds.column("x"), ds.column("z"), names=["z"])
        bz = median_heuristic(ds.column("z"))
        br = median_heuristic(first.residuals)
        centered = center_gram(gaussian_gram(ds.column("z"), bz))
        gram_r = gaussian_gram(first.residuals, br)
        observed = hsic_from_grams(centered, gram_r)
        exceed = 0
        for perm in itertools.permutations(range(7)):
            p = np.array(perm)
            if hsic_from_grams(centered, gaussian_gram(first.residuals[p], br)) >= observed:
                exceed += 1
        assert out.p_value == exceed / math.factorial(7)


class TestTsls:
    def test_instrument_equals_treatment_reduces_to_ols(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(200)
        y = 0.7 * x + rng.standard_normal(200)
        ds = make_dataset(x.copy(), x, y)
        iv = tsls(ds)
        direct = ols(y, x, names=["x"])
        assert iv.coefficients["x"] == pytest.approx(direct.coefficients["x"], abs=1e-10)

    def test_single_instrument_equals_covariance_ratio(self, violation_dataset):
        ds = violation_dataset
        fit = tsls(ds)
        z, x, y = (ds.column(c) for c in ("z", "x", "y"))
        wald = float(np.cov(z, y)[0, 1] / np.cov(z, x)[0, 1])
        assert fit.coefficients["x"] == pytest.approx(wald, abs=1e-10)

    def test_recovers_treatment_effect(self):
        estimates = parallel_map(_tsls_worker, range(200))
        assert abs(float(np.median(estimates)) - 0.5) < 0.05

    def test_se_positive(self, valid_dataset):
        fit = tsls(valid_dataset)
        assert fit.se["x"] > 0
        assert 0.0 <= fit.r2 <= 1.0
