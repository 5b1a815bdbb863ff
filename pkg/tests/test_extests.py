"""The five direct-effect tests: trivial identities, exhaustive oracles,
sharing of bootstrap replicates, and verdict assembly."""

import itertools
import math

import numpy as np
import pytest

from conftest import make_dataset
from ivlingam import extests
from ivlingam.core import (
    BandwidthDegenerate,
    CausalModel,
    Decision,
    NotSupported,
    RandomSource,
    RankDeficient,
    Role,
    TestName,
    ZeroBootstrapSpread,
)
from ivlingam.extests import (
    ExclusionVerdict,
    TestConfig,
    asymptotic_normal_test,
    bootstrap_estimates,
    bootstrap_percentile_test,
    consensus_label,
    hsic_exclusion_test,
    likelihood_ratio_test,
    lr_statistic,
    permutation_test,
    run_all,
    wald_p_value,
)
from ivlingam.lingam import direct_lingam, fit_matrix
from ivlingam.simulate import SimulationSpec, generate

SMALL_CONFIG = TestConfig(bootstrap_replicates=99, permutation_replicates=99)


def small_dataset(n=140, alpha_zy=0.0, seed=0):
    return generate(SimulationSpec(n=n, alpha_zy=alpha_zy, seed=seed))


class TestBootstrapPercentile:
    def test_violation_rejected(self, violation_dataset):
        out = bootstrap_percentile_test(
            violation_dataset, replicates=199, rng=RandomSource(1)
        )
        assert out.decision is Decision.REJECT
        assert out.p_value is None
        lo, hi = out.payload["ci"]
        assert lo > 0.0 or hi < 0.0

    def test_valid_not_rejected(self, valid_dataset):
        out = bootstrap_percentile_test(valid_dataset, replicates=199, rng=RandomSource(1))
        assert out.decision is Decision.NON_REJECT
        lo, hi = out.payload["ci"]
        assert lo <= 0.0 <= hi

    def test_collinear_outcome_raises(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(100)
        x = 0.7 * z + rng.standard_normal(100)
        ds = make_dataset(z, x, x.copy())
        with pytest.raises(RankDeficient):
            bootstrap_percentile_test(ds, replicates=99, rng=RandomSource(0))

    def test_ci_widens_as_alpha_shrinks(self):
        ds = small_dataset()
        samples = bootstrap_estimates(ds, 199, RandomSource(5))
        widths = []
        previous = None
        for alpha in (0.2, 0.1, 0.02):
            out = bootstrap_percentile_test(ds, alpha=alpha, samples=samples)
            lo, hi = out.payload["ci"]
            widths.append(hi - lo)
            if previous is not None:
                assert lo <= previous[0] and hi >= previous[1]
            previous = (lo, hi)
        assert widths == sorted(widths)

    def test_percentile_p_resolution_floor(self):
        ds = small_dataset()
        out = bootstrap_percentile_test(ds, replicates=199, rng=RandomSource(2))
        assert out.payload["percentile_p"] >= 1.0 / 200

    def test_minimum_replicates(self):
        with pytest.raises(NotSupported):
            bootstrap_estimates(small_dataset(), 50, RandomSource(0))


class TestAsymptoticNormal:
    def test_wald_identity(self):
        w, p = wald_p_value(0.0, 0.3)
        assert w == 0.0
        assert p == pytest.approx(1.0)

    def test_zero_se_rejected(self):
        with pytest.raises(ZeroBootstrapSpread):
            wald_p_value(0.1, 0.0)

    def test_shares_bootstrap_samples(self, violation_dataset):
        samples = bootstrap_estimates(violation_dataset, 199, RandomSource(3))
        a = asymptotic_normal_test(violation_dataset, samples=samples)
        b = bootstrap_percentile_test(violation_dataset, samples=samples)
        assert a.payload["se"] == pytest.approx(b.payload["bootstrap_se"])
        assert a.decision is Decision.REJECT


class TestPermutation:
    def test_exhaustive_matches_enumeration(self):
        gen = RandomSource(8).substream("tiny", 0)
        z = gen.standard_t(5, 6)
        x = 0.7 * z + gen.standard_t(5, 6)
        y = 0.5 * x + 0.4 * z + gen.standard_t(5, 6)
        ds = make_dataset(z, x, y)
        out = permutation_test(ds, rng=RandomSource(0), exhaustive=True)

        names = ds.role_names
        matrix = ds.matrix(names)
        roles = {n: ds.roles[n] for n in names}
        observed = abs(fit_matrix(matrix, names, roles).instrument_to_outcome)
        exceed = 0
        for perm in itertools.permutations(range(6)):
            permuted = matrix.copy()
            permuted[:, 0] = matrix[list(perm), 0]
            estimate = fit_matrix(permuted, names, roles).instrument_to_outcome
            if abs(estimate) >= observed:
                exceed += 1
        assert out.p_value == exceed / math.factorial(6)
        assert out.payload["exhaustive"]

    def test_violation_rejected(self, violation_dataset):
        out = permutation_test(violation_dataset, permutations=199, rng=RandomSource(4))
        assert out.decision is Decision.REJECT
        assert out.p_value <= 0.01

    def test_p_resolution(self):
        out = permutation_test(small_dataset(), permutations=99, rng=RandomSource(5))
        assert out.p_value >= 1.0 / 100
        assert (out.p_value * 100) == pytest.approx(round(out.p_value * 100))


class TestLikelihoodRatio:
    def test_identical_residuals_give_zero(self, valid_dataset):
        model = direct_lingam(valid_dataset)
        lr, raw = lr_statistic(model, model)
        assert lr == 0.0
        assert abs(raw) <= 1e-10

    def test_violation_rejected(self, violation_dataset):
        out = likelihood_ratio_test(violation_dataset)
        assert out.decision is Decision.REJECT
        assert out.p_value < 0.0001
        assert out.statistic >= 0.0

    def test_statistic_floored_with_diagnostic(self, valid_dataset):
        out = likelihood_ratio_test(valid_dataset)
        assert out.statistic >= 0.0
        if out.payload["raw_statistic"] < -1e-6:
            assert "warning" in out.payload

    def test_constant_residual_degenerate(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal(60)
        x = 0.7 * z + rng.standard_normal(60)
        y = 2.0 * x  # outcome exactly proportional to treatment
        ds = make_dataset(z, x, y)
        with pytest.raises((BandwidthDegenerate, RankDeficient)):
            likelihood_ratio_test(ds)


class TestHsicExclusion:
    def test_violation_rejected(self, violation_dataset):
        out = hsic_exclusion_test(violation_dataset, permutations=199, rng=RandomSource(6))
        assert out.decision is Decision.REJECT
        assert out.statistic > 0
        assert "direct_effect_estimate" in out.payload

    def test_size_on_engineered_independence(self):
        # outcome residual constructed exactly independent of the instrument
        rejections = 0
        trials = 200
        for seed in range(trials):
            gen = RandomSource(seed).substream("indep", 0)
            z = gen.standard_t(5, 200)
            x = 0.7 * z + gen.standard_t(5, 200)
            y = 0.5 * x + gen.standard_t(5, 200)
            ds = make_dataset(z, x, y)
            out = hsic_exclusion_test(ds, permutations=199, rng=RandomSource(seed + 999))
            rejections += out.decision is Decision.REJECT
        assert 0.01 <= rejections / trials <= 0.09


class TestRunAll:
    def test_violation_full_consensus(self, violation_dataset):
        verdict = run_all(violation_dataset, SMALL_CONFIG, RandomSource(7))
        assert verdict.rejections == 5
        assert verdict.label == "Strong Violation (5/5)"
        assert [o.test_name for o in verdict.outcomes] == [
            TestName.BOOTSTRAP_PERCENTILE,
            TestName.ASYMPTOTIC_NORMAL,
            TestName.PERMUTATION,
            TestName.LIKELIHOOD_RATIO,
            TestName.HSIC,
        ]

    def test_deterministic(self, valid_dataset):
        a = run_all(valid_dataset, SMALL_CONFIG, RandomSource(8))
        b = run_all(valid_dataset, SMALL_CONFIG, RandomSource(8))
        assert a.to_dict() == b.to_dict()

    def test_round_trip(self, valid_dataset):
        verdict = run_all(valid_dataset, SMALL_CONFIG, RandomSource(9))
        assert ExclusionVerdict.from_dict(verdict.to_dict()).to_dict() == verdict.to_dict()

    def test_failed_test_recorded_not_fatal(self, valid_dataset, monkeypatch):
        def boom(*args, **kwargs):
            raise BandwidthDegenerate("synthetic failure")

        monkeypatch.setattr(extests, "likelihood_ratio_test", boom)
        verdict = run_all(valid_dataset, SMALL_CONFIG, RandomSource(10))
        lr = verdict.outcomes[3]
        assert lr.test_name is TestName.LIKELIHOOD_RATIO
        assert lr.decision is None
        assert "synthetic failure" in lr.payload["error"]
        assert len(verdict.outcomes) == 5

    def test_multi_instrument_refused(self):
        from helpers import two_instrument_dataset

        ds = two_instrument_dataset(n=100, seed=0)
        with pytest.raises(NotSupported):
            run_all(ds, SMALL_CONFIG, RandomSource(0))


@pytest.mark.parametrize(
    "rejections,expected",
    [
        (0, "Consensus NonRejection (0/5)"),
        (1, "Mixed Evidence (1/5)"),
        (3, "Mixed Evidence (3/5)"),
        (4, "Strong Violation (4/5)"),
        (5, "Strong Violation (5/5)"),
    ],
)
def test_consensus_label_bands(rejections, expected):
    assert consensus_label(rejections) == expected
