"""Six-step validation protocol and the multiple-instrument extension.

Steps: (1) non-Gaussianity prerequisite, (2) first-stage strength,
(3) instrument exogeneity residual check, (4) causal-structure estimation,
(5) the five-test battery, (6) comparison against two-stage least squares.
Soft problems (Gaussian-looking data, weak instrument, inconsistent ordering)
are recorded as warning codes and the protocol continues; only data-validity
errors abort.

With several instruments each one is analyzed in its own trivariate system
and every decision is Bonferroni-adjusted to alpha / K.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import (
    CausalModel,
    Dataset,
    Decision,
    NotSupported,
    RandomSource,
    TestName,
    TestOutcome,
    _jsonable,
    validate,
)
from .extests import (
    ExclusionVerdict,
    TestConfig,
    bootstrap_percentile_test,
    bootstrap_estimates,
    asymptotic_normal_test,
    hsic_exclusion_test,
    likelihood_ratio_test,
    permutation_test,
    run_all,
)
from .lingam import direct_lingam
from .normality import NonGaussianityReport, nongaussianity_report
from .regress import exogeneity_check, first_stage_F, tsls

MULTI_IV_TESTS = (TestName.BOOTSTRAP_PERCENTILE, TestName.LIKELIHOOD_RATIO, TestName.HSIC)


@dataclass(frozen=True)
class ModelSummary:
    ordering: tuple[str, ...]
    instrument_to_treatment: float
    treatment_to_outcome: float
    instrument_to_outcome: float
    consistent_with_iv: bool

    @classmethod
    def from_model(cls, model: CausalModel) -> "ModelSummary":
        return cls(
            ordering=model.ordered_names,
            instrument_to_treatment=model.instrument_to_treatment,
            treatment_to_outcome=model.treatment_to_outcome,
            instrument_to_outcome=model.instrument_to_outcome,
            consistent_with_iv=model.consistent_with_iv,
        )

    def to_dict(self) -> dict:
        return {
            "ordering": list(self.ordering),
            "instrument_to_treatment": _jsonable(self.instrument_to_treatment),
            "treatment_to_outcome": _jsonable(self.treatment_to_outcome),
            "instrument_to_outcome": _jsonable(self.instrument_to_outcome),
            "consistent_with_iv": self.consistent_with_iv,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSummary":
        return cls(
            ordering=tuple(d["ordering"]),
            instrument_to_treatment=d["instrument_to_treatment"],
            treatment_to_outcome=d["treatment_to_outcome"],
            instrument_to_outcome=d["instrument_to_outcome"],
            consistent_with_iv=d["consistent_with_iv"],
        )


@dataclass(frozen=True)
class Comparison:
    lingam_effect: float
    tsls_estimate: float
    tsls_se: float
    gap: float

    def to_dict(self) -> dict:
        return {
            "lingam_effect": _jsonable(self.lingam_effect),
            "tsls_estimate": _jsonable(self.tsls_estimate),
            "tsls_se": _jsonable(self.tsls_se),
            "gap": _jsonable(self.gap),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Comparison":
        return cls(d["lingam_effect"], d["tsls_estimate"], d["tsls_se"], d["gap"])


@dataclass(frozen=True)
class ProtocolReport:
    step1: NonGaussianityReport
    step2: TestOutcome
    step3: TestOutcome
    step4: ModelSummary
    step5: ExclusionVerdict
    step6: Comparison
    warnings: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "step1": self.step1.to_dict(),
            "step2": self.step2.to_dict(),
            "step3": self.step3.to_dict(),
            "step4": self.step4.to_dict(),
            "step5": self.step5.to_dict(),
            "step6": self.step6.to_dict(),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolReport":
        return cls(
            step1=NonGaussianityReport.from_dict(d["step1"]),
            step2=TestOutcome.from_dict(d["step2"]),
            step3=TestOutcome.from_dict(d["step3"]),
            step4=ModelSummary.from_dict(d["step4"]),
            step5=ExclusionVerdict.from_dict(d["step5"]),
            step6=Comparison.from_dict(d["step6"]),
            warnings=tuple(d["warnings"]),
        )


def run_protocol(
    dataset: Dataset,
    config: TestConfig = TestConfig(),
    rng: RandomSource = RandomSource(0),
) -> ProtocolReport:
    """Execute steps 1-6 sequentially on a single-instrument dataset."""
    validate(dataset)
    if len(dataset.instrument_names) != 1:
        raise NotSupported("the six-step protocol expects exactly one instrument")
    warnings: list[str] = []

    step1 = nongaussianity_report(dataset, alpha=config.alpha)
    if not step1.satisfied:
        warnings.append("step1:nongaussianity_not_satisfied")

    step2 = first_stage_F(dataset, alpha=config.alpha)
    weak = step2.payload.get("strength") == "Weak"
    if weak:
        # a weak first stage taints every downstream conclusion
        for step in ("step3", "step4", "step5", "step6"):
            warnings.append(f"{step}:weak_instrument")

    step3 = exogeneity_check(
        dataset, config.permutation_replicates, rng.child("exogeneity"), alpha=config.alpha
    )
    if step3.decision is Decision.REJECT:
        warnings.append("step3:exogeneity_rejected")

    model = direct_lingam(dataset)
    step4 = ModelSummary.from_model(model)
    if not model.consistent_with_iv:
        warnings.append("step4:ordering_inconsistent_with_iv")

    step5 = run_all(dataset, config, rng.child("tests"))

    fit = tsls(dataset)
    estimate = fit.coefficients[dataset.treatment_name]
    step6 = Comparison(
        lingam_effect=model.treatment_to_outcome,
        tsls_estimate=estimate,
        tsls_se=fit.se[dataset.treatment_name],
        gap=abs(model.treatment_to_outcome - estimate),
    )

    return ProtocolReport(
        step1=step1,
        step2=step2,
        step3=step3,
        step4=step4,
        step5=step5,
        step6=step6,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Multiple instruments with Bonferroni correction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstrumentResult:
    instrument: str
    outcomes: tuple[TestOutcome, ...]
    bonferroni_rejections: dict[str, bool]
    direct_effect: float

    def to_dict(self) -> dict:
        return {
            "instrument": self.instrument,
            "outcomes": [o.to_dict() for o in self.outcomes],
            "bonferroni_rejections": dict(self.bonferroni_rejections),
            "direct_effect": _jsonable(self.direct_effect),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstrumentResult":
        return cls(
            instrument=d["instrument"],
            outcomes=tuple(TestOutcome.from_dict(o) for o in d["outcomes"]),
            bonferroni_rejections=d["bonferroni_rejections"],
            direct_effect=d["direct_effect"],
        )


@dataclass(frozen=True)
class MultiIvReport:
    instrument_count: int
    alpha: float
    alpha_adj: float
    per_instrument: tuple[InstrumentResult, ...]
    final_label: str

    def to_dict(self) -> dict:
        return {
            "instrument_count": self.instrument_count,
            "alpha": self.alpha,
            "alpha_adj": self.alpha_adj,
            "per_instrument": [r.to_dict() for r in self.per_instrument],
            "final_label": self.final_label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MultiIvReport":
        return cls(
            instrument_count=d["instrument_count"],
            alpha=d["alpha"],
            alpha_adj=d["alpha_adj"],
            per_instrument=tuple(InstrumentResult.from_dict(r) for r in d["per_instrument"]),
            final_label=d["final_label"],
        )


def _decision_p(outcome: TestOutcome) -> Optional[float]:
    """p-like value for Bonferroni thresholding; the bootstrap test reports a
    percentile p in its payload instead of a headline p-value."""
    if outcome.p_value is not None:
        return outcome.p_value
    return outcome.payload.get("percentile_p")


def _multi_iv_label(results: list[InstrumentResult], tests_per_instrument: int) -> str:
    counts = [sum(r.bonferroni_rejections.values()) for r in results]
    if sum(counts) == 0:
        return "Validated"
    if all(c >= 2 * tests_per_instrument / 3 for c in counts):
        return "Strong Violation"
    non_hsic = [
        name
        for r in results
        for name, rejected in r.bonferroni_rejections.items()
        if rejected and name != TestName.HSIC.value
    ]
    if not non_hsic:
        return "Mixed Validation"
    return "Mixed Evidence"


def run_multi_instrument(
    dataset: Dataset,
    alpha: float = 0.05,
    config: TestConfig = TestConfig(),
    rng: RandomSource = RandomSource(0),
) -> MultiIvReport:
    """Per-instrument trivariate analysis with every decision taken at
    alpha_adj = alpha / K. The default test subset is bootstrap, likelihood
    ratio, and HSIC; config.multi_iv_full_five enables the full battery."""
    validate(dataset)
    instruments = dataset.instrument_names
    if len(instruments) < 2:
        raise NotSupported("multiple-instrument analysis needs K >= 2 instruments")
    alpha_adj = alpha / len(instruments)

    results: list[InstrumentResult] = []
    for name in instruments:
        sub = dataset.trivariate(name)
        sub_rng = rng.child(f"instrument/{name}")
        model = direct_lingam(sub)
        samples = bootstrap_estimates(sub, config.bootstrap_replicates, sub_rng.child("bootstrap"))
        outcomes = [
            bootstrap_percentile_test(sub, alpha=alpha_adj, samples=samples, model=model),
            likelihood_ratio_test(sub, alpha=alpha_adj, model=model),
            hsic_exclusion_test(
                sub,
                permutations=config.permutation_replicates,
                rng=sub_rng.child("hsic"),
                alpha=alpha_adj,
                model=model,
            ),
        ]
        if config.multi_iv_full_five:
            outcomes.insert(
                1,
                asymptotic_normal_test(sub, alpha=alpha_adj, samples=samples, model=model),
            )
            outcomes.insert(
                2,
                permutation_test(
                    sub,
                    permutations=config.permutation_replicates,
                    rng=sub_rng.child("permutation"),
                    alpha=alpha_adj,
                    model=model,
                ),
            )
        rejections = {}
        for outcome in outcomes:
            p = _decision_p(outcome)
            rejections[outcome.test_name.value] = p is not None and p < alpha_adj
        results.append(
            InstrumentResult(
                instrument=name,
                outcomes=tuple(outcomes),
                bonferroni_rejections=rejections,
                direct_effect=model.instrument_to_outcome,
            )
        )

    label = _multi_iv_label(results, 5 if config.multi_iv_full_five else 3)
    return MultiIvReport(
        instrument_count=len(instruments),
        alpha=alpha,
        alpha_adj=alpha_adj,
        per_instrument=tuple(results),
        final_label=label,
    )
