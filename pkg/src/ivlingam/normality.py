"""Non-Gaussianity prerequisite tests and the negentropy diagnostic.

Identification of the direct instrument-outcome effect needs non-Gaussian
structural errors, and non-Gaussianity of the observables is sufficient
evidence for that (a linear mix of independent variables is Gaussian only if
every component is). The report therefore flags the prerequisite as satisfied
when at least one role column rejects Jarque-Bera at the 5% level, while
always surfacing the per-column detail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import (
    Dataset,
    Decision,
    TestName,
    TestOutcome,
    TooFewObservations,
    TooManyObservations,
    ZeroVariance,
    _jsonable,
    validate,
)

SHAPIRO_WILK_MAX_N = 5000

# Contrast-function constants for the negentropy approximation with
# G1(u) = u exp(-u^2/2) and G2(u) = exp(-u^2/2).
_NEGENTROPY_K1 = 36.0 / (8.0 * math.sqrt(3.0) - 9.0)
_NEGENTROPY_K2 = 24.0 / (16.0 * math.sqrt(3.0) - 27.0)


@dataclass(frozen=True)
class MomentSummary:
    """Sample moments with population (1/n) normalization; kurtosis uses the
    Gaussian reference value 3."""

    n: int
    mean: float
    sd: float
    skewness: float
    kurtosis: float


def moment_summary(x: np.ndarray) -> MomentSummary:
    x = np.asarray(x, dtype=np.float64)
    mean = float(x.mean())
    centered = x - mean
    m2 = float(np.mean(centered**2))
    if m2 <= 0.0:
        raise ZeroVariance("moments undefined for a constant vector")
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return MomentSummary(
        n=x.size,
        mean=mean,
        sd=math.sqrt(m2),
        skewness=m3 / m2**1.5,
        kurtosis=m4 / m2**2,
    )


def jarque_bera(x: np.ndarray, alpha: float = 0.05) -> TestOutcome:
    """Skewness/kurtosis test: (n/6) (S^2 + (K-3)^2 / 4) ~ chi2(2) under
    normality. Formally valid but distributionally degenerate on two-point
    columns (binary instruments); a payload note records that caveat."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 8:
        raise TooFewObservations(f"Jarque-Bera needs n >= 8, got {x.size}")
    moments = moment_summary(x)
    statistic = (moments.n / 6.0) * (
        moments.skewness**2 + (moments.kurtosis - 3.0) ** 2 / 4.0
    )
    p_value = float(stats.chi2.sf(statistic, df=2))
    payload = {
        "skewness": moments.skewness,
        "kurtosis": moments.kurtosis,
        "n": moments.n,
    }
    if np.unique(x).size <= 2:
        payload["note"] = "two-point variable: normality test is degenerate"
    return TestOutcome(
        test_name=TestName.JARQUE_BERA,
        statistic=float(statistic),
        p_value=p_value,
        decision=Decision.REJECT if p_value < alpha else Decision.NON_REJECT,
        alpha=alpha,
        payload=payload,
    )


def normal_order_scores(n: int) -> np.ndarray:
    """Royston-approximation coefficients a_1..a_n for the W statistic.

    Antisymmetric, unit norm up to the polynomial tail corrections; W equals
    1 exactly when the sorted sample is an affine image of these scores.
    """
    if n < 3:
        raise TooFewObservations("scores defined for n >= 3")
    m = stats.norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    msq = float(m @ m)
    if n == 3:
        a = np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
        return a
    u = 1.0 / math.sqrt(n)
    c = m / math.sqrt(msq)
    a = np.empty(n)
    a_last = (
        c[-1]
        + 0.221157 * u
        - 0.147981 * u**2
        - 2.071190 * u**3
        + 4.434685 * u**4
        - 2.706056 * u**5
    )
    if n > 5:
        a_penult = (
            c[-2]
            + 0.042981 * u
            - 0.293762 * u**2
            - 1.752461 * u**3
            + 5.682633 * u**4
            - 3.582633 * u**5
        )
        phi = (msq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_last**2 - 2.0 * a_penult**2
        )
        a[2:-2] = m[2:-2] / math.sqrt(phi)
        a[-1], a[-2] = a_last, a_penult
        a[0], a[1] = -a_last, -a_penult
    else:
        phi = (msq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_last**2)
        a[1:-1] = m[1:-1] / math.sqrt(phi)
        a[-1] = a_last
        a[0] = -a_last
    return a


def _shapiro_wilk_p(w: float, n: int) -> float:
    if w >= 1.0:
        return 1.0
    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return min(max(p, 0.0), 1.0)
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        if gamma - math.log(1.0 - w) <= 0.0:
            return 0.0
        g = -math.log(gamma - math.log(1.0 - w))
        mu = 0.5440 - 0.39978 * n + 0.025054 * n**2 - 0.0006714 * n**3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n**2 - 0.0020322 * n**3)
        z = (g - mu) / sigma
    else:
        ln_n = math.log(n)
        g = math.log(1.0 - w)
        mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n**2 + 0.0038915 * ln_n**3
        sigma = math.exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n**2)
        z = (g - mu) / sigma
    return float(stats.norm.sf(z))


def shapiro_wilk(x: np.ndarray, alpha: float = 0.05) -> TestOutcome:
    """W = (sum a_i x_(i))^2 / sum (x_i - xbar)^2 with Royston coefficients
    and p-value; the approximation is calibrated for 3 <= n <= 5000."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 3:
        raise TooFewObservations(f"Shapiro-Wilk needs n >= 3, got {n}")
    if n > SHAPIRO_WILK_MAX_N:
        raise TooManyObservations(
            f"Shapiro-Wilk approximation valid up to n = {SHAPIRO_WILK_MAX_N}, got {n}"
        )
    centered = np.sort(x) - x.mean()
    denom = float(centered @ centered)
    if denom <= 0.0:
        raise ZeroVariance("Shapiro-Wilk undefined for a constant vector")
    scores = normal_order_scores(n)
    w = float((scores @ centered) ** 2 / denom)
    w = min(w, 1.0)
    p_value = _shapiro_wilk_p(w, n)
    return TestOutcome(
        test_name=TestName.SHAPIRO_WILK,
        statistic=w,
        p_value=p_value,
        decision=Decision.REJECT if p_value < alpha else Decision.NON_REJECT,
        alpha=alpha,
        payload={"n": n},
    )


def negentropy(x: np.ndarray) -> float:
    """Contrast-function approximation of the entropy gap to a Gaussian with
    the same variance: non-negative, zero in expectation for Gaussian data."""
    x = np.asarray(x, dtype=np.float64)
    sd = float(x.std())
    if sd <= 0.0:
        raise ZeroVariance("negentropy undefined for a constant vector")
    z = (x - x.mean()) / sd
    damp = np.exp(-0.5 * z * z)
    t1 = float(np.mean(z * damp))
    t2 = float(np.mean(damp)) - math.sqrt(0.5)
    return _NEGENTROPY_K1 * t1 * t1 + _NEGENTROPY_K2 * t2 * t2


@dataclass(frozen=True)
class ColumnNormality:
    name: str
    role: str
    jarque_bera: TestOutcome
    shapiro_wilk: TestOutcome
    negentropy: float


@dataclass(frozen=True)
class NonGaussianityReport:
    """Per-column normality outcomes plus the overall prerequisite flag."""

    columns: tuple[ColumnNormality, ...]
    satisfied: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "columns": [
                {
                    "name": c.name,
                    "role": c.role,
                    "jarque_bera": c.jarque_bera.to_dict(),
                    "shapiro_wilk": c.shapiro_wilk.to_dict(),
                    "negentropy": _jsonable(c.negentropy),
                }
                for c in self.columns
            ],
            "satisfied": self.satisfied,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NonGaussianityReport":
        return cls(
            columns=tuple(
                ColumnNormality(
                    name=c["name"],
                    role=c["role"],
                    jarque_bera=TestOutcome.from_dict(c["jarque_bera"]),
                    shapiro_wilk=TestOutcome.from_dict(c["shapiro_wilk"]),
                    negentropy=c["negentropy"],
                )
                for c in d["columns"]
            ),
            satisfied=d["satisfied"],
            note=d.get("note", ""),
        )


def nongaussianity_report(dataset: Dataset, alpha: float = 0.05) -> NonGaussianityReport:
    """Jarque-Bera and Shapiro-Wilk for every role column; the prerequisite
    is satisfied when at least one column rejects Jarque-Bera."""
    validate(dataset)
    columns = []
    any_jb_reject = False
    for name in dataset.role_names:
        values = dataset.column(name)
        jb = jarque_bera(values, alpha=alpha)
        sw = shapiro_wilk(values, alpha=alpha)
        columns.append(
            ColumnNormality(
                name=name,
                role=dataset.roles[name].value,
                jarque_bera=jb,
                shapiro_wilk=sw,
                negentropy=negentropy(values),
            )
        )
        any_jb_reject = any_jb_reject or jb.decision is Decision.REJECT
    note = "" if any_jb_reject else (
        "no column rejects normality: identification may be compromised, proceed with caution"
    )
    return NonGaussianityReport(columns=tuple(columns), satisfied=any_jb_reject, note=note)
