"""Classical regression building blocks: centered OLS, first-stage strength,
the instrument-exogeneity residual check, and two-stage least squares.

All regressions subtract column means instead of carrying an intercept, which
makes the coefficient algebra exact for the intercept-free structural
equations the rest of the package estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .core import (
    Dataset,
    Decision,
    RandomSource,
    RankDeficient,
    TestName,
    TestOutcome,
    TooFewObservations,
    validate,
)
from .independence import hsic_test

WEAK_INSTRUMENT_F = 10.0


@dataclass(frozen=True)
class OlsFit:
    coefficients: dict[str, float]
    residuals: np.ndarray
    se: dict[str, float]
    r2: float
    F: float
    df: tuple[int, int]

    def __post_init__(self):
        res = np.asarray(self.residuals, dtype=np.float64).copy()
        res.setflags(write=False)
        object.__setattr__(self, "residuals", res)


def _design(X, names: Optional[Sequence[str]]) -> tuple[np.ndarray, list[str]]:
    if isinstance(X, (list, tuple)):
        X = np.column_stack([np.asarray(c, dtype=np.float64) for c in X])
    else:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
    if names is None:
        names = [f"x{j}" for j in range(X.shape[1])]
    return X, list(names)


def ols(y: np.ndarray, X, names: Optional[Sequence[str]] = None) -> OlsFit:
    """Centered least squares of y on one or more regressors.

    Residuals are exactly mean-zero and orthogonal to every (centered)
    regressor; conventional homoskedastic standard errors.
    """
    y = np.asarray(y, dtype=np.float64)
    X, names = _design(X, names)
    n, k = X.shape
    if y.shape != (n,):
        raise TooFewObservations(f"y has length {y.size}, design has {n} rows")
    if n <= k + 1:
        raise TooFewObservations(f"need n > {k + 1} observations, got {n}")

    yc = y - y.mean()
    Xc = X - X.mean(axis=0)
    gram = Xc.T @ Xc
    if np.linalg.matrix_rank(Xc) < k:
        raise RankDeficient("design matrix is rank deficient after centering")
    beta = np.linalg.solve(gram, Xc.T @ yc)
    residuals = yc - Xc @ beta

    df_den = n - k - 1
    rss = float(residuals @ residuals)
    tss = float(yc @ yc)
    sigma2 = rss / df_den
    cov = sigma2 * np.linalg.inv(gram)
    se = np.sqrt(np.diag(cov))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    if rss > 0:
        f_stat = ((tss - rss) / k) / (rss / df_den)
    else:
        f_stat = float("inf")
    return OlsFit(
        coefficients=dict(zip(names, beta.tolist())),
        residuals=residuals,
        se=dict(zip(names, se.tolist())),
        r2=r2,
        F=float(f_stat),
        df=(k, df_den),
    )


def first_stage_F(dataset: Dataset, alpha: float = 0.05) -> TestOutcome:
    """F-statistic of regressing the treatment on the instrument(s); the
    payload flags Weak below the conventional threshold of 10."""
    validate(dataset)
    z_names = dataset.instrument_names
    fit = ols(dataset.column(dataset.treatment_name), dataset.matrix(z_names), names=z_names)
    k, df_den = fit.df
    p_value = float(stats.f.sf(fit.F, k, df_den)) if np.isfinite(fit.F) else 0.0
    return TestOutcome(
        test_name=TestName.FIRST_STAGE_F,
        statistic=fit.F,
        p_value=p_value,
        decision=Decision.REJECT if p_value < alpha else Decision.NON_REJECT,
        alpha=alpha,
        payload={
            "strength": "Weak" if fit.F < WEAK_INSTRUMENT_F else "Strong",
            "threshold": WEAK_INSTRUMENT_F,
            "r2": fit.r2,
            "df": list(fit.df),
            "coefficients": fit.coefficients,
        },
    )


def exogeneity_check(
    dataset: Dataset,
    permutations: int,
    rng: RandomSource,
    alpha: float = 0.05,
    exhaustive: bool = False,
) -> TestOutcome:
    """HSIC permutation test between each instrument and the first-stage
    residual of the treatment.

    With no control covariates (the baseline model) the only residual
    available is the treatment minus its projection on the instrument(s);
    dependence between that residual and an instrument signals an exogeneity
    problem even when correlation is zero by construction.
    """
    validate(dataset)
    z_names = dataset.instrument_names
    fit = ols(dataset.column(dataset.treatment_name), dataset.matrix(z_names), names=z_names)

    per_instrument = {}
    worst = None
    for name in z_names:
        result = hsic_test(
            dataset.column(name),
            fit.residuals,
            permutations,
            rng.child(f"exogeneity/{name}"),
            exhaustive=exhaustive,
        )
        per_instrument[name] = {
            "statistic": result.statistic,
            "p_value": result.permutation_p,
            "permutations": result.permutations_used,
        }
        if worst is None or result.permutation_p < worst[1].permutation_p:
            worst = (name, result)

    name, headline = worst
    return TestOutcome(
        test_name=TestName.HSIC,
        statistic=headline.statistic,
        p_value=headline.permutation_p,
        decision=Decision.REJECT if headline.permutation_p < alpha else Decision.NON_REJECT,
        alpha=alpha,
        payload={"instrument": name, "per_instrument": per_instrument},
    )


def tsls(dataset: Dataset, alpha: float = 0.05) -> OlsFit:
    """Two-stage least squares for the treatment effect on the outcome.

    Conventional homoskedastic SE computed from the structural residual
    (outcome minus coefficient times the actual treatment). The reported r2
    is the second-stage fit; with a single instrument the coefficient equals
    the covariance ratio cov(Z, Y) / cov(Z, X).
    """
    validate(dataset)
    z_names = dataset.instrument_names
    x = dataset.column(dataset.treatment_name)
    y = dataset.column(dataset.outcome_name)
    n = dataset.n

    first = ols(x, dataset.matrix(z_names), names=z_names)
    xc = x - x.mean()
    yc = y - y.mean()
    fitted = xc - first.residuals
    denom = float(fitted @ fitted)
    if denom <= 0.0:
        raise RankDeficient("first stage is degenerate (no fitted variation)")
    beta = float(fitted @ yc) / denom

    structural_residuals = yc - beta * xc
    df_den = n - 2
    sigma2 = float(structural_residuals @ structural_residuals) / df_den
    se = float(np.sqrt(sigma2 / denom))

    second_rss = float(np.sum((yc - beta * fitted) ** 2))
    tss = float(yc @ yc)
    r2 = 1.0 - second_rss / tss if tss > 0 else 1.0
    t_stat = beta / se if se > 0 else float("inf")
    name = dataset.treatment_name
    return OlsFit(
        coefficients={name: beta},
        residuals=structural_residuals,
        se={name: se},
        r2=max(0.0, min(1.0, r2)),
        F=float(t_stat**2),
        df=(1, df_den),
    )
