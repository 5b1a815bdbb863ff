"""DirectLiNGAM estimation of the causal ordering and coefficient matrix.

The root of the system is the variable whose regression residuals are least
dependent on it (summed pairwise HSIC with median-heuristic bandwidths);
regressing the root out and recursing yields the full ordering. Coefficients
are then recovered by sequential centered OLS of each variable on its causal
predecessors, which reproduces the structural matrix exactly under the model
and sidesteps ICA sign/permutation indeterminacy entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    CausalModel,
    Dataset,
    DegenerateInput,
    RankDeficient,
    Role,
    validate,
)
from .independence import _center_inplace, _gram_median, hsic_from_grams
from .regress import ols

ROOT_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RootScore:
    candidate: int
    score: float


def _residual_on(target: np.ndarray, regressor: np.ndarray) -> np.ndarray:
    """Residual of centered target regressed on a centered column."""
    return target - (float(target @ regressor) / float(regressor @ regressor)) * regressor


def _root_scores(columns: Sequence[np.ndarray]) -> np.ndarray:
    """score_j = sum over i != j of HSIC(col_j, residual of col_i on col_j)."""
    p = len(columns)
    n = columns[0].size
    scores = np.zeros(p)
    for j, candidate in enumerate(columns):
        if np.ptp(candidate) == 0.0:
            raise DegenerateInput(f"column {j} is constant")
        centered = _center_inplace(_gram_median(candidate)[0])
        total = 0.0
        for i, other in enumerate(columns):
            if i == j:
                continue
            residual = _residual_on(other, candidate)
            if np.ptp(residual) == 0.0:
                continue  # constant residual: centering annihilates, HSIC is 0
            total += hsic_from_grams(centered, _gram_median(residual)[0])
        scores[j] = total
    return scores


def _select_root(scores: np.ndarray) -> int:
    """Argmin with ties (within ROOT_TIE_TOLERANCE) broken by lowest index."""
    best = float(scores.min())
    for idx, value in enumerate(scores):
        if value <= best + ROOT_TIE_TOLERANCE:
            return idx
    raise AssertionError("unreachable")


def find_root(data: np.ndarray) -> list[RootScore]:
    """Score every candidate root of a (n, p) matrix, sorted ascending.

    The winner under the tie rule is the lowest-index candidate whose score
    is within ROOT_TIE_TOLERANCE of the minimum, which is the first element
    of the returned list except under exact ties.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 2:
        raise DegenerateInput("need a matrix with at least 2 columns")
    centered = data - data.mean(axis=0)
    scores = _root_scores([centered[:, j] for j in range(centered.shape[1])])
    return sorted(
        (RootScore(j, float(s)) for j, s in enumerate(scores)),
        key=lambda r: (r.score, r.candidate),
    )


def _causal_order(centered: np.ndarray) -> list[int]:
    p = centered.shape[1]
    working = centered.copy()
    remaining = list(range(p))
    order: list[int] = []
    while len(remaining) > 1:
        scores = _root_scores([working[:, j] for j in remaining])
        root = remaining[_select_root(scores)]
        order.append(root)
        root_col = working[:, root]
        for j in remaining:
            if j != root:
                working[:, j] = _residual_on(working[:, j], root_col)
        remaining.remove(root)
    order.append(remaining[0])
    return order


def _iv_consistent(order: Sequence[int], names: Sequence[str], roles: dict[str, Role]) -> bool:
    position = {idx: k for k, idx in enumerate(order)}
    z_pos = [position[i] for i, n in enumerate(names) if roles[n] is Role.INSTRUMENT]
    x_pos = position[next(i for i, n in enumerate(names) if roles[n] is Role.TREATMENT)]
    y_pos = position[next(i for i, n in enumerate(names) if roles[n] is Role.OUTCOME)]
    return all(z < x_pos for z in z_pos) and x_pos < y_pos


def fit_matrix(matrix: np.ndarray, names: Sequence[str], roles: dict[str, Role]) -> CausalModel:
    """Ordering + coefficient recovery on a raw (n, p) matrix.

    Light-weight entry point for resampling loops; ``direct_lingam`` adds
    dataset validation on top of this.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    names = tuple(names)
    centered = matrix - matrix.mean(axis=0)
    if np.linalg.matrix_rank(centered) < len(names):
        raise RankDeficient("role columns are exactly collinear")
    order = _causal_order(centered)

    p = len(names)
    coefficients = np.zeros((p, p))
    residuals: dict[str, np.ndarray] = {}
    for k, idx in enumerate(order):
        predecessors = order[:k]
        if not predecessors:
            residuals[names[idx]] = centered[:, idx]
            continue
        fit = ols(
            centered[:, idx],
            centered[:, predecessors],
            names=[names[i] for i in predecessors],
        )
        for pred in predecessors:
            coefficients[idx, pred] = fit.coefficients[names[pred]]
        residuals[names[idx]] = fit.residuals

    return CausalModel(
        names=names,
        roles={n: roles[n] for n in names},
        order=tuple(order),
        coefficients=coefficients,
        residuals=residuals,
        consistent_with_iv=_iv_consistent(order, names, roles),
    )


def direct_lingam(dataset: Dataset) -> CausalModel:
    """Estimate the causal model of the role columns.

    When the estimated ordering disagrees with instrument-before-treatment-
    before-outcome the model is still returned, flagged via
    ``consistent_with_iv=False`` rather than raised: downstream tests must be
    able to report that outcome (weak instruments make it likely).
    """
    validate(dataset)
    names = dataset.role_names
    return fit_matrix(dataset.matrix(names), names, dataset.roles)


def restrict_model(model: CausalModel, dataset: Dataset) -> CausalModel:
    """Refit the outcome equation on the treatment alone (instrument
    coefficients forced to 0), keeping the estimated ordering."""
    outcome = dataset.outcome_name
    treatment = dataset.treatment_name
    fit = ols(dataset.column(outcome), dataset.column(treatment), names=[treatment])

    names = model.names
    coefficients = np.array(model.coefficients)
    y_idx = names.index(outcome)
    coefficients[y_idx, :] = 0.0
    coefficients[y_idx, names.index(treatment)] = fit.coefficients[treatment]
    residuals = dict(model.residuals)
    residuals[outcome] = fit.residuals
    return CausalModel(
        names=names,
        roles=dict(model.roles),
        order=model.order,
        coefficients=coefficients,
        residuals=residuals,
        consistent_with_iv=model.consistent_with_iv,
        restricted=True,
    )


def restricted_lingam(dataset: Dataset) -> CausalModel:
    """Same ordering as ``direct_lingam`` with the direct instrument-outcome
    path constrained to zero; residuals recomputed accordingly."""
    return restrict_model(direct_lingam(dataset), dataset)
