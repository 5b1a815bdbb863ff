"""Exclusion-restriction testing for instrumental variables.

Estimates the direct instrument-outcome effect of an exactly-identified IV
model by causal-structure discovery under non-Gaussian errors, and
adjudicates its nullity with five complementary tests, a six-step diagnostic
protocol, and a Monte Carlo power harness.
"""

__version__ = "0.1.0"

from .core import (
    CausalModel,
    DataError,
    Dataset,
    Decision,
    InvalidSpec,
    IvlingamError,
    RandomSource,
    Role,
    TestName,
    TestOutcome,
    load_csv,
    save_csv,
    validate,
)
from .extests import ExclusionVerdict, TestConfig, run_all
from .independence import HsicResult, KernelSpec, hsic_statistic, hsic_test, median_heuristic
from .lingam import direct_lingam, find_root, restricted_lingam
from .normality import jarque_bera, negentropy, nongaussianity_report, shapiro_wilk
from .protocol import MultiIvReport, ProtocolReport, run_multi_instrument, run_protocol
from .regress import OlsFit, exogeneity_check, first_stage_F, ols, tsls
from .simulate import PowerTable, SimulationSpec, generate, power_analysis

__all__ = [
    "CausalModel",
    "DataError",
    "Dataset",
    "Decision",
    "ExclusionVerdict",
    "HsicResult",
    "InvalidSpec",
    "IvlingamError",
    "KernelSpec",
    "MultiIvReport",
    "OlsFit",
    "PowerTable",
    "ProtocolReport",
    "RandomSource",
    "Role",
    "SimulationSpec",
    "TestConfig",
    "TestName",
    "TestOutcome",
    "direct_lingam",
    "exogeneity_check",
    "find_root",
    "first_stage_F",
    "generate",
    "hsic_statistic",
    "hsic_test",
    "jarque_bera",
    "load_csv",
    "median_heuristic",
    "negentropy",
    "nongaussianity_report",
    "ols",
    "power_analysis",
    "restricted_lingam",
    "run_all",
    "run_multi_instrument",
    "run_protocol",
    "save_csv",
    "shapiro_wilk",
    "tsls",
    "validate",
]
