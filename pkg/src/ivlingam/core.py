"""Shared data model: datasets with variable roles, causal-model container,
test outcomes, deterministic random substreams, and CSV ingestion.

Everything downstream treats these objects as immutable; arrays are marked
read-only after construction.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

MIN_ROWS = 3


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class IvlingamError(Exception):
    """Base class for all library errors."""


class DataError(IvlingamError):
    """Problems with the input data (maps to CLI exit code 2)."""


class InvalidSpec(IvlingamError):
    """Invalid configuration or simulation parameters (CLI exit code 3)."""


class MissingColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} not found in header")
        self.name = name


class NonNumericCell(DataError):
    def __init__(self, row: int, col: str, bad_rows: int = 1):
        super().__init__(
            f"non-numeric or missing cell at row {row}, column {col!r} "
            f"({bad_rows} bad row{'s' if bad_rows != 1 else ''} total; strict mode rejects the file)"
        )
        self.row = row
        self.col = col
        self.bad_rows = bad_rows


class ZeroVarianceColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} has zero sample variance")
        self.name = name


class DuplicateRole(DataError):
    def __init__(self, role: "Role"):
        super().__init__(f"role {role.value} assigned to more than one column")
        self.role = role


class TooFewObservations(DataError):
    pass


class TooManyObservations(DataError):
    pass


class ZeroVariance(DataError):
    pass


class RankDeficient(DataError):
    pass


class DegenerateInput(DataError):
    pass


class LengthMismatch(DataError):
    pass


class NotSupported(DataError):
    pass


class ZeroBootstrapSpread(DataError):
    pass


class BandwidthDegenerate(DataError):
    pass


# ---------------------------------------------------------------------------
# Roles and datasets
# ---------------------------------------------------------------------------

class Role(str, Enum):
    INSTRUMENT = "Instrument"
    TREATMENT = "Treatment"
    OUTCOME = "Outcome"
    UNUSED = "Unused"


@dataclass(frozen=True)
class Dataset:
    """Column-major numeric data with one role per column.

    ``columns`` preserves insertion order. Construction coerces values to
    float64 and freezes the arrays; invariants are checked by ``validate``.
    """

    columns: dict[str, np.ndarray]
    roles: dict[str, Role]

    def __post_init__(self):
        frozen = {}
        for name, values in self.columns.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1:
                raise DataError(f"column {name!r} is not a 1-d vector")
            arr = arr.copy()
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "columns", frozen)
        object.__setattr__(self, "roles", dict(self.roles))

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values())))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    @property
    def instrument_names(self) -> tuple[str, ...]:
        return tuple(n for n, r in self.roles.items() if r is Role.INSTRUMENT)

    @property
    def treatment_name(self) -> str:
        return next(n for n, r in self.roles.items() if r is Role.TREATMENT)

    @property
    def outcome_name(self) -> str:
        return next(n for n, r in self.roles.items() if r is Role.OUTCOME)

    @property
    def role_names(self) -> tuple[str, ...]:
        """Instrument(s), then treatment, then outcome."""
        return self.instrument_names + (self.treatment_name, self.outcome_name)

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    def matrix(self, names: Iterable[str]) -> np.ndarray:
        """Stack the named columns into an (n, p) array."""
        return np.column_stack([self.columns[n] for n in names])

    def trivariate(self, instrument: str) -> "Dataset":
        """Sub-dataset (instrument, treatment, outcome) for one instrument."""
        if self.roles.get(instrument) is not Role.INSTRUMENT:
            raise MissingColumn(instrument)
        keep = (instrument, self.treatment_name, self.outcome_name)
        return Dataset(
            columns={n: self.columns[n] for n in keep},
            roles={keep[0]: Role.INSTRUMENT, keep[1]: Role.TREATMENT, keep[2]: Role.OUTCOME},
        )


def validate(dataset: Dataset) -> None:
    """Check every Dataset invariant, raising the first violated one."""
    lengths = {len(v) for v in dataset.columns.values()}
    if len(lengths) > 1:
        raise LengthMismatch(f"columns have differing lengths: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    if n < MIN_ROWS:
        raise TooFewObservations(f"need at least {MIN_ROWS} rows, got {n}")

    by_role: dict[Role, list[str]] = {r: [] for r in Role}
    for name, role in dataset.roles.items():
        if name not in dataset.columns:
            raise MissingColumn(name)
        by_role[role].append(name)
    for role in (Role.TREATMENT, Role.OUTCOME):
        if len(by_role[role]) > 1:
            raise DuplicateRole(role)
    for role in (Role.TREATMENT, Role.OUTCOME):
        if not by_role[role]:
            raise DataError(f"no column assigned role {role.value}")
    if not by_role[Role.INSTRUMENT]:
        raise DataError("no column assigned role Instrument")

    for name, values in dataset.columns.items():
        if not np.all(np.isfinite(values)):
            raise DataError(f"column {name!r} contains non-finite values")
        if np.var(values) <= 0.0:
            raise ZeroVarianceColumn(name)


def load_csv(path: str | Path, role_map: Mapping[str, Role | str]) -> Dataset:
    """Load an RFC-4180 CSV (header row, '.' decimals, UTF-8) in strict mode.

    Only columns named in ``role_map`` are kept. Any missing or non-numeric
    cell in a kept column rejects the whole file; the error reports the first
    offending cell (1-based data row) and the total count of bad rows.
    """
    roles = {name: Role(role) for name, role in role_map.items()}
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (no header row)") from None
        index = {}
        for name in roles:
            if name not in header:
                raise MissingColumn(name)
            index[name] = header.index(name)

        data: dict[str, list[float]] = {name: [] for name in roles}
        first_bad: Optional[tuple[int, str]] = None
        bad_rows = 0
        for row_num, row in enumerate(reader, start=1):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            bad_cell = None
            parsed = {}
            for name, idx in index.items():
                cell = row[idx].strip() if idx < len(row) else ""
                try:
                    value = float(cell)
                except ValueError:
                    value = math.nan
                if not math.isfinite(value):
                    bad_cell = (row_num, name)
                    break
                parsed[name] = value
            if bad_cell is not None:
                bad_rows += 1
                if first_bad is None:
                    first_bad = bad_cell
                continue
            for name, value in parsed.items():
                data[name].append(value)

    if first_bad is not None:
        raise NonNumericCell(first_bad[0], first_bad[1], bad_rows)

    dataset = Dataset(columns={n: np.array(v) for n, v in data.items()}, roles=roles)
    validate(dataset)
    return dataset


def save_csv(dataset: Dataset, path: str | Path) -> None:
    """Write the dataset back out with round-trip exact float formatting."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.names)
        cols = [dataset.columns[n] for n in dataset.names]
        for i in range(dataset.n):
            writer.writerow([repr(float(c[i])) for c in cols])


# ---------------------------------------------------------------------------
# Causal model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CausalModel:
    """Estimated causal ordering plus coefficient matrix.

    ``coefficients[i, j]`` is the estimated effect of variable j on variable i
    (indices into ``names``); the matrix is strictly lower triangular after
    permuting rows and columns by ``order``. Residuals are the structural
    error estimates, mean-zero because every regression is centered.
    """

    names: tuple[str, ...]
    roles: dict[str, Role]
    order: tuple[int, ...]
    coefficients: np.ndarray
    residuals: dict[str, np.ndarray]
    consistent_with_iv: bool
    restricted: bool = False

    def __post_init__(self):
        B = np.asarray(self.coefficients, dtype=np.float64).copy()
        B.setflags(write=False)
        object.__setattr__(self, "coefficients", B)
        res = {}
        for name, values in self.residuals.items():
            arr = np.asarray(values, dtype=np.float64).copy()
            arr.setflags(write=False)
            res[name] = arr
        object.__setattr__(self, "residuals", res)

    def _index(self, role: Role) -> int:
        matches = [i for i, n in enumerate(self.names) if self.roles[n] is role]
        if len(matches) != 1:
            raise NotSupported(f"model does not have exactly one {role.value} column")
        return matches[0]

    def effect(self, cause: str, target: str) -> float:
        return float(self.coefficients[self.names.index(target), self.names.index(cause)])

    @property
    def instrument_to_treatment(self) -> float:
        return float(self.coefficients[self._index(Role.TREATMENT), self._index(Role.INSTRUMENT)])

    @property
    def treatment_to_outcome(self) -> float:
        return float(self.coefficients[self._index(Role.OUTCOME), self._index(Role.TREATMENT)])

    @property
    def instrument_to_outcome(self) -> float:
        """The direct-effect parameter whose nullity the five tests adjudicate."""
        return float(self.coefficients[self._index(Role.OUTCOME), self._index(Role.INSTRUMENT)])

    @property
    def ordered_names(self) -> tuple[str, ...]:
        return tuple(self.names[i] for i in self.order)


# ---------------------------------------------------------------------------
# Test outcomes
# ---------------------------------------------------------------------------

class TestName(str, Enum):
    BOOTSTRAP_PERCENTILE = "BootstrapPercentile"
    ASYMPTOTIC_NORMAL = "AsymptoticNormal"
    PERMUTATION = "Permutation"
    LIKELIHOOD_RATIO = "LikelihoodRatio"
    HSIC = "HSIC"
    JARQUE_BERA = "JarqueBera"
    SHAPIRO_WILK = "ShapiroWilk"
    FIRST_STAGE_F = "FirstStageF"


class Decision(str, Enum):
    REJECT = "Reject"
    NON_REJECT = "NonReject"


@dataclass(frozen=True)
class TestOutcome:
    """One named test: statistic, p-value (absent for CI-based decisions),
    decision at level alpha, and structured extras in ``payload``.

    ``decision`` is None only for a test that failed to run; such records keep
    the verdict machinery going without faking a result.
    """

    test_name: TestName
    statistic: float
    p_value: Optional[float]
    decision: Optional[Decision]
    alpha: float
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p_value is not None and not (0.0 <= self.p_value <= 1.0):
            raise IvlingamError(f"p-value {self.p_value} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "test_name": self.test_name.value,
            "statistic": _jsonable(self.statistic),
            "p_value": _jsonable(self.p_value),
            "decision": self.decision.value if self.decision is not None else None,
            "alpha": float(self.alpha),
            "payload": _jsonable(self.payload),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestOutcome":
        return cls(
            test_name=TestName(d["test_name"]),
            statistic=d["statistic"],
            p_value=d["p_value"],
            decision=Decision(d["decision"]) if d["decision"] is not None else None,
            alpha=d["alpha"],
            payload=d.get("payload", {}),
        )


def _jsonable(value):
    """Coerce numpy scalars/arrays into JSON-native types, recursively."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


# ---------------------------------------------------------------------------
# Deterministic random substreams
# ---------------------------------------------------------------------------

def _tag_entropy(tag: str) -> int:
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RandomSource:
    """Counter-based random streams derived from one master seed.

    ``substream(tag, index)`` yields a generator that depends only on
    (master_seed, tag, index) — never on call order or parallelism — so any
    resampling scheme seeded this way is reproducible at any thread count.
    """

    master_seed: int

    def _seed_sequence(self, tag: str, index: int) -> np.random.SeedSequence:
        if index < 0:
            raise InvalidSpec("substream index must be non-negative")
        return np.random.SeedSequence(
            entropy=[self.master_seed % (1 << 64), _tag_entropy(tag), int(index)]
        )

    def substream(self, tag: str, index: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self._seed_sequence(tag, index)))

    def child(self, tag: str, index: int = 0) -> "RandomSource":
        """Derive an independently-seeded RandomSource for a sub-task."""
        state = self._seed_sequence(tag, index).generate_state(1, np.uint64)
        return RandomSource(int(state[0]))
