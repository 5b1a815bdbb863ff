"""Structural data generator and the Monte Carlo power harness.

The generating system is
    Z = e_z,   X = alpha_zx Z + e_x,   Y = alpha_xy X + alpha_zy Z + e_y
with i.i.d. Student-t errors (raw, not variance-scaled). The power harness
runs the five-test battery over an (alpha_zy, n) grid and reports per-test
rejection rates; replicates derive their randomness from (cell, index)
substreams, so results are identical at any worker count.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import Dataset, Decision, InvalidSpec, RandomSource, Role
from .extests import TestConfig, run_all

MIN_N = 10

TEST_COLUMNS = (
    "HSIC",
    "AsymptoticNormal",
    "BootstrapPercentile",
    "Permutation",
    "LikelihoodRatio",
)


def worker_count() -> int:
    """Parallelism cap: IVLINGAM_THREADS if set, else the CPU count."""
    env = os.environ.get("IVLINGAM_THREADS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InvalidSpec(f"IVLINGAM_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise InvalidSpec("IVLINGAM_THREADS must be >= 1")
        return value
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SimulationSpec:
    n: int = 500
    alpha_zx: float = 0.7
    alpha_xy: float = 0.5
    alpha_zy: float = 0.0
    df: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n < MIN_N:
            raise InvalidSpec(f"n must be at least {MIN_N}, got {self.n}")
        if not self.df > 2:
            raise InvalidSpec(f"df must exceed 2 for finite variance, got {self.df}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha_zx": self.alpha_zx,
            "alpha_xy": self.alpha_xy,
            "alpha_zy": self.alpha_zy,
            "df": self.df,
            "seed": self.seed,
        }


def generate(spec: SimulationSpec, rng: Optional[RandomSource] = None) -> Dataset:
    """Draw one dataset from the structural system, deterministic per seed."""
    source = rng if rng is not None else RandomSource(spec.seed)
    gen = source.substream("dgp", 0)
    errors = gen.standard_t(spec.df, size=(3, spec.n))
    z = errors[0]
    x = spec.alpha_zx * z + errors[1]
    y = spec.alpha_xy * x + spec.alpha_zy * z + errors[2]
    return Dataset(
        columns={"z": z, "x": x, "y": y},
        roles={"z": Role.INSTRUMENT, "x": Role.TREATMENT, "y": Role.OUTCOME},
    )


@dataclass(frozen=True)
class PowerCell:
    alpha_zy: float
    n: int
    rates: dict[str, float]
    rejections: dict[str, int]
    valid: dict[str, int]
    failures: int

    def to_dict(self) -> dict:
        return {
            "alpha_zy": self.alpha_zy,
            "n": self.n,
            "rates": {k: float(v) for k, v in self.rates.items()},
            "rejections": dict(self.rejections),
            "valid": dict(self.valid),
            "failures": self.failures,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PowerCell":
        return cls(
            alpha_zy=d["alpha_zy"],
            n=d["n"],
            rates=d["rates"],
            rejections=d["rejections"],
            valid=d["valid"],
            failures=d["failures"],
        )


@dataclass(frozen=True)
class PowerTable:
    cells: tuple[PowerCell, ...]
    reps: int
    config: TestConfig = field(default_factory=TestConfig)
    base: SimulationSpec = field(default_factory=SimulationSpec)

    def cell(self, alpha_zy: float, n: int) -> PowerCell:
        for c in self.cells:
            if c.alpha_zy == alpha_zy and c.n == n:
                return c
        raise KeyError((alpha_zy, n))

    def to_dict(self) -> dict:
        return {
            "cells": [c.to_dict() for c in self.cells],
            "reps": self.reps,
            "config": self.config.to_dict(),
            "base": self.base.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PowerTable":
        return cls(
            cells=tuple(PowerCell.from_dict(c) for c in d["cells"]),
            reps=d["reps"],
            config=TestConfig(**d["config"]),
            base=SimulationSpec(**d["base"]),
        )


def _replicate_decisions(args) -> Optional[dict[str, Optional[bool]]]:
    """One power replicate: generate, run the battery, report who rejected."""
    master_seed, alpha_zy, n, rep, base_dict, config_dict = args
    cell_tag = f"power/{alpha_zy!r}/{n}"
    child = RandomSource(master_seed).child(cell_tag, rep)
    spec = SimulationSpec(**{**base_dict, "alpha_zy": alpha_zy, "n": n})
    config = TestConfig(**config_dict)
    try:
        dataset = generate(spec, child.child("generate"))
        verdict = run_all(dataset, config, child.child("tests"))
    except Exception:
        return None
    decisions: dict[str, Optional[bool]] = {}
    for outcome in verdict.outcomes:
        name = outcome.test_name.value
        decisions[name] = None if outcome.decision is None else outcome.decision is Decision.REJECT
    return decisions


def power_analysis(
    alpha_zy_grid: Sequence[float],
    n_grid: Sequence[int],
    reps: int,
    config: TestConfig = TestConfig(),
    base: SimulationSpec = SimulationSpec(),
    rng: RandomSource = RandomSource(0),
) -> PowerTable:
    """Rejection-rate table over the (alpha_zy, n) grid.

    Replicates run in parallel processes; aggregation is by replicate index,
    so the table is a pure function of (grids, reps, config, base, seed).
    """
    if reps < 1:
        raise InvalidSpec("reps must be >= 1")
    if not alpha_zy_grid or not n_grid:
        raise InvalidSpec("grids must be non-empty")

    jobs = []
    cell_keys = []
    for alpha_zy in alpha_zy_grid:
        for n in n_grid:
            cell_keys.append((float(alpha_zy), int(n)))
            for rep in range(reps):
                jobs.append(
                    (rng.master_seed, float(alpha_zy), int(n), rep, base.to_dict(), config.to_dict())
                )

    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_decisions, jobs, chunksize=1))
    else:
        results = [_replicate_decisions(job) for job in jobs]

    cells = []
    for c, (alpha_zy, n) in enumerate(cell_keys):
        cell_results = results[c * reps : (c + 1) * reps]
        rejections = {name: 0 for name in TEST_COLUMNS}
        valid = {name: 0 for name in TEST_COLUMNS}
        failures = 0
        for decisions in cell_results:
            if decisions is None:
                failures += 1
                continue
            for name in TEST_COLUMNS:
                flag = decisions.get(name)
                if flag is None:
                    continue
                valid[name] += 1
                if flag:
                    rejections[name] += 1
        rates = {
            name: (rejections[name] / valid[name]) if valid[name] else float("nan")
            for name in TEST_COLUMNS
        }
        cells.append(
            PowerCell(
                alpha_zy=alpha_zy,
                n=n,
                rates=rates,
                rejections=rejections,
                valid=valid,
                failures=failures,
            )
        )
    return PowerTable(cells=tuple(cells), reps=reps, config=config, base=base)


def save_power_csv(table: PowerTable, path: str | Path) -> None:
    """Long-format export: alpha_zy, n, test, rate, reps."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha_zy", "n", "test", "rate", "reps"])
        for cell in table.cells:
            for name in TEST_COLUMNS:
                writer.writerow(
                    [repr(cell.alpha_zy), cell.n, name, repr(cell.rates[name]), table.reps]
                )
