"""Shared test utilities: parallel Monte Carlo over seeds and extra DGPs."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from ivlingam.core import Dataset, RandomSource, Role


def n_workers() -> int:
    env = os.environ.get("IVLINGAM_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn, items, chunksize: int = 1) -> list:
    """Order-preserving process map; falls back to serial for tiny jobs."""
    items = list(items)
    workers = min(n_workers(), len(items))
    if workers <= 1 or len(items) < 4:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def two_instrument_dataset(
    n: int,
    seed: int,
    direct_z1: float = 0.0,
    direct_z2: float = 0.0,
    strength: float = 0.7,
    treatment_effect: float = 0.5,
    df: float = 5.0,
) -> Dataset:
    """Two-instrument structural system with optional direct-effect violations."""
    gen = RandomSource(seed).substream("two-iv", 0)
    e = gen.standard_t(df, size=(4, n))
    z1, z2 = e[0], e[1]
    x = strength * z1 + strength * z2 + e[2]
    y = treatment_effect * x + direct_z1 * z1 + direct_z2 * z2 + e[3]
    return Dataset(
        columns={"z1": z1, "z2": z2, "x": x, "y": y},
        roles={
            "z1": Role.INSTRUMENT,
            "z2": Role.INSTRUMENT,
            "x": Role.TREATMENT,
            "y": Role.OUTCOME,
        },
    )
