"""Keyed random streams and an order-preserving parallel map.

Every stream is a Philox generator keyed by ``(master_seed, *keys)``, so
results never depend on which worker drew them or in what order.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_SEED = 20190527

# stream domains, so simulator and estimator streams never collide
SIM_STREAM = 0
THRESHOLD_MC_STREAM = 1


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """``[fn(x) for x in items]``, optionally across processes; order is kept."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(items) // (4 * workers))
        return list(pool.map(fn, items, chunksize=chunk))


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = (z / denom) * np.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
    lo = max(0.0, center - half)
    hi = min(1.0, center + half)
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return (float(lo), float(hi))
