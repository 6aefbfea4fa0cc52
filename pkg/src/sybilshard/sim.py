"""Monte Carlo epochs: pick ``N*`` IDs from the pool, split them into shards, test thresholds."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, partial
from typing import Tuple

import numpy as np

from .analytics import ORACLE_NSTAR_LIMIT, InstanceTooLargeError
from .exactmath import binom
from .protocol import ProtocolParams, validate_params
from .rng import DEFAULT_SEED, SIM_STREAM, derive_rng, parallel_map, wilson_interval

# trials per keyed block; fixed so results do not depend on worker count
BLOCK = 4096


@dataclass
class EpochOutcome:
    n_selected: int
    shard_counts: Tuple[int, ...]
    bcp_success: bool
    gft_success: bool


@dataclass
class SimulationReport:
    params: ProtocolParams
    M: int
    trials: int
    seed: int
    bcp_successes: int
    gft_successes: int
    histogram_n: dict

    @property
    def p_bcp_hat(self) -> float:
        return self.bcp_successes / self.trials

    @property
    def p_gft_hat(self) -> float:
        return self.gft_successes / self.trials

    @property
    def ci_bcp(self):
        return wilson_interval(self.bcp_successes, self.trials)

    @property
    def ci_gft(self):
        return wilson_interval(self.gft_successes, self.trials)

    def estimate(self, attack: str) -> Tuple[float, Tuple[float, float]]:
        if attack == "bcp":
            return self.p_bcp_hat, self.ci_bcp
        if attack == "gft":
            return self.p_gft_hat, self.ci_gft
        raise ValueError(f"unknown attack {attack!r}")

    def to_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "M": self.M,
            "trials": self.trials,
            "seed": self.seed,
            "p_bcp_hat": self.p_bcp_hat,
            "p_gft_hat": self.p_gft_hat,
            "ci_bcp": list(self.ci_bcp),
            "ci_gft": list(self.ci_gft),
            "bcp_successes": self.bcp_successes,
            "gft_successes": self.gft_successes,
            "histogram_n": {str(k): v for k, v in sorted(self.histogram_n.items())},
        }


def simulate_block(p: ProtocolParams, M: int, size: int, rng: np.random.Generator):
    """Draw ``size`` epochs; returns (selected Sybil counts, per-shard counts matrix)."""
    honest = p.N - 1
    n = rng.hypergeometric(M, honest, p.n_star, size=size) if M > 0 else np.zeros(size, dtype=np.int64)
    counts = np.empty((size, p.shards), dtype=np.int64)
    left_s = n.astype(np.int64)
    left_h = p.n_star - left_s
    # fill shards one at a time; each takes c of the remaining selected IDs
    for i in range(p.shards - 1):
        a = rng.hypergeometric(left_s, left_h, p.c) if M > 0 else np.zeros(size, dtype=np.int64)
        counts[:, i] = a
        left_s = left_s - a
        left_h = left_h - (p.c - a)
    counts[:, -1] = left_s
    return n, counts


def run_epoch(p: ProtocolParams, M: int, rng: np.random.Generator) -> EpochOutcome:
    validate_params(p, M)
    n, counts = simulate_block(p, M, 1, rng)
    row = counts[0]
    top = int(row.max())
    return EpochOutcome(
        n_selected=int(n[0]),
        shard_counts=tuple(int(x) for x in row),
        bcp_success=top >= p.bcp_threshold,
        gft_success=top >= p.gft_threshold,
    )


def _run_block(index: int, p: ProtocolParams, M: int, trials: int, seed: int):
    size = min(BLOCK, trials - index * BLOCK)
    rng = derive_rng(seed, SIM_STREAM, index)
    n, counts = simulate_block(p, M, size, rng)
    top = counts.max(axis=1)
    hist = np.bincount(n, minlength=p.n_star + 1)
    return int(np.count_nonzero(top >= p.bcp_threshold)), int(np.count_nonzero(top >= p.gft_threshold)), hist


def run_trials(
    p: ProtocolParams, M: int, trials: int, master_seed: int = DEFAULT_SEED, workers: int = 1
) -> SimulationReport:
    """Aggregate ``trials`` independent epochs. Block ``i`` uses stream ``(seed, i)``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    validate_params(p, M)
    blocks = (trials + BLOCK - 1) // BLOCK
    parts = parallel_map(partial(_run_block, p=p, M=M, trials=trials, seed=master_seed), range(blocks), workers)
    bcp = sum(x[0] for x in parts)
    gft = sum(x[1] for x in parts)
    hist = np.sum([x[2] for x in parts], axis=0)
    histogram = {int(k): int(v) for k, v in enumerate(hist) if v}
    return SimulationReport(p, M, trials, master_seed, bcp, gft, histogram)


@lru_cache(maxsize=None)
def _shard_walk(syb: int, hon: int, shards: int, c: int, t_bcp: int, t_gft: int) -> Tuple[Fraction, Fraction]:
    """Exact (P[bcp], P[gft]) filling shards one by one from ``syb`` Sybil and ``hon`` honest IDs."""
    if shards == 0:
        return Fraction(0), Fraction(0)
    pool = syb + hon
    total = binom(pool, c)
    p_b = Fraction(0)
    p_g = Fraction(0)
    for a in range(max(0, c - hon), min(c, syb) + 1):
        w = Fraction(binom(syb, a) * binom(hon, c - a), total)
        rest_b, rest_g = _shard_walk(syb - a, hon - (c - a), shards - 1, c, t_bcp, t_gft)
        p_b += w * (1 if a >= t_bcp else rest_b)
        p_g += w * (1 if a >= t_gft else rest_g)
    return p_b, p_g


def exhaustive_epoch_distribution(p: ProtocolParams, M: int) -> Tuple[Fraction, Fraction]:
    """Exact (p_bcp, p_gft) by walking every selection and shard-by-shard fill."""
    if p.n_star > ORACLE_NSTAR_LIMIT:
        raise InstanceTooLargeError(f"N*={p.n_star} exceeds the enumeration limit {ORACLE_NSTAR_LIMIT}")
    validate_params(p, M)
    honest = p.N - 1
    pool = M + honest
    total = binom(pool, p.n_star)
    p_b = Fraction(0)
    p_g = Fraction(0)
    for n in range(max(0, p.n_star - honest), min(M, p.n_star) + 1):
        w = Fraction(binom(M, n) * binom(honest, p.n_star - n), total)
        b, g = _shard_walk(n, p.n_star - n, p.shards, p.c, p.bcp_threshold, p.gft_threshold)
        p_b += w * b
        p_g += w * g
    return p_b, p_g
