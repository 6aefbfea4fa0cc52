"""Success probabilities of the BCP and GFT Sybil attacks.

The adversary's IDs reach the epoch through a hypergeometric draw of ``N*``
IDs from ``M + N - 1``. Given ``n`` selected Sybil IDs, the chance that
some shard collects at least ``threshold`` of them is evaluated in one of
three regimes:

* ``n <= c``: the single-shard closed form multiplied by ``2**s`` (a union
  bound, so it can exceed 1 once two shards can both cross);
* ``c < n <= 2**s * (threshold - 1)``: Monte Carlo over exact-capacity
  shard partitions;
* above that: certain, by pigeonhole.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, partial
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .exactmath import (
    EXACT_NSTAR_LIMIT,
    LOG_ZERO,
    binom,
    log_binom,
    log_binom_array,
    sum_ratio_terms,
)
from .protocol import PoolTooSmallError, ProtocolParams, validate_params
from .rng import DEFAULT_SEED, THRESHOLD_MC_STREAM, derive_rng, parallel_map, wilson_interval

ATTACKS = ("bcp", "gft")

# largest N* the enumeration oracles accept
ORACLE_NSTAR_LIMIT = 16


class InstanceTooLargeError(ValueError):
    pass


@dataclass
class SelectionDistribution:
    """Hypergeometric law of the number of Sybil IDs among the ``N*`` selected."""

    M: int
    N: int
    n_star: int
    lo: int
    hi: int
    log_pmf: np.ndarray
    exact: Optional[Dict[int, Fraction]] = None

    @property
    def support(self) -> range:
        return range(self.lo, self.hi + 1)

    def pmf(self, n: int) -> float:
        if n < self.lo or n > self.hi:
            return 0.0
        if self.exact is not None:
            return float(self.exact[n])
        return math.exp(self.log_pmf[n - self.lo])

    def probabilities(self) -> np.ndarray:
        """pmf over ``support`` as floats."""
        if self.exact is not None:
            return np.array([float(self.exact[n]) for n in self.support])
        return np.exp(self.log_pmf)

    def total(self) -> float:
        return math.fsum(self.probabilities().tolist())


def selection_pmf(M: int, N: int, n_star: int, exact: Optional[bool] = None) -> SelectionDistribution:
    """Distribution of selected Sybil IDs when ``n_star`` IDs are drawn from ``M + N - 1``.

    ``exact=None`` picks the rational backend for ``n_star <= 64``.
    """
    if M < 0 or N < 1 or n_star < 0:
        raise ValueError(f"need M >= 0, N >= 1, n_star >= 0; got {M}, {N}, {n_star}")
    pool = M + N - 1
    if pool < n_star:
        raise PoolTooSmallError(f"ID pool {pool} < N* {n_star}")
    lo = max(0, n_star - (N - 1))
    hi = min(M, n_star)
    ns = np.arange(lo, hi + 1)
    log_pmf = (
        log_binom_array(M, ns)
        + log_binom_array(N - 1, n_star - ns)
        - log_binom(pool, n_star)
    )
    if exact is None:
        exact = n_star <= EXACT_NSTAR_LIMIT
    table = None
    if exact:
        total = binom(pool, n_star)
        table = {int(n): Fraction(binom(M, n) * binom(N - 1, n_star - n), total) for n in ns}
    return SelectionDistribution(M, N, n_star, lo, hi, log_pmf, table)


@dataclass
class ThresholdProbability:
    """Chance that some shard holds at least ``threshold`` of ``n`` Sybil IDs."""

    n: int
    threshold: int
    regime: str
    raw_value: float
    clamped_value: float
    ci: Optional[Tuple[float, float]] = None
    trials: Optional[int] = None
    successes: Optional[int] = None
    exact: Optional[Fraction] = None

    @property
    def over_count(self) -> bool:
        return self.raw_value > 1.0


def _check_threshold(threshold: int, p: ProtocolParams):
    if not 1 <= threshold <= p.c:
        raise ValueError(f"threshold {threshold} outside [1, c={p.c}]")


def per_shard_threshold_closed(n: int, threshold: int, p: ProtocolParams) -> ThresholdProbability:
    """``2**s * sum_m C(n,m) C(N*-n, c-m) / C(N*, c)`` for ``m`` in ``[threshold, n]``.

    Only valid while ``n <= c``; larger ``n`` must go to :func:`per_shard_threshold_mc`.
    """
    _check_threshold(threshold, p)
    if n > p.c:
        raise ValueError(f"closed form needs n <= c, got n={n} > c={p.c}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    n_star, c = p.n_star, p.c
    exact = None
    if n_star <= EXACT_NSTAR_LIMIT:
        num = p.shards * sum(binom(n, m) * binom(n_star - n, c - m) for m in range(threshold, n + 1))
        exact = Fraction(num, binom(n_star, c))
        raw = float(exact)
    else:
        den = log_binom(n_star, c)
        shift = math.log(p.shards)
        raw = sum_ratio_terms(
            [(shift + log_binom(n, m) + log_binom(n_star - n, c - m), den) for m in range(threshold, n + 1)]
        )
    return ThresholdProbability(n, threshold, "closed-form", raw, min(raw, 1.0), exact=exact)


def closed_form_raw_many(ns: np.ndarray, threshold: int, p: ProtocolParams) -> np.ndarray:
    """Vectorised raw closed form over an array of ``n <= c`` (log-domain)."""
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size == 0:
        return np.zeros(0)
    if ns.max() > p.c:
        raise ValueError("closed form needs n <= c")
    ms = np.arange(threshold, p.c + 1, dtype=np.int64)
    terms = log_binom_array(ns[:, None], ms[None, :]) + log_binom_array(p.n_star - ns[:, None], p.c - ms[None, :])
    logs = logsumexp(terms, axis=1) if ms.size else np.full(ns.shape, LOG_ZERO)
    return np.exp(logs + math.log(p.shards) - log_binom(p.n_star, p.c))


# trials per batch of the threshold estimator; batch j uses its own keyed stream
MC_BATCH = 2048


def _threshold_batch(n: int, threshold: int, p: ProtocolParams, seed: int, j: int, size: int) -> int:
    rng = derive_rng(seed, THRESHOLD_MC_STREAM, n, threshold, j)
    counts = rng.multivariate_hypergeometric([p.c] * p.shards, n, size=size)
    return int(np.count_nonzero(counts.max(axis=1) >= threshold))


def _mc_result(n, threshold, p, successes, trials) -> ThresholdProbability:
    est = successes / trials
    regime = "certain" if n > p.pigeonhole_bound(threshold) else "monte-carlo"
    return ThresholdProbability(
        n, threshold, regime, est, est, ci=wilson_interval(successes, trials), trials=trials, successes=successes
    )


def per_shard_threshold_mc(
    n: int, threshold: int, p: ProtocolParams, trials: int, seed: int = DEFAULT_SEED
) -> ThresholdProbability:
    """Monte Carlo estimate over uniform partitions into ``2**s`` shards of exactly ``c``."""
    _check_threshold(threshold, p)
    if not 0 <= n <= p.n_star:
        raise ValueError(f"n must lie in [0, N*={p.n_star}], got {n}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    successes, done, j = 0, 0, 0
    while done < trials:
        size = min(MC_BATCH, trials - done)
        successes += _threshold_batch(n, threshold, p, seed, j, size)
        done += size
        j += 1
    return _mc_result(n, threshold, p, successes, trials)


@dataclass(frozen=True)
class MCConfig:
    """Settings for the Monte Carlo part of the hybrid evaluation.

    With ``trials`` unset, each conditional estimate adds batches until its
    Wilson half-width is at most ``target_halfwidth`` (or ``max_trials``).
    Selection counts whose probability is below ``mass_floor`` are not
    simulated; their mass is carried in the upper confidence bound.
    """

    seed: int = DEFAULT_SEED
    trials: Optional[int] = None
    target_halfwidth: float = 0.005
    max_trials: int = 200_000
    mass_floor: float = 1e-13


def adaptive_threshold_mc(n: int, threshold: int, p: ProtocolParams, mc: MCConfig) -> ThresholdProbability:
    if mc.trials is not None:
        return per_shard_threshold_mc(n, threshold, p, mc.trials, mc.seed)
    successes, done, j = 0, 0, 0
    while True:
        successes += _threshold_batch(n, threshold, p, mc.seed, j, MC_BATCH)
        done += MC_BATCH
        j += 1
        lo, hi = wilson_interval(successes, done)
        if (hi - lo) / 2 <= mc.target_halfwidth or done >= mc.max_trials:
            return _mc_result(n, threshold, p, successes, done)


@dataclass
class AttackProbability:
    attack: str
    M: int
    params: ProtocolParams
    value: float
    raw_value: float
    method: str
    components: Dict[str, float]
    regime_breakdown: List[dict]
    ci: Optional[Tuple[float, float]] = None
    trials: Optional[int] = None
    seed: Optional[int] = None
    over_count: bool = False
    skipped_mass: float = 0.0

    def to_dict(self) -> dict:
        return {
            "attack": self.attack,
            "params": self.params.as_dict(),
            "M": self.M,
            "value": self.value,
            "raw_value": self.raw_value,
            "method": self.method,
            "ci": list(self.ci) if self.ci is not None else None,
            "trials": self.trials,
            "seed": self.seed,
            "over_count": self.over_count,
            "skipped_mass": self.skipped_mass,
            "components": dict(self.components),
            "regime_breakdown": [dict(r) for r in self.regime_breakdown],
        }


def _regime_ranges(p: ProtocolParams, threshold: int, lo: int, hi: int) -> Dict[str, Tuple[int, int]]:
    bound = p.pigeonhole_bound(threshold)
    return {
        "zero": (lo, min(hi, threshold - 1)),
        "closed-form": (max(lo, threshold), min(hi, p.c, bound)),
        "monte-carlo": (max(lo, threshold, p.c + 1), min(hi, bound)),
        "certain": (max(lo, bound + 1), hi),
    }


def attack_probability(
    attack: str,
    M: int,
    p: ProtocolParams,
    mc: MCConfig = MCConfig(),
    workers: int = 1,
) -> AttackProbability:
    """P_B (``attack="bcp"``) or P_G (``attack="gft"``) for ``M`` Sybil IDs.

    ``value`` weights each selection count by its clamped conditional
    probability; ``raw_value`` keeps the unclamped closed-form terms.
    """
    attack = attack.lower()
    if attack not in ATTACKS:
        raise ValueError(f"unknown attack {attack!r}")
    validate_params(p, M)
    t = p.threshold(attack)
    dist = selection_pmf(M, p.N, p.n_star)
    probs = dist.probabilities()
    ranges = _regime_ranges(p, t, dist.lo, dist.hi)

    def mass(a, b):
        if a > b:
            return 0.0
        return math.fsum(probs[a - dist.lo:b - dist.lo + 1].tolist())

    breakdown = []
    components = {"zero": 0.0, "closed-form": 0.0, "monte-carlo": 0.0, "certain": 0.0}
    clamped = {"closed-form": 0.0, "monte-carlo": 0.0, "certain": 0.0}
    ci_lo_parts, ci_hi_parts = [], []
    over = False
    skipped = 0.0
    total_trials = 0
    used_mc = False

    a, b = ranges["closed-form"]
    if a <= b:
        ns = np.arange(a, b + 1)
        if p.n_star <= EXACT_NSTAR_LIMIT:
            raws = np.array([per_shard_threshold_closed(int(n), t, p).raw_value for n in ns])
        else:
            raws = closed_form_raw_many(ns, t, p)
        w = probs[a - dist.lo:b - dist.lo + 1]
        components["closed-form"] = math.fsum((w * raws).tolist())
        clamped["closed-form"] = math.fsum((w * np.minimum(raws, 1.0)).tolist())
        over = bool(np.any((raws > 1.0) & (w > 0)))

    a, b = ranges["monte-carlo"]
    if a <= b:
        w_all = probs[a - dist.lo:b - dist.lo + 1]
        todo = [int(n) for n, w in zip(range(a, b + 1), w_all) if w >= mc.mass_floor]
        skipped = math.fsum(w for w in w_all.tolist() if w < mc.mass_floor)
        results = parallel_map(partial(adaptive_threshold_mc, threshold=t, p=p, mc=mc), todo, workers)
        contrib, lo_c, hi_c = [], [], []
        for r in results:
            w = probs[r.n - dist.lo]
            contrib.append(w * r.clamped_value)
            lo_c.append(w * r.ci[0])
            hi_c.append(w * r.ci[1])
            total_trials += r.trials
        components["monte-carlo"] = clamped["monte-carlo"] = math.fsum(contrib)
        ci_lo_parts.append(math.fsum(lo_c))
        ci_hi_parts.append(math.fsum(hi_c) + skipped)
        used_mc = bool(todo)

    a, b = ranges["certain"]
    components["certain"] = clamped["certain"] = mass(a, b)

    for name, (a, b) in ranges.items():
        if a <= b:
            breakdown.append(
                {
                    "n_range": [a, b],
                    "method": name,
                    "mass": mass(a, b),
                    "contribution": components[name],
                }
            )

    raw = math.fsum(components.values())
    value = min(1.0, max(0.0, math.fsum(clamped.values())))
    ci = None
    if ci_lo_parts:
        fixed = clamped["closed-form"] + clamped["certain"]
        ci = (max(0.0, fixed + ci_lo_parts[0]), min(1.0, fixed + ci_hi_parts[0]))
    if used_mc:
        method = "hybrid"
    elif components["certain"] > 0:
        method = "certain-tail"
    else:
        method = "closed-form"
    return AttackProbability(
        attack=attack,
        M=M,
        params=p,
        value=value,
        raw_value=raw,
        method=method,
        components=components,
        regime_breakdown=breakdown,
        ci=ci,
        trials=total_trials if used_mc else None,
        seed=mc.seed if used_mc else None,
        over_count=over,
        skipped_mass=skipped,
    )


# ---------------------------------------------------------------- oracles


def _compositions(n: int, parts: int, cap: int):
    """All vectors of ``parts`` integers in ``[0, cap]`` summing to ``n``."""
    if parts == 1:
        if n <= cap:
            yield (n,)
        return
    for a in range(max(0, n - cap * (parts - 1)), min(cap, n) + 1):
        for rest in _compositions(n - a, parts - 1, cap):
            yield (a,) + rest


@lru_cache(maxsize=None)
def exact_per_shard_probability(n: int, threshold: int, shards: int, c: int) -> Fraction:
    """Exact chance some shard gets ``>= threshold`` of ``n`` Sybil IDs, by enumeration."""
    total = binom(shards * c, n)
    hit = 0
    for occ in _compositions(n, shards, c):
        if max(occ) >= threshold:
            ways = 1
            for a in occ:
                ways *= binom(c, a)
            hit += ways
    return Fraction(hit, total)


def _oracle_guard(p: ProtocolParams):
    if p.n_star > ORACLE_NSTAR_LIMIT:
        raise InstanceTooLargeError(f"N*={p.n_star} exceeds the enumeration limit {ORACLE_NSTAR_LIMIT}")


def exact_attack_probability_oracle(attack: str, M: int, p: ProtocolParams) -> Fraction:
    """Exact P_B or P_G by enumerating every shard occupancy vector."""
    _oracle_guard(p)
    validate_params(p, M)
    t = p.threshold(attack)
    dist = selection_pmf(M, p.N, p.n_star, exact=True)
    return sum(
        (dist.exact[n] * exact_per_shard_probability(n, t, p.shards, p.c) for n in dist.support),
        Fraction(0),
    )
