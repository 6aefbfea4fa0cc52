"""Combinatorics that stay finite at large N and c.

Two backends are used throughout the package:

* exact integers / :class:`fractions.Fraction` for small instances (the
  testing oracle route), and
* natural-log values for large ones, where ``C(M + N - 1, N*)`` has
  thousands of decimal digits.

A log-probability is a plain ``float``; ``LOG_ZERO`` (``-inf``) stands for
``log(0)``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

LogProb = float
ExactRational = Fraction

LOG_ZERO: LogProb = -math.inf

# instances with N* at or below this size use the rational backend
EXACT_NSTAR_LIMIT = 64


def binom(n: int, k: int) -> int:
    """``C(n, k)`` as an exact integer, zero outside ``0 <= k <= n``."""
    if n < 0:
        raise ValueError(f"binom requires n >= 0, got n={n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def log_binom(n: int, k: int) -> LogProb:
    """``ln C(n, k)`` via log-gamma; ``LOG_ZERO`` when ``k`` is out of range."""
    if n < 0:
        raise ValueError(f"log_binom requires n >= 0, got n={n}")
    if k < 0 or k > n:
        return LOG_ZERO
    if k == 0 or k == n:
        return 0.0
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_binom_array(n, k) -> np.ndarray:
    """Vectorised :func:`log_binom` over broadcastable integer arrays."""
    n = np.asarray(n, dtype=np.int64)
    k = np.asarray(k, dtype=np.int64)
    n, k = np.broadcast_arrays(n, k)
    out = np.full(n.shape, LOG_ZERO, dtype=float)
    ok = (k >= 0) & (k <= n)
    nn = n[ok].astype(float)
    kk = k[ok].astype(float)
    out[ok] = gammaln(nn + 1.0) - gammaln(kk + 1.0) - gammaln(nn - kk + 1.0)
    return out


def log_sum_exp(values: Iterable[float]) -> LogProb:
    """``ln(sum(exp(v)))`` that tolerates ``LOG_ZERO`` entries and empty input."""
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if arr.size == 0:
        return LOG_ZERO
    top = float(np.max(arr))
    if top == LOG_ZERO:
        return LOG_ZERO
    # fsum keeps the result independent of term order
    return top + math.log(math.fsum(np.exp(arr - top).tolist()))


def sum_ratio_terms(terms: Sequence) -> float:
    """Sum ``exp(log_num - log_den)`` over ``terms``.

    Each term is a ``(log_numerator, log_denominator)`` pair (or a mapping
    with those keys). Terms whose numerator is ``LOG_ZERO`` contribute
    nothing.
    """
    diffs = []
    for term in terms:
        if isinstance(term, dict):
            num, den = term["log_numerator"], term["log_denominator"]
        else:
            num, den = term
        if num == LOG_ZERO:
            continue
        if den == LOG_ZERO:
            raise ZeroDivisionError("ratio term with log(0) denominator")
        diffs.append(num - den)
    if not diffs:
        return 0.0
    return math.exp(log_sum_exp(diffs))


def exact_ratio(num: int, den: int) -> ExactRational:
    if den <= 0:
        raise ZeroDivisionError("denominator must be positive")
    return Fraction(num, den)
