"""Proof-of-work identity generation and the adversary's Sybil yield."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

DIGEST_BITS = 256


@dataclass(frozen=True)
class PowParams:
    """Digest length ``L``, target exponents, init time ``T_I`` and hash-power ``h``.

    A valid ID in the current epoch is a digest below ``2**L_ti``; the
    first epoch's target ``2**L_t1`` is the maximum target.
    """

    L: int = DIGEST_BITS
    L_t1: int = 224
    L_ti: int = 224
    T_I: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        if not (0 < self.L_ti <= self.L_t1 <= self.L):
            raise ValueError(f"need 0 < L_ti <= L_t1 <= L, got {self.L_ti}, {self.L_t1}, {self.L}")
        if self.T_I <= 0:
            raise ValueError(f"T_I must be positive, got {self.T_I}")
        if self.h < 0:
            raise ValueError(f"hash-power must be >= 0, got {self.h}")


@dataclass(frozen=True)
class AdversaryModel:
    """Adversary strength as an explicit Sybil count or a hash-power fraction."""

    mode: str = "explicit"
    M: int = 0
    rho: float = 0.0

    def __post_init__(self):
        if self.mode == "explicit":
            if self.M < 0:
                raise ValueError(f"M must be >= 0, got {self.M}")
        elif self.mode == "fraction":
            if not 0 <= self.rho < 1:
                raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        else:
            raise ValueError(f"unknown adversary mode {self.mode!r}")

    def sybil_count(self, N: int, mapping: str = "total") -> int:
        if self.mode == "explicit":
            return self.M
        return M_MAPPINGS[mapping](self.rho, N)


def difficulty(p: PowParams) -> int:
    """``MaxTarget / target = 2**(L_t1 - L_ti)``, an exact power of two."""
    return 1 << (p.L_t1 - p.L_ti)


def id_probability(p: PowParams) -> float:
    """Chance that a single hash lands below the target: ``2**L_ti / 2**L``."""
    return math.ldexp(1.0, p.L_ti - p.L)


def id_probability_from_difficulty(p: PowParams) -> float:
    """Same quantity written as ``2**L_t1 / (difficulty * 2**L)``."""
    # int / int is correctly rounded, so this agrees bit-for-bit with id_probability
    return (1 << p.L_t1) / (difficulty(p) * (1 << p.L))


@dataclass(frozen=True)
class SybilYield:
    expected: float
    M: int


def sybil_yield(p: PowParams, h_adv: float, rng: Optional[np.random.Generator] = None) -> SybilYield:
    """Expected valid IDs ``p * h_adv * T_I`` and an integer ``M``.

    Without ``rng`` the count is ``floor(expected)``; with one it is a
    Binomial(``h_adv * T_I``, p) draw.
    """
    if h_adv < 0:
        raise ValueError(f"h_adv must be >= 0, got {h_adv}")
    prob = id_probability(p)
    attempts = h_adv * p.T_I
    expected = prob * attempts
    if rng is None:
        return SybilYield(expected, int(math.floor(expected)))
    return SybilYield(expected, int(rng.binomial(int(attempts), prob)))


def is_strictly_sybil_resistant(p: PowParams, h_adv: float) -> bool:
    """True iff the adversary expects fewer than two valid IDs during ``T_I``."""
    return sybil_yield(p, h_adv).expected < 2


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def m_from_hash_fraction(rho: float, N: int) -> int:
    """Sybil count for an adversary holding fraction ``rho`` of all hash-power.

    Each of the ``N - 1`` honest nodes yields one ID, so the adversary's
    yield is ``rho / (1 - rho) * (N - 1)``.
    """
    if not 0 <= rho < 1:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    return _round_half_up(rho / (1.0 - rho) * (N - 1))


def m_from_power_ratio(r: float, N: int = 2) -> int:
    """Alternative reading: ``r`` is the adversary's power over the average node's."""
    if r < 0:
        raise ValueError(f"power ratio must be >= 0, got {r}")
    return _round_half_up(r)


M_MAPPINGS = {"total": m_from_hash_fraction, "ratio": m_from_power_ratio}


def solve_pow_demo(
    epoch_randomness: bytes,
    identity_material: bytes,
    L_ti: int,
    max_attempts: int,
) -> Optional[int]:
    """First nonce whose SHA-256 digest is below ``2**L_ti``, or None.

    The hashed message is ``epoch_randomness || identity_material || nonce``
    with the nonce as 8 big-endian bytes.
    """
    if not 0 <= L_ti <= DIGEST_BITS:
        raise ValueError(f"L_ti must be within [0, {DIGEST_BITS}], got {L_ti}")
    target = 1 << L_ti
    prefix = hashlib.sha256(epoch_randomness + identity_material)
    for nonce in range(max_attempts):
        h = prefix.copy()
        h.update(nonce.to_bytes(8, "big"))
        if int.from_bytes(h.digest(), "big") < target:
            return nonce
    return None
