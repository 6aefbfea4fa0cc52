"""Structural parameters of the sharded protocol and their consistency checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union


class ParamError(ValueError):
    """Base class for invalid protocol configurations."""

    invariant = "params"


class ShapeError(ParamError):
    invariant = "shape"


class ThresholdOutOfRangeError(ParamError):
    invariant = "threshold"


class PoolTooSmallError(ParamError):
    invariant = "pool"


@dataclass(frozen=True)
class ProtocolParams:
    """Network size ``N``, ``2**s`` shards of capacity ``c``, threshold count ``tau``."""

    N: int
    s: int
    c: int
    tau: int

    @property
    def shards(self) -> int:
        return 1 << self.s

    @property
    def n_star(self) -> int:
        return self.shards * self.c

    @property
    def bcp_threshold(self) -> int:
        """Sybil IDs needed in one shard to block consensus (``c - tau + 1``)."""
        return self.c - self.tau + 1

    @property
    def gft_threshold(self) -> int:
        return self.tau

    def threshold(self, attack: str) -> int:
        attack = attack.lower()
        if attack == "bcp":
            return self.bcp_threshold
        if attack == "gft":
            return self.gft_threshold
        raise ValueError(f"unknown attack {attack!r}")

    def pigeonhole_bound(self, threshold: int) -> int:
        """Largest Sybil count that can still avoid ``threshold`` in every shard."""
        return self.shards * (threshold - 1)

    def as_dict(self) -> dict:
        return {"N": self.N, "s": self.s, "c": self.c, "tau": self.tau, "n_star": self.n_star}


@dataclass(frozen=True)
class ThresholdSpec:
    """Consensus threshold given either as a fraction of ``c`` or as a count."""

    fraction: Optional[Fraction] = None
    count: Optional[int] = None

    def __post_init__(self):
        if (self.fraction is None) == (self.count is None):
            raise ValueError("give exactly one of fraction or count")
        if self.fraction is not None and not isinstance(self.fraction, Fraction):
            object.__setattr__(self, "fraction", Fraction(self.fraction))

    @classmethod
    def of(cls, value: Union["ThresholdSpec", Fraction, float, int, str]) -> "ThresholdSpec":
        """Coerce: ints are counts, anything else is a fraction."""
        if isinstance(value, ThresholdSpec):
            return value
        if isinstance(value, bool):
            raise TypeError("bool is not a threshold")
        if isinstance(value, int):
            return cls(count=value)
        if isinstance(value, str):
            return cls(fraction=parse_fraction(value))
        return cls(fraction=Fraction(value))

    def describe(self) -> str:
        if self.count is not None:
            return str(self.count)
        return str(self.fraction)


TWO_THIRDS = ThresholdSpec(fraction=Fraction(2, 3))

ROUNDING_RULES = ("ceil", "floor_plus_one")


def parse_fraction(text: str, max_denominator: int = 12) -> Fraction:
    """Parse ``"2/3"`` or a decimal such as ``"0.667"``.

    A decimal is read as the simplest fraction (denominator up to
    ``max_denominator``) that rounds to the digits written, so ``0.667``
    and ``0.67`` both mean 2/3 while ``0.52`` stays 13/25.
    """
    text = text.strip()
    value = Fraction(text)
    if "/" in text or "." not in text or "e" in text.lower():
        return value
    decimals = len(text.split(".", 1)[1])
    half_ulp = Fraction(1, 2 * 10**decimals)
    simple = value.limit_denominator(max_denominator)
    if simple != value and abs(simple - value) < half_ulp:
        return simple
    return value


def resolve_threshold(spec, c: int, rule: str = "ceil") -> int:
    """Turn a threshold spec into an integer count of agreeing IDs."""
    spec = ThresholdSpec.of(spec)
    if c < 1:
        raise ShapeError(f"shard capacity must be >= 1, got c={c}")
    if spec.count is not None:
        tau = spec.count
        if not (2 * tau > c and tau <= c):
            raise ThresholdOutOfRangeError(f"threshold count {tau} outside (c/2, c] for c={c}")
        return tau
    f = spec.fraction
    if not (Fraction(1, 2) < f <= 1):
        raise ThresholdOutOfRangeError(f"threshold fraction {f} outside (0.5, 1.0]")
    if rule == "ceil":
        tau = math.ceil(f * c)
    elif rule == "floor_plus_one":
        tau = math.floor(f * c) + 1
    else:
        raise ValueError(f"unknown rounding rule {rule!r}; expected one of {ROUNDING_RULES}")
    tau = min(tau, c)
    if not 2 * tau > c:
        raise ThresholdOutOfRangeError(f"fraction {f} gives tau={tau}, not above c/2 for c={c}")
    return tau


def make_params(N: int, s: int, c: int, tau, rule: str = "ceil") -> ProtocolParams:
    """Build params from a fractional or count threshold."""
    return ProtocolParams(N=N, s=s, c=c, tau=resolve_threshold(tau, c, rule))


def validate_params(p: ProtocolParams, M: int) -> ProtocolParams:
    """Return ``p`` unchanged if an epoch can run with ``M`` Sybil IDs, else raise."""
    if p.N < 2:
        raise ShapeError(f"need N >= 2 nodes, got N={p.N}")
    if p.s < 0:
        raise ShapeError(f"shard exponent must be >= 0, got s={p.s}")
    if p.c < 1:
        raise ShapeError(f"shard capacity must be >= 1, got c={p.c}")
    if not (2 * p.tau > p.c and p.tau <= p.c):
        raise ThresholdOutOfRangeError(f"tau={p.tau} outside (c/2, c] for c={p.c}")
    if M < 0:
        raise ShapeError(f"Sybil count must be >= 0, got M={M}")
    pool = M + p.N - 1
    if pool < p.n_star:
        raise PoolTooSmallError(f"ID pool {pool} < N* {p.n_star} (M={M}, N={p.N})")
    return p
