"""Core game state and the single recycling step.

A game is ``m`` balls in ``n`` bins. Each round a strategy picks a non-empty
bin; its balls are removed and re-thrown i.i.d. according to the bin-weight
distribution ``p``. Everything else in the package composes this step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    AllBinsEmpty,
    EmptyBinPicked,
    WeightsFileError,
    ZeroProbabilityOccupied,
)
from .rng import Rng

# Ball counts above this would make X^2/p sums lose integer exactness in
# float64 at the tolerances the tests assert.
MAX_BALLS = 1 << 48


@dataclass(frozen=True)
class ProbabilityDistribution:
    """Bin-weight vector p. Weights are non-negative and sum to 1 (1e-12)."""

    weights: tuple[float, ...]
    label: str = "custom"

    def __post_init__(self):
        if len(self.weights) == 0:
            raise ValueError("distribution needs at least one bin")
        if any(math.isnan(w) or w < 0.0 for w in self.weights):
            raise ValueError("weights must be non-negative and not NaN")
        total = math.fsum(self.weights)
        if total <= 0.0:
            raise ValueError("at least one weight must be positive")
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, expected 1 within 1e-12")

    @classmethod
    def from_raw(cls, raw, label: str = "custom") -> "ProbabilityDistribution":
        """Normalize arbitrary non-negative weights to sum exactly-ish 1."""
        raw = [float(w) for w in raw]
        if not raw:
            raise ValueError("distribution needs at least one bin")
        if any(math.isnan(w) or math.isinf(w) or w < 0.0 for w in raw):
            raise ValueError("weights must be finite and non-negative")
        total = math.fsum(raw)
        if total <= 0.0:
            raise ValueError("at least one weight must be positive")
        return cls(tuple(w / total for w in raw), label=label)

    @property
    def n(self) -> int:
        return len(self.weights)

    @cached_property
    def cdf(self) -> np.ndarray:
        """Cumulative weights for inverse-CDF sampling; last entry is 1.0.

        Zero-weight bins repeat the previous value, so a bisect_right lookup
        can never land on them.
        """
        c = np.cumsum(np.asarray(self.weights, dtype=np.float64))
        c /= c[-1]
        c[-1] = 1.0
        return c

    @cached_property
    def weights_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    @cached_property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, w in enumerate(self.weights) if w > 0.0)

    def is_uniform(self, tol: float = 1e-12) -> bool:
        target = 1.0 / self.n
        return all(abs(w - target) <= tol for w in self.weights)


@dataclass(frozen=True)
class BinConfiguration:
    """Ball counts per bin; the vector X with sum m."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("ball counts must be non-negative")
        if self.m > MAX_BALLS:
            raise ValueError(f"total balls exceeds cap {MAX_BALLS}")

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def m(self) -> int:
        return sum(self.counts)

    @classmethod
    def from_array(cls, counts) -> "BinConfiguration":
        return cls(tuple(int(c) for c in counts))


@dataclass(frozen=True)
class RecycleOutcome:
    """Result of one recycle: reward (balls rethrown), chosen bin, next state."""

    recycled: int
    chosen_bin: int
    next: BinConfiguration


def throw_balls(k: int, dist: ProbabilityDistribution, rng: Rng) -> np.ndarray:
    """Throw k balls i.i.d. according to dist; returns per-bin counts.

    Each ball is one categorical draw (inverse CDF), so the multinomial
    semantics are exact and the RNG consumption is exactly k draws.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    from . import _kernel

    counts = np.zeros(dist.n, dtype=np.int64)
    rng.state = _kernel.throw_balls(k, dist.cdf, rng.state, counts)
    return counts


def recycle_step(
    config: BinConfiguration,
    bin: int,
    dist: ProbabilityDistribution,
    rng: Rng,
) -> RecycleOutcome:
    """Empty one bin and re-throw its balls; reward is the count removed."""
    if config.m == 0:
        raise AllBinsEmpty("cannot recycle with zero balls")
    k = config.counts[bin]
    if k == 0:
        raise EmptyBinPicked(f"bin {bin} is empty in {config.counts}")
    thrown = throw_balls(k, dist, rng)
    nxt = list(config.counts)
    nxt[bin] = 0
    for i, c in enumerate(thrown):
        nxt[i] += int(c)
    return RecycleOutcome(recycled=k, chosen_bin=bin, next=BinConfiguration(tuple(nxt)))


def z_statistic(config: BinConfiguration, dist: ProbabilityDistribution) -> float:
    """Sum of X_i^2 / p_i; empty bins contribute 0 even when p_i = 0."""
    total = 0.0
    for x, p in zip(config.counts, dist.weights):
        if x == 0:
            continue
        if p == 0.0:
            raise ZeroProbabilityOccupied(
                f"{x} balls in a zero-probability bin"
            )
        total += (x * x) / p
    return total


def load_weights_file(path: str) -> ProbabilityDistribution:
    """Read one non-negative decimal per line and normalize to sum 1."""
    raw: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError:
                raise WeightsFileError(f"{path}:{lineno}: not a number: {text!r}")
            if math.isnan(value) or math.isinf(value) or value < 0.0:
                raise WeightsFileError(f"{path}:{lineno}: invalid weight {text!r}")
            raw.append(value)
    if not raw:
        raise WeightsFileError(f"{path}: no weights found")
    try:
        return ProbabilityDistribution.from_raw(raw, label=f"file:{path}")
    except ValueError as exc:
        raise WeightsFileError(f"{path}: {exc}")
