"""Named bin-weight distributions and the half quasi-norm."""

from __future__ import annotations

import math

from .errors import InvalidBinCount
from .game import ProbabilityDistribution, load_weights_file


def make_uniform(n: int) -> ProbabilityDistribution:
    """All n bins get weight 1/n."""
    if n < 1:
        raise InvalidBinCount("uniform distribution needs n >= 1")
    return ProbabilityDistribution((1.0 / n,) * n, label="uniform")


def make_skyscraper(n: int) -> ProbabilityDistribution:
    """One heavy bin of weight 1 - 1/n + 1/n^2; the other n-1 get 1/n^2.

    The heavy bin sits at index 0. This is the distribution on which greedy
    emptying of the fullest bin performs worst.
    """
    if n < 2:
        raise InvalidBinCount("skyscraper distribution needs n >= 2")
    low = 1.0 / (n * n)
    tail = math.fsum([low] * (n - 1))
    return ProbabilityDistribution((1.0 - tail,) + (low,) * (n - 1), label="skyscraper")


def make_power_law(n: int, s: float) -> ProbabilityDistribution:
    """Weights proportional to 1/(i+1)^s; s = 0 is uniform."""
    if n < 1:
        raise InvalidBinCount("power-law distribution needs n >= 1")
    if s < 0:
        raise ValueError("exponent s must be non-negative")
    raw = [1.0 / float(i + 1) ** s for i in range(n)]
    return ProbabilityDistribution.from_raw(raw, label=f"powerlaw:{s:g}")


def half_quasi_norm(dist: ProbabilityDistribution) -> float:
    """(sum of sqrt(p_i))^2, always in [1, n].

    Equals n iff uniform, 1 iff a point mass; it is the quantity that
    governs the universal recycle-rate upper bound.
    """
    return math.fsum(math.sqrt(w) for w in dist.weights) ** 2


def parse_dist(spec: str, n: int | None) -> ProbabilityDistribution:
    """Parse CLI syntax: uniform | skyscraper | powerlaw:<s> | file:<path>."""
    if spec == "uniform":
        if n is None:
            raise ValueError("uniform distribution needs -n")
        return make_uniform(n)
    if spec == "skyscraper":
        if n is None:
            raise ValueError("skyscraper distribution needs -n")
        return make_skyscraper(n)
    if spec.startswith("powerlaw:"):
        if n is None:
            raise ValueError("powerlaw distribution needs -n")
        return make_power_law(n, float(spec.split(":", 1)[1]))
    if spec.startswith("file:"):
        dist = load_weights_file(spec.split(":", 1)[1])
        if n is not None and n != dist.n:
            raise ValueError(f"-n {n} does not match {dist.n} weights in file")
        return dist
    raise ValueError(f"unknown distribution syntax: {spec!r}")
