"""Closed-form rate bounds and identities, used as assertions everywhere else.

For a game with m balls, n bins and weights p:

* no strategy exceeds (2m + n - 1) / ||p||_{1/2}, where ||p||_{1/2} is the
  half quasi-norm (sum of sqrt(p_i))^2;
* a stateless strategy picking bin j with frequency f_j is bounded by
  (2m + n - 1) / sum_j(p_j / f_j), maximized at f proportional to sqrt(p);
* random-ball achieves at least m / ||p||_{1/2};
* on the uniform distribution, fullest-bin and golden-gate sit between
  2m/(n+1) and 2m/n + 1, random-ball stays below 1 + 1.994 m/n, and
  E[R^2]/E[R] for random-ball equals (2m + n - 1)/(n + 1);
* aggressive-empty over a protected set with conditional rate R and escape
  mass q runs at roughly 1 / ((1 - q)/R + q), bracketed below by the factor
  1 - 1/e from bin collisions among escaped balls.

A rate can never exceed m, so capped variants are reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dists import half_quasi_norm
from .errors import ZeroFrequencyPositiveWeight
from .game import ProbabilityDistribution

RB_UNIFORM_UPPER_COEFF = 1.994
AE_LOWER_FACTOR = 1.0 - 1.0 / math.e


@dataclass(frozen=True)
class BoundReport:
    m: int
    n: int
    half_norm: float
    upper_general: float          # (2m+n-1) / ||p||_1/2
    upper_capped: float           # min(m, upper_general)
    rb_lower_general: float       # m / ||p||_1/2
    uniform_upper: float | None = None         # 2m/n + 1
    uniform_lower_fb_gg: float | None = None   # 2m/(n+1)
    pairflow_ratio_uniform: float | None = None  # (2m+n-1)/(n+1)
    rb_uniform_upper: float | None = None      # 1 + 1.994 m/n


def bound_report(m: int, n: int, dist: ProbabilityDistribution) -> BoundReport:
    """Evaluate every closed-form bound; uniform-only fields need a uniform dist."""
    if n != dist.n:
        raise ValueError(f"n={n} does not match distribution n={dist.n}")
    if m < 1:
        raise ValueError("m must be at least 1")
    hn = half_quasi_norm(dist)
    upper = (2 * m + n - 1) / hn
    report = BoundReport(
        m=m,
        n=n,
        half_norm=hn,
        upper_general=upper,
        upper_capped=min(float(m), upper),
        rb_lower_general=m / hn,
    )
    if dist.is_uniform():
        report = BoundReport(
            **{
                **report.__dict__,
                "uniform_upper": 2 * m / n + 1.0,
                "uniform_lower_fb_gg": 2 * m / (n + 1),
                "pairflow_ratio_uniform": (2 * m + n - 1) / (n + 1),
                "rb_uniform_upper": 1.0 + RB_UNIFORM_UPPER_COEFF * m / n,
            }
        )
    return report


def freq_bound(m: int, n: int, dist: ProbabilityDistribution, f) -> float:
    """Rate bound (2m+n-1) / sum_j(p_j / f_j) for pick frequencies f.

    Equals the general upper bound when f_j is proportional to sqrt(p_j);
    any other frequency profile gives something smaller.
    """
    if len(f) != dist.n:
        raise ValueError("frequency vector length must match the distribution")
    denom = 0.0
    for p_j, f_j in zip(dist.weights, f):
        if p_j == 0.0:
            continue
        if f_j <= 0.0:
            raise ZeroFrequencyPositiveWeight(
                f"f_j = {f_j} for a bin with weight {p_j}"
            )
        denom += p_j / f_j
    return (2 * m + n - 1) / denom


@dataclass(frozen=True)
class AeRatePrediction:
    central: float
    lower: float
    upper: float


def ae_rate_prediction(rate_on_l: float, q: float) -> AeRatePrediction:
    """Predicted aggressive-empty rate from the protected-set rate and escape mass.

    ``central`` is 1 / ((1-q)/rate_on_l + q); the bracket scales it by
    [1 - 1/e, 1]. The relationship is an order-of-magnitude law, never an
    exact equality, so callers should treat the bracket as soft.
    """
    if rate_on_l < 1.0:
        raise ValueError("a recycle rate is at least 1")
    if not 0.0 <= q < 1.0:
        raise ValueError("q must be in [0, 1)")
    central = 1.0 / ((1.0 - q) / rate_on_l + q)
    return AeRatePrediction(
        central=central,
        lower=AE_LOWER_FACTOR * central,
        upper=central,
    )
