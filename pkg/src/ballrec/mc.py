"""Long-run Monte Carlo estimation of recycling rates.

A run plays ``burn_in + rounds`` recycling steps from the initial
configuration and accumulates statistics over the measured rounds only:
the mean recycle rate with a batch-means confidence interval, the mean
squared reward, and per-bin pick frequencies f_i with conditional means R_i.
The per-bin balance p_i * rate - f_i * R_i (the flow residual) converges to
zero for stateless strategies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .errors import AllBinsEmpty, StatefulStrategyWarning
from .game import MAX_BALLS, ProbabilityDistribution, throw_balls
from .rng import Rng
from .strategies import (
    KERNEL_CODES,
    STATELESS,
    AeState,
    GoldenGateState,
    StrategyKind,
    StrategySpec,
    initial_state,
)

N_BATCHES = 32
# Two-sided 95% quantile of Student's t with N_BATCHES - 1 = 31 dof.
T_95_31 = 2.0395134463964077

INITIAL_MODES = ("throw", "bin0")


@dataclass(frozen=True)
class SimConfig:
    m: int
    n: int
    dist: ProbabilityDistribution
    strategy: StrategySpec
    seed: int
    rounds: int
    burn_in: int | None = None  # default: 10 * n * max(1, n/m)
    window: int | None = None   # default: rounds (single window)
    initial: str = "throw"      # throw | bin0
    convergence_check: bool = False

    def __post_init__(self):
        if self.m < 0 or self.m > MAX_BALLS:
            raise ValueError(f"m must be in [0, {MAX_BALLS}]")
        if self.n != self.dist.n:
            raise ValueError(f"n={self.n} does not match distribution n={self.dist.n}")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if self.window is not None and (self.window < 1 or self.rounds % self.window):
            raise ValueError("window must divide rounds")
        if self.initial not in INITIAL_MODES:
            raise ValueError(f"initial must be one of {INITIAL_MODES}")

    @property
    def resolved_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return int(10 * self.n * max(1.0, self.n / self.m))


@dataclass(frozen=True)
class PerBinStats:
    bin: int
    p_i: float
    f_i: float
    r_i: float
    flow_residual: float


@dataclass(frozen=True)
class RateEstimate:
    strategy: StrategySpec
    dist_label: str
    m: int
    n: int
    seed: int
    burn_in: int
    rounds: int
    rate: float
    rate_ci95: float
    e_r2: float
    per_bin: tuple[PerBinStats, ...]
    halves_consistent: bool = True


def run_sim(cfg: SimConfig) -> RateEstimate:
    """Simulate one game and return its rate estimate (deterministic per seed)."""
    if cfg.m == 0:
        raise AllBinsEmpty("simulation needs at least one ball")
    rng = Rng(cfg.seed)
    dist = cfg.dist
    n = cfg.n

    if cfg.initial == "throw":
        counts = throw_balls(cfg.m, dist, rng)
    else:
        counts = np.zeros(n, dtype=np.int64)
        counts[0] = cfg.m

    state = initial_state(cfg.strategy, dist, cfg.m)
    cursor = 0
    in_l = np.zeros(n, dtype=np.uint8)
    inner_code = 0
    if isinstance(state, GoldenGateState):
        cursor = state.cursor
    elif isinstance(state, AeState):
        for i in state.l_bins:
            in_l[i] = 1
        inner_code = KERNEL_CODES[cfg.strategy.inner]
        if isinstance(state.inner_state, GoldenGateState):
            cursor = state.inner_state.cursor

    n_batches = N_BATCHES if cfg.rounds >= N_BATCHES else 1
    pick_counts = np.zeros(n, dtype=np.int64)
    recycled_by_bin = np.zeros(n, dtype=np.int64)
    batch_sums = np.zeros(n_batches, dtype=np.int64)

    new_state, _, total, total_r2 = _kernel.run_game(
        counts, dist.cdf, dist.weights_array,
        KERNEL_CODES[cfg.strategy.kind], inner_code, in_l, cursor,
        rng.state, cfg.resolved_burn_in, cfg.rounds, n_batches,
        pick_counts, recycled_by_bin, batch_sums,
    )
    rng.state = new_state

    rate = total / cfg.rounds
    e_r2 = total_r2 / cfg.rounds

    # Round i goes to batch (i * n_batches) // rounds, so batch k starts at
    # ceil(k * rounds / n_batches).
    starts = -(-np.arange(n_batches + 1) * cfg.rounds // n_batches)
    batch_len = np.diff(starts)
    if n_batches >= 2:
        means = batch_sums / batch_len
        ci = T_95_31 * float(np.std(means, ddof=1)) / math.sqrt(n_batches)
    else:
        ci = float("nan")

    # Convergence: compare the two halves of the measurement window.
    halves_consistent = True
    if cfg.convergence_check and n_batches == N_BATCHES:
        half = n_batches // 2
        first = float(batch_sums[:half].sum() / batch_len[:half].sum())
        second = float(batch_sums[half:].sum() / batch_len[half:].sum())
        halves_consistent = not (math.isfinite(ci) and abs(first - second) > 3.0 * ci)
        if not halves_consistent:
            warnings.warn(
                f"window halves differ by {abs(first - second):.4g} "
                f"(> 3x CI {ci:.4g}); increase burn-in or rounds",
                stacklevel=2,
            )

    per_bin = []
    for i in range(n):
        f_i = pick_counts[i] / cfg.rounds
        r_i = recycled_by_bin[i] / pick_counts[i] if pick_counts[i] else 0.0
        per_bin.append(PerBinStats(
            bin=i,
            p_i=dist.weights[i],
            f_i=float(f_i),
            r_i=float(r_i),
            flow_residual=float(dist.weights[i] * rate - f_i * r_i),
        ))

    return RateEstimate(
        strategy=cfg.strategy,
        dist_label=dist.label,
        m=cfg.m,
        n=n,
        seed=cfg.seed,
        burn_in=cfg.resolved_burn_in,
        rounds=cfg.rounds,
        rate=rate,
        rate_ci95=ci,
        e_r2=e_r2,
        per_bin=tuple(per_bin),
        halves_consistent=halves_consistent,
    )


def flow_check(est: RateEstimate, dist: ProbabilityDistribution) -> float:
    """Largest per-bin flow residual |p_i * rate - f_i * R_i|.

    Warns when the estimate came from a strategy with internal state; the
    balance identity is only guaranteed for stateless strategies.
    """
    if est.strategy.kind not in STATELESS:
        warnings.warn(
            f"flow balance holds for stateless strategies; "
            f"{est.strategy.label} keeps internal state",
            StatefulStrategyWarning,
            stacklevel=2,
        )
    return max(
        abs(dist.weights[pb.bin] * est.rate - pb.f_i * pb.r_i) for pb in est.per_bin
    )


def is_stateless(kind: StrategyKind) -> bool:
    return kind in STATELESS
