"""Recycling strategies: which non-empty bin gets emptied each round.

Five strategies are implemented:

* ``fullest-bin``   - bin with the most balls (greedy),
* ``golden-gate``   - round robin: the non-empty successor of the last pick,
* ``random-ball``   - the bin of a uniformly random ball (prob X_i/m),
* ``least-full``    - non-empty bin with the fewest balls,
* ``ae:<inner>``    - aggressive-empty: empty the lowest-weight non-empty bin
  outside a chosen set L; when the complement of L is empty, run the inner
  strategy on the game restricted to L.

Ties are always broken by lowest index, so the deterministic strategies give
a well-defined transition matrix for exact analysis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .errors import AllBinsEmpty, EmptyBinPicked
from .game import BinConfiguration, ProbabilityDistribution
from .rng import Rng


class StrategyKind(enum.Enum):
    FULLEST_BIN = "fullest-bin"
    GOLDEN_GATE = "golden-gate"
    RANDOM_BALL = "random-ball"
    LEAST_FULL = "least-full"
    AGGRESSIVE_EMPTY = "ae"


# Stateless strategies define a Markov chain directly on bin configurations.
STATELESS = frozenset(
    {StrategyKind.FULLEST_BIN, StrategyKind.RANDOM_BALL, StrategyKind.LEAST_FULL}
)

# Codes shared with the simulation kernels.
KERNEL_CODES = {
    StrategyKind.FULLEST_BIN: 0,
    StrategyKind.GOLDEN_GATE: 1,
    StrategyKind.RANDOM_BALL: 2,
    StrategyKind.LEAST_FULL: 3,
    StrategyKind.AGGRESSIVE_EMPTY: 4,
}


@dataclass(frozen=True)
class StrategySpec:
    """A strategy choice plus its aggressive-empty parameters, if any."""

    kind: StrategyKind
    inner: StrategyKind | None = None
    l_size: int | None = None       # override for |L| (default min(n, 2m))
    l_threshold: float | None = None  # override for the weight cutoff (default 1/m)

    def __post_init__(self):
        if self.kind is StrategyKind.AGGRESSIVE_EMPTY:
            if self.inner is None:
                raise ValueError("aggressive-empty needs an inner strategy")
            if self.inner is StrategyKind.AGGRESSIVE_EMPTY:
                raise ValueError("aggressive-empty cannot nest")
        elif self.inner is not None:
            raise ValueError("only aggressive-empty takes an inner strategy")

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.AGGRESSIVE_EMPTY:
            return f"ae:{self.inner.value}"
        return self.kind.value


def parse_strategy(text: str) -> StrategySpec:
    """Parse CLI syntax: fullest-bin | golden-gate | random-ball | least-full | ae:<inner>."""
    if text.startswith("ae:"):
        inner = text.split(":", 1)[1]
        return StrategySpec(StrategyKind.AGGRESSIVE_EMPTY, inner=StrategyKind(inner))
    return StrategySpec(StrategyKind(text))


@dataclass(frozen=True)
class GoldenGateState:
    cursor: int = 0


@dataclass(frozen=True)
class AeState:
    l_bins: frozenset[int]
    inner_state: "StrategyState"


StrategyState = None | GoldenGateState | AeState


def select_default_L(dist: ProbabilityDistribution, m: int,
                     l_size: int | None = None,
                     l_threshold: float | None = None) -> frozenset[int]:
    """Choose the protected set L for aggressive-empty.

    L holds every bin of weight >= 1/m, topped up with the highest-weight
    remaining bins (ties by lowest index) until |L| = min(n, 2m). Both the
    threshold and the target size can be overridden.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    n = dist.n
    threshold = (1.0 / m) if l_threshold is None else l_threshold
    target = min(n, 2 * m) if l_size is None else min(n, max(1, l_size))
    chosen = [i for i, w in enumerate(dist.weights) if w >= threshold]
    if len(chosen) < target:
        rest = sorted(
            (i for i in range(n) if dist.weights[i] < threshold),
            key=lambda i: (-dist.weights[i], i),
        )
        chosen.extend(rest[: target - len(chosen)])
    return frozenset(chosen)


def initial_state(spec: StrategySpec, dist: ProbabilityDistribution, m: int) -> StrategyState:
    """Fresh per-run strategy state (cursor at 0, L from the default rule)."""
    if spec.kind is StrategyKind.GOLDEN_GATE:
        return GoldenGateState(cursor=0)
    if spec.kind is StrategyKind.AGGRESSIVE_EMPTY:
        l_bins = select_default_L(dist, m, spec.l_size, spec.l_threshold)
        inner = GoldenGateState(0) if spec.inner is StrategyKind.GOLDEN_GATE else None
        return AeState(l_bins=l_bins, inner_state=inner)
    return None


def _pick_fullest(counts) -> int:
    best, best_count = -1, 0
    for i, c in enumerate(counts):
        if c > best_count:
            best, best_count = i, c
    return best


def _pick_least_full(counts) -> int:
    best, best_count = -1, None
    for i, c in enumerate(counts):
        if c > 0 and (best_count is None or c < best_count):
            best, best_count = i, c
    return best


def _pick_golden_gate(counts, cursor: int) -> int:
    n = len(counts)
    for off in range(n):
        j = (cursor + off) % n
        if counts[j] > 0:
            return j
    return -1


def _pick_random_ball(counts, m: int, rng: Rng) -> int:
    r = rng.next_below(m)
    acc = 0
    for i, c in enumerate(counts):
        acc += c
        if r < acc:
            return i
    raise AssertionError("ball index outside total count")


def pick(
    spec: StrategySpec,
    state: StrategyState,
    config: BinConfiguration,
    dist: ProbabilityDistribution,
    rng: Rng,
) -> tuple[int, StrategyState]:
    """Select the bin to recycle; returns (bin, updated state).

    The returned bin is always non-empty. Random-ball consumes exactly one
    RNG draw; the deterministic strategies consume none.
    """
    counts = config.counts
    m = config.m
    if m == 0:
        raise AllBinsEmpty("no balls to recycle")

    kind = spec.kind
    if kind is StrategyKind.FULLEST_BIN:
        return _pick_fullest(counts), state
    if kind is StrategyKind.LEAST_FULL:
        return _pick_least_full(counts), state
    if kind is StrategyKind.RANDOM_BALL:
        return _pick_random_ball(counts, m, rng), state
    if kind is StrategyKind.GOLDEN_GATE:
        j = _pick_golden_gate(counts, state.cursor)
        return j, GoldenGateState(cursor=(j + 1) % len(counts))
    if kind is StrategyKind.AGGRESSIVE_EMPTY:
        best, best_w = -1, None
        for i, c in enumerate(counts):
            if c > 0 and i not in state.l_bins:
                w = dist.weights[i]
                if best_w is None or w < best_w:
                    best, best_w = i, w
        if best >= 0:
            return best, state
        # Complement of L is empty, so every ball is inside L and the inner
        # strategy's global pick coincides with its pick on the induced game.
        inner_spec = StrategySpec(spec.inner)
        j, inner_state = pick(inner_spec, state.inner_state, config, dist, rng)
        return j, replace(state, inner_state=inner_state)
    raise ValueError(f"unknown strategy {kind}")


def check_pick(config: BinConfiguration, bin: int) -> None:
    """Assert the strategy contract: the picked bin holds at least one ball."""
    if config.counts[bin] == 0:
        raise EmptyBinPicked(f"bin {bin} is empty in {config.counts}")
