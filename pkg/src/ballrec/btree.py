"""Dynamic B-tree leaf set with a bounded insertion buffer.

Keys are inserted i.i.d. from a real-valued key distribution into an
in-memory buffer grouped by destination leaf. When the buffer fills, one
group is flushed according to a policy (fullest-bin, golden-gate or
random-ball); leaves split at the median when they exceed their capacity.
The recycle rate of a window is its insertions divided by its flushes.

The model deliberately omits durability, deletes, leaf caching and
background flushing; it is the synthetic counterpart of a database
insertion buffer.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import BTooLarge, EmptyBuffer
from .rng import GOLDEN, MASK64, derive_stream, mix64
from .strategies import KERNEL_CODES, StrategyKind

_TINY = 2.0**-53

FLUSH_POLICIES = ("fullest-bin", "golden-gate", "random-ball")

# Key-distribution kind codes shared with the compiled kernel.
KD_UNIFORM = 0
KD_PARETO = 1
KD_NORMAL = 2

# Coefficients of Acklam's rational approximation to the inverse normal CDF
# (relative error < 1.2e-9). Used instead of a library call so the compiled
# kernel can evaluate the exact same expression bit for bit.
_NDTRI_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
            1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_NDTRI_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
            6.680131188771972e+01, -1.328068155288572e+01)
_NDTRI_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
            -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_NDTRI_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
            3.754408661907416e+00)
_NDTRI_PLOW = 0.02425


def ndtri_approx(p: float) -> float:
    """Inverse standard normal CDF, Acklam's approximation."""
    a, b, c, d = _NDTRI_A, _NDTRI_B, _NDTRI_C, _NDTRI_D
    if p < _NDTRI_PLOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p <= 1.0 - _NDTRI_PLOW:
        q = p - 0.5
        r = q * q
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    q = math.sqrt(-2.0 * math.log(1.0 - p))
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)


def quantile(kind: int, a: float, b: float, u: float) -> float:
    """Map a uniform draw in [0, 1) to a key. Must match the compiled kernel."""
    if kind == KD_UNIFORM:
        return a + u * (b - a)
    if kind == KD_PARETO:
        # a = alpha, b = x_min
        return b * (1.0 - u) ** (-1.0 / a)
    if kind == KD_NORMAL:
        if u < _TINY:
            u = _TINY
        return a + b * ndtri_approx(u)
    raise ValueError(f"bad key-distribution code {kind}")


@dataclass(frozen=True)
class KeyDistribution:
    """Real-valued key generator with an exact CDF."""

    kind: str  # uniform | pareto | normal
    a: float
    b: float

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.b > self.a:
                raise ValueError("uniform key range needs hi > lo")
        elif self.kind == "pareto":
            if self.a <= 0 or self.b <= 0:
                raise ValueError("pareto needs alpha > 0 and x_min > 0")
        elif self.kind == "normal":
            if self.b <= 0:
                raise ValueError("normal needs sigma > 0")
        else:
            raise ValueError(f"unknown key distribution {self.kind!r}")

    @property
    def kernel_code(self) -> int:
        return {"uniform": KD_UNIFORM, "pareto": KD_PARETO, "normal": KD_NORMAL}[self.kind]

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.a:g}:{self.b:g}"

    def quantile(self, u: float) -> float:
        return quantile(self.kernel_code, self.a, self.b, u)

    def cdf(self, x) -> np.ndarray:
        """Exact CDF of the generator, vectorized."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "uniform":
            return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        if self.kind == "pareto":
            with np.errstate(divide="ignore"):
                tail = np.where(x > self.b, (self.b / np.maximum(x, self.b)) ** self.a, 1.0)
            return 1.0 - tail
        return ndtr((x - self.a) / self.b)


def parse_keydist(text: str) -> KeyDistribution:
    """CLI syntax: uniform[:lo:hi] | pareto:<alpha>[:xmin] | normal[:mu:sigma]."""
    parts = text.split(":")
    kind = parts[0]
    if kind == "uniform":
        lo, hi = (float(parts[1]), float(parts[2])) if len(parts) == 3 else (0.0, 1000.0)
        return KeyDistribution("uniform", lo, hi)
    if kind == "pareto":
        if len(parts) < 2:
            raise ValueError("pareto needs an alpha: pareto:<alpha>[:xmin]")
        alpha = float(parts[1])
        xmin = float(parts[2]) if len(parts) == 3 else 1.0
        return KeyDistribution("pareto", alpha, xmin)
    if kind == "normal":
        mu, sigma = (float(parts[1]), float(parts[2])) if len(parts) == 3 else (0.0, 1000.0)
        return KeyDistribution("normal", mu, sigma)
    raise ValueError(f"unknown key distribution syntax: {text!r}")


@dataclass(frozen=True)
class FlushEvent:
    leaf: int
    count: int


class BufferedTree:
    """Leaf intervals partitioning the line plus a per-leaf insert buffer.

    With ``frozen_cuts`` the leaf structure is fixed (no splits, resident
    keys not stored); that mode turns the simulator into the static game.
    """

    def __init__(self, policy: int, buffer_capacity: int, leaf_capacity: int,
                 frozen_cuts=None):
        if buffer_capacity < 1:
            raise ValueError("buffer capacity must be at least 1")
        if leaf_capacity < 2:
            raise ValueError("leaf capacity must be at least 2")
        self.policy = policy
        self.buffer_capacity = buffer_capacity
        self.leaf_capacity = leaf_capacity
        self.frozen = frozen_cuts is not None
        self.cuts: list[float] = sorted(frozen_cuts) if self.frozen else []
        nl = len(self.cuts) + 1
        self.residents: list[list[float]] = [[] for _ in range(nl)]
        self.resident_counts: list[int] = [0] * nl
        self.groups: list[list[float]] = [[] for _ in range(nl)]
        self.buffered = 0
        self.inserted = 0
        self.applied = 0
        self.flushes = 0
        self.gg_cursor = float("-inf")
        self.policy_state = 0  # RNG counter for random-ball picks

    @property
    def n_leaves(self) -> int:
        return len(self.cuts) + 1

    def leaf_of(self, key: float) -> int:
        return bisect_right(self.cuts, key)

    def insert(self, key: float) -> FlushEvent | None:
        """Buffer one key; flushes first if the buffer is full."""
        event = None
        if self.buffered == self.buffer_capacity:
            event = self.flush()
        self.groups[self.leaf_of(key)].append(key)
        self.buffered += 1
        self.inserted += 1
        return event

    def flush(self) -> FlushEvent:
        """Apply the policy-chosen group to its leaf, splitting on overflow."""
        if self.buffered == 0:
            raise EmptyBuffer("flush with no buffered keys")
        leaf = self._pick_leaf()
        keys = self.groups[leaf]
        self.groups[leaf] = []
        count = len(keys)
        self.buffered -= count
        self.applied += count
        self.flushes += 1
        hi = self.cuts[leaf] if leaf < len(self.cuts) else math.inf
        if self.frozen:
            self.resident_counts[leaf] += count
        else:
            res = self.residents[leaf]
            res.extend(keys)
            if len(res) > self.leaf_capacity:
                self._split(leaf)
        if self.policy == 1:  # golden-gate remembers the flushed leaf's bound
            self.gg_cursor = hi if hi != math.inf else -math.inf
        return FlushEvent(leaf=leaf, count=count)

    def _pick_leaf(self) -> int:
        groups = self.groups
        if self.policy == 0:  # fullest-bin
            best, best_c = -1, 0
            for i, g in enumerate(groups):
                if len(g) > best_c:
                    best, best_c = i, len(g)
            return best
        if self.policy == 2:  # random-ball
            self.policy_state = (self.policy_state + GOLDEN) & MASK64
            r = mix64(self.policy_state) % self.buffered
            acc = 0
            for i, g in enumerate(groups):
                acc += len(g)
                if r < acc:
                    return i
            raise AssertionError("buffered key index out of range")
        # golden-gate
        n = len(groups)
        start = bisect_right(self.cuts, self.gg_cursor)
        for off in range(n):
            j = (start + off) % n
            if groups[j]:
                return j
        raise AssertionError("golden gate found no buffered keys")

    def _split(self, j: int) -> None:
        """Split leaf j at the median resident key; recurses on oversized halves."""
        res = self.residents[j]
        res.sort()
        size = len(res)
        half = (size + 1) // 2
        cut = -1
        for d in range(size):
            lo = half - d
            if lo >= 1 and res[lo - 1] < res[lo]:
                cut = lo
                break
            hi = half + d
            if d > 0 and hi <= size - 1 and res[hi - 1] < res[hi]:
                cut = hi
                break
        if cut < 0:
            return  # every resident key equal: interval cannot be divided
        boundary = res[cut]
        self.cuts.insert(j, boundary)
        lower, upper = res[:cut], res[cut:]
        self.residents[j:j + 1] = [lower, upper]
        g = self.groups[j]
        if g:
            g_lower = [k for k in g if k < boundary]
            g_upper = [k for k in g if k >= boundary]
        else:
            g_lower, g_upper = [], []
        self.groups[j:j + 1] = [g_lower, g_upper]
        # Upper half first: its splits insert at indices > j and leave j alone.
        if len(upper) > self.leaf_capacity:
            self._split(j + 1)
        if len(lower) > self.leaf_capacity:
            self._split(j)


def insert_key(tree: BufferedTree, key: float) -> FlushEvent | None:
    """Buffer one key into the tree (flushing first when full)."""
    return tree.insert(key)


def flush(tree: BufferedTree) -> FlushEvent:
    """Force one policy flush."""
    return tree.flush()


def leaf_weights(cuts, keydist: KeyDistribution) -> np.ndarray:
    """Probability mass of each leaf interval under the key distribution."""
    cuts = np.asarray(cuts, dtype=np.float64)
    inner = keydist.cdf(cuts) if cuts.size else np.empty(0)
    return np.diff(np.concatenate(([0.0], inner, [1.0])))


def leaf_weight_ratios(model, keydist: KeyDistribution) -> tuple[float, float]:
    """Max and 95th-percentile of (leaf weight x leaf count)."""
    cuts = model.cuts if hasattr(model, "cuts") else model
    weights = leaf_weights(cuts, keydist)
    ratios = weights * len(weights)
    return float(np.max(ratios)), float(np.percentile(ratios, 95.0))


def max_b_spacing(points, b: int) -> float:
    """Largest points[i+b] - points[i] over sorted points."""
    pts = np.asarray(points, dtype=np.float64)
    if b < 1 or b >= pts.size:
        raise BTooLarge(f"offset {b} needs at least {b + 1} points, got {pts.size}")
    return float(np.max(pts[b:] - pts[:-b]))


def frozen_quantile_cuts(keydist: KeyDistribution, n_leaves: int) -> list[float]:
    """Equal-probability leaf boundaries (n_leaves - 1 interior cuts)."""
    if n_leaves < 1:
        raise ValueError("need at least one leaf")
    return [keydist.quantile(i / n_leaves) for i in range(1, n_leaves)]


@dataclass(frozen=True)
class BTreeConfig:
    policy: str
    keydist: KeyDistribution
    inserts: int
    window: int
    seed: int
    buffer_capacity: int = 2500
    leaf_capacity: int = 160
    freeze_leaves: int | None = None

    def __post_init__(self):
        if self.policy not in FLUSH_POLICIES:
            raise ValueError(f"policy must be one of {FLUSH_POLICIES}")
        if self.inserts < 1 or self.window < 1:
            raise ValueError("inserts and window must be positive")


@dataclass(frozen=True)
class WindowStats:
    insertions: int
    flushes: int
    recycle_rate: float
    num_leaves: int
    max_leaf_ratio: float
    p95_leaf_ratio: float


def run_btree(cfg: BTreeConfig) -> list[WindowStats]:
    """Simulate cfg.inserts insertions; one stats row per full window.

    Keys and policy picks use two independent sub-streams of the seed, so
    runs that differ only in policy see the identical key sequence.
    """
    from . import _kernel

    policy_code = KERNEL_CODES[StrategyKind(cfg.policy)]
    frozen = (
        np.asarray(frozen_quantile_cuts(cfg.keydist, cfg.freeze_leaves))
        if cfg.freeze_leaves
        else None
    )
    rows, _, _ = _kernel.run_btree(
        policy_code,
        cfg.buffer_capacity,
        cfg.leaf_capacity,
        cfg.inserts,
        cfg.window,
        cfg.keydist.kernel_code,
        cfg.keydist.a,
        cfg.keydist.b,
        derive_stream(cfg.seed, 0),
        derive_stream(cfg.seed, 1),
        frozen,
    )
    out = []
    for inserted, window_flushes, n_leaves, cuts in rows:
        max_ratio, p95 = leaf_weight_ratios(cuts, cfg.keydist)
        rate = cfg.window / window_flushes if window_flushes else math.inf
        out.append(WindowStats(
            insertions=inserted,
            flushes=window_flushes,
            recycle_rate=rate,
            num_leaves=n_leaves,
            max_leaf_ratio=max_ratio,
            p95_leaf_ratio=p95,
        ))
    return out
