"""Pure-Python simulation kernels (reference implementation).

The compiled extension mirrors these loops operation for operation. Keep the
RNG consumption order and every floating-point expression in sync with
``_core.pyx``; the backend-equivalence tests compare outputs bit for bit.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from ..errors import AllBinsEmpty
from ..rng import GOLDEN, MASK64, mix64

_TO_DOUBLE = 2.0**-53

# Strategy codes (shared with the compiled kernel).
FULLEST_BIN = 0
GOLDEN_GATE = 1
RANDOM_BALL = 2
LEAST_FULL = 3
AGGRESSIVE_EMPTY = 4


def throw_balls(k: int, cdf: np.ndarray, state: int, out: np.ndarray) -> int:
    """Add k categorical draws to ``out``; returns the advanced RNG state."""
    cl = cdf.tolist()
    counts = out.tolist()
    for _ in range(k):
        state = (state + GOLDEN) & MASK64
        u = (mix64(state) >> 11) * _TO_DOUBLE
        counts[bisect_right(cl, u)] += 1
    out[:] = counts
    return state


def _pick(code, counts, n, m, in_l, weights, cursor, state):
    """One strategy decision. Returns (bin, cursor, state)."""
    if code == FULLEST_BIN:
        best, best_c = -1, 0
        for i in range(n):
            if counts[i] > best_c:
                best, best_c = i, counts[i]
        return best, cursor, state
    if code == LEAST_FULL:
        best, best_c = -1, 0
        for i in range(n):
            c = counts[i]
            if c > 0 and (best < 0 or c < best_c):
                best, best_c = i, c
        return best, cursor, state
    if code == RANDOM_BALL:
        state = (state + GOLDEN) & MASK64
        r = mix64(state) % m
        acc = 0
        for i in range(n):
            acc += counts[i]
            if r < acc:
                return i, cursor, state
        raise AssertionError("ball index outside total count")
    if code == GOLDEN_GATE:
        for off in range(n):
            j = (cursor + off) % n
            if counts[j] > 0:
                return j, (j + 1) % n, state
        raise AssertionError("golden gate found no balls")
    raise ValueError(f"bad strategy code {code}")


def run_game(counts, cdf, weights, strat, inner, in_l, cursor, state,
             burn_in, rounds, n_batches, pick_counts, recycled_by_bin,
             batch_sums):
    """Play burn_in + rounds recycling steps, recording the last ``rounds``.

    counts is updated in place to the final configuration. Returns
    (rng_state, cursor, total_recycled, total_r2).
    """
    n = len(counts)
    c = [int(x) for x in counts]
    m = sum(c)
    if m == 0:
        raise AllBinsEmpty("no balls to recycle")
    cl = cdf.tolist()
    wl = weights.tolist()
    mask = in_l.tolist()
    picks = [0] * n
    recycled = [0] * n
    batches = [0] * n_batches
    total = 0
    total_r2 = 0.0

    for r in range(burn_in + rounds):
        if strat == AGGRESSIVE_EMPTY:
            bin = -1
            best_w = 0.0
            for i in range(n):
                if c[i] > 0 and not mask[i]:
                    w = wl[i]
                    if bin < 0 or w < best_w:
                        bin, best_w = i, w
            if bin < 0:
                # Complement of L is empty: delegate to the inner strategy.
                bin, cursor, state = _pick(inner, c, n, m, mask, wl, cursor, state)
        else:
            bin, cursor, state = _pick(strat, c, n, m, mask, wl, cursor, state)

        k = c[bin]
        c[bin] = 0
        for _ in range(k):
            state = (state + GOLDEN) & MASK64
            u = (mix64(state) >> 11) * _TO_DOUBLE
            c[bisect_right(cl, u)] += 1

        if r >= burn_in:
            i = r - burn_in
            total += k
            total_r2 += float(k * k)
            picks[bin] += 1
            recycled[bin] += k
            batches[(i * n_batches) // rounds] += k

    counts[:] = c
    pick_counts[:] = picks
    recycled_by_bin[:] = recycled
    batch_sums[:] = batches
    return state, cursor, total, total_r2


def run_btree(policy, buffer_capacity, leaf_capacity, n_inserts, window,
              kd_kind, kd_a, kd_b, keys_state, policy_state, frozen_cuts):
    """Insert n_inserts keys through a buffered tree; snapshot every window.

    Returns (rows, keys_state, policy_state) where each row is
    (inserted, window_flushes, n_leaves, cuts_snapshot).
    """
    from ..btree import BufferedTree, quantile

    tree = BufferedTree(
        policy=policy,
        buffer_capacity=buffer_capacity,
        leaf_capacity=leaf_capacity,
        frozen_cuts=frozen_cuts,
    )
    tree.policy_state = policy_state
    rows = []
    flushes_at_window_start = 0
    for i in range(n_inserts):
        keys_state = (keys_state + GOLDEN) & MASK64
        u = (mix64(keys_state) >> 11) * _TO_DOUBLE
        tree.insert(quantile(kd_kind, kd_a, kd_b, u))
        if (i + 1) % window == 0:
            rows.append((
                tree.inserted,
                tree.flushes - flushes_at_window_start,
                tree.n_leaves,
                np.asarray(tree.cuts, dtype=np.float64),
            ))
            flushes_at_window_start = tree.flushes
    return rows, keys_state, tree.policy_state
