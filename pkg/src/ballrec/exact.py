"""Exact small-instance analysis: stationary distributions and the optimal policy.

For small (m, n) the full configuration space (compositions of m balls into
n bins) is enumerated and the game becomes a finite Markov chain per
strategy, or a finite average-reward Markov decision process when the bin
choice is left free. This module solves both exactly:

* ``solve_stationary`` - stationary distribution, rate, per-bin (f_i, R_i)
  and E[R^2] for a stateless strategy, by direct linear solve of pi P = pi
  on the recurrent class;
* ``solve_golden_gate`` - the same for the round-robin strategy, on the
  state space augmented with its cursor;
* ``solve_opt`` - the gain-optimal deterministic policy via Howard policy
  iteration with reference-state bias normalization.

The chain restricted to configurations supported on positive-weight bins is
irreducible and aperiodic (any configuration can reach any other within
min(m, n) steps, and every configuration can self-loop), so stationary
solves are unique and policy evaluation is unichain as long as every bin
weight is positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EmptyBinPicked, StateSpaceTooLarge, ZeroProbabilityBin
from .game import BinConfiguration, ProbabilityDistribution
from .mc import PerBinStats
from .strategies import STATELESS, StrategyKind

DEFAULT_STATE_CAP = 200_000
_DENSE_LIMIT = 3200  # above this, stationary solves iterate and evaluations go sparse


def count_states(m: int, n: int) -> int:
    """Number of ways to place m identical balls into n bins."""
    return math.comb(m + n - 1, n - 1)


def compositions(m: int, n: int):
    """All length-n tuples of non-negative ints summing to m, in ascending lex order."""
    if n == 1:
        yield (m,)
        return
    for first in range(m + 1):
        for rest in compositions(m - first, n - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class StateSpace:
    m: int
    n: int
    states: tuple[tuple[int, ...], ...]
    index: dict

    def id_of(self, state) -> int:
        return self.index[tuple(state)]


def enumerate_states(m: int, n: int, state_cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    """Lexicographically ordered list of all configurations, with an id map."""
    count = count_states(m, n)
    if count > state_cap:
        raise StateSpaceTooLarge(count, state_cap)
    states = tuple(compositions(m, n))
    index = {s: i for i, s in enumerate(states)}
    return StateSpace(m=m, n=n, states=states, index=index)


@lru_cache(maxsize=512)
def _throw_table(weights: tuple[float, ...], k: int):
    """Outcomes of throwing k balls: (compositions over support bins, probabilities).

    Compositions are padded back to full length n with zeros on zero-weight
    bins, which can never receive a ball. Small throws use exact integer
    multinomial coefficients; beyond 100 balls the coefficients overflow a
    double, so the density switches to log space (lgamma).
    """
    n = len(weights)
    support = [i for i, w in enumerate(weights) if w > 0.0]
    exact_coeffs = k <= 100
    comps = []
    probs = []
    fact = math.factorial
    lgamma = math.lgamma
    for comp in compositions(k, len(support)):
        if exact_coeffs:
            coeff = fact(k)
            p = 1.0
            for c, i in zip(comp, support):
                coeff //= fact(c)
                p *= weights[i] ** c
            prob = coeff * p
        else:
            log_p = lgamma(k + 1)
            for c, i in zip(comp, support):
                log_p += c * math.log(weights[i]) - lgamma(c + 1)
            prob = math.exp(log_p)
        full = [0] * n
        for c, i in zip(comp, support):
            full[i] = c
        comps.append(tuple(full))
        probs.append(prob)
    return tuple(comps), np.asarray(probs, dtype=np.float64)


def transition_row(state, bin: int, dist: ProbabilityDistribution) -> dict:
    """Successor distribution of recycling ``bin`` from ``state``.

    Returns {successor configuration: probability}; the values sum to 1
    within 1e-12.
    """
    counts = tuple(state.counts) if isinstance(state, BinConfiguration) else tuple(state)
    k = counts[bin]
    if k == 0:
        raise EmptyBinPicked(f"bin {bin} is empty in {counts}")
    zeroed = list(counts)
    zeroed[bin] = 0
    comps, probs = _throw_table(dist.weights, k)
    return {
        tuple(z + c for z, c in zip(zeroed, comp)): float(p)
        for comp, p in zip(comps, probs)
    }


@dataclass(frozen=True)
class StationaryAnalysis:
    """Exact stationary quantities of one strategy on one game."""

    m: int
    n: int
    strategy_label: str
    dist_label: str
    space: StateSpace
    pi: np.ndarray          # aligned with space.states; zero off the recurrent class
    rate: float
    e_r2: float
    per_bin: tuple[PerBinStats, ...]
    residual: float         # max |pi P - pi|
    stateful: bool = False


@dataclass(frozen=True)
class MdpSolution:
    """Gain-optimal deterministic stateless policy and its bias vector."""

    space: StateSpace
    policy: np.ndarray      # state id -> bin index
    gain: float
    bias: np.ndarray        # bias of state 0 normalized to 0


class _Game:
    """Shared machinery: rows of the transition matrix, cached by (zeroed, k)."""

    def __init__(self, m: int, n: int, dist: ProbabilityDistribution,
                 state_cap: int = DEFAULT_STATE_CAP):
        self.m = m
        self.n = n
        self.dist = dist
        self.space = enumerate_states(m, n, state_cap)
        self._rows: dict = {}

    def row_ids(self, state: tuple, bin: int):
        """(successor ids, probabilities) for emptying ``bin`` of ``state``."""
        k = state[bin]
        zeroed = list(state)
        zeroed[bin] = 0
        key = (tuple(zeroed), k)
        hit = self._rows.get(key)
        if hit is not None:
            return hit
        comps, probs = _throw_table(self.dist.weights, k)
        index = self.space.index
        ids = np.fromiter(
            (index[tuple(z + c for z, c in zip(zeroed, comp))] for comp in comps),
            dtype=np.int64,
            count=len(comps),
        )
        self._rows[key] = (ids, probs)
        return ids, probs

    def actions(self, kind: StrategyKind, state: tuple):
        """[(bin, probability)] chosen by a stateless strategy in ``state``."""
        if kind is StrategyKind.FULLEST_BIN:
            best, best_c = -1, 0
            for i, c in enumerate(state):
                if c > best_c:
                    best, best_c = i, c
            return [(best, 1.0)]
        if kind is StrategyKind.LEAST_FULL:
            best, best_c = -1, None
            for i, c in enumerate(state):
                if c > 0 and (best_c is None or c < best_c):
                    best, best_c = i, c
            return [(best, 1.0)]
        if kind is StrategyKind.RANDOM_BALL:
            m = sum(state)
            return [(i, c / m) for i, c in enumerate(state) if c > 0]
        raise ValueError(f"{kind} is not a stateless strategy")

    def seed_state(self) -> tuple:
        """All balls in the first positive-weight bin: a recurrent configuration."""
        j0 = self.dist.support[0]
        seed = [0] * self.n
        seed[j0] = self.m
        return tuple(seed)


def _transition_csr(n_local: int, rows) -> sp.csr_matrix:
    """Assemble P (rows may list a successor more than once; entries sum)."""
    lens = np.fromiter((len(ids) for ids, _ in rows), dtype=np.int64, count=n_local)
    ri = np.repeat(np.arange(n_local, dtype=np.int64), lens)
    ci = np.concatenate([ids for ids, _ in rows]) if n_local else np.empty(0, np.int64)
    data = np.concatenate([p for _, p in rows]) if n_local else np.empty(0)
    mat = sp.coo_matrix((data, (ri, ci)), shape=(n_local, n_local))
    return mat.tocsr()


def _solve_pi(n_local: int, rows, p_csr: sp.csr_matrix) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 for a unichain transition structure.

    Small systems are solved directly, with equation 0 replaced by the
    normalization (the balance equations have rank n_local - 1, so any one
    of them is redundant). Large systems use power iteration: the chain is
    aperiodic because every configuration can transition to itself, so
    iteration converges to the unique stationary vector; a direct sparse
    solve is the fallback if it stalls.
    """
    if n_local <= _DENSE_LIMIT:
        a = np.zeros((n_local, n_local))
        for i, (ids, probs) in enumerate(rows):
            np.add.at(a[:, i], ids, probs)  # column i of P^T is row i of P
        a -= np.eye(n_local)
        a[0, :] = 1.0
        b = np.zeros(n_local)
        b[0] = 1.0
        pi = np.linalg.solve(a, b)
    else:
        pt = p_csr.T.tocsr()
        pi = np.full(n_local, 1.0 / n_local)
        for _ in range(200_000):
            nxt = pt @ pi
            nxt /= nxt.sum()
            delta = float(np.max(np.abs(nxt - pi)))
            pi = nxt
            if delta < 1e-15:
                break
        if float(np.max(np.abs(pt @ pi - pi))) > 1e-12:
            a = (pt - sp.identity(n_local, format="csr")).tolil()
            a[0, :] = 1.0
            b = np.zeros(n_local)
            b[0] = 1.0
            pi = spla.spsolve(a.tocsc(), b)
    if pi.min() < -1e-10:
        raise RuntimeError(f"stationary solve produced pi_min = {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _reachable(start, expand) -> list:
    """BFS closure of ``start`` under ``expand(state) -> iterable of states``."""
    seen = {start}
    order = [start]
    frontier = [start]
    while frontier:
        nxt = []
        for s in frontier:
            for t in expand(s):
                if t not in seen:
                    seen.add(t)
                    order.append(t)
                    nxt.append(t)
        frontier = nxt
    order.sort()
    return order


def solve_stationary(
    kind: StrategyKind,
    m: int,
    n: int,
    dist: ProbabilityDistribution,
    state_cap: int = DEFAULT_STATE_CAP,
) -> StationaryAnalysis:
    """Exact stationary analysis of a stateless strategy.

    The linear solve runs on the recurrent class (configurations reachable
    from the all-balls-in-one-bin seed); transient configurations get
    stationary probability zero.
    """
    if kind not in STATELESS:
        raise ValueError(f"{kind} is not stateless; see solve_golden_gate")
    if m < 1:
        raise ValueError("m must be at least 1")
    game = _Game(m, n, dist, state_cap)
    space = game.space

    if len(dist.support) == n:
        # Full support: every configuration communicates with every other,
        # so the recurrent class is the whole space and ids need no remap.
        local_states = list(space.states)
        remap = None
    else:
        def expand(s):
            out = []
            for bin, _ in game.actions(kind, s):
                ids, _probs = game.row_ids(s, bin)
                out.extend(space.states[i] for i in ids)
            return out

        local_states = _reachable(game.seed_state(), expand)
        remap = np.full(len(space.states), -1, dtype=np.int64)
        for i, s in enumerate(local_states):
            remap[space.index[s]] = i
    n_local = len(local_states)

    rows = []
    for s in local_states:
        acts = game.actions(kind, s)
        if len(acts) == 1:
            ids, probs = game.row_ids(s, acts[0][0])
        else:
            parts_i, parts_p = [], []
            for bin, ap in acts:
                i_a, p_a = game.row_ids(s, bin)
                parts_i.append(i_a)
                parts_p.append(p_a * ap)
            ids = np.concatenate(parts_i)
            probs = np.concatenate(parts_p)
        if remap is not None:
            ids = remap[ids]
        rows.append((ids, probs))

    p_csr = _transition_csr(n_local, rows)
    pi_local = _solve_pi(n_local, rows, p_csr)
    residual = float(np.max(np.abs(p_csr.T @ pi_local - pi_local)))

    rate = 0.0
    e_r2 = 0.0
    f = np.zeros(n)
    fr = np.zeros(n)
    for s, w in zip(local_states, pi_local):
        for bin, ap in game.actions(kind, s):
            k = s[bin]
            rate += w * ap * k
            e_r2 += w * ap * k * k
            f[bin] += w * ap
            fr[bin] += w * ap * k

    per_bin = tuple(
        PerBinStats(
            bin=i,
            p_i=dist.weights[i],
            f_i=float(f[i]),
            r_i=float(fr[i] / f[i]) if f[i] > 0 else 0.0,
            flow_residual=float(dist.weights[i] * rate - fr[i]),
        )
        for i in range(n)
    )

    pi_full = np.zeros(len(space.states))
    for s, w in zip(local_states, pi_local):
        pi_full[space.index[s]] = w

    return StationaryAnalysis(
        m=m, n=n,
        strategy_label=kind.value,
        dist_label=dist.label,
        space=space,
        pi=pi_full,
        rate=float(rate),
        e_r2=float(e_r2),
        per_bin=per_bin,
        residual=residual,
    )


def solve_golden_gate(
    m: int,
    n: int,
    dist: ProbabilityDistribution,
    state_cap: int = DEFAULT_STATE_CAP,
) -> StationaryAnalysis:
    """Exact analysis of the round-robin strategy on (configuration, cursor) states.

    The reported pi marginalizes the cursor out. Flow residuals are reported
    but carry no guarantee: the balance identity is a stateless-strategy fact.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if count_states(m, n) * n > state_cap:
        raise StateSpaceTooLarge(count_states(m, n) * n, state_cap)
    game = _Game(m, n, dist, state_cap)
    space = game.space

    def gg_pick(s, cursor):
        for off in range(n):
            j = (cursor + off) % n
            if s[j] > 0:
                return j
        raise AssertionError("no non-empty bin")

    def expand(aug):
        s, cursor = aug
        bin = gg_pick(s, cursor)
        nxt_cursor = (bin + 1) % n
        ids, _ = game.row_ids(s, bin)
        return [(space.states[i], nxt_cursor) for i in ids]

    j0 = dist.support[0]
    seed = (game.seed_state(), (j0 + 1) % n)
    local_states = _reachable(seed, expand)
    local_index = {s: i for i, s in enumerate(local_states)}
    n_local = len(local_states)

    rows = []
    picks = []
    for s, cursor in local_states:
        bin = gg_pick(s, cursor)
        picks.append(bin)
        nxt_cursor = (bin + 1) % n
        ids, probs = game.row_ids(s, bin)
        loc = np.fromiter(
            (local_index[(space.states[i], nxt_cursor)] for i in ids),
            dtype=np.int64, count=len(ids),
        )
        rows.append((loc, probs))

    p_csr = _transition_csr(n_local, rows)
    pi_local = _solve_pi(n_local, rows, p_csr)
    residual = float(np.max(np.abs(p_csr.T @ pi_local - pi_local)))

    rate = 0.0
    e_r2 = 0.0
    f = np.zeros(n)
    fr = np.zeros(n)
    pi_full = np.zeros(len(space.states))
    for (s, _cursor), w, bin in zip(local_states, pi_local, picks):
        k = s[bin]
        rate += w * k
        e_r2 += w * k * k
        f[bin] += w
        fr[bin] += w * k
        pi_full[space.index[s]] += w

    per_bin = tuple(
        PerBinStats(
            bin=i,
            p_i=dist.weights[i],
            f_i=float(f[i]),
            r_i=float(fr[i] / f[i]) if f[i] > 0 else 0.0,
            flow_residual=float(dist.weights[i] * rate - fr[i]),
        )
        for i in range(n)
    )

    return StationaryAnalysis(
        m=m, n=n,
        strategy_label=StrategyKind.GOLDEN_GATE.value,
        dist_label=dist.label,
        space=space,
        pi=pi_full,
        rate=float(rate),
        e_r2=float(e_r2),
        per_bin=per_bin,
        residual=residual,
        stateful=True,
    )


def _policy_eval(game: _Game, policy: np.ndarray):
    """(gain, bias) of a deterministic policy, bias[0] = 0.

    Solves h + g = r + P h with the reference-state normalization; the
    system is non-singular because every deterministic policy is unichain
    when all bin weights are positive.
    """
    states = game.space.states
    n_states = len(states)
    r = np.array([s[policy[i]] for i, s in enumerate(states)], dtype=np.float64)
    if n_states <= _DENSE_LIMIT:
        a = np.zeros((n_states, n_states + 1))
        for i, s in enumerate(states):
            ids, probs = game.row_ids(s, policy[i])
            np.add.at(a[i, :n_states], ids, -probs)
            a[i, i] += 1.0
            a[i, n_states] = 1.0
        # Unknowns: h[1:], g; column 0 multiplies h[0] = 0 and is dropped.
        x = np.linalg.solve(a[:, 1:], r)
        h = np.concatenate(([0.0], x[:-1]))
        return float(x[-1]), h
    data, ri, ci = [], [], []
    for i, s in enumerate(states):
        ids, probs = game.row_ids(s, policy[i])
        for j, p in zip(ids, probs):
            j = int(j)
            if j != 0:
                ri.append(i)
                ci.append(j - 1)
                data.append(-p)
        if i != 0:
            ri.append(i)
            ci.append(i - 1)
            data.append(1.0)
        ri.append(i)
        ci.append(n_states - 1)
        data.append(1.0)
    a = sp.csc_matrix((data, (ri, ci)), shape=(n_states, n_states))
    x = spla.spsolve(a, r)
    h = np.concatenate(([0.0], x[:-1]))
    return float(x[-1]), h


def solve_opt(
    m: int,
    n: int,
    dist: ProbabilityDistribution,
    state_cap: int = DEFAULT_STATE_CAP,
    tol: float = 1e-10,
    max_iters: int = 500,
) -> MdpSolution:
    """Gain-optimal deterministic policy by Howard policy iteration.

    Requires every bin weight positive so that each policy's chain is
    unichain and the evaluation equations are non-singular.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if any(w == 0.0 for w in dist.weights):
        raise ZeroProbabilityBin("optimal solve needs all bin weights positive")
    game = _Game(m, n, dist, state_cap)
    states = game.space.states
    n_states = len(states)

    policy = np.array(
        [game.actions(StrategyKind.FULLEST_BIN, s)[0][0] for s in states],
        dtype=np.int64,
    )

    gain = 0.0
    bias = np.zeros(n_states)
    for _ in range(max_iters):
        gain, bias = _policy_eval(game, policy)
        changed = False
        for i, s in enumerate(states):
            cur = int(policy[i])
            ids, probs = game.row_ids(s, cur)
            best_a = cur
            best_q = s[cur] + float(probs @ bias[ids])
            # Keep the current action unless another beats it by a clear
            # margin; this makes the sweep terminate despite float noise.
            for a, c in enumerate(s):
                if c == 0 or a == cur:
                    continue
                ids, probs = game.row_ids(s, a)
                q = c + float(probs @ bias[ids])
                if q > best_q + 1e-11:
                    best_q, best_a = q, a
            if best_a != cur:
                policy[i] = best_a
                changed = True
        if not changed:
            break
    else:
        raise RuntimeError(f"policy iteration did not settle in {max_iters} sweeps")

    return MdpSolution(space=game.space, policy=policy, gain=float(gain), bias=bias)
