import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import random_distribution
from ballrec.dists import half_quasi_norm, make_power_law, make_skyscraper, make_uniform
from ballrec.errors import EmptyBinPicked, StateSpaceTooLarge, ZeroProbabilityBin
from ballrec.exact import (
    count_states,
    enumerate_states,
    solve_golden_gate,
    solve_opt,
    solve_stationary,
    transition_row,
)
from ballrec.game import ProbabilityDistribution
from ballrec.mc import SimConfig, run_sim
from ballrec.rng import Rng
from ballrec.strategies import StrategyKind, parse_strategy

STATELESS_KINDS = (StrategyKind.FULLEST_BIN, StrategyKind.RANDOM_BALL,
                   StrategyKind.LEAST_FULL)


class TestEnumerateStates:
    def test_two_balls_two_bins(self):
        space = enumerate_states(2, 2)
        assert space.states == ((0, 2), (1, 1), (2, 0))

    def test_count_matches_binomial(self):
        space = enumerate_states(10, 4)
        assert len(space.states) == 286 == count_states(10, 4) == math.comb(13, 3)

    def test_one_ball_five_bins(self):
        space = enumerate_states(1, 5)
        assert len(space.states) == 5

    def test_bijection_and_order(self):
        space = enumerate_states(4, 3)
        assert len(set(space.states)) == len(space.states)
        assert list(space.states) == sorted(space.states)
        for i, s in enumerate(space.states):
            assert space.id_of(s) == i
            assert sum(s) == 4

    def test_cap_enforced(self):
        with pytest.raises(StateSpaceTooLarge) as exc:
            enumerate_states(100, 10, state_cap=1000)
        assert exc.value.count == math.comb(109, 9)


@settings(max_examples=30, deadline=None, derandomize=True)
@given(m=st.integers(1, 6), n=st.integers(1, 5))
def test_enumeration_complete(m, n):
    space = enumerate_states(m, n)
    assert len(space.states) == math.comb(m + n - 1, n - 1)


class TestTransitionRow:
    def test_two_ball_rethrow(self):
        row = transition_row((2, 0), 0, make_uniform(2))
        assert row == pytest.approx({(2, 0): 0.25, (1, 1): 0.5, (0, 2): 0.25})

    def test_one_ball_rethrow(self):
        row = transition_row((1, 1), 0, make_uniform(2))
        assert row == pytest.approx({(1, 1): 0.5, (0, 2): 0.5})

    def test_point_mass_self_loop(self):
        d = ProbabilityDistribution((0.0, 1.0))
        row = transition_row((0, 7), 1, d)
        assert row == pytest.approx({(0, 7): 1.0})

    def test_rows_sum_to_one(self):
        d = make_power_law(3, 1.0)
        for state in ((3, 1, 0), (0, 2, 2), (1, 1, 1)):
            for bin in range(3):
                if state[bin] == 0:
                    continue
                row = transition_row(state, bin, d)
                assert sum(row.values()) == pytest.approx(1.0, abs=1e-12)

    def test_empty_bin_rejected(self):
        with pytest.raises(EmptyBinPicked):
            transition_row((0, 2), 0, make_uniform(2))


class TestSolveStationary:
    def test_fullest_bin_tiny_game(self):
        an = solve_stationary(StrategyKind.FULLEST_BIN, 2, 2, make_uniform(2))
        assert an.rate == pytest.approx(1.5, abs=1e-10)
        by_state = dict(zip(an.space.states, an.pi))
        assert by_state[(2, 0)] == pytest.approx(1 / 8, abs=1e-10)
        assert by_state[(1, 1)] == pytest.approx(1 / 2, abs=1e-10)
        assert by_state[(0, 2)] == pytest.approx(3 / 8, abs=1e-10)

    def test_random_ball_tiny_game(self):
        an = solve_stationary(StrategyKind.RANDOM_BALL, 2, 2, make_uniform(2))
        assert an.rate == pytest.approx(1.5, abs=1e-10)
        assert an.e_r2 == pytest.approx(2.5, abs=1e-10)

    def test_single_bin_rate_is_m(self):
        for kind in STATELESS_KINDS:
            an = solve_stationary(kind, 6, 1, make_uniform(1))
            assert an.rate == pytest.approx(6.0, abs=1e-12)

    def test_pi_is_stationary(self):
        for kind in STATELESS_KINDS:
            an = solve_stationary(kind, 4, 3, make_power_law(3, 1.0))
            assert an.residual < 1e-10
            assert an.pi.min() >= 0.0
            assert an.pi.sum() == pytest.approx(1.0, abs=1e-12)

    def test_flow_equation_exact(self):
        dists = [make_uniform(4), make_skyscraper(4), make_power_law(4, 1.0)]
        for d in dists:
            for kind in STATELESS_KINDS:
                an = solve_stationary(kind, 5, 4, d)
                for pb in an.per_bin:
                    assert abs(pb.flow_residual) < 1e-9

    def test_subset_flow(self):
        # Flow balance over random bin subsets L: p_L * rate = f_L * R_L.
        rng = Rng(404)
        d = make_power_law(5, 1.5)
        an = solve_stationary(StrategyKind.RANDOM_BALL, 6, 5, d)
        for _ in range(20):
            l_bins = [i for i in range(5) if rng.next_below(2)]
            if not l_bins:
                continue
            p_l = sum(d.weights[i] for i in l_bins)
            f_l = sum(an.per_bin[i].f_i for i in l_bins)
            fr_l = sum(an.per_bin[i].f_i * an.per_bin[i].r_i for i in l_bins)
            assert p_l * an.rate == pytest.approx(fr_l, abs=1e-9)
            assert fr_l == pytest.approx(f_l * (fr_l / f_l if f_l else 0.0), abs=1e-12)

    def test_zero_weight_bins_are_transient(self):
        d = ProbabilityDistribution((0.5, 0.0, 0.5))
        an = solve_stationary(StrategyKind.RANDOM_BALL, 3, 3, d)
        for state, p in zip(an.space.states, an.pi):
            if state[1] > 0:
                assert p == 0.0
        assert an.pi.sum() == pytest.approx(1.0)

    def test_rejects_stateful_kind(self):
        with pytest.raises(ValueError):
            solve_stationary(StrategyKind.GOLDEN_GATE, 2, 2, make_uniform(2))

    def test_many_balls_few_bins(self):
        # Multinomial coefficients for 400-ball throws overflow doubles, so
        # the density must be evaluated in log space.
        an = solve_stationary(StrategyKind.FULLEST_BIN, 400, 2, make_uniform(2))
        assert 2 * 400 / 3 - 1e-9 <= an.rate <= 400.0 + 1 + 1e-9
        assert an.residual < 1e-10
        row = transition_row((400, 0), 0, make_uniform(2))
        assert sum(row.values()) == pytest.approx(1.0, abs=1e-11)


class TestGoldenGate:
    def test_tiny_game(self):
        an = solve_golden_gate(2, 2, make_uniform(2))
        assert an.rate == pytest.approx(1.5, abs=1e-10)
        assert an.stateful

    def test_uniform_sandwich_on_grid(self):
        for m, n in ((3, 2), (5, 3), (6, 4)):
            an = solve_golden_gate(m, n, make_uniform(n))
            assert 2 * m / (n + 1) - 1e-9 <= an.rate <= 2 * m / n + 1 + 1e-9

    def test_cap_counts_cursor_copies(self):
        with pytest.raises(StateSpaceTooLarge):
            solve_golden_gate(8, 8, make_uniform(8), state_cap=10_000)


class TestSolveOpt:
    def test_tiny_game(self):
        sol = solve_opt(2, 2, make_uniform(2))
        assert sol.gain == pytest.approx(1.5, abs=1e-10)

    def test_single_ball_any_dist(self):
        sol = solve_opt(1, 4, make_power_law(4, 1.0))
        assert sol.gain == pytest.approx(1.0, abs=1e-12)

    def test_policy_picks_nonempty_bins(self):
        sol = solve_opt(4, 3, make_skyscraper(3))
        for state, a in zip(sol.space.states, sol.policy):
            assert state[a] > 0

    def test_dominates_fixed_strategies(self):
        d = make_skyscraper(4)
        sol = solve_opt(3, 4, d)
        for kind in STATELESS_KINDS:
            an = solve_stationary(kind, 3, 4, d)
            assert sol.gain >= an.rate - 1e-9
        gg = solve_golden_gate(3, 4, d)
        assert sol.gain >= gg.rate - 1e-9

    def test_rejects_zero_weight_bins(self):
        d = ProbabilityDistribution((0.5, 0.0, 0.5))
        with pytest.raises(ZeroProbabilityBin):
            solve_opt(3, 3, d)

    def test_bias_reference_state(self):
        sol = solve_opt(3, 3, make_uniform(3))
        assert sol.bias[0] == 0.0


def _policy_gain(states, policy, dist):
    """Average reward of one deterministic policy, solved independently:
    dense stationary solve over transition_row dictionaries."""
    index = {s: i for i, s in enumerate(states)}
    size = len(states)
    p = np.zeros((size, size))
    r = np.zeros(size)
    for i, s in enumerate(states):
        bin = policy[i]
        r[i] = s[bin]
        for succ, prob in transition_row(s, bin, dist).items():
            p[i, index[succ]] += prob
    a = p.T - np.eye(size)
    a[0, :] = 1.0
    b = np.zeros(size)
    b[0] = 1.0
    pi = np.linalg.solve(a, b)
    return float(pi @ r)


def _exhaustive_opt_gain(m, n, dist):
    import itertools

    states = list(enumerate_states(m, n).states)
    action_sets = [[i for i, c in enumerate(s) if c > 0] for s in states]
    best = -np.inf
    for policy in itertools.product(*action_sets):
        best = max(best, _policy_gain(states, policy, dist))
    return best


class TestExhaustivePolicySearch:
    @pytest.mark.parametrize("m,n", [(2, 2), (4, 2), (2, 3), (3, 3)])
    def test_policy_iteration_matches_brute_force(self, m, n):
        from ballrec.dists import make_power_law
        for dist in (make_uniform(n), make_power_law(n, 1.0), make_skyscraper(n)):
            expected = _exhaustive_opt_gain(m, n, dist)
            got = solve_opt(m, n, dist).gain
            assert got == pytest.approx(expected, abs=1e-9), dist.label

    def test_two_bins_larger_game(self):
        # 512 deterministic policies on the 11-state game.
        expected = _exhaustive_opt_gain(10, 2, make_uniform(2))
        assert solve_opt(10, 2, make_uniform(2)).gain == pytest.approx(expected, abs=1e-9)


class TestPairFlow:
    def test_ratio_on_small_grid(self):
        for m in range(1, 6):
            for n in range(1, 6):
                an = solve_stationary(StrategyKind.RANDOM_BALL, m, n, make_uniform(n))
                assert an.e_r2 / an.rate == pytest.approx(
                    (2 * m + n - 1) / (n + 1), abs=1e-9
                )


class TestBoundSandwich:
    def test_rate_capped_by_upper_bound(self):
        rng = Rng(808)
        for _ in range(10):
            n = 2 + rng.next_below(4)
            m = 1 + rng.next_below(5)
            d = random_distribution(rng, n)
            upper = (2 * m + n - 1) / half_quasi_norm(d)
            gain = solve_opt(m, n, d).gain
            assert gain <= upper + 1e-9
            for kind in STATELESS_KINDS:
                an = solve_stationary(kind, m, n, d)
                assert an.rate <= min(m, upper) + 1e-9
                assert an.rate <= gain + 1e-9

    def test_random_ball_general_lower_bound(self):
        # Holds exactly in the stationary distribution for games with m >= n.
        rng = Rng(909)
        for _ in range(8):
            n = 2 + rng.next_below(3)
            m = n + rng.next_below(4)
            d = random_distribution(rng, n)
            an = solve_stationary(StrategyKind.RANDOM_BALL, m, n, d)
            assert an.rate >= m / half_quasi_norm(d) - 1e-9


class TestOptimalityRatios:
    def test_random_ball_ratio_window_uniform(self):
        # Large enough games that the bin choice matters: random-ball is
        # strictly suboptimal but at least half-optimal.
        for m, n in ((3, 3), (4, 2), (5, 3), (6, 4), (8, 2)):
            rb = solve_stationary(StrategyKind.RANDOM_BALL, m, n, make_uniform(n))
            gain = solve_opt(m, n, make_uniform(n)).gain
            ratio = rb.rate / gain
            assert 0.5 <= ratio < 1.0

    def test_fullest_bin_ratio_uniform(self):
        for m, n in ((3, 3), (6, 4), (8, 2)):
            fb = solve_stationary(StrategyKind.FULLEST_BIN, m, n, make_uniform(n))
            gain = solve_opt(m, n, make_uniform(n)).gain
            floor = (2 * m / (n + 1)) / (2 * m / n + 1)
            assert fb.rate / gain >= floor - 1e-9


class TestMonteCarloAgreement:
    def test_mc_within_ci_of_exact(self):
        for kind, label in ((StrategyKind.FULLEST_BIN, "fullest-bin"),
                            (StrategyKind.RANDOM_BALL, "random-ball")):
            exact_rate = solve_stationary(kind, 5, 3, make_uniform(3)).rate
            est = run_sim(SimConfig(m=5, n=3, dist=make_uniform(3),
                                    strategy=parse_strategy(label),
                                    seed=1234, rounds=200_000))
            assert abs(est.rate - exact_rate) <= est.rate_ci95
