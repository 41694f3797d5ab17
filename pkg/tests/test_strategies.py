import pytest
from scipy.stats import chisquare

from ballrec.dists import make_skyscraper, make_uniform
from ballrec.errors import AllBinsEmpty
from ballrec.game import BinConfiguration, ProbabilityDistribution, recycle_step
from ballrec.rng import Rng
from ballrec.strategies import (
    check_pick,
    AeState,
    GoldenGateState,
    StrategyKind,
    StrategySpec,
    initial_state,
    parse_strategy,
    pick,
    select_default_L,
)

U3 = make_uniform(3)


def test_parse_strategy():
    assert parse_strategy("fullest-bin").kind is StrategyKind.FULLEST_BIN
    assert parse_strategy("golden-gate").kind is StrategyKind.GOLDEN_GATE
    spec = parse_strategy("ae:random-ball")
    assert spec.kind is StrategyKind.AGGRESSIVE_EMPTY
    assert spec.inner is StrategyKind.RANDOM_BALL
    assert spec.label == "ae:random-ball"
    with pytest.raises(ValueError):
        parse_strategy("ae:ae:fullest-bin")
    with pytest.raises(ValueError):
        parse_strategy("mostly-empty")


def test_ae_requires_inner():
    with pytest.raises(ValueError):
        StrategySpec(StrategyKind.AGGRESSIVE_EMPTY)
    with pytest.raises(ValueError):
        StrategySpec(StrategyKind.FULLEST_BIN, inner=StrategyKind.RANDOM_BALL)


class TestFullestBin:
    def test_argmax(self):
        bin, _ = pick(parse_strategy("fullest-bin"), None,
                      BinConfiguration((3, 1, 2)), U3, Rng(0))
        assert bin == 0

    def test_tie_breaks_low_index(self):
        bin, _ = pick(parse_strategy("fullest-bin"), None,
                      BinConfiguration((2, 2, 0)), U3, Rng(0))
        assert bin == 0

    def test_deterministic(self):
        cfg = BinConfiguration((1, 4, 2))
        picks = {pick(parse_strategy("fullest-bin"), None, cfg, U3, Rng(s))[0]
                 for s in range(5)}
        assert picks == {1}


class TestLeastFull:
    def test_skips_empty(self):
        bin, _ = pick(parse_strategy("least-full"), None,
                      BinConfiguration((3, 0, 2)), U3, Rng(0))
        assert bin == 2

    def test_tie_breaks_low_index(self):
        bin, _ = pick(parse_strategy("least-full"), None,
                      BinConfiguration((2, 0, 2)), U3, Rng(0))
        assert bin == 0


class TestGoldenGate:
    def test_nonempty_successor(self):
        state = GoldenGateState(cursor=1)
        bin, new_state = pick(parse_strategy("golden-gate"), state,
                              BinConfiguration((1, 0, 3)), U3, Rng(0))
        assert bin == 2
        assert new_state.cursor == 0

    def test_wraps_around(self):
        state = GoldenGateState(cursor=2)
        bin, new_state = pick(parse_strategy("golden-gate"), state,
                              BinConfiguration((4, 0, 0)), U3, Rng(0))
        assert bin == 0
        assert new_state.cursor == 1

    def test_visits_every_persistent_bin_within_n_picks(self):
        # Balls only ever land in bin 0, so bins 1..n-1 stay untouched until
        # their single ball is picked; one full cursor sweep must hit each.
        n = 6
        d = ProbabilityDistribution((1.0,) + (0.0,) * (n - 1))
        spec = parse_strategy("golden-gate")
        config = BinConfiguration((5,) + (1,) * (n - 1))
        state = GoldenGateState(cursor=0)
        rng = Rng(3)
        seen = []
        for _ in range(n):
            bin, state = pick(spec, state, config, d, rng)
            seen.append(bin)
            config = recycle_step(config, bin, d, rng).next
        assert sorted(seen) == list(range(n))


class TestRandomBall:
    def test_proportional_to_counts(self):
        spec = parse_strategy("random-ball")
        cfg = BinConfiguration((2, 0, 2))
        rng = Rng(123)
        hits = [0, 0, 0]
        trials = 10**5
        for _ in range(trials):
            bin, _ = pick(spec, None, cfg, U3, rng)
            hits[bin] += 1
        assert hits[1] == 0
        assert abs(hits[0] / trials - 0.5) < 0.01

    def test_chi_square_on_mixed_config(self):
        spec = parse_strategy("random-ball")
        cfg = BinConfiguration((1, 2, 3, 4))
        d = make_uniform(4)
        rng = Rng(77)
        hits = [0, 0, 0, 0]
        trials = 10**5
        for _ in range(trials):
            bin, _ = pick(spec, None, cfg, d, rng)
            hits[bin] += 1
        _, p = chisquare(hits, [trials * c / 10 for c in (1, 2, 3, 4)])
        assert p > 0.001

    def test_requires_balls(self):
        with pytest.raises(AllBinsEmpty):
            pick(parse_strategy("random-ball"), None,
                 BinConfiguration((0, 0, 0)), U3, Rng(0))


class TestSelectDefaultL:
    def test_covers_all_bins_when_m_large(self):
        d = make_uniform(6)
        assert select_default_L(d, 10) == frozenset(range(6))

    def test_uniform_ties_take_low_indices(self):
        d = make_uniform(100)
        assert select_default_L(d, 10) == frozenset(range(20))

    def test_skyscraper_keeps_heavy_bin(self):
        d = make_skyscraper(100)
        l_bins = select_default_L(d, 5)
        assert 0 in l_bins
        assert l_bins == frozenset(range(10))

    def test_overrides(self):
        d = make_uniform(100)
        assert len(select_default_L(d, 10, l_size=6)) == 6
        # Threshold 0 admits every bin regardless of target size.
        assert select_default_L(d, 2, l_threshold=0.0) == frozenset(range(100))


class TestAggressiveEmpty:
    def test_picks_lowest_weight_outside_l(self):
        d = ProbabilityDistribution((0.7, 0.2, 0.06, 0.04))
        spec = parse_strategy("ae:random-ball")
        state = AeState(l_bins=frozenset({0, 1}), inner_state=None)
        bin, _ = pick(spec, state, BinConfiguration((0, 2, 1, 1)), d, Rng(0))
        assert bin == 3

    def test_delegates_when_complement_empty(self):
        d = ProbabilityDistribution((0.7, 0.2, 0.06, 0.04))
        spec = parse_strategy("ae:fullest-bin")
        state = AeState(l_bins=frozenset({0, 1}), inner_state=None)
        bin, _ = pick(spec, state, BinConfiguration((1, 3, 0, 0)), d, Rng(0))
        assert bin == 1

    def test_complement_empty_whenever_delegating(self):
        d = make_skyscraper(16)
        spec = parse_strategy("ae:random-ball")
        state = initial_state(spec, d, 4)
        rng = Rng(5)
        config = BinConfiguration((0,) * 15 + (4,))
        for _ in range(300):
            bin, state = pick(spec, state, config, d, rng)
            if bin in state.l_bins:
                outside = [config.counts[i] for i in range(16) if i not in state.l_bins]
                assert sum(outside) == 0
            config = recycle_step(config, bin, d, rng).next

    def test_initial_state_builds_l(self):
        d = make_skyscraper(100)
        state = initial_state(parse_strategy("ae:random-ball"), d, 5)
        assert isinstance(state, AeState)
        assert 0 in state.l_bins


def test_pick_never_returns_empty_bin():
    d = make_skyscraper(8)
    rng = Rng(99)
    for label in ("fullest-bin", "golden-gate", "random-ball", "least-full", "ae:random-ball"):
        spec = parse_strategy(label)
        state = initial_state(spec, d, 6)
        config = BinConfiguration((0, 3, 0, 1, 0, 0, 2, 0))
        for _ in range(100):
            bin, state = pick(spec, state, config, d, rng)
            check_pick(config, bin)
            config = recycle_step(config, bin, d, rng).next
