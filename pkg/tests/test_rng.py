import pytest

from ballrec.rng import GOLDEN, MASK64, Rng, derive_stream, mix64


def _reference_mix(z):
    # Independent transcription of the SplitMix64 finalizer.
    z &= (1 << 64) - 1
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % (1 << 64)
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % (1 << 64)
    return z ^ (z >> 31)


def test_stream_is_counter_indexed():
    seed = 42
    rng = Rng(seed)
    expected = [_reference_mix((seed + (i + 1) * GOLDEN) % (1 << 64)) for i in range(64)]
    assert [rng.next_u64() for _ in range(64)] == expected


def test_same_seed_same_stream():
    a, b = Rng(123456789), Rng(123456789)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_different_seeds_differ():
    a, b = Rng(0), Rng(1)
    assert [a.next_u64() for _ in range(8)] != [b.next_u64() for _ in range(8)]


def test_doubles_in_unit_interval():
    rng = Rng(7)
    vals = [rng.next_double() for _ in range(10_000)]
    assert all(0.0 <= v < 1.0 for v in vals)
    assert 0.45 < sum(vals) / len(vals) < 0.55


def test_state_roundtrip_resumes_stream():
    rng = Rng(5)
    for _ in range(10):
        rng.next_u64()
    saved = rng.state
    ahead = [rng.next_u64() for _ in range(5)]
    rng2 = Rng(0)
    rng2.state = saved
    assert [rng2.next_u64() for _ in range(5)] == ahead


def test_next_below_range_and_error():
    rng = Rng(11)
    vals = [rng.next_below(10) for _ in range(1000)]
    assert set(vals) == set(range(10))
    with pytest.raises(ValueError):
        rng.next_below(0)


def test_mix64_masks_input():
    assert mix64(2**64 + 5) == mix64(5)


def test_derive_stream_decorrelates():
    assert derive_stream(1, 0) != derive_stream(1, 1)
    assert derive_stream(1, 0) != derive_stream(2, 0)
    assert 0 <= derive_stream(99, 3) <= MASK64
