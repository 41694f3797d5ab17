"""Counter-based deterministic random number generator.

The stream is SplitMix64: draw ``i`` of seed ``s`` is ``mix64(s + (i+1)*GOLDEN)``
(all arithmetic mod 2^64), so the generator state is a plain 64-bit counter.
Identical seeds produce identical streams on every platform, which makes
every simulation in this package bit-reproducible. The compiled kernel
implements exactly the same stream, so the pure-Python and compiled backends
produce identical outputs draw for draw.

Integer draws below a bound use the modulo method; the bias is below
``bound / 2^64`` and is accepted for simplicity (documented contract).
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4B7C15
_TO_DOUBLE = 2.0**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer: avalanche one 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_stream(seed: int, lane: int) -> int:
    """Decorrelated sub-seed for an auxiliary stream (keys vs. policy picks)."""
    return mix64((seed & MASK64) ^ ((lane * 0xD2B74407B1CE6E93) & MASK64))


class Rng:
    """One stream of the counter generator.

    ``state`` is exposed so hot loops (pure or compiled) can consume draws in
    bulk and hand the advanced counter back.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    @property
    def state(self) -> int:
        return self._state

    @state.setter
    def state(self, value: int) -> None:
        self._state = value & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return mix64(self._state)

    def next_double(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _TO_DOUBLE

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) via the modulo method."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound
