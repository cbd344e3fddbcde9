"""xoshiro256++ generator with jump-based substreams.

The state is kept in a ``uint64[4]`` numpy array so that the compiled and
the pure-Python kernels can advance the very same stream in place.
"""
import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

JUMP = (0x180EC6D33CFD0ABA, 0xD5A61266F0C9392C, 0xA9582618E03FC9AA, 0x39ABDC4529B1661C)
LONG_JUMP = (0x76E15D3EFEFDCBBF, 0xC5004E441C522FB3, 0x77710069854EE241, 0x39109BB02ACBE635)

# 2**-53; uniform doubles are built from the top 53 bits
INV_2_53 = 1.0 / 9007199254740992.0


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


def splitmix64(x):
    """One splitmix64 step; returns ``(new_state, output)``."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


class Xoshiro256pp:
    """Pure-Python xoshiro256++ operating on Python ints."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, state):
        s = [int(x) & MASK64 for x in state]
        if len(s) != 4:
            raise ValueError("xoshiro256++ state has four 64-bit words")
        if not any(s):
            raise ValueError("xoshiro256++ state must not be all zero")
        self.s0, self.s1, self.s2, self.s3 = s

    @classmethod
    def from_seed(cls, seed):
        x = int(seed) & MASK64
        words = []
        for _ in range(4):
            x, z = splitmix64(x)
            words.append(z)
        return cls(words)

    def next_u64(self):
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self):
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * INV_2_53

    def _apply_jump(self, poly):
        t0 = t1 = t2 = t3 = 0
        for word in poly:
            for b in range(64):
                if word & (1 << b):
                    t0 ^= self.s0
                    t1 ^= self.s1
                    t2 ^= self.s2
                    t3 ^= self.s3
                self.next_u64()
        self.s0, self.s1, self.s2, self.s3 = t0, t1, t2, t3

    def jump(self):
        """Advance by 2**128 draws."""
        self._apply_jump(JUMP)

    def long_jump(self):
        """Advance by 2**192 draws."""
        self._apply_jump(LONG_JUMP)

    @property
    def state(self):
        return np.array([self.s0, self.s1, self.s2, self.s3], dtype=np.uint64)

    def store(self, out):
        out[0], out[1], out[2], out[3] = self.s0, self.s1, self.s2, self.s3


def seed_state(seed):
    """State array for a 64-bit seed (splitmix64 expansion)."""
    return Xoshiro256pp.from_seed(seed).state


def jumped(state, n=1):
    """Copy of ``state`` advanced by ``n`` jumps."""
    g = Xoshiro256pp(state)
    for _ in range(n):
        g.jump()
    return g.state


def long_jumped(state, n=1):
    """Copy of ``state`` advanced by ``n`` long jumps (2**192 steps each)."""
    g = Xoshiro256pp(state)
    for _ in range(n):
        g.long_jump()
    return g.state


def substreams(seed, count):
    """``count`` non-overlapping stream states derived from one seed.

    Stream ``k`` is the seeded state advanced by ``k`` jumps of 2**128.
    """
    g = Xoshiro256pp.from_seed(seed)
    out = np.empty((count, 4), dtype=np.uint64)
    for k in range(count):
        g.store(out[k])
        g.jump()
    return out


class StreamSplitter:
    """Hands out consecutive jumped substreams from a root state."""

    def __init__(self, state):
        self._g = Xoshiro256pp(state)

    def next_stream(self):
        st = self._g.state
        self._g.jump()
        return st

    def split(self, count):
        return np.stack([self.next_stream() for _ in range(count)]) if count else np.empty((0, 4), np.uint64)
