"""splitmix64 streams.

All randomness in splitmesh (weight init, partition shuffles, per-epoch shard
shuffles, synthetic data) comes from this generator so that runs are
bit-reproducible from a single integer seed.

Stream contract:

* ``next_u64``: ``state += 0x9E3779B97F4A7C15`` then the standard splitmix64
  finalizer.
* uniform floats in [0, 1): ``(u64 >> 11) * 2**-53``.
* Fisher-Yates: for ``i = n-1 .. 1`` draw one u64 and swap ``i`` with
  ``u64 % (i + 1)``.
* Sub-streams for distinct purposes are seeded with :func:`derive_seed`.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# purpose tags for derive_seed
PARTITION = 1
SHUFFLE = 2
SYNTH = 3


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *words: int) -> int:
    """Fold ``words`` into ``seed``, one splitmix64 step per word."""
    s = seed & MASK64
    for w in words:
        s = _mix(((s ^ (w & MASK64)) + GAMMA) & MASK64)
    return s


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def u64_array(self, n: int) -> np.ndarray:
        """Next ``n`` outputs as a uint64 array; identical to ``n`` calls of next_u64."""
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64)
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GAMMA) & MASK64
        return z

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_array(self, n: int) -> np.ndarray:
        """Float64 uniforms in [0, 1), exact per the stream contract."""
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal_array(self, n: int) -> np.ndarray:
        """Standard normals by Box-Muller, consuming two uniforms per output."""
        u = self.uniform_array(2 * n).reshape(n, 2) if n > 0 else np.zeros((0, 2))
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        return r * np.cos(2.0 * np.pi * u[:, 1])

    def permutation(self, n: int) -> list[int]:
        order = list(range(n))
        self.shuffle(order)
        return order

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        n = len(items)
        if n < 2:
            return
        draws = self.u64_array(n - 1).tolist()
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = draws[k] % (i + 1)
            items[i], items[j] = items[j], items[i]
