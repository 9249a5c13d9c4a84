"""Counter-based 64-bit generator with Box-Muller Gaussians.

The k-th raw word of stream ``(seed, stream)`` is ``mix(key + (k + 1) * GAMMA)``
where ``mix`` is the SplitMix64 finalizer and ``key`` is derived from the seed
and stream index by two more rounds of the same finalizer. Everything is plain
uint64 arithmetic, so draws are bit-reproducible on any platform with IEEE
doubles and do not depend on numpy's generator internals.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


def _mix_int(x: int) -> int:
    return int(_mix(np.array([x & _MASK], dtype=np.uint64))[0])


def stream_key(seed: int, stream: int = 0) -> int:
    """64-bit key for ``(seed, stream)``; distinct streams give unrelated keys."""
    return _mix_int(_mix_int(seed & _MASK) ^ ((stream * 0xD1B54A32D192ED03 + 1) & _MASK))


class CounterRNG:
    """Stateless-in-spirit generator: draw ``k`` is a pure function of (seed, stream, k).

    The object only remembers how many words it has handed out so far.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.key = np.uint64(stream_key(self.seed, self.stream))
        self.counter = 0

    def words(self, n: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(self.key + k * GAMMA)

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in the open interval (0, 1), 53-bit resolution."""
        w = self.words(n) >> np.uint64(11)
        return (w.astype(np.float64) + 0.5) * 2.0 ** -53

    def complex_normal(self, shape) -> np.ndarray:
        """CN(0, 1) entries: real and imaginary parts independent N(0, 1/2).

        One Box-Muller pair per entry; the cosine branch is the real part and
        the sine branch the imaginary part.
        """
        n = int(np.prod(shape))
        u = self.uniform(2 * n)
        u1, u2 = u[0::2], u[1::2]
        radius = np.sqrt(-np.log(u1))
        angle = 2.0 * np.pi * u2
        z = radius * np.cos(angle) + 1j * radius * np.sin(angle)
        return z.reshape(shape)

    def normal(self, n: int) -> np.ndarray:
        """Real N(0, 1) draws (both Box-Muller branches used)."""
        m = (n + 1) // 2
        z = self.complex_normal((m,)) * np.sqrt(2.0)
        return np.column_stack([z.real, z.imag]).ravel()[:n]
