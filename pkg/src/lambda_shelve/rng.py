"""Counter-based random numbers (Philox4x32-10), vectorised with numpy.

Each uniform is a pure function of ``(seed, stream, draw)``, so trajectories
can be simulated in any order, batch size or thread layout and still see
exactly the same numbers.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
ROUNDS = 10


def philox4x32(counter, key, rounds: int = ROUNDS) -> np.ndarray:
    """Philox4x32 block function.

    Parameters
    ----------
    counter : array_like, shape (..., 4)
        32-bit counter words.
    key : sequence of two ints
        32-bit key words.

    Returns
    -------
    ndarray of uint32, shape (..., 4)
    """
    c = np.asarray(counter, dtype=np.uint64) & _MASK
    c0, c1, c2, c3 = (c[..., i] for i in range(4))
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for _ in range(rounds):
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0 = hi1 ^ c1 ^ np.uint64(k0)
        c1 = lo1
        c2 = hi0 ^ c3 ^ np.uint64(k1)
        c3 = lo0
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _to_unit(hi, lo):
    # 53 random bits mapped to the open interval (0, 1)
    bits = (hi.astype(np.uint64) << np.uint64(21)) ^ (lo.astype(np.uint64) >> np.uint64(11))
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def uniform_pair(seed: int, stream, draw) -> tuple[np.ndarray, np.ndarray]:
    """Two independent uniforms on (0, 1) for every ``(stream, draw)``.

    ``stream`` and ``draw`` broadcast against each other; both must be
    non-negative integers below 2**64.
    """
    stream, draw = np.broadcast_arrays(
        np.asarray(stream, dtype=np.uint64), np.asarray(draw, dtype=np.uint64)
    )
    ctr = np.stack([draw & _MASK, draw >> _SHIFT, stream & _MASK, stream >> _SHIFT], axis=-1)
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    words = philox4x32(ctr, (seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF))
    return _to_unit(words[..., 0], words[..., 1]), _to_unit(words[..., 2], words[..., 3])


class CounterStream:
    """Sequential view of one ``(seed, stream)`` pair, handy for scalar code."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.draw = 0

    def pair(self) -> tuple[float, float]:
        a, b = uniform_pair(self.seed, self.stream, self.draw)
        self.draw += 1
        return float(a), float(b)

    def random(self) -> float:
        return self.pair()[0]
