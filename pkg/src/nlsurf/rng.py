"""Counter-based random streams for reproducible disorder sampling.

Every Gaussian draw is a pure function of (seed, bond index, sample index):
a Philox4x32-10 block keyed by the seed is evaluated at a counter built from
the two indices, and the 128-bit output is turned into one normal deviate by
Box-Muller.  Draws can therefore be generated in any order, in chunks of any
size, and on any number of workers with bit-identical results.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10

# Stream tags keep draws for different purposes disjoint under one seed.
TAG_DISORDER = 1
TAG_SEED_DERIVE = 2


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 block function, vectorized over counter arrays.

    All inputs hold 32-bit values in uint64 arrays (or scalars); returns the
    four 32-bit output words as uint64 arrays of the broadcast shape.
    """
    c0 = np.asarray(c0, dtype=np.uint64) & _MASK32
    c1 = np.asarray(c1, dtype=np.uint64) & _MASK32
    c2 = np.asarray(c2, dtype=np.uint64) & _MASK32
    c3 = np.asarray(c3, dtype=np.uint64) & _MASK32
    k0 = np.uint64(k0) & _MASK32
    k1 = np.uint64(k1) & _MASK32
    for _ in range(_ROUNDS):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _key_words(seed: int, tag: int) -> tuple[np.uint64, np.uint64]:
    s = np.uint64(seed)
    k0 = s & _MASK32
    k1 = ((s >> _SHIFT32) ^ (np.uint64(tag) * _W0)) & _MASK32
    return k0, k1


def _to_unit_interval(hi, lo):
    # 53 random bits -> (0, 1), endpoints excluded so log() is safe.
    u = ((hi << _SHIFT32) | lo) >> np.uint64(11)
    return (u.astype(np.float64) + 0.5) * (0.5 ** 53)


def standard_normals(seed: int, index_a, index_b, tag: int = TAG_DISORDER) -> np.ndarray:
    """One standard normal per (index_a, index_b) pair, broadcast together.

    index_a is the bond index and index_b the realization index in disorder
    sampling; both may be arrays.  The value depends only on
    (seed, index_a, index_b, tag).
    """
    a = np.asarray(index_a, dtype=np.uint64)
    b = np.asarray(index_b, dtype=np.uint64)
    a, b = np.broadcast_arrays(a, b)
    k0, k1 = _key_words(seed, tag)
    w0, w1, w2, w3 = philox4x32(a & _MASK32, a >> _SHIFT32, b & _MASK32, b >> _SHIFT32, k0, k1)
    u1 = _to_unit_interval(w0, w1)
    u2 = _to_unit_interval(w2, w3)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _derivation_words(seed: int, indices: tuple[int, ...]):
    if len(indices) > 3:
        raise ValueError("at most three derivation indices are supported")
    idx = list(indices) + [0] * (3 - len(indices))
    for i in idx:
        if not 0 <= i < 2**32:
            raise ValueError("derivation indices must fit in 32 bits")
    k0, k1 = _key_words(seed, TAG_SEED_DERIVE)
    return philox4x32(np.uint64(idx[0]), np.uint64(idx[1]), np.uint64(idx[2]), np.uint64(len(indices)), k0, k1)


def derive_seed(seed: int, *indices: int) -> int:
    """Derive a child 64-bit seed from a parent seed and up to three indices.

    Used to hand independent, reproducible streams to nested samplers
    (e.g. one Markov chain per disorder realization).
    """
    w0, w1, _, _ = _derivation_words(seed, indices)
    return int((w0 << _SHIFT32) | w1)


def spawn_generator(seed: int, *indices: int) -> np.random.Generator:
    """A numpy Generator on an independent Philox stream keyed by (seed, indices)."""
    w = _derivation_words(seed, indices)
    key = int(w[0]) | (int(w[1]) << 32) | (int(w[2]) << 64) | (int(w[3]) << 96)
    return np.random.Generator(np.random.Philox(key=key))
