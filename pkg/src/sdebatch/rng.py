"""Counter-based random number generation (Philox-4x32, 10 rounds).

Every random draw produced here is a pure function of its address: there is
no generator state, so draws can be requested in any order from any number of
workers and always come out bit identical.  The address of one block of four
32-bit words is

    key     = (seed low, orbit)           -- low 32 bits of the seed, orbit index
    counter = (seed high, c0, c1, block)  -- high 32 bits of the seed, two free
                                             32-bit address words, block index

The two free words (``chunk`` and ``step`` in the function signatures) are
owned by the caller; the engine packs the absolute step index into them so
that the noise consumed at a given simulated time never depends on how the
run is chunked.  The counter word value 0xFFFFFFFF in the ``chunk`` slot is
reserved for parameter-sampling streams (see :func:`sampling_uniforms`) and
is rejected for integration noise.

Uniform words map to (0, 1] via (word + 1) / 2**32 so that log(u) is always
finite, and pairs of uniforms become standard normals with the Box-Muller
transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Multipliers and Weyl key increments of the published Philox-4x32 generator.
PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
PHILOX_ROUNDS = 10

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF

#: counter word reserved for parameter-sampling streams
SAMPLING_TAG = 0xFFFFFFFF

_TWO_NEG_32 = 2.0 ** -32
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CounterKey:
    """Address of one Philox block: a 2-word key and a 4-word counter."""

    key: tuple[int, int]
    counter: tuple[int, int, int, int]


def counter_key(seed: int, orbit: int, chunk: int, step: int, block: int) -> CounterKey:
    """Pack a draw address into a (key, counter) pair.

    The packing is injective: distinct (seed, orbit, chunk, step, block)
    tuples give distinct pairs, which is what makes the per-orbit noise
    streams independent.
    """
    if not 0 <= orbit <= _MASK32:
        raise ValueError("orbit index must fit in 32 bits, got %r" % (orbit,))
    if not 0 <= chunk <= _MASK32 or not 0 <= step <= _MASK32 or not 0 <= block <= _MASK32:
        raise ValueError("counter words must fit in 32 bits")
    seed &= _MASK64
    return CounterKey(
        key=(seed & _MASK32, orbit),
        counter=(seed >> 32, chunk, step, block),
    )


def philox_block(ck: CounterKey) -> tuple[int, int, int, int]:
    """Run the 10-round Philox-4x32 bijection on one counter under one key.

    Pure integer reference path; the array path below produces the same words.
    """
    x0, x1, x2, x3 = ck.counter
    k0, k1 = ck.key
    for _ in range(PHILOX_ROUNDS):
        p0 = PHILOX_M0 * x0
        p1 = PHILOX_M1 * x2
        x0 = ((p1 >> 32) ^ x1 ^ k0) & _MASK32
        x1 = p1 & _MASK32
        x2 = ((p0 >> 32) ^ x3 ^ k1) & _MASK32
        x3 = p0 & _MASK32
        k0 = (k0 + PHILOX_W0) & _MASK32
        k1 = (k1 + PHILOX_W1) & _MASK32
    return (x0, x1, x2, x3)


def _philox_words(k0, k1, c0, c1, c2, c3):
    """Vectorised Philox-4x32-10 over broadcast uint32 arrays."""
    k0 = np.asarray(k0, dtype=np.uint32)
    k1 = np.asarray(k1, dtype=np.uint32)
    x0 = np.asarray(c0, dtype=np.uint32)
    x1 = np.asarray(c1, dtype=np.uint32)
    x2 = np.asarray(c2, dtype=np.uint32)
    x3 = np.asarray(c3, dtype=np.uint32)
    m0 = np.uint64(PHILOX_M0)
    m1 = np.uint64(PHILOX_M1)
    w0 = np.uint32(PHILOX_W0)
    w1 = np.uint32(PHILOX_W1)
    shift = np.uint64(32)
    with np.errstate(over="ignore"):  # the Weyl key sequence wraps mod 2**32
        for _ in range(PHILOX_ROUNDS):
            p0 = x0.astype(np.uint64) * m0
            p1 = x2.astype(np.uint64) * m1
            x0, x1, x2, x3 = (
                (p1 >> shift).astype(np.uint32) ^ x1 ^ k0,
                p1.astype(np.uint32),
                (p0 >> shift).astype(np.uint32) ^ x3 ^ k1,
                p0.astype(np.uint32),
            )
            k0 = k0 + w0
            k1 = k1 + w1
    return x0, x1, x2, x3


def to_uniform(word):
    """Map a 32-bit word onto (0, 1] as (word + 1) / 2**32.

    Monotone in the word; never returns 0, so ln of the result is finite.
    Accepts a plain int or an array of words.
    """
    if isinstance(word, np.ndarray):
        return (word.astype(np.float64) + 1.0) * _TWO_NEG_32
    return (float(word) + 1.0) * _TWO_NEG_32


def box_muller(u1: float, u2: float) -> tuple[float, float]:
    """Turn two uniforms into two independent standard normals.

    r1 = sqrt(-2 ln u1) cos(2 pi u2), r2 = sqrt(-2 ln u1) sin(2 pi u2).
    Requires u1 > 0.
    """
    if u1 <= 0.0:
        raise ValueError("box_muller requires u1 > 0, got %r" % (u1,))
    r = math.sqrt(-2.0 * math.log(u1))
    a = _TWO_PI * u2
    return (r * math.cos(a), r * math.sin(a))


def _seed_words(seed: int) -> tuple[int, int]:
    seed &= _MASK64
    return seed & _MASK32, seed >> 32


def normals_for_orbits(seed: int, orbits: np.ndarray, chunk: int, step: int,
                       m: int) -> np.ndarray:
    """Standard normal draws for one step of a group of orbits.

    Returns an array of shape (len(orbits), m).  Each orbit consumes
    ceil(m / 4) Philox blocks; the surplus normals of the last block are
    discarded, never carried over, so the draws depend only on the address.
    """
    orbits = np.asarray(orbits, dtype=np.uint32)
    if m < 0:
        raise ValueError("noise count must be >= 0")
    if m == 0:
        return np.empty((orbits.size, 0), dtype=np.float64)
    if chunk == SAMPLING_TAG:
        raise ValueError("counter word 0x%08X is reserved for sampling streams" % SAMPLING_TAG)
    nblocks = -(-m // 4)
    seed_lo, seed_hi = _seed_words(seed)
    w0, w1, w2, w3 = _philox_words(
        seed_lo,
        orbits[:, None],
        seed_hi,
        chunk,
        step,
        np.arange(nblocks, dtype=np.uint32)[None, :],
    )
    u0 = to_uniform(w0)
    u1 = to_uniform(w1)
    u2 = to_uniform(w2)
    u3 = to_uniform(w3)
    r_a = np.sqrt(-2.0 * np.log(u0))
    r_b = np.sqrt(-2.0 * np.log(u2))
    ang_a = _TWO_PI * u1
    ang_b = _TWO_PI * u3
    draws = np.stack(
        [r_a * np.cos(ang_a), r_a * np.sin(ang_a),
         r_b * np.cos(ang_b), r_b * np.sin(ang_b)],
        axis=-1,
    )
    return draws.reshape(orbits.size, 4 * nblocks)[:, :m]


def normals_for_step(seed: int, orbit: int, chunk: int, step: int, m: int) -> np.ndarray:
    """Standard normal draws for one integration step of one orbit.

    Pure function of the arguments: the same address gives bit-identical
    draws regardless of call order or thread count.
    """
    return normals_for_orbits(seed, np.array([orbit], dtype=np.uint32), chunk, step, m)[0]


def sampling_uniforms(seed: int, orbits: np.ndarray, count: int) -> np.ndarray:
    """Uniforms on [0, 1) for parameter/initial-condition sampling.

    Uses the reserved counter tag so sampling draws can never collide with
    integration noise addresses.  Shape (len(orbits), count).
    """
    orbits = np.asarray(orbits, dtype=np.uint32)
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return np.empty((orbits.size, 0), dtype=np.float64)
    nblocks = -(-count // 4)
    seed_lo, seed_hi = _seed_words(seed)
    words = _philox_words(
        seed_lo,
        orbits[:, None],
        seed_hi,
        SAMPLING_TAG,
        0,
        np.arange(nblocks, dtype=np.uint32)[None, :],
    )
    u = np.stack([w.astype(np.float64) * _TWO_NEG_32 for w in words], axis=-1)
    return u.reshape(orbits.size, 4 * nblocks)[:, :count]
