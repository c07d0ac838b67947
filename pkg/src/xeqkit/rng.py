"""Counter-based random streams.

Every draw is a pure function of ``(key, counter)`` so that results do not
depend on the order in which substreams are consumed, and the stream can be
reproduced bit-for-bit in any language with 64-bit unsigned arithmetic.

Construction
------------
``mix(z)`` is the SplitMix64 finaliser::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

all modulo 2**64.  A key is derived from a seed and a path of non-negative
integers by ``k = mix(seed + G)`` followed by ``k = mix(k ^ mix(p + G))``
for every path element ``p``, where ``G = 0x9E3779B97F4A7C15``.  The
``i``-th raw 64-bit word of a stream is ``mix(key + (i + 1) * G)``, which is
exactly the SplitMix64 sequence seeded with ``key``.

Uniforms on the open interval (0, 1) are ``((word >> 11) + 0.5) * 2**-53``.
Standard normals use Box-Muller on consecutive uniform pairs
``(u[2t], u[2t+1])``: ``sqrt(-2 ln u1) cos(2 pi u2)`` then
``sqrt(-2 ln u1) sin(2 pi u2)``.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix(z):
    """SplitMix64 finaliser applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _as_u64(value):
    if isinstance(value, np.ndarray):
        return value.astype(np.uint64)
    return np.uint64(int(value) & _MASK)


def derive_key(seed, *path):
    """Derive a stream key from ``seed`` and an integer path.

    ``path`` elements may be numpy integer arrays, in which case an array of
    keys is returned (one per element, broadcast together).
    """
    with np.errstate(over="ignore"):
        key = mix(np.uint64(int(seed) & _MASK) + GOLDEN)
        for p in path:
            p = _as_u64(p)
            key = mix(key ^ mix(p + GOLDEN))
    return key


def raw_words(key, count):
    """The first ``count`` 64-bit words of each stream in ``key``.

    Returns shape ``key.shape + (count,)``.
    """
    key = np.asarray(key, dtype=np.uint64)
    counters = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix(key[..., None] + counters * GOLDEN)


def uniforms(key, count):
    """Uniform(0, 1) variates, open at both ends."""
    words = raw_words(key, count)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(key, count):
    """Standard normal variates via Box-Muller on paired uniforms."""
    pairs = (count + 1) // 2
    u = uniforms(key, 2 * pairs)
    u1 = u[..., 0::2]
    u2 = u[..., 1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(u.shape, dtype=np.float64)
    z[..., 0::2] = radius * np.cos(angle)
    z[..., 1::2] = radius * np.sin(angle)
    return z[..., :count]


def permutation(key, n):
    """A permutation of ``range(n)``: indices sorted by their raw word.

    Ties between 64-bit words are broken by index (stable sort), so the result
    is fully determined by the key.
    """
    return np.argsort(raw_words(key, n), kind="stable")
