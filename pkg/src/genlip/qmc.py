"""Random and low-discrepancy point sequences on the unit cube.

Halton and Sobol points are pure functions of their (1-based) index, so any
prefix of a sequence is reproduced exactly by a longer request.  Index 0 is
never emitted; for both constructions it is the all-zeros corner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KINDS",
    "SequenceSpec",
    "IntervalBoxJ",
    "first_primes",
    "radical_inverse",
    "generate",
    "scale_to_box",
    "discrepancy",
    "star_discrepancy_estimate",
]

KINDS = ("random", "halton", "sobol")
MAX_DIM = 8

# Joe & Kuo (new-joe-kuo-6.21201) primitive polynomials for dimensions 2..8:
# (degree s, coefficient bits a, initial direction integers m_1..m_s)
_SOBOL_TABLE = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
)
_SOBOL_BITS = 32


@dataclass(frozen=True)
class SequenceSpec:
    """Which sequence to draw from.

    ``seed`` seeds the generator for ``kind="random"``; for the
    deterministic kinds it is an index offset (points ``seed+1, seed+2, ...``).
    """

    kind: str
    dim: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported sequence kind {self.kind!r}; expected one of {KINDS}")
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dim must be in 1..{MAX_DIM}, got {self.dim}")
        if self.kind != "random" and self.seed < 0:
            raise ValueError("index offset must be nonnegative")


@dataclass(frozen=True)
class IntervalBoxJ:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same shape")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
            raise ValueError("box must satisfy 0 <= lo <= hi <= 1")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))


def first_primes(n: int) -> list[int]:
    primes: list[int] = []
    k = 2
    while len(primes) < n:
        if all(k % p for p in primes if p * p <= k):
            primes.append(k)
        k += 1
    return primes


def radical_inverse(base: int, index):
    """Reflect the base-``base`` digits of ``index`` about the radix point.

    Works elementwise on integer arrays.
    """
    if base < 2:
        raise ValueError("base must be >= 2")
    idx = np.asarray(index, dtype=np.int64)
    if np.any(idx < 0):
        raise ValueError("index must be nonnegative")
    out = np.zeros(idx.shape, dtype=float)
    scale = 1.0 / base
    while np.any(idx > 0):
        idx, digit = np.divmod(idx, base)
        out += digit * scale
        scale /= base
    return float(out) if out.ndim == 0 else out


def _halton(indices: np.ndarray, dim: int) -> np.ndarray:
    return np.column_stack([radical_inverse(b, indices) for b in first_primes(dim)])


def _sobol_directions(dim: int) -> np.ndarray:
    """Direction integers V[d, i] (bit i+1 from the top of a 32-bit word)."""
    V = np.zeros((dim, _SOBOL_BITS), dtype=np.uint64)
    V[0] = [1 << (_SOBOL_BITS - 1 - i) for i in range(_SOBOL_BITS)]
    for d in range(1, dim):
        s, a, m_init = _SOBOL_TABLE[d - 1]
        m = list(m_init)
        for i in range(s, _SOBOL_BITS):
            new = m[i - s] ^ (m[i - s] << s)
            for k in range(1, s):
                if (a >> (s - 1 - k)) & 1:
                    new ^= m[i - k] << k
            m.append(new)
        V[d] = [m[i] << (_SOBOL_BITS - 1 - i) for i in range(_SOBOL_BITS)]
    return V


def _sobol(indices: np.ndarray, dim: int) -> np.ndarray:
    V = _sobol_directions(dim)
    gray = indices.astype(np.uint64)
    gray ^= gray >> np.uint64(1)
    acc = np.zeros((len(indices), dim), dtype=np.uint64)
    for bit in range(_SOBOL_BITS):
        rest = gray >> np.uint64(bit)
        if not np.any(rest):
            break
        on = (rest & np.uint64(1)).astype(bool)
        acc[on] ^= V[:, bit]
    return acc.astype(float) / float(1 << _SOBOL_BITS)


def generate(seq: SequenceSpec, s: int) -> np.ndarray:
    """First ``s`` points of ``seq`` as an ``(s, dim)`` array in ``[0, 1)``."""
    if s < 1:
        raise ValueError("need at least one point")
    if seq.kind == "random":
        return np.random.default_rng(seq.seed).random((s, seq.dim))
    indices = np.arange(seq.seed + 1, seq.seed + s + 1, dtype=np.int64)
    if seq.kind == "halton":
        return _halton(indices, seq.dim)
    return _sobol(indices, seq.dim)


def scale_to_box(points, lo, hi) -> np.ndarray:
    """Affine map of unit-cube points onto ``[lo, hi]`` componentwise."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return lo + np.asarray(points, dtype=float) * (hi - lo)


def discrepancy(J: IntervalBoxJ, S) -> float:
    """``|#(S in J)/s - vol(J)|`` with half-open membership ``lo <= z < hi``."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] == 0 or S.size == 0:
        raise ValueError("empty point sequence")
    if S.shape[1] != J.lo.size:
        if J.lo.size == 1 and S.shape[0] == 1:
            S = S.T
        else:
            raise ValueError("dimension mismatch between box and points")
    inside = np.all((S >= J.lo) & (S < J.hi), axis=1)
    return abs(inside.mean() - J.volume)


def _candidate_corners(S: np.ndarray, m: int, seed: int) -> np.ndarray:
    """Upper corners ``q`` of the anchored trial boxes ``[0, q)``.

    The stream starts with every sample point, alternately as an open corner
    (point excluded) and a closed one (point nudged inside), then continues
    with corners drawn from the coordinate grid of the sample, each
    coordinate picked from a random point or set to 1.
    """
    s, d = S.shape
    n_direct = min(m, 2 * s)
    direct = S[np.arange(n_direct) // 2].copy()
    closed = np.arange(n_direct) % 2 == 1
    direct[closed] = np.nextafter(direct[closed], np.inf)
    if m <= n_direct:
        return np.minimum(direct, 1.0)
    rng = np.random.default_rng(seed)
    extra = m - n_direct
    rows = rng.integers(0, s, size=(extra, d))
    grid = S[rows, np.arange(d)]
    nudge = rng.random((extra, d)) < 0.5
    grid[nudge] = np.nextafter(grid[nudge], np.inf)
    full = rng.random((extra, d)) < 1.0 / (s + 1)
    grid[full] = 1.0
    return np.minimum(np.vstack([direct, grid]), 1.0)


def star_discrepancy_estimate(S, m: int, seed: int = 0, chunk: int = 512) -> float:
    """Lower estimate of the star discrepancy from ``m`` anchored trial boxes.

    Exact star discrepancy is intractable beyond low dimension; this takes
    the worst local discrepancy over a deterministic stream of candidate
    corners, so it never exceeds the true value and never decreases as ``m``
    grows.
    """
    if m < 1:
        raise ValueError("need at least one trial box")
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    s = S.shape[0]
    if s == 0:
        raise ValueError("empty point sequence")
    Q = _candidate_corners(S, m, seed)
    worst = 0.0
    for start in range(0, len(Q), chunk):
        q = Q[start:start + chunk]
        counts = np.all(S[None, :, :] < q[:, None, :], axis=2).sum(axis=1)
        local = np.abs(counts / s - np.prod(q, axis=1))
        worst = max(worst, float(local.max()))
    return worst
