"""Space-filling samplers over the unit hypercube.

Latin hypercube designs are single-batch: adding points breaks stratification,
so ``lhs`` always regenerates. Halton and Sobol sequences are extendable; their
state objects remember how many points were emitted and continue from there.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist

from ._sobol_table import JOE_KUO, MAX_DIM as SOBOL_MAX_DIM

_BITS = 32


def _first_primes(k: int) -> tuple[int, ...]:
    primes: list[int] = []
    n = 2
    while len(primes) < k:
        if all(n % p for p in primes if p * p <= n):
            primes.append(n)
        n += 1
    return tuple(primes)


PRIMES = _first_primes(64)


def min_pairwise_distance(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return float("inf")
    return float(pdist(points).min())


def lhs_candidates(dim: int, n: int, seed: int, candidates: int = 32) -> np.ndarray:
    """All candidate Latin designs, shape (candidates, n, dim)."""
    if n < 1 or dim < 1:
        raise ValueError("lhs needs n >= 1 and dim >= 1")
    if candidates < 1:
        raise ValueError("candidates must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((candidates, n, dim))
    for c in range(candidates):
        strata = np.stack([rng.permutation(n) for _ in range(dim)], axis=1)
        # stratum center +/- half a stratum width
        jitter = rng.random((n, dim))
        out[c] = (strata + jitter) / n
    return out


def lhs(dim: int, n: int, seed: int, candidates: int = 32) -> np.ndarray:
    """Maximin Latin hypercube design of ``n`` points in ``dim`` dimensions.

    Draws ``candidates`` independent Latin designs and keeps the one whose
    smallest pairwise Euclidean distance is largest (first one wins ties).
    """
    designs = lhs_candidates(dim, n, seed, candidates)
    scores = [min_pairwise_distance(d) for d in designs]
    return designs[int(np.argmax(scores))].copy()


def lhs_strata(points: np.ndarray) -> np.ndarray:
    """Stratum index of every coordinate, for checking the Latin property."""
    points = np.asarray(points, dtype=float)
    return np.floor(points * len(points)).astype(int)


def radical_inverse(i: int, base: int) -> float:
    num, denom = 0, 1
    while i > 0:
        i, digit = divmod(i, base)
        num = num * base + digit
        denom *= base
    return num / denom


class HaltonSequence:
    """Plain (unscrambled) Halton sequence; point ``i`` uses index ``i + 1``."""

    method = "halton"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if dim > len(PRIMES):
            raise ValueError(f"halton supports at most {len(PRIMES)} dimensions, got {dim}")
        self.dim = dim
        self.prime_bases = PRIMES[:dim]
        self.emitted = 0

    def draw(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("k must be >= 0")
        out = np.empty((k, self.dim))
        for r in range(k):
            idx = self.emitted + r + 1
            for j, b in enumerate(self.prime_bases):
                out[r, j] = radical_inverse(idx, b)
        self.emitted += k
        return out


def _direction_numbers(dim: int) -> np.ndarray:
    v = np.zeros((dim, _BITS), dtype=np.uint64)
    v[0] = [1 << (_BITS - 1 - k) for k in range(_BITS)]
    for j in range(1, dim):
        s, a, m = JOE_KUO[j - 1]
        vj = [0] * _BITS
        for k in range(min(s, _BITS)):
            vj[k] = m[k] << (_BITS - 1 - k)
        for k in range(s, _BITS):
            x = vj[k - s] ^ (vj[k - s] >> s)
            for t in range(1, s):
                if (a >> (s - 1 - t)) & 1:
                    x ^= vj[k - t]
            vj[k] = x
        v[j] = vj
    return v


class SobolSequence:
    """Sobol sequence in Gray-code order, skipping the all-zeros first point."""

    method = "sobol"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if dim > SOBOL_MAX_DIM:
            raise ValueError(f"sobol supports at most {SOBOL_MAX_DIM} dimensions, got {dim}")
        self.dim = dim
        self.direction_numbers = _direction_numbers(dim)
        self.emitted = 0
        self._index = 0  # index of the last generated raw point (0 is the origin)
        self._x = np.zeros(dim, dtype=np.uint64)

    def draw(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("k must be >= 0")
        if self._index + k >= 1 << _BITS:
            raise ValueError("sobol sequence exhausted")
        out = np.empty((k, self.dim))
        for r in range(k):
            # flip the bit selected by the lowest zero bit of the previous index
            i = self._index
            c = (~i & (i + 1)).bit_length() - 1
            self._x ^= self.direction_numbers[:, c]
            self._index += 1
            out[r] = self._x.astype(float) / float(1 << _BITS)
        self.emitted += k
        return out


def make_sequence(method: str, dim: int) -> HaltonSequence | SobolSequence:
    if method == "halton":
        return HaltonSequence(dim)
    if method == "sobol":
        return SobolSequence(dim)
    raise ValueError(f"unknown sequence method {method!r}")


def sample_unit(method: str, dim: int, n: int, seed: int = 0) -> np.ndarray:
    """``n`` points from a fresh sampler of the given method."""
    if method == "lhs":
        return lhs(dim, n, seed)
    if n < 1:
        raise ValueError("n must be >= 1")
    return make_sequence(method, dim).draw(n)


def star_discrepancy_bruteforce(points) -> float:
    """Exact star discrepancy over anchored boxes [0, q).

    The supremum is attained on the grid spanned by the point coordinates and 1:
    ``vol - open_count/n`` approaches its max from below a grid corner and
    ``closed_count/n - vol`` just above one.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.size == 0:
        raise ValueError("need a nonempty (n, d) point set")
    n, d = pts.shape
    if n > 256 or d > 3:
        raise ValueError("brute-force discrepancy limited to n <= 256 and dim <= 3")
    grids = [np.unique(np.append(pts[:, j], 1.0)) for j in range(d)]
    ranks = tuple(np.searchsorted(grids[j], pts[:, j]) for j in range(d))
    hist = np.zeros([len(g) for g in grids], dtype=np.int64)
    np.add.at(hist, ranks, 1)
    closed = hist
    for ax in range(d):
        closed = np.cumsum(closed, axis=ax)
    # open count at corner idx is the closed count at idx - 1 in every axis
    opened = np.pad(closed, [(1, 0)] * d)[tuple(slice(0, -1) for _ in range(d))]
    vol = np.ones(hist.shape)
    for j, g in enumerate(grids):
        shape = [1] * d
        shape[j] = len(g)
        vol = vol * g.reshape(shape)
    return float(max(np.max(vol - opened / n), np.max(closed / n - vol), 0.0))

