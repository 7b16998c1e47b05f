"""Exact combinatorics of the symmetric group.

Permutations are stored 0-based in one-line notation and printed 1-based in
cycle notation. Composition follows ``(p * q)(i) = p(q(i))``.

The Cayley length is ``|p| = n - #cycles(p)`` and the defect of ``a`` with
respect to ``b`` is ``|a| + |a^-1 b| - |b|``; ``a`` precedes ``b`` (``a ≺ b``)
when the defect vanishes.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterable, Sequence

import numpy as np

from ._config import check_cap, enum_cap

__all__ = [
    "Permutation",
    "NonCrossingPartition",
    "identity",
    "full_cycle",
    "from_cycles",
    "parse_cycles",
    "compose",
    "defect",
    "symmetric_group",
    "geodesic_predecessors",
    "nc_from_geodesic",
    "kreweras",
    "moeb_geodesic",
    "catalan",
    "noncrossing_partitions",
    "nc_moebius_to_top",
    "tensor_product",
    "defect_matrix",
    "perm_rank",
    "group_index",
    "product_table",
    "inverse_table",
]


@dataclass(frozen=True)
class Permutation:
    """Element of S_n in one-line notation (0-based images)."""

    images: tuple[int, ...]

    def __post_init__(self):
        imgs = tuple(int(i) for i in self.images)
        if len(imgs) == 0:
            raise ValueError("a permutation needs degree n >= 1")
        if sorted(imgs) != list(range(len(imgs))):
            raise ValueError(f"{list(imgs)} is not a bijection of 0..{len(imgs) - 1}")
        object.__setattr__(self, "images", imgs)

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __mul__(self, other: Permutation) -> Permutation:
        return compose(self, other)

    def inverse(self) -> Permutation:
        inv = [0] * self.n
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def cycles(self) -> list[tuple[int, ...]]:
        """Cycles as 0-based tuples, each starting at its smallest element."""
        seen = [False] * self.n
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cyc = []
            i = start
            while not seen[i]:
                seen[i] = True
                cyc.append(i)
                i = self.images[i]
            out.append(tuple(cyc))
        return out

    def num_cycles(self) -> int:
        return len(self.cycles())

    def length(self) -> int:
        return self.n - self.num_cycles()

    def cycle_type(self) -> tuple[int, ...]:
        return tuple(sorted((len(c) for c in self.cycles()), reverse=True))

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def one_line(self) -> list[int]:
        """1-based one-line notation, as used in JSON."""
        return [i + 1 for i in self.images]

    def __str__(self) -> str:
        return "".join("(" + " ".join(str(i + 1) for i in c) + ")" for c in self.cycles())

    def __repr__(self) -> str:
        return f"Permutation({self})"


def identity(n: int) -> Permutation:
    return Permutation(tuple(range(n)))


def full_cycle(n: int) -> Permutation:
    """gamma_n = (1 2 ... n)."""
    return Permutation(tuple((i + 1) % n for i in range(n)))


def from_cycles(cycles: Iterable[Sequence[int]], n: int) -> Permutation:
    """Build a permutation of degree n from 1-based cycles; omitted points are fixed."""
    imgs = list(range(n))
    touched = set()
    for cyc in cycles:
        cyc = [int(c) - 1 for c in cyc]
        for k, i in enumerate(cyc):
            if not 0 <= i < n or i in touched:
                raise ValueError(f"invalid cycle {cyc} for degree {n}")
            touched.add(i)
            imgs[i] = cyc[(k + 1) % len(cyc)]
    return Permutation(tuple(imgs))


_CYCLE_RE = re.compile(r"\(([^()]*)\)")


def parse_cycles(text: str, n: int | None = None) -> Permutation:
    """Parse cycle notation such as ``"(1 2)(3)"``; n defaults to the largest point."""
    text = text.strip()
    if text.replace(" ", "") in ("", "()") and n is not None:
        return identity(n)
    if _CYCLE_RE.sub("", text).strip():
        raise ValueError(f"cannot parse cycle notation {text!r}")
    cycles = []
    for body in _CYCLE_RE.findall(text):
        pts = [int(tok) for tok in body.replace(",", " ").split()]
        if pts:
            cycles.append(pts)
    top = max((max(c) for c in cycles), default=0)
    if n is None:
        n = top
    if n < top or n < 1:
        raise ValueError(f"degree {n} too small for {text!r}")
    return from_cycles(cycles, n)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """(p ∘ q)(i) = p(q(i))."""
    if p.n != q.n:
        raise ValueError(f"degree mismatch: {p.n} != {q.n}")
    return Permutation(tuple(p.images[j] for j in q.images))


def defect(a: Permutation, b: Permutation) -> int:
    """|a| + |a^-1 b| - |b|; always a non-negative even integer."""
    if a.n != b.n:
        raise ValueError(f"degree mismatch: {a.n} != {b.n}")
    return a.length() + compose(a.inverse(), b).length() - b.length()


@lru_cache(maxsize=None)
def _sym_group(n: int) -> tuple[Permutation, ...]:
    return tuple(Permutation(p) for p in itertools.permutations(range(n)))


def symmetric_group(n: int) -> tuple[Permutation, ...]:
    """All of S_n in lexicographic one-line order (identity first)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    check_cap(n, enum_cap())
    return _sym_group(n)


def geodesic_predecessors(s: Permutation) -> list[Permutation]:
    """All a with defect(a, s) == 0, in enumeration order."""
    return [a for a in symmetric_group(s.n) if defect(a, s) == 0]


@dataclass(frozen=True)
class NonCrossingPartition:
    n: int
    blocks: frozenset

    def __post_init__(self):
        blocks = frozenset(frozenset(int(x) for x in b) for b in self.blocks)
        covered = sorted(x for b in blocks for x in b)
        if covered != list(range(1, self.n + 1)):
            raise ValueError("blocks must partition {1..n}")
        for b1, b2 in itertools.combinations(blocks, 2):
            if _crosses(b1, b2):
                raise ValueError(f"blocks {sorted(b1)} and {sorted(b2)} cross")
        object.__setattr__(self, "blocks", blocks)

    def sorted_blocks(self) -> list[list[int]]:
        return sorted(sorted(b) for b in self.blocks)

    def __str__(self) -> str:
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.sorted_blocks()) + "}"


def _crosses(b1, b2) -> bool:
    for a, c in itertools.combinations(sorted(b1), 2):
        for b, d in itertools.combinations(sorted(b2), 2):
            if a < b < c < d or b < a < d < c:
                return True
    return False


def nc_from_geodesic(a: Permutation, n: int | None = None) -> NonCrossingPartition:
    """Orbit partition of a permutation lying on a geodesic from id to gamma_n."""
    n = a.n if n is None else n
    if a.n != n:
        raise ValueError(f"degree mismatch: {a.n} != {n}")
    if defect(a, full_cycle(n)) != 0:
        raise ValueError(f"{a} is not on a geodesic from the identity to gamma_{n}")
    return NonCrossingPartition(n, frozenset(frozenset(i + 1 for i in c) for c in a.cycles()))


def kreweras(a: Permutation) -> Permutation:
    """a^-1 gamma_n, the permutation whose orbits form the Kreweras complement."""
    return compose(a.inverse(), full_cycle(a.n))


@lru_cache(maxsize=None)
def catalan(k: int) -> int:
    return comb(2 * k, k) // (k + 1)


def moeb_geodesic(s: Permutation) -> int:
    """Product over cycles c of (-1)^(|c|-1) Catalan(|c|-1)."""
    out = 1
    for c in s.cycles():
        k = len(c) - 1
        out *= (-1) ** k * catalan(k)
    return out


def tensor_product(s1: Permutation, s2: Permutation) -> Permutation:
    """s1 acting on the first m points and s2 on the remaining ones."""
    m = s1.n
    return Permutation(s1.images + tuple(m + j for j in s2.images))


# -- non-crossing partitions, built without reference to permutations --


@lru_cache(maxsize=None)
def _nc_blocks(points: tuple[int, ...]) -> tuple[tuple[tuple[int, ...], ...], ...]:
    if not points:
        return ((),)
    first, rest = points[0], points[1:]
    out = []
    # the block of `first` splits the remaining points into non-interacting gaps
    for r in range(len(rest) + 1):
        for others in itertools.combinations(range(len(rest)), r):
            block = (first,) + tuple(rest[i] for i in others)
            cuts = [-1, *others, len(rest)]
            gaps = [rest[cuts[j] + 1 : cuts[j + 1]] for j in range(len(cuts) - 1)]
            parts = [()]
            for gap in gaps:
                parts = [p + q for p in parts for q in _nc_blocks(tuple(gap))]
            out.extend((block,) + p for p in parts)
    return tuple(out)


def noncrossing_partitions(n: int) -> list[NonCrossingPartition]:
    return [NonCrossingPartition(n, frozenset(frozenset(b) for b in bl))
            for bl in _nc_blocks(tuple(range(1, n + 1)))]


@lru_cache(maxsize=None)
def _nc_moebius_table(n: int) -> dict:
    parts = noncrossing_partitions(n)
    top = NonCrossingPartition(n, frozenset([frozenset(range(1, n + 1))]))

    def finer(p, q):
        return all(any(b <= c for c in q.blocks) for b in p.blocks)

    # mu(p, top) = -sum_{p < q <= top} mu(q, top), processed from coarse to fine
    order = sorted(parts, key=lambda p: len(p.blocks))
    mu = {}
    for p in order:
        if p == top:
            mu[p] = 1
            continue
        mu[p] = -sum(mu[q] for q in mu if q != p and finer(p, q))
    return mu


def nc_moebius_to_top(p: NonCrossingPartition) -> int:
    """Moebius function mu(p, 1_n) of the lattice NC(n), by lattice recursion."""
    return _nc_moebius_table(p.n)[p]


# -- vectorised helpers for the dense S_n x S_n tables --


def _cycle_counts(perms: np.ndarray) -> np.ndarray:
    """Number of cycles of each row of an (..., n) array of 0-based permutations."""
    n = perms.shape[-1]
    flat = perms.reshape(-1, n)
    m = flat.shape[0]
    seen = np.zeros((m, n), dtype=bool)
    counts = np.zeros(m, dtype=np.int64)
    rows = np.arange(m)
    for start in range(n):
        new = ~seen[:, start]
        counts += new
        cur = np.full(m, start)
        active = new.copy()
        while active.any():
            seen[rows[active], cur[active]] = True
            cur = np.where(active, flat[rows, cur], cur)
            active &= ~seen[rows, cur]
    return counts.reshape(perms.shape[:-1])


@lru_cache(maxsize=None)
def defect_matrix(n: int) -> np.ndarray:
    """D[i, j] = defect(S_n[j], S_n[i]) in symmetric_group(n) order."""
    group = symmetric_group(n)
    arr = np.array([p.images for p in group], dtype=np.int64)
    inv = np.argsort(arr, axis=1)
    lengths = n - _cycle_counts(arr)
    # rel[i, j] = S[j]^-1 ∘ S[i]
    rel = np.take_along_axis(np.broadcast_to(inv[None, :, :], (len(group),) + inv.shape),
                             np.broadcast_to(arr[:, None, :], (len(group),) + inv.shape), axis=2)
    rel_len = n - _cycle_counts(rel)
    out = lengths[None, :] + rel_len - lengths[:, None]
    out.setflags(write=False)
    return out


def perm_rank(perms: np.ndarray) -> np.ndarray:
    """Lexicographic rank of each row; matches the symmetric_group order."""
    perms = np.asarray(perms, dtype=np.int64)
    n = perms.shape[-1]
    rank = np.zeros(perms.shape[:-1], dtype=np.int64)
    fact = 1
    for k in range(n - 1, -1, -1):
        smaller = (perms[..., k + 1:] < perms[..., k : k + 1]).sum(axis=-1)
        rank += smaller * fact
        fact *= n - k
    return rank


def group_index(s: Permutation) -> int:
    """Position of s in symmetric_group(s.n)."""
    return int(perm_rank(np.array(s.images)))


@lru_cache(maxsize=None)
def _group_array(n: int) -> np.ndarray:
    arr = np.array([p.images for p in symmetric_group(n)], dtype=np.int64)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def product_table(n: int) -> np.ndarray:
    """P[i, j] = index of S[i] ∘ S[j]."""
    arr = _group_array(n)
    m = len(arr)
    prod = np.take_along_axis(np.broadcast_to(arr[:, None, :], (m, m, n)),
                              np.broadcast_to(arr[None, :, :], (m, m, n)), axis=2)
    out = perm_rank(prod)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def inverse_table(n: int) -> np.ndarray:
    """inv[i] = index of S[i]^-1."""
    out = perm_rank(np.argsort(_group_array(n), axis=1))
    out.setflags(write=False)
    return out
