"""Moment maps, matricial cumulants and mixed moments of randomly rotated matrices.

Permutation-indexed quantities are stored as vectors in ``symmetric_group(n)``
order. Integer or ``Fraction`` input is handled in exact rational arithmetic;
anything else runs in complex floating point.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Integral, Rational

import numpy as np

from ._config import CapExceeded, check_cap, enum_cap, weingarten_cap
from .symgroup import (
    Permutation,
    compose,
    defect,
    defect_matrix,
    full_cycle,
    group_index,
    inverse_table,
    nc_moebius_to_top,
    noncrossing_partitions,
    product_table,
    symmetric_group,
)
from .ratfunc import PolynomialN, RationalFunctionN
from .weingarten import moeb_n, weingarten_value

__all__ = [
    "MatrixTuple",
    "CumulantTable",
    "ExpansionResult",
    "tr_sigma",
    "trace_vector",
    "moment_cumulant_matrix",
    "matricial_cumulants",
    "symbolic_cumulant",
    "higher_order_matrices",
    "kappa2g",
    "kappa2g_table",
    "free_cumulant",
    "free_cumulants_nc",
    "mixed_moment_exact",
    "free_product_eval",
    "mixed_moment_expansion",
    "double_cumulant_terms",
]

DENSE_CAP = 6  # largest n for which the S_n x S_n integer matrices are materialised
_CHUNK = 64  # rows per reduction block; fixed so results never depend on thread count


def _is_exact_scalar(x) -> bool:
    return isinstance(x, (Integral, Rational)) and not isinstance(x, bool)


def _to_exact(mat) -> np.ndarray:
    arr = np.asarray(mat, dtype=object)
    return np.vectorize(Fraction, otypes=[object])(arr)


class MatrixTuple:
    """An n-tuple of N x N matrices with cached normalised traces of words.

    Parameters
    ----------
    matrices : sequence of array_like
        Square matrices of a common size.
    exact : bool, optional
        Force (True) or forbid (False) rational arithmetic. By default it is used
        when every entry is an integer or a ``Fraction``.
    """

    def __init__(self, matrices, exact: bool | None = None):
        mats = [np.asarray(m) for m in matrices]
        if not mats:
            raise ValueError("a MatrixTuple needs at least one matrix")
        dim = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for m in mats:
            if m.ndim != 2 or m.shape != (dim, dim):
                raise ValueError("all matrices must be square of equal size")
        if exact is None:
            exact = all(
                m.dtype.kind in "iub" or (m.dtype == object and all(_is_exact_scalar(x) for x in m.flat))
                for m in mats
            )
        self.exact = bool(exact)
        if self.exact:
            self.matrices = [_to_exact(m) for m in mats]
        else:
            self.matrices = [np.asarray(m, dtype=np.complex128) for m in mats]
        self.dim = dim
        self._trace_cache: dict[tuple[int, ...], object] = {}

    @property
    def n(self) -> int:
        return len(self.matrices)

    @classmethod
    def repeat(cls, matrix, n: int, exact: bool | None = None) -> MatrixTuple:
        return cls([matrix] * n, exact=exact)

    def scalar(self, x):
        return Fraction(x) if self.exact else complex(x)

    def word_trace(self, word: tuple[int, ...]):
        """Normalised trace tr_N(M_{w1} M_{w2} ...) of a word of 0-based slot indices."""
        word = tuple(word)
        hit = self._trace_cache.get(word)
        if hit is not None:
            return hit
        prod = self.matrices[word[0]]
        for k in word[1:]:
            prod = prod @ self.matrices[k]
        tr = sum(prod[i, i] for i in range(self.dim))
        val = Fraction(tr) / self.dim if self.exact else complex(tr) / self.dim
        self._trace_cache[word] = val
        return val


def _cycle_word(cyc) -> tuple[int, ...]:
    return tuple(cyc)


def tr_sigma(M: MatrixTuple, s: Permutation):
    """Product over cycles (i1 ... ik) of s of tr_N(M_{i1} ... M_{ik})."""
    if s.n != M.n:
        raise ValueError(f"degree mismatch: permutation in S_{s.n}, tuple of length {M.n}")
    out = M.scalar(1)
    for cyc in s.cycles():
        out *= M.word_trace(_cycle_word(cyc))
    return out


def trace_vector(M: MatrixTuple) -> np.ndarray:
    """tr_alpha(M) for every alpha in S_n, as an object (exact) or complex array."""
    group = symmetric_group(M.n)
    vals = [tr_sigma(M, a) for a in group]
    return np.array(vals, dtype=object if M.exact else np.complex128)


def _power_table(N, exponents: np.ndarray, exact: bool) -> np.ndarray:
    """N ** (-exponents) elementwise."""
    if exact:
        uniq = {int(e): Fraction(1, int(N) ** int(e)) for e in np.unique(exponents)}
        return np.vectorize(uniq.__getitem__, otypes=[object])(exponents)
    return np.power(float(N), -exponents.astype(float))


def moment_cumulant_matrix(n: int, N, exact: bool = True) -> np.ndarray:
    """K[sigma, alpha] = N^(-df(alpha, sigma)), so that tr = K @ kappa^N."""
    return _power_table(N, np.asarray(defect_matrix(n)), exact)


@dataclass
class CumulantTable:
    """Cumulants indexed by S_n.

    ``order`` is one of ``"exact-N"``, ``"free"`` or ``"order-2g"`` (with the
    actual even integer in place of 2g). ``non_unique`` marks tables computed for
    N < n, where the defining decomposition is not unique.
    """

    n: int
    vector: np.ndarray
    order: str
    non_unique: bool = False
    dim: int | None = None

    def __getitem__(self, s: Permutation):
        return self.vector[group_index(s)]

    @property
    def values(self) -> dict:
        return {p: self.vector[i] for i, p in enumerate(symmetric_group(self.n))}

    def items(self):
        return self.values.items()


def _check_enum(n: int) -> None:
    check_cap(n, enum_cap())


def _check_dense(n: int) -> None:
    check_cap(n, min(DENSE_CAP, enum_cap()), what="n (dense S_n x S_n tables)")


def _row_chunks(m: int):
    return [(lo, min(lo + _CHUNK, m)) for lo in range(0, m, _CHUNK)]


def _run_chunks(fn, m: int, threads: int | None):
    chunks = _row_chunks(m)
    if threads is not None and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda c: fn(*c), chunks))
    else:
        parts = [fn(*c) for c in chunks]
    return parts


def matricial_cumulants(M: MatrixTuple, threads: int | None = None) -> CumulantTable:
    """kappa^N_sigma(M) for all sigma in S_n.

    Uses the closed form
    ``kappa^N_sigma = sum_alpha N^(-df(alpha, sigma)) Moeb_N(alpha) tr_{alpha^-1 sigma}(M)``.
    For N < n the Weingarten function has poles; a minimum-norm solution of the
    moment-cumulant system is returned instead and the table is tagged non-unique.
    """
    n, N = M.n, M.dim
    _check_enum(n)
    check_cap(n, weingarten_cap())
    tr = trace_vector(M)
    if N < n:
        K = moment_cumulant_matrix(n, N, exact=False)
        kappa, *_ = np.linalg.lstsq(K, tr.astype(np.complex128), rcond=None)
        return CumulantTable(n, kappa, "exact-N", non_unique=True, dim=N)
    group = symmetric_group(n)
    D = np.asarray(defect_matrix(n))
    # Q[j, i] = index of alpha_j^-1 sigma_i
    Q = np.asarray(product_table(n))[np.asarray(inverse_table(n))]
    moeb = [moeb_n(a).evaluate(N) for a in group]
    if M.exact:
        pw = _power_table(N, D, True)
        m = len(group)

        def rows(lo, hi):
            out = []
            for i in range(lo, hi):
                acc = Fraction(0)
                for j in range(m):
                    acc += pw[i, j] * moeb[j] * tr[Q[j, i]]
                out.append(acc)
            return out

        vec = np.array([v for part in _run_chunks(rows, m, threads) for v in part], dtype=object)
    else:
        W = _power_table(N, D, False) * np.array([float(x) for x in moeb])[None, :]

        def rows(lo, hi):
            return np.sum(W[lo:hi] * tr[Q[:, lo:hi].T], axis=1)

        vec = np.concatenate(_run_chunks(rows, len(group), threads))
    return CumulantTable(n, vec, "exact-N", dim=N)


def symbolic_cumulant(s: Permutation) -> dict[Permutation, RationalFunctionN]:
    """kappa^N_s as a linear form in the traces, with coefficients rational in N.

    Returns ``{tau: c_tau(N)}`` such that ``kappa^N_s(M) = sum_tau c_tau(N) tr_tau(M)``
    for every tuple M of length n and every N >= n. Zero coefficients are omitted.
    """
    n = s.n
    _check_enum(n)
    check_cap(n, weingarten_cap())
    out: dict[Permutation, RationalFunctionN] = {}
    for a in symmetric_group(n):
        d = defect(a, s)
        c = moeb_n(a) / RationalFunctionN(PolynomialN.monomial(d))
        tau = compose(a.inverse(), s)
        out[tau] = out.get(tau, RationalFunctionN(0)) + c
    return {t: c for t, c in out.items() if not c.is_zero()}


def _matmul_int(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype == object or b.dtype == object:
        return np.dot(a, b)
    bound = int(np.abs(a).max(initial=0)) * int(np.abs(b).max(initial=0)) * a.shape[1]
    if bound >= 2**62:
        return np.dot(a.astype(object), b.astype(object))
    return a @ b


@lru_cache(maxsize=None)
def _higher_order(n: int, g_max: int) -> tuple[np.ndarray, ...]:
    if g_max > 0:
        prev = _higher_order(n, g_max - 1)
    else:
        prev = ()
    D = np.asarray(defect_matrix(n))
    if not prev:
        G0 = (D == 0).astype(np.int64)
        # G0 = I + L with L nilpotent (lengths strictly increase along chains)
        L = G0 - np.eye(len(G0), dtype=np.int64)
        C0 = np.eye(len(G0), dtype=np.int64)
        term = C0
        for _ in range(n):
            term = -_matmul_int(L, term)
            if not term.any():
                break
            C0 = C0 + term
        C0.setflags(write=False)
        return (C0,)
    g = g_max
    C0 = prev[0]
    acc = np.zeros_like(C0)
    for i in range(1, g + 1):
        G = (D == 2 * i).astype(np.int64)
        if G.any():
            acc = acc + _matmul_int(G, prev[g - i])
    C = -_matmul_int(C0, acc)
    C.setflags(write=False)
    return prev + (C,)


def higher_order_matrices(n: int, g_max: int) -> list[np.ndarray]:
    """Integer matrices [C_0, C_2, ..., C_{2 g_max}] indexed by S_n x S_n.

    ``C_0 = G_0^-1`` and ``C_2g = -C_0 sum_{i=1..g} G_2i C_2(g-i)`` with
    ``G_2k[sigma, alpha] = 1 if df(alpha, sigma) == 2k``.
    """
    if g_max < 0:
        raise ValueError("g_max must be non-negative")
    _check_dense(n)
    return list(_higher_order(n, g_max))


def _dot_row(row: np.ndarray, tr: np.ndarray, exact: bool):
    nz = np.nonzero(row)[0]
    if exact:
        return sum((int(row[j]) * tr[j] for j in nz), Fraction(0))
    return complex(np.sum(row[nz].astype(float) * tr[nz]))


def kappa2g(M: MatrixTuple, s: Permutation, g: int):
    """kappa^(2g)_s(M) = sum_alpha C_2g(s, alpha) tr_alpha(M)."""
    if s.n != M.n:
        raise ValueError(f"degree mismatch: permutation in S_{s.n}, tuple of length {M.n}")
    C = higher_order_matrices(M.n, g)[g]
    return _dot_row(np.asarray(C[group_index(s)]), trace_vector(M), M.exact)


def kappa2g_table(M: MatrixTuple, g: int) -> CumulantTable:
    C = higher_order_matrices(M.n, g)[g]
    tr = trace_vector(M)
    if M.exact:
        vec = np.array([_dot_row(C[i], tr, True) for i in range(len(C))], dtype=object)
    else:
        vec = C.astype(float) @ tr
    return CumulantTable(M.n, vec, "free" if g == 0 else f"order-{2 * g}", dim=M.dim)


def free_cumulant(M: MatrixTuple, word: tuple[int, ...]):
    """Free cumulant kappa_k(M_{w1}, ..., M_{wk}) by Moebius inversion over NC(k)."""
    k = len(word)
    out = M.scalar(0)
    for p in noncrossing_partitions(k):
        mu = nc_moebius_to_top(p)
        term = M.scalar(mu)
        for block in p.sorted_blocks():
            term *= M.word_trace(tuple(word[i - 1] for i in block))
        out += term
    return out


def free_cumulants_nc(M: MatrixTuple, s: Permutation):
    """Product over cycles of s of the free cumulant of the cycle's word."""
    if s.n != M.n:
        raise ValueError(f"degree mismatch: permutation in S_{s.n}, tuple of length {M.n}")
    out = M.scalar(1)
    for cyc in s.cycles():
        out *= free_cumulant(M, _cycle_word(cyc))
    return out


def _check_pair(A: MatrixTuple, B: MatrixTuple) -> tuple[int, int, bool]:
    if A.n != B.n:
        raise ValueError(f"tuple lengths differ: {A.n} != {B.n}")
    if A.dim != B.dim:
        raise ValueError(f"matrix sizes differ: {A.dim} != {B.dim}")
    return A.n, A.dim, A.exact and B.exact


def _lift(x, exact: bool):
    return Fraction(x) if exact else complex(x)


def mixed_moment_exact(A: MatrixTuple, B: MatrixTuple, threads: int | None = None):
    """E tr_N(U A1 U* B1 U A2 U* B2 ... U An U* Bn) for Haar unitary U.

    Evaluated as the double sum over S_n x S_n of
    ``Wg_N(alpha^-1 beta) N^(#alpha + #(beta^-1 gamma) - 1) tr_alpha(A) tr_{beta^-1 gamma}(B)``
    with the Weingarten function at the integer N. Requires N >= n.
    """
    n, N, exact = _check_pair(A, B)
    _check_enum(n)
    check_cap(n, weingarten_cap())
    if N < n:
        raise ValueError(f"matrix size N={N} is below the word length n={n}: Wg_N has a pole")
    group = symmetric_group(n)
    m = len(group)
    gamma = group_index(full_cycle(n))
    inv = np.asarray(inverse_table(n))
    P = np.asarray(product_table(n))
    Q = P[inv]  # Q[i, j] = alpha_i^-1 alpha_j
    ncyc = np.array([p.num_cycles() for p in group])
    wg = [weingarten_value(p, N) for p in group]
    trA = trace_vector(A)
    trB = trace_vector(B)
    kappa_idx = Q[:, gamma]  # beta^-1 gamma
    if exact:
        a = [trA[i] * N ** int(ncyc[i]) for i in range(m)]
        b = [trB[kappa_idx[j]] * N ** int(ncyc[kappa_idx[j]]) for j in range(m)]

        def rows(lo, hi):
            acc = Fraction(0)
            for i in range(lo, hi):
                if a[i] == 0:
                    continue
                inner = Fraction(0)
                for j in range(m):
                    inner += wg[Q[i, j]] * b[j]
                acc += a[i] * inner
            return acc

        total = Fraction(0)
        for part in _run_chunks(rows, m, threads):
            total += part
        return total / N
    a = trA.astype(np.complex128) * float(N) ** ncyc
    b = trB.astype(np.complex128)[kappa_idx] * float(N) ** ncyc[kappa_idx]
    W = np.array([float(w) for w in wg])[Q]

    def rows(lo, hi):
        return np.sum(a[lo:hi] * (W[lo:hi] @ b))

    parts = _run_chunks(rows, m, threads)
    return complex(np.sum(parts)) / N


def free_product_eval(A: MatrixTuple, B: MatrixTuple):
    """sum over beta preceding gamma_n of kappa_beta(A) tr_{beta^-1 gamma_n}(B)."""
    n, _, exact = _check_pair(A, B)
    _check_dense(n)
    C0 = higher_order_matrices(n, 0)[0]
    D = np.asarray(defect_matrix(n))
    gamma = group_index(full_cycle(n))
    Q = np.asarray(product_table(n))[np.asarray(inverse_table(n))]
    trA, trB = trace_vector(A), trace_vector(B)
    out = _lift(0, exact)
    for j in np.nonzero(D[gamma] == 0)[0]:
        out += _lift(_dot_row(C0[j], trA, A.exact), exact) * _lift(trB[Q[j, gamma]], exact)
    return out


@dataclass
class ExpansionResult:
    """Terms tau*_g of the 1/N^2 expansion of a mixed moment.

    ``partial_sums[g]`` is ``sum_{h <= g} N^-2h terms[h]`` at the tuples' own N.
    ``tail_ratio`` compares the magnitude of the last two weighted terms;
    ``converging`` is True when it is below one (or the tail vanishes).
    """

    N: int
    terms: list
    partial_sums: list
    tail_ratio: float
    converging: bool
    extra: dict = field(default_factory=dict)


def _kappa_tables(M: MatrixTuple, g_max: int) -> list[np.ndarray]:
    return [kappa2g_table(M, g).vector for g in range(g_max + 1)]


def mixed_moment_expansion(A: MatrixTuple, B: MatrixTuple, g_max: int) -> ExpansionResult:
    """tau*_g = sum_{df(alpha, gamma) <= 2g} kappa^(2g - df)_alpha(A) tr_{alpha^-1 gamma}(B), g <= g_max."""
    n, N, exact = _check_pair(A, B)
    if g_max < 0:
        raise ValueError("g_max must be non-negative")
    _check_dense(n)
    D = np.asarray(defect_matrix(n))
    gamma = group_index(full_cycle(n))
    Q = np.asarray(product_table(n))[np.asarray(inverse_table(n))]
    kap = _kappa_tables(A, g_max)
    trB = trace_vector(B)
    d = D[gamma]
    terms = []
    for g in range(g_max + 1):
        acc = _lift(0, exact)
        for j in np.nonzero(d <= 2 * g)[0]:
            h = (2 * g - int(d[j])) // 2
            acc += _lift(kap[h][j], exact) * _lift(trB[Q[j, gamma]], exact)
        terms.append(acc)
    return _finish_expansion(N, terms, exact)


def _finish_expansion(N, terms, exact) -> ExpansionResult:
    partial, acc = [], _lift(0, exact)
    weighted = []
    for g, t in enumerate(terms):
        w = t / _lift(N, exact) ** (2 * g)
        weighted.append(w)
        acc += w
        partial.append(acc)
    if len(weighted) >= 2 and abs(weighted[-2]) > 0:
        ratio = float(abs(weighted[-1]) / abs(weighted[-2]))
    else:
        ratio = 0.0 if len(weighted) < 2 or abs(weighted[-1]) == 0 else float("inf")
    return ExpansionResult(int(N), terms, partial, ratio, ratio < 1.0)


def double_cumulant_terms(A: MatrixTuple, B: MatrixTuple, g_max: int) -> ExpansionResult:
    """The same expansion written with cumulants on both sides.

    ``tau*_g = sum kappa^(a)_alpha(A) kappa^(b)_beta(B)`` over a + b +
    df(alpha, alpha beta) + df(alpha beta, gamma) = 2g.
    """
    n, N, exact = _check_pair(A, B)
    if g_max < 0:
        raise ValueError("g_max must be non-negative")
    _check_dense(n)
    D = np.asarray(defect_matrix(n))
    P = np.asarray(product_table(n))
    gamma = group_index(full_cycle(n))
    kapA = _kappa_tables(A, g_max)
    kapB = _kappa_tables(B, g_max)
    m = len(P)
    # e[i, j] = df(alpha_i, alpha_i beta_j) + df(alpha_i beta_j, gamma)
    ab = P
    e = D[ab, np.arange(m)[:, None]] + D[gamma][ab]
    terms = []
    for g in range(g_max + 1):
        acc = _lift(0, exact)
        for i, j in zip(*np.nonzero(e <= 2 * g)):
            rest = 2 * g - int(e[i, j])
            for a in range(0, rest + 1, 2):
                acc += _lift(kapA[a // 2][i], exact) * _lift(kapB[(rest - a) // 2][j], exact)
        terms.append(acc)
    return _finish_expansion(N, terms, exact)


__all__ += ["CapExceeded"]
