"""Exact unitary Weingarten function and its expansion in 1/N^2.

Wg_N is obtained by inverting the class-reduced Gram matrix
``G(c, c') = sum_{tau in c'} N^{#(sigma_c^-1 tau)}`` over the field of rational
functions in N. Character theory is never used.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from ._config import check_cap, weingarten_cap
from .ratfunc import PolynomialN, RationalFunctionN
from .symgroup import Permutation, compose, from_cycles, symmetric_group

__all__ = [
    "ClassFunction",
    "partitions",
    "class_representative",
    "gram_matrix",
    "solve_gram",
    "weingarten_symbolic",
    "weingarten_value",
    "moeb_n",
    "moeb_series",
]


@lru_cache(maxsize=None)
def partitions(n: int) -> tuple[tuple[int, ...], ...]:
    """Integer partitions of n, parts in decreasing order; (1,...,1) first."""
    out = []

    def rec(rest, largest, acc):
        if rest == 0:
            out.append(tuple(acc))
            return
        for part in range(min(rest, largest), 0, -1):
            rec(rest - part, part, acc + [part])

    rec(n, n, [])
    return tuple(reversed(out))


def class_representative(shape: tuple[int, ...]) -> Permutation:
    cycles, start = [], 1
    for part in shape:
        cycles.append(list(range(start, start + part)))
        start += part
    return from_cycles(cycles, sum(shape))


def _check(n: int) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    check_cap(n, weingarten_cap())


@lru_cache(maxsize=None)
def gram_matrix(n: int) -> tuple[tuple[PolynomialN, ...], ...]:
    """Class-reduced Gram matrix, rows and columns ordered as ``partitions(n)``."""
    _check(n)
    shapes = partitions(n)
    index = {s: i for i, s in enumerate(shapes)}
    group = symmetric_group(n)
    rows = []
    for shape in shapes:
        sig_inv = class_representative(shape).inverse()
        counts = [[0] * (n + 1) for _ in shapes]
        for tau in group:
            counts[index[tau.cycle_type()]][compose(sig_inv, tau).num_cycles()] += 1
        rows.append(tuple(PolynomialN(c) for c in counts))
    return tuple(rows)


def solve_gram(matrix, rhs) -> list[RationalFunctionN]:
    """Solve ``matrix @ x = rhs`` exactly; Bareiss elimination then back substitution."""
    m = len(matrix)
    a = [list(row) + [rhs[i]] for i, row in enumerate(matrix)]
    prev = PolynomialN.constant(1)
    for k in range(m):
        piv = next((i for i in range(k, m) if not a[i][k].is_zero()), None)
        if piv is None:
            raise ZeroDivisionError("singular Gram matrix")
        a[k], a[piv] = a[piv], a[k]
        for i in range(k + 1, m):
            for j in range(k + 1, m + 1):
                a[i][j] = (a[k][k] * a[i][j] - a[i][k] * a[k][j]).exact_div(prev)
            a[i][k] = PolynomialN()
        prev = a[k][k]
    x = [RationalFunctionN(0)] * m
    for i in range(m - 1, -1, -1):
        acc = RationalFunctionN(a[i][m])
        for j in range(i + 1, m):
            if not a[i][j].is_zero():
                acc = acc - RationalFunctionN(a[i][j]) * x[j]
        x[i] = acc / RationalFunctionN(a[i][i])
    return x


@dataclass(frozen=True)
class ClassFunction:
    """Map from cycle type to an exact rational function of N."""

    n: int
    values: dict

    def __call__(self, s: Permutation) -> RationalFunctionN:
        if s.n != self.n:
            raise ValueError(f"degree mismatch: {s.n} != {self.n}")
        return self.values[s.cycle_type()]

    def to_strings(self) -> dict[str, str]:
        return {_shape_key(k): str(v) for k, v in self.values.items()}

    def evaluate(self, N) -> dict[str, Fraction]:
        return {_shape_key(k): v.evaluate(N) for k, v in self.values.items()}


def _shape_key(shape) -> str:
    return "[" + ",".join(str(p) for p in shape) + "]"


@lru_cache(maxsize=None)
def weingarten_symbolic(n: int) -> ClassFunction:
    """Wg_N on S_n as a class function of exact rational functions."""
    _check(n)
    shapes = partitions(n)
    rhs = [PolynomialN.constant(1 if s == (1,) * n else 0) for s in shapes]
    sol = solve_gram(gram_matrix(n), rhs)
    return ClassFunction(n, dict(zip(shapes, sol)))


@lru_cache(maxsize=None)
def _wg_value(shape: tuple[int, ...], N: int) -> Fraction:
    return weingarten_symbolic(sum(shape)).values[shape].evaluate(N)


def weingarten_value(s: Permutation, N: int) -> Fraction:
    """Wg_N(s) at an integer dimension N (exact)."""
    return _wg_value(s.cycle_type(), int(N))


@lru_cache(maxsize=None)
def _moeb_shape(shape: tuple[int, ...]) -> RationalFunctionN:
    n = sum(shape)
    wg = weingarten_symbolic(n).values[shape]
    return wg * RationalFunctionN(PolynomialN.monomial(2 * n - len(shape)))


def moeb_n(s: Permutation) -> RationalFunctionN:
    """N^(2n - #s) Wg_N(s)."""
    _check(s.n)
    return _moeb_shape(s.cycle_type())


@lru_cache(maxsize=None)
def _moeb_series_shape(shape: tuple[int, ...], g_max: int) -> tuple[Fraction, ...]:
    coeffs = _moeb_shape(shape).series_at_infinity(2 * g_max)
    odd = [c for c in coeffs[1::2] if c != 0]
    if odd:
        raise ArithmeticError(f"Moeb_N for cycle type {shape} has odd powers of 1/N")
    return tuple(coeffs[0::2])


def moeb_series(s: Permutation, g_max: int) -> list[Fraction]:
    """[Moeb^(0)(s), Moeb^(2)(s), ..., Moeb^(2 g_max)(s)], coefficients of N^-2g."""
    if g_max < 0:
        raise ValueError("g_max must be non-negative")
    _check(s.n)
    return list(_moeb_series_shape(s.cycle_type(), g_max))
