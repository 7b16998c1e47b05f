"""Exact univariate polynomials and rational functions in the symbolic dimension N."""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd, lcm

__all__ = ["PolynomialN", "RationalFunctionN"]


def _trim(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


class PolynomialN:
    """Polynomial in N with exact rational coefficients, lowest degree first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        self.coeffs = _trim(Fraction(c) for c in coeffs)

    @classmethod
    def monomial(cls, degree: int, coeff=1) -> PolynomialN:
        return cls([0] * degree + [coeff])

    @classmethod
    def constant(cls, c) -> PolynomialN:
        return cls([c])

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def __eq__(self, other):
        if not isinstance(other, PolynomialN):
            other = PolynomialN.constant(other)
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other):
        if not isinstance(other, PolynomialN):
            other = PolynomialN.constant(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        return PolynomialN([x + (b[i] if i < len(b) else 0) for i, x in enumerate(a)])

    __radd__ = __add__

    def __neg__(self):
        return PolynomialN([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other if isinstance(other, PolynomialN) else -Fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, PolynomialN):
            other = Fraction(other)
            return PolynomialN([c * other for c in self.coeffs])
        if self.is_zero() or other.is_zero():
            return PolynomialN()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return PolynomialN(out)

    __rmul__ = __mul__

    def divmod(self, other: PolynomialN) -> tuple[PolynomialN, PolynomialN]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        q = [Fraction(0)] * max(len(rem) - len(other.coeffs) + 1, 0)
        lead = other.lead
        dq = other.degree
        for k in range(len(q) - 1, -1, -1):
            c = rem[k + dq] / lead
            q[k] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    rem[k + j] -= c * b
        return PolynomialN(q), PolynomialN(rem[:dq] if dq > 0 else [])

    def exact_div(self, other: PolynomialN) -> PolynomialN:
        q, r = self.divmod(other)
        if not r.is_zero():
            raise ArithmeticError("inexact polynomial division")
        return q

    def monic(self) -> PolynomialN:
        return self * (1 / self.lead)

    def gcd(self, other: PolynomialN) -> PolynomialN:
        a, b = self, other
        while not b.is_zero():
            a, b = b, a.divmod(b)[1]
        return a.monic() if not a.is_zero() else a

    def content_primitive(self) -> tuple[Fraction, PolynomialN]:
        """Split into (content, primitive integer polynomial with positive lead)."""
        if self.is_zero():
            return Fraction(0), self
        den = reduce(lcm, (c.denominator for c in self.coeffs), 1)
        ints = [int(c * den) for c in self.coeffs]
        g = reduce(gcd, ints, 0)
        if ints[-1] < 0:
            g = -g
        return Fraction(g, den), PolynomialN([c // g for c in ints])

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def int_coeffs(self) -> list[int]:
        if any(c.denominator != 1 for c in self.coeffs):
            raise ValueError("polynomial has non-integer coefficients")
        return [int(c) for c in self.coeffs]

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        terms = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            mag = abs(c)
            if k == 0:
                body = str(mag)
            else:
                mono = "N" if k == 1 else f"N^{k}"
                body = mono if mag == 1 else f"{mag}*{mono}"
            terms.append(("-" if c < 0 else "+", body))
        first_sign, first = terms[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in terms[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"PolynomialN({self})"


class RationalFunctionN:
    """Reduced ratio of integer-coefficient polynomials in N.

    The stored form has coprime integer numerator and denominator, the
    denominator with positive leading coefficient, and no common integer
    content left between them.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        num = num if isinstance(num, PolynomialN) else PolynomialN.constant(num)
        den = PolynomialN.constant(1) if den is None else (
            den if isinstance(den, PolynomialN) else PolynomialN.constant(den))
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if num.is_zero():
            self.num, self.den = PolynomialN(), PolynomialN.constant(1)
            return
        g = num.gcd(den)
        if g.degree > 0:
            num, den = num.exact_div(g), den.exact_div(g)
        cn, pn = num.content_primitive()
        cd, pd = den.content_primitive()
        scale = cn / cd
        # fold the scalar into the numerator, then clear leftover denominators
        num = pn * scale
        if any(c.denominator != 1 for c in num.coeffs):
            mult = reduce(lcm, (c.denominator for c in num.coeffs), 1)
            num, pd = num * mult, pd * mult
        self.num, self.den = num, pd

    @classmethod
    def from_poly(cls, p: PolynomialN) -> RationalFunctionN:
        return cls(p)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __eq__(self, other):
        if not isinstance(other, RationalFunctionN):
            other = RationalFunctionN(other)
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __add__(self, other):
        if not isinstance(other, RationalFunctionN):
            other = RationalFunctionN(other)
        return RationalFunctionN(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunctionN(-self.num, self.den)

    def __sub__(self, other):
        if not isinstance(other, RationalFunctionN):
            other = RationalFunctionN(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, RationalFunctionN):
            other = RationalFunctionN(other)
        return RationalFunctionN(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, RationalFunctionN):
            other = RationalFunctionN(other)
        if other.is_zero():
            raise ZeroDivisionError("division by the zero rational function")
        return RationalFunctionN(self.num * other.den, self.den * other.num)

    def evaluate(self, x) -> Fraction:
        """Exact value at a rational point; raises ZeroDivisionError at a pole."""
        x = Fraction(x)
        d = self.den(x)
        if d == 0:
            raise ZeroDivisionError(f"pole at N={x}")
        return Fraction(self.num(x)) / d

    __call__ = evaluate

    def series_at_infinity(self, order: int) -> list[Fraction]:
        """Coefficients c_0..c_order of the expansion in t = 1/N.

        Requires deg(num) <= deg(den), i.e. a finite limit at infinity.
        """
        if self.is_zero():
            return [Fraction(0)] * (order + 1)
        shift = self.den.degree - self.num.degree
        if shift < 0:
            raise ValueError("rational function diverges at infinity")
        a = list(reversed(self.num.coeffs))
        b = list(reversed(self.den.coeffs))
        # t^shift * A(t) / B(t), B(0) = lead(den) != 0
        out = [Fraction(0)] * (order + 1)
        series = []
        for k in range(order + 1 - shift if order + 1 > shift else 0):
            acc = a[k] if k < len(a) else Fraction(0)
            for j in range(1, min(k, len(b) - 1) + 1):
                acc -= b[j] * series[k - j]
            series.append(acc / b[0])
        for k, c in enumerate(series):
            out[k + shift] = c
        return out

    def __str__(self) -> str:
        if self.den.degree == 0 and self.den.lead == 1:
            return str(self.num)
        num_s = str(self.num)
        neg = False
        if self.num.degree == 0 and self.num.lead < 0:
            neg, num_s = True, str(-self.num)
        elif self.num.degree > 0:
            num_s = f"({num_s})"
        den_s = str(self.den)
        if len([c for c in self.den.coeffs if c != 0]) > 1 or "*" in den_s:
            den_s = f"({den_s})"
        return ("-" if neg else "") + f"{num_s}/{den_s}"

    def __repr__(self):
        return f"RationalFunctionN({self})"
