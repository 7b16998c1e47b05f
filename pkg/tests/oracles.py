"""Independent brute-force references used by the tests.

None of these touch the Weingarten tables or the subordination solver.
"""

import itertools
import string
from fractions import Fraction
from functools import reduce

import numpy as np


def perm_tensor(images, N):
    """Operator on (C^N)^{⊗k} permuting tensor factors, as a N^k x N^k matrix."""
    k = len(images)
    dim = N**k
    P = np.zeros((dim, dim))
    for idx in itertools.product(range(N), repeat=k):
        out = tuple(idx[images[p]] for p in range(k))
        P[np.ravel_multi_index(out, (N,) * k), np.ravel_multi_index(idx, (N,) * k)] = 1.0
    return P


def haar_conjugation_mean(mats, N):
    """E[(U M_1 U*) ⊗ ... ⊗ (U M_k U*)] for Haar U, as an array of shape (N,)*2k.

    Averaging over conjugation by U^{⊗k} is the Hilbert-Schmidt orthogonal
    projection onto the commutant, which for N >= k is spanned by the
    permutation operators. Solved as a small least-squares problem.
    """
    k = len(mats)
    X = reduce(np.kron, [np.asarray(m, dtype=complex) for m in mats])
    basis = [perm_tensor(p, N) for p in itertools.permutations(range(k))]
    gram = np.array([[np.trace(a.T @ b) for b in basis] for a in basis])
    rhs = np.array([np.trace(a.T @ X) for a in basis])
    c = np.linalg.solve(gram, rhs)
    E = sum(ci * b for ci, b in zip(c, basis))
    return E.reshape((N,) * (2 * k))


def expected_tr_sigma(images, slots, N):
    """E tr_tau(M) where slot p is (matrix, rotated); rotated slots share one Haar U.

    tr_tau is the product over cycles (p, tau(p), ...) of tr_N(M_p M_tau(p) ...).
    """
    n = len(slots)
    L = string.ascii_letters[:n]
    rot = [p for p in range(n) if slots[p][1]]
    operands, subs = [], []
    for p in range(n):
        if not slots[p][1]:
            operands.append(np.asarray(slots[p][0], dtype=complex))
            subs.append(L[p] + L[images[p]])
    if rot:
        operands.append(haar_conjugation_mean([slots[p][0] for p in rot], N))
        subs.append("".join(L[p] for p in rot) + "".join(L[images[p]] for p in rot))
    val = np.einsum(",".join(subs) + "->", *operands)
    ncyc = len(_cycles(images))
    return complex(val) / N**ncyc


def _cycles(images):
    seen, out = set(), []
    for s in range(len(images)):
        if s in seen:
            continue
        c, i = [], s
        while i not in seen:
            seen.add(i)
            c.append(i)
            i = images[i]
        out.append(c)
    return out


def frac_solve(A, b):
    m = len(A)
    a = [[Fraction(x) for x in row] + [Fraction(b[i])] for i, row in enumerate(A)]
    for k in range(m):
        p = next(i for i in range(k, m) if a[i][k] != 0)
        a[k], a[p] = a[p], a[k]
        piv = a[k][k]
        a[k] = [x / piv for x in a[k]]
        for i in range(m):
            if i != k and a[i][k] != 0:
                f = a[i][k]
                a[i] = [x - f * y for x, y in zip(a[i], a[k])]
    return [row[m] for row in a]


# -- formal power series for free and c-free convolutions --


def moments_from_free_cumulants(kappa, kmax):
    """m_1..m_kmax from free cumulants kappa_1..kappa_kmax (exact recursion).

    m_n = sum_{s=1}^{n} kappa_s * [coefficient of z^{n-s} in M(z)^s], M(z) = sum m_j z^j, m_0 = 1.
    """
    m = [Fraction(1)]
    for n in range(1, kmax + 1):
        total = Fraction(0)
        for s in range(1, n + 1):
            total += Fraction(kappa[s - 1]) * _power_coeff(m, s, n - s)
        m.append(total)
    return m[1:]


def free_cumulants_from_moments(mom, kmax):
    kappa = []
    for n in range(1, kmax + 1):
        trial = kappa + [Fraction(0)]
        resid = Fraction(mom[n - 1]) - moments_from_free_cumulants(trial, n)[n - 1]
        kappa.append(resid)
    return kappa


def _power_coeff(m, s, d):
    """Coefficient of z^d in (sum_{j<=d} m_j z^j)^s."""
    poly = [Fraction(1)] + [Fraction(0)] * d
    base = m[: d + 1] + [Fraction(0)] * max(0, d + 1 - len(m))
    for _ in range(s):
        poly = [sum(poly[i] * base[j - i] for i in range(j + 1)) for j in range(d + 1)]
    return poly[d]


def cfree_unit_shift_moments(mu_moments, kmax):
    """Moments of 1/(z - 1 - G_mu(z)) as a series in 1/z.

    This is the c-free convolution of (delta_1, mu1) with (mu2, mu2): the
    c-free R-transforms add, the first is the constant 1 and the second is
    the free R-transform of mu2, so F_result(z) = z - 1 - R_mu2(G_mu(z))
    and, with mu2 semicircular, R_mu2(w) = w.
    """
    # work with t = 1/z; G_mu(z) = t * sum_j m_j t^j
    K = kmax + 2
    g = [Fraction(0)] + [Fraction(1)] + [Fraction(x) for x in mu_moments[: K - 2]]
    g = (g + [Fraction(0)] * K)[:K]
    # F(z) = z - 1 - G_mu  ->  t*F = 1 - t - t*G_mu ; G_result = t / (t*F)
    tf = [Fraction(0)] * K
    tf[0] = Fraction(1)
    tf[1] -= 1
    for j in range(K - 1):
        tf[j + 1] -= g[j]
    inv = [Fraction(0)] * K
    inv[0] = Fraction(1)
    for j in range(1, K):
        inv[j] = -sum(tf[i] * inv[j - i] for i in range(1, j + 1))
    return inv[1 : kmax + 1]
