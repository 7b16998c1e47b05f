"""Exact Weingarten values, matricial cumulants and the 1/N^2 expansion of a
mixed moment, all in rational arithmetic.

Run:  python3 demos/exact_tables.py
"""

from fractions import Fraction

from freeconv import (
    MatrixTuple,
    identity,
    full_cycle,
    matricial_cumulants,
    mixed_moment_exact,
    mixed_moment_expansion,
    symbolic_cumulant,
    weingarten_symbolic,
    weingarten_value,
)

# Weingarten function on S_2, S_3 as rational functions of N
for n in (2, 3):
    print(f"Wg on S_{n}:")
    for shape, f in weingarten_symbolic(n).to_strings().items():
        print(f"  {shape:10s} {f}")
print("Wg((1 2), N=4) =", weingarten_value(full_cycle(2), 4))

# kappa^N_sigma for n = 2, as rational functions times tr_tau
for s in (identity(2), full_cycle(2)):
    terms = " + ".join(f"[{c}] tr_{t}" for t, c in symbolic_cumulant(s).items())
    print(f"kappa_{s} = {terms}")

A = MatrixTuple.repeat([[1, 0], [0, 0]], 2)
B = MatrixTuple.repeat([[1, 0], [0, -1]], 2)
kap = matricial_cumulants(A)
print("A = diag(1, 0):  kappa_id =", kap[identity(2)], " kappa_(1 2) =", kap[full_cycle(2)])

# E tr((A U B U*)^2) exactly, then through the genus expansion
exact = mixed_moment_exact(A, B)
exp = mixed_moment_expansion(A, B, 12)
print("E tr((AUBU*)^2) =", exact)
for g, (t, s) in enumerate(zip(exp.terms, exp.partial_sums)):
    print(f"  g={g:2d}  tau*_g = {str(t):5s}  partial sum = {float(s):.15f}")
# the dropped tail is -1/4 * sum_{g>12} 4^-g = -4^-12 / 12
print("partial sum - exact:", float(exp.partial_sums[-1] - exact), " 4^-12/12 =", float(Fraction(1, 12) / 4**12))
