"""Self-check suites run by ``freeconv check``.

Each check returns a CheckResult; a suite is a list of them. The exact suite
uses only rational arithmetic, the analytic suite compares numerical
convolutions against closed forms, and the Monte Carlo suite fits the freeness
decay exponents with seeded random matrices.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .convolve import cfree_conv, cfree_conv_G, free_conv, free_conv_G, monotone_conv, monotone_conv_G, outlier_predict
from .cumulants import (
    MatrixTuple,
    higher_order_matrices,
    kappa2g_table,
    matricial_cumulants,
    mixed_moment_exact,
    mixed_moment_expansion,
    moment_cumulant_matrix,
    trace_vector,
)
from .measures import named_measure
from .ratfunc import RationalFunctionN
from .rmt import ExperimentConfig, freeness_scaling_probe, matrix_from_measure
from .symgroup import defect_matrix, full_cycle, identity, moeb_geodesic, symmetric_group
from .weingarten import gram_matrix, moeb_series, weingarten_symbolic

__all__ = ["CheckResult", "SUITES", "run_suite"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _timed(name, fn) -> CheckResult:
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        passed, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
    return CheckResult(name, bool(passed), detail, round(time.perf_counter() - t0, 3))


# -- exact --


def _gram_identity(nmax=4):
    bad = []
    for n in range(1, nmax + 1):
        G = gram_matrix(n)
        wg = weingarten_symbolic(n)
        shapes = list(wg.values)
        for i, row in enumerate(G):
            acc = RationalFunctionN(0)
            for j, g in enumerate(row):
                acc = acc + RationalFunctionN(g) * wg.values[shapes[j]]
            if acc != RationalFunctionN(1 if i == 0 else 0):
                bad.append((n, i))
    return not bad, {"n_max": nmax, "failures": bad}


def _wg2():
    got = weingarten_symbolic(2).to_strings()
    want = {"[1,1]": "1/(N^2 - 1)", "[2]": "-1/(N^3 - N)"}
    return got == want, {"got": got}


def _example_cumulants():
    A = [[1, 0], [0, 0]]
    t = matricial_cumulants(MatrixTuple.repeat(A, 2))
    got = (t[identity(2)], t[full_cycle(2)])
    return got == (Fraction(1, 6), Fraction(1, 3)), {"kappa_id": str(got[0]), "kappa_12": str(got[1])}


def _random_int_tuple(rng, n, N):
    return MatrixTuple([rng.integers(-2, 3, size=(N, N)).astype(int) for _ in range(n)])


def _moment_cumulant(seed=0):
    rng = np.random.default_rng(seed)
    bad = []
    for n in (1, 2, 3):
        M = _random_int_tuple(rng, n, 4)
        K = moment_cumulant_matrix(n, 4, exact=True)
        kap = matricial_cumulants(M).vector
        tr = trace_vector(M)
        if any(sum(K[i, j] * kap[j] for j in range(len(kap))) != tr[i] for i in range(len(tr))):
            bad.append(n)
    return not bad, {"N": 4, "failures": bad}


def _nullity(seed=1):
    rng = np.random.default_rng(seed)
    bad = []
    for n in range(1, 5):
        M = _random_int_tuple(rng, n, 3)
        D = np.asarray(defect_matrix(n))
        kap = [kappa2g_table(M, h).vector for h in range(3)]
        for g in (1, 2):
            for i in range(len(D)):
                acc = Fraction(0)
                for j in np.nonzero(D[i] <= 2 * g)[0]:
                    acc += kap[(2 * g - int(D[i, j])) // 2][j]
                if acc != 0:
                    bad.append((n, g, i))
    return not bad, {"failures": bad[:10]}


def _integer_c(nmax=4, gmax=2):
    ok = True
    for n in range(1, nmax + 1):
        for C in higher_order_matrices(n, gmax):
            ok &= all(float(x).is_integer() for x in np.asarray(C).ravel())
    return ok, {"n_max": nmax, "g_max": gmax}


def _moeb_leading(nmax=4):
    bad = [str(s) for n in range(1, nmax + 1) for s in symmetric_group(n)
           if moeb_series(s, 0)[0] != moeb_geodesic(s)]
    return not bad, {"failures": bad}


def _mixed_example():
    A = MatrixTuple.repeat([[1, 0], [0, 0]], 2)
    B = MatrixTuple.repeat([[1, 0], [0, -1]], 2)
    exact = mixed_moment_exact(A, B)
    exp = mixed_moment_expansion(A, B, 30)
    err = abs(float(exp.partial_sums[-1] - exact))
    ok = exact == Fraction(1, 6) and exp.terms[0] == Fraction(1, 4) and all(t == Fraction(-1, 4) for t in exp.terms[1:])
    return ok and err < 1e-12, {"exact": str(exact), "series_error": err}


# -- analytic --


def _sc_sc():
    sc = named_measure("semicircle")
    m = free_conv(sc, sc)
    mo = m.moments(4)
    ok = abs(mo[1] - 2) < 1e-3 and abs(mo[3] - 8) < 1e-2
    return ok, {"m2": float(mo[1]), "m4": float(mo[3])}


def _be_be():
    be = named_measure("bernoulli")
    m = free_conv(be, be)
    mo = m.moments(4)
    x = m.grid()
    keep = np.abs(x) < 1.8
    sup = float(np.max(np.abs(m.values[keep] - 1 / (np.pi * np.sqrt(4 - x[keep] ** 2)))))
    ok = abs(mo[1] - 2) < 1e-3 and abs(mo[3] - 6) < 1e-2 and sup <= 2e-2
    return ok, {"m2": float(mo[1]), "m4": float(mo[3]), "sup_error": sup}


def _bbp():
    sc, d0 = named_measure("semicircle"), named_measure("dirac", {"theta": 0})
    pred = outlier_predict(2.0, d0, sc)
    none = outlier_predict(0.5, d0, sc)
    mono = monotone_conv(named_measure("dirac", {"theta": 2}), sc)
    atom = [w for a, w in mono.atoms if abs(a - 2.5) < 1e-3]
    ok = (len(pred) == 1 and abs(pred[0][0] - 2.5) < 1e-8 and abs(pred[0][1] - 0.75) < 1e-6 and not none
          and len(atom) == 1 and abs(atom[0] - 0.75) < 0.02)
    return ok, {"predicted": pred, "theta_half": none, "monotone_atom": atom}


def _cfree_reductions():
    sc, be = named_measure("semicircle"), named_measure("bernoulli")
    d0, d2 = named_measure("dirac", {"theta": 0}), named_measure("dirac", {"theta": 2})
    z = np.array([0.3 + 0.5j, -1.1 + 0.2j, 2.7 + 0.05j])
    e1 = float(np.max(np.abs(cfree_conv_G(be, sc, be, sc, z) - free_conv_G(be, sc, z))))
    e2 = float(np.max(np.abs(cfree_conv_G(d2, sc, d0, sc, z) - monotone_conv_G(d2, sc, z))))
    return max(e1, e2) < 1e-9, {"nu_equals_mu": e1, "monotone_case": e2}


def _cfree_moments():
    sc, be = named_measure("semicircle"), named_measure("bernoulli")
    m = cfree_conv(named_measure("dirac", {"theta": 1}), sc, be, sc)
    mo = m.moments(6)
    want = np.array([1, 2, 3, 7, 12, 30], dtype=float)
    err = float(np.max(np.abs(mo - want)))
    return err < 1e-3, {"moments": mo.tolist(), "max_error": err}


# -- monte carlo --


def _bernoulli_diag(N):
    return np.diag(matrix_from_measure(named_measure("bernoulli"), N, diagonal_only=True)).astype(int)


def _unitary_scaling(seed, threads=None):
    cfg = ExperimentConfig(dims=[8, 16, 32, 64], trials=1, seed=seed, word="XYXY")
    r = freeness_scaling_probe(cfg, _bernoulli_diag, _bernoulli_diag, threads)
    scaled = [v * N**2 for v, N in zip(r.values, r.dims)]
    ok = abs(r.exponent + 2) <= 0.3 and max(scaled) / min(scaled) <= 1.5
    return ok, {"exponent": r.exponent, "N2_times_distance": scaled}


def _orthogonal_scaling(seed, trials=4000, threads=None):
    cfg = ExperimentConfig(dims=[64, 128, 256], trials=trials, seed=seed, word="XYXY", ensemble="haar-orthogonal")
    r = freeness_scaling_probe(cfg, _bernoulli_diag, _bernoulli_diag, threads)
    cfg_u = ExperimentConfig(dims=[64, 128, 256], trials=1, seed=seed, word="XYXY")
    ru = freeness_scaling_probe(cfg_u, _bernoulli_diag, _bernoulli_diag)
    ok = abs(r.exponent + 1) <= 0.5 and abs(r.exponent - ru.exponent) >= 0.5
    return ok, {"seed": seed, "trials": trials, "exponent": r.exponent, "unitary_exponent": ru.exponent,
                "distances": r.values, "stderr": r.stderr, "flagged": r.flagged}


SUITES = {
    "exact": [
        ("gram_times_weingarten_is_identity", _gram_identity),
        ("weingarten_n2_closed_form", _wg2),
        ("matricial_cumulants_worked_example", _example_cumulants),
        ("moment_cumulant_relation", _moment_cumulant),
        ("higher_cumulant_nullity", _nullity),
        ("higher_order_matrices_are_integer", _integer_c),
        ("moebius_series_leading_term", _moeb_leading),
        ("mixed_moment_example_and_series", _mixed_example),
    ],
    "analytic": [
        ("semicircle_boxplus_semicircle", _sc_sc),
        ("bernoulli_boxplus_bernoulli", _be_be),
        ("spiked_semicircle_closed_forms", _bbp),
        ("cfree_reductions", _cfree_reductions),
        ("cfree_dirac_bernoulli_moments", _cfree_moments),
    ],
    "montecarlo": [
        ("unitary_freeness_order_N^-2", _unitary_scaling),
        ("orthogonal_freeness_order_N^-1", _orthogonal_scaling),
    ],
}


def run_suite(name: str, seed: int = 7, threads: int | None = None) -> dict:
    """Run one suite (or ``all``) and return a JSON-ready report."""
    names = list(SUITES) if name == "all" else [name]
    for n in names:
        if n not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {list(SUITES) + ['all']}")
    results = []
    for n in names:
        for check, fn in SUITES[n]:
            call = (lambda f=fn: f(seed, threads=threads)) if n == "montecarlo" else fn
            r = _timed(check, call)
            r.detail.setdefault("suite", n)
            results.append(r)
    report = {"suite": name, "passed": all(r.passed for r in results),
              "checks": [r.to_dict() for r in results]}
    if "montecarlo" in names:
        report["seed"] = seed
    return report

