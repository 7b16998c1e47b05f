"""Subordination functions, free / monotone / conditionally free convolutions and outlier prediction."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .measures import SpectralMeasure, make_grid

__all__ = [
    "SubordinationResult",
    "ConvergenceError",
    "subordinate",
    "subordinate_many",
    "free_conv_G",
    "monotone_conv_G",
    "cfree_conv_G",
    "free_conv",
    "monotone_conv",
    "cfree_conv",
    "measure_from_transform",
    "support_of_free_conv",
    "omega_real",
    "omega_real_derivative",
    "outlier_predict",
]

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 500
SUPPORT_EPS = 1e-8
SUPPORT_THRESHOLD = 1e-4
FAIL_FRACTION = 0.01


class ConvergenceError(RuntimeError):
    """Raised when too many subordination solves fail."""


@dataclass
class SubordinationResult:
    """Subordination values at z (scalars, or arrays for vectorised calls)."""

    z: complex
    omega1: complex
    omega2: complex
    Fvalue: complex
    iterations: int
    residual: float
    converged: bool = True
    info: dict = field(default_factory=dict)


def _T(m1, m2, z, w):
    """w -> z + h2(z + h1(w)) with h_j = F_j - id; also returns omega2 = z + h1(w)."""
    f1 = m1.F(w)
    om2 = z + f1 - w
    return z + m2.F(om2) - om2, om2, f1


def _solve_level(m1, m2, z, w, tol, max_iter):
    """Newton-accelerated fixed-point solve at fixed z, warm started at w."""
    w = w.copy()
    iters = np.zeros(z.shape, dtype=int)
    Tw, om2, _ = _T(m1, m2, z, w)
    R = Tw - w
    # rounding in T grows with the size of the intermediate omega_2
    size = np.maximum(1.0, np.maximum(np.abs(w), np.abs(om2)))
    active = np.abs(R) > tol * size
    for _ in range(max_iter):
        if not active.any():
            break
        za, wa, Ra, Ta = z[active], w[active], R[active], Tw[active]
        delta = 1j * 1e-7 * np.maximum(1.0, np.abs(wa))
        Td, _, _ = _T(m1, m2, za, wa + delta)
        dT = (Td - Ta) / delta
        with np.errstate(divide="ignore", invalid="ignore"):
            wn = wa - Ra / (dT - 1.0)
        ok = np.isfinite(wn)
        wn = np.where(ok, wn, Ta)
        Tn, om2n, _ = _T(m1, m2, za, wn)
        Rn = Tn - wn
        floor = za.imag * (1 - 1e-9)
        good = ok & np.isfinite(Rn) & (wn.imag >= floor) & (om2n.imag >= floor) & (np.abs(Rn) < np.abs(Ra))
        # rejected Newton steps fall back to one plain iteration, which stays in the half-plane
        wp = Ta
        Tp, om2p, _ = _T(m1, m2, za, wp)
        w_new = np.where(good, wn, wp)
        T_new = np.where(good, Tn, Tp)
        w[active] = w_new
        Tw[active] = T_new
        R[active] = T_new - w_new
        size[active] = np.maximum(1.0, np.maximum(np.abs(w_new), np.abs(np.where(good, om2n, om2p))))
        iters[active] += 1
        active = np.abs(R) > tol * size
    return w, iters, np.abs(R), ~active


def subordinate_many(m1: SpectralMeasure, m2: SpectralMeasure, z, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> SubordinationResult:
    """Vectorised subordination solve for an array of z with Im z > 0.

    The imaginary part is walked down from 1 through powers of ten to Im z, each
    level warm-starting the next; the first level starts at w = z.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag <= 0):
        raise ValueError("subordination needs Im z > 0")
    w = None
    total = np.zeros(z.shape, dtype=int)
    levels = [10.0 ** (-k) for k in range(0, 16)]
    ymin = float(z.imag.min())
    ladder = [y for y in levels if y > ymin] + [None]
    for y in ladder:
        zl = z if y is None else z.real + 1j * np.maximum(z.imag, y)
        if w is None:
            w = zl.copy()
        w, it, res, conv = _solve_level(m1, m2, zl, w, tol, max_iter)
        total += it
    f1 = m1.F(w)
    om2 = z + f1 - w
    res = np.abs(m1.F(w) - m2.F(om2))
    return SubordinationResult(z, w, om2, f1, total, res, conv)


def subordinate(m1: SpectralMeasure, m2: SpectralMeasure, z: complex, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> SubordinationResult:
    """omega_1, omega_2 and F_{m1 boxplus m2} at one point z.

    ``converged`` is False when ``max_iter`` was exhausted; the best iterate is returned.
    """
    r = subordinate_many(m1, m2, [z], tol, max_iter)
    return SubordinationResult(complex(r.z[0]), complex(r.omega1[0]), complex(r.omega2[0]),
                               complex(r.Fvalue[0]), int(r.iterations[0]), float(r.residual[0]),
                               bool(r.converged[0]))


def _check_failures(conv: np.ndarray):
    bad = int(np.count_nonzero(~conv))
    if bad > FAIL_FRACTION * conv.size:
        raise ConvergenceError(f"subordination failed at {bad} of {conv.size} points")


def free_conv_G(m1, m2, z, tol=DEFAULT_TOL):
    r = subordinate_many(m1, m2, z, tol)
    _check_failures(r.converged)
    return 1.0 / r.Fvalue


def monotone_conv_G(m1, m2, z):
    z = np.asarray(z, dtype=complex)
    return m1.G(m2.F(z))


def cfree_conv_G(n1, n2, m1, m2, z, tol=DEFAULT_TOL):
    r = subordinate_many(m1, m2, z, tol)
    _check_failures(r.converged)
    if n2 is m2:
        return n1.G(r.omega1)
    F = n1.F(r.omega1) + n2.F(r.omega2) - r.Fvalue
    return 1.0 / F


# -- turning a transform into a measure --


def _neville_at_zero(xs, ys):
    """Value at 0 of the interpolating polynomial through (xs, ys)."""
    p = [complex(y) for y in ys]
    xs = list(xs)
    n = len(xs)
    for k in range(1, n):
        for i in range(n - k):
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i])
    return p[0]


def _golden_max(f, a, b, tol):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (a + b) / 2


ATOM_EPS = (1e-2, 1e-3, 1e-4)
MISSING_MASS_WARN = 1e-3


def _detect_atoms(Gfun, x: np.ndarray, min_mass: float = 1e-6):
    """Atoms of the measure whose Cauchy transform is Gfun.

    Candidates are local maxima of eps |Im G(x + i eps)| with eps of two grid
    steps; each is refined at a small eps and accepted if eps * (-Im G) tends to
    a positive limit over ATOM_EPS (within 2%). The mass is the extrapolated limit.
    """
    h = x[1] - x[0]
    eps_det = 2 * h
    score = -eps_det * np.asarray(Gfun(x + 1j * eps_det)).imag
    peaks = np.flatnonzero((score[1:-1] > score[:-2]) & (score[1:-1] >= score[2:])) + 1
    peaks = [k for k in peaks if score[k] > 0.5 * min_mass and score[k] > 1e-3]
    atoms = []
    for k in peaks:
        fine = 1e-7
        loc = _golden_max(lambda t: float(-np.asarray(Gfun(np.array([t + 1j * fine])))[0].imag),
                          x[k] - 2 * h, x[k] + 2 * h, 1e-11)
        zs = np.array([loc + 1j * e for e in ATOM_EPS])
        vals = (1j * np.array(ATOM_EPS) * np.asarray(Gfun(zs))).real
        if vals[-1] <= 0 or abs(vals[-1] - vals[-2]) > 0.02 * vals[-1]:
            continue
        mass = _neville_at_zero(ATOM_EPS, vals).real
        if mass > min_mass:
            atoms.append((loc, mass))
    return atoms


def _cell_averages(f, lo: np.ndarray, hi: np.ndarray, nodes: int = 8, max_depth: int = 40,
                   rtol: float = 1e-7, atol: float = 1e-9, min_width: float = 0.0) -> np.ndarray:
    """Average of f over each [lo, hi] by adaptive Gauss-Legendre bisection.

    A panel is accepted when the ``nodes``-point and ``nodes // 2``-point rules
    agree, or when it is narrower than ``min_width``; otherwise it is halved.
    Panels from all cells are evaluated together, and once more than
    ``20 * cells`` panels would be pending every panel is accepted.
    """
    u8, w8 = np.polynomial.legendre.leggauss(nodes)
    u4, w4 = np.polynomial.legendre.leggauss(max(2, nodes // 2))
    total = np.zeros(lo.size)
    owner = np.arange(lo.size)
    a, b = lo.astype(float), hi.astype(float)
    max_panels = 20 * lo.size
    for depth in range(max_depth + 1):
        if a.size == 0:
            break
        mid, half = (a + b) / 2, (b - a) / 2
        pts = np.concatenate([(mid[:, None] + half[:, None] * u8).ravel(),
                              (mid[:, None] + half[:, None] * u4).ravel()])
        vals = np.asarray(f(pts), dtype=float)
        v8 = vals[: a.size * u8.size].reshape(a.size, -1) @ w8 * half
        v4 = vals[a.size * u8.size:].reshape(a.size, -1) @ w4 * half
        # absolute floor per unit length sits above the solver's rounding noise
        ok = np.abs(v8 - v4) <= rtol * np.abs(v8) + atol * (b - a)
        ok |= ~np.isfinite(v8) | (b - a < min_width)
        if depth == max_depth or 2 * np.count_nonzero(~ok) > max_panels:
            ok[:] = True
        np.add.at(total, owner[ok], v8[ok])
        bad = ~ok
        a, b, owner = (np.concatenate([a[bad], mid[bad]]), np.concatenate([mid[bad], b[bad]]),
                       np.concatenate([owner[bad], owner[bad]]))
    if not np.all(np.isfinite(total)):
        raise ConvergenceError("non-finite transform values while integrating the density")
    return total / (hi - lo)


def measure_from_transform(Gfun, grid, epsilon: float, threshold: float = SUPPORT_THRESHOLD,
                           nodes: int = 8) -> SpectralMeasure:
    """Atoms plus density from a Cauchy transform sampled above a grid.

    Each density value is the average of -Im G(t + i eps)/pi over the grid cell
    centred at the node (adaptive Gauss-Legendre), so integrable
    edge singularities keep their mass. The atoms' Poisson kernels are removed,
    the result is clipped at zero, cut below ``threshold`` and rescaled to the
    mass left by the atoms.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = make_grid(grid)
    h = x[1] - x[0]
    atoms = _detect_atoms(Gfun, x)
    # features narrower than a fraction of eps are smoothing artefacts or solver noise
    dens = _cell_averages(lambda t: -np.asarray(Gfun(t + 1j * epsilon)).imag / np.pi, x - h / 2, x + h / 2, nodes,
                          min_width=epsilon / 8)
    lo, hi = x - h / 2, x + h / 2
    for a, w in atoms:
        dens -= w * (np.arctan((hi - a) / epsilon) - np.arctan((lo - a) / epsilon)) / (np.pi * h)
    dens = np.where(dens > threshold, dens, 0.0)
    atom_mass = sum(w for _, w in atoms)
    if atom_mass > 1 + 1e-6:
        raise ConvergenceError(f"detected atoms carry mass {atom_mass:.6g} > 1")
    dm = float(np.trapezoid(dens, x))
    missing = 1.0 - atom_mass - dm
    if missing > MISSING_MASS_WARN:
        warnings.warn(f"grid [{x[0]:.4g}, {x[-1]:.4g}] recovers only {dm + atom_mass:.6g} of the mass; "
                      "the density is rescaled, widen the grid", RuntimeWarning, stacklevel=3)
    if dm > 0 and atom_mass < 1 - 1e-12:
        dens *= (1.0 - atom_mass) / dm
        m = SpectralMeasure(atoms=atoms, density=(x[0], x[-1], dens))
    elif atoms:
        m = SpectralMeasure(atoms=atoms, normalize=True)
    else:
        raise ConvergenceError("no mass recovered on the grid; widen the grid")
    m.info = {"epsilon": epsilon, "grid": (float(x[0]), float(x[-1]), x.size), "missing_mass": max(missing, 0.0)}
    return m


def _default_grid(*pairs, points=2000):
    lo = sum(p[0] for p in pairs)
    hi = sum(p[1] for p in pairs)
    pad = 0.1 * (hi - lo) + 0.5
    return (lo - pad, hi + pad, points)


def free_conv(m1: SpectralMeasure, m2: SpectralMeasure, grid=None, epsilon: float = 1e-6) -> SpectralMeasure:
    """m1 boxplus m2: F = F_{m1}(omega_1), inverted on the grid at height epsilon."""
    grid = grid if grid is not None else _default_grid(m1.support_hull(), m2.support_hull())
    return measure_from_transform(lambda z: free_conv_G(m1, m2, z), grid, epsilon)


def monotone_conv(m1: SpectralMeasure, m2: SpectralMeasure, grid=None, epsilon: float = 1e-6) -> SpectralMeasure:
    """m1 |> m2: G = G_{m1}(F_{m2}(z))."""
    if grid is None:
        # the support lies in supp(m2) plus the points where F_{m2} hits supp(m1);
        # F_{m2}(x) >= x - hi2 right of supp(m2) (and <= x - lo2 left of it)
        (a1, b1), (a2, b2) = m1.support_hull(), m2.support_hull()
        lo, hi, n = _default_grid((min(a1, 0.0), max(b1, 0.0)), (a2, b2))
        grid = (min(lo, a1 + a2 - 0.5), max(hi, b1 + b2 + 0.5), n)
    return measure_from_transform(lambda z: monotone_conv_G(m1, m2, z), grid, epsilon)


def cfree_conv(n1, n2, m1, m2, grid=None, epsilon: float = 1e-6) -> SpectralMeasure:
    """Conditionally free convolution of (n1, m1) and (n2, m2).

    F = F_{n1}(omega_1) + F_{n2}(omega_2) - F_{m1 boxplus m2}; when ``n2 is m2``
    this is evaluated as G = G_{n1}(omega_1).
    """
    if grid is None:
        h1 = (min(n1.support_hull()[0], m1.support_hull()[0]), max(n1.support_hull()[1], m1.support_hull()[1]))
        h2 = (min(n2.support_hull()[0], m2.support_hull()[0]), max(n2.support_hull()[1], m2.support_hull()[1]))
        grid = _default_grid(h1, h2)
    return measure_from_transform(lambda z: cfree_conv_G(n1, n2, m1, m2, z), grid, epsilon)


# -- real-axis behaviour and outliers --


def support_of_free_conv(m1, m2, grid=None, margin: float = 1e-3) -> list[tuple[float, float]]:
    """Support intervals of m1 boxplus m2 detected at height SUPPORT_EPS, dilated by ``margin``."""
    grid = grid if grid is not None else _default_grid(m1.support_hull(), m2.support_hull(), points=4000)
    x = make_grid(grid)
    G = free_conv_G(m1, m2, x + 1j * SUPPORT_EPS)
    on = -G.imag / np.pi > SUPPORT_THRESHOLD
    ivs = []
    idx = np.flatnonzero(np.diff(np.concatenate(([0], on.astype(int), [0]))))
    h = x[1] - x[0]
    for lo, hi in zip(idx[::2], idx[1::2]):
        ivs.append((float(x[lo] - h - margin), float(x[hi - 1] + h + margin)))
    # atoms of the convolution are isolated points of the support
    for a, _ in _detect_atoms(lambda z: free_conv_G(m1, m2, z), x):
        ivs.append((a - margin, a + margin))
    ivs.sort()
    merged = []
    for a, b in ivs:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


OMEGA_EPS = (1e-2, 1e-3, 1e-4, 1e-5)


def _T_real(m1, m2, x, w):
    f1 = m1.F(w)
    om2 = x + f1 - w
    return x + m2.F(om2) - om2


def _polish_real(m1, m2, x: float, w0: float, tol: float = 1e-14) -> float:
    """Newton on the real fixed-point equation, derivative by the complex step."""
    w = float(w0)
    scale = max(1.0, abs(w))
    for _ in range(60):
        t = _T_real(m1, m2, x, np.array([w + 1e-30j]))[0]
        r = t.real - w
        d = t.imag / 1e-30 - 1.0
        if d == 0 or not math.isfinite(d):
            break
        step = r / d
        w -= step
        if abs(step) <= tol * scale:
            break
    return w


def omega_real(m1: SpectralMeasure, m2: SpectralMeasure, x: float, side: str = "upper") -> float:
    """Boundary value of omega_1 at a real x off the support of m1 boxplus m2.

    omega_1(x + i eps) is computed for eps in OMEGA_EPS, extrapolated to eps = 0
    and then polished by Newton's method on the real fixed-point equation.
    ``side`` selects the half-plane of approach; both give the same real value.
    """
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    x = float(x)
    zs = np.array([x + 1j * e for e in OMEGA_EPS])
    r = subordinate_many(m1, m2, zs)
    vals = r.omega1
    if not np.all(r.converged):
        raise ConvergenceError(f"subordination did not converge near x={x}")
    diffs = np.abs(np.diff(vals))
    if np.any(diffs[1:] > diffs[:-1] * (1 + 1e-6) + 1e-13):
        raise ValueError(f"extrapolation in eps is not monotone at x={x}; is x inside the support?")
    w0 = _neville_at_zero(OMEGA_EPS, vals)
    if abs(w0.imag) > 1e-8:
        raise ValueError(f"x={x} lies inside the support (Im omega_1 = {w0.imag:.3g})")
    w = _polish_real(m1, m2, x, w0.real)
    if abs(w - w0.real) > 1e-6 * max(1.0, abs(w)):
        raise ValueError(f"real polish moved omega_1 from {w0.real} to {w} at x={x}")
    return w


def omega_real_derivative(m1, m2, x: float, w_hint: float | None = None) -> float:
    """omega_1'(x) off the support, by implicit differentiation of w = T(x, w).

    Both partial derivatives of T come from the complex step, so the result is
    accurate to rounding: omega_1' = T_x / (1 - T_w).
    """
    x = float(x)
    w = omega_real(m1, m2, x) if w_hint is None else _polish_real(m1, m2, x, w_hint)
    h = 1e-30
    t_w = _T_real(m1, m2, x, np.array([w + 1j * h]))[0].imag / h
    t_x = _T_real(m1, m2, np.array([x + 1j * h]), np.array([w + 0j]))[0].imag / h
    return float(t_x / (1.0 - t_w))


def _scan_omega(m1, m2, xs: np.ndarray) -> np.ndarray:
    r = subordinate_many(m1, m2, xs + 1j * SUPPORT_EPS)
    return r.omega1.real


def outlier_predict(theta: float, m1: SpectralMeasure, m2: SpectralMeasure, scan_points: int = 10_000,
                    min_width: float = 1e-3, margin: float = 1e-3) -> list[tuple[float, float]]:
    """All rho off the support of m1 boxplus m2 with omega_1(rho) = theta, with overlaps 1/omega_1'(rho).

    Each complement interval of the support (inside the range where an outlier
    can live) is scanned at ``scan_points`` points; sign changes of
    omega_1 - theta are refined with brentq and checked, so brackets that
    straddle a pole are discarded.
    """
    theta = float(theta)
    for a, b in m1.support_intervals():
        if a - 1e-12 <= theta <= b + 1e-12:
            raise ValueError(f"theta={theta} lies in the support of m1")
    a1, b1 = m1.support_hull()
    a2, b2 = m2.support_hull()
    lo = min(a1, theta) + a2 - 0.5
    hi = max(b1, theta) + b2 + 0.5
    supp = support_of_free_conv(m1, m2, margin=margin)
    pieces, cur = [], lo
    for a, b in supp:
        if a > cur:
            pieces.append((cur, min(a, hi)))
        cur = max(cur, b)
    if cur < hi:
        pieces.append((cur, hi))
    pieces = [(a, b) for a, b in pieces if b - a >= min_width]
    out = []
    for a, b in pieces:
        xs = np.linspace(a, b, scan_points)
        f = _scan_omega(m1, m2, xs) - theta
        sign = np.sign(f)
        for k in np.flatnonzero(sign[:-1] * sign[1:] < 0):
            xa, xb = xs[k], xs[k + 1]
            g = lambda t: omega_real(m1, m2, t) - theta
            try:
                fa, fb = g(xa), g(xb)
            except ValueError:
                continue
            if fa * fb > 0:
                continue
            rho = brentq(g, xa, xb, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
            if abs(g(rho)) > 1e-8 * max(1.0, abs(theta)):
                continue  # a pole, not a root
            der = omega_real_derivative(m1, m2, rho, w_hint=theta)
            if der <= 0 or not math.isfinite(der):
                continue
            out.append((float(rho), float(1.0 / der)))
        for k in np.flatnonzero(f == 0):
            rho = float(xs[k])
            der = omega_real_derivative(m1, m2, rho, w_hint=theta)
            out.append((rho, float(1.0 / der)))
    return sorted(out)
