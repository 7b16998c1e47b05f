"""Probability measures on the line as atoms plus a gridded density, and their Cauchy transforms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "SpectralMeasure",
    "CauchyEvaluation",
    "cauchy",
    "stieltjes_invert",
    "esd",
    "vesd",
    "named_measure",
    "parse_measure_literal",
    "make_grid",
    "MIN_GRID",
    "DEFAULT_GRID",
]

MIN_GRID = 64
DEFAULT_GRID = 2000
MERGE_REL = 1e-8
SELF_ADJOINT_TOL = 1e-10


def make_grid(spec) -> np.ndarray:
    """Uniform grid from ``(a, b, n)``, ``"a:b:n"`` or an explicit array."""
    if isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must look like a:b:n, got {spec!r}")
        spec = (float(parts[0]), float(parts[1]), int(parts[2]))
    if isinstance(spec, tuple) and len(spec) == 3 and not isinstance(spec[2], float):
        a, b, n = spec
        if not b > a:
            raise ValueError("grid needs max > min")
        return np.linspace(float(a), float(b), int(n))
    arr = np.asarray(spec, dtype=float)
    if arr.ndim != 1 or arr.size < 2 or np.any(np.diff(arr) <= 0):
        raise ValueError("grid must be strictly increasing")
    return arr


class SpectralMeasure:
    """Atoms ``(location, mass)`` plus an optional density on a uniform grid.

    Parameters
    ----------
    atoms : iterable of (float, float), optional
        Point masses. Non-positive masses are rejected.
    density : tuple (min, max, values), optional
        Density samples on ``linspace(min, max, len(values))``; at least 64 points.
    transform : callable, optional
        Closed-form Cauchy transform, used in place of quadrature when present.
    normalize : bool
        Rescale the density so the total mass is one.
    """

    def __init__(self, atoms=(), density=None, transform: Callable | None = None,
                 normalize: bool = False, name: str | None = None, moments: dict | None = None):
        locs, masses = [], []
        for loc, mass in atoms:
            loc, mass = float(loc), float(mass)
            if not mass > 0 or not math.isfinite(loc):
                raise ValueError(f"invalid atom ({loc}, {mass})")
            locs.append(loc)
            masses.append(mass)
        order = np.argsort(locs, kind="stable")
        self.atom_locs = np.asarray(locs, dtype=float)[order]
        self.atom_masses = np.asarray(masses, dtype=float)[order]
        self.grid_min = self.grid_max = None
        self.values = None
        if density is not None:
            a, b, vals = density
            vals = np.asarray(vals, dtype=float)
            if vals.ndim != 1 or vals.size < MIN_GRID:
                raise ValueError(f"density grid needs at least {MIN_GRID} points")
            if not float(b) > float(a):
                raise ValueError("density grid must be strictly increasing")
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValueError("density values must be finite and non-negative")
            self.grid_min, self.grid_max, self.values = float(a), float(b), vals
        self.transform = transform
        self.name = name
        self.analytic_moments = dict(moments or {})
        if normalize:
            self._normalize()

    # -- basic structure --

    @property
    def has_density(self) -> bool:
        return self.values is not None

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.atom_locs.tolist(), self.atom_masses.tolist()))

    def grid(self) -> np.ndarray:
        if self.values is None:
            return np.empty(0)
        return np.linspace(self.grid_min, self.grid_max, self.values.size)

    def density_mass(self) -> float:
        if self.values is None:
            return 0.0
        return float(np.trapezoid(self.values, self.grid()))

    def total_mass(self) -> float:
        return float(self.atom_masses.sum()) + self.density_mass()

    def _normalize(self):
        atom_mass = float(self.atom_masses.sum())
        dens = self.density_mass()
        if self.values is None or dens <= 0:
            if atom_mass <= 0:
                raise ValueError("cannot normalise a zero measure")
            self.atom_masses = self.atom_masses / atom_mass
            return
        if atom_mass >= 1:
            raise ValueError("atoms already carry all the mass")
        self.values = self.values * ((1.0 - atom_mass) / dens)

    def density_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.values is None:
            return np.zeros_like(x)
        return np.interp(x, self.grid(), self.values, left=0.0, right=0.0)

    def moment(self, k: int) -> float:
        """k-th moment: exact on atoms, trapezoid rule on the density."""
        out = float(np.sum(self.atom_masses * self.atom_locs**k))
        if self.values is not None:
            x = self.grid()
            out += float(np.trapezoid(self.values * x**k, x))
        return out

    def moments(self, kmax: int) -> np.ndarray:
        return np.array([self.moment(k) for k in range(1, kmax + 1)])

    def support_intervals(self, threshold: float = 1e-4) -> list[tuple[float, float]]:
        """Closed intervals where the density exceeds ``threshold``, plus the atoms."""
        out = []
        if self.values is not None:
            x = self.grid()
            on = self.values > threshold
            idx = np.flatnonzero(np.diff(np.concatenate(([0], on.astype(int), [0]))))
            for lo, hi in zip(idx[::2], idx[1::2]):
                out.append((float(x[lo]), float(x[hi - 1])))
        out.extend((float(a), float(a)) for a in self.atom_locs)
        return _merge_intervals(out)

    def support_hull(self) -> tuple[float, float]:
        pts = list(self.atom_locs)
        if self.values is not None and np.any(self.values > 0):
            x = self.grid()[self.values > 0]
            pts += [x[0], x[-1]]
        return float(min(pts)), float(max(pts))

    # -- transforms --

    def G(self, z):
        """Cauchy transform; vectorised over z."""
        z = np.asarray(z, dtype=complex)
        if self.transform is not None:
            return np.asarray(self.transform(z), dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for loc, mass in zip(self.atom_locs, self.atom_masses):
            out += mass / (z - loc)
        if self.values is not None:
            out += _piecewise_linear_cauchy(z, self.grid(), self.values)
        return out

    def F(self, z):
        return 1.0 / self.G(z)

    # -- quantiles --

    def quantile(self, p) -> np.ndarray:
        """Generalised inverse of the distribution function, inf{x : F(x) >= p}."""
        xs, fs = self._cdf_breakpoints()
        p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0) * fs[-1]
        i = np.searchsorted(fs, p, side="left")
        i = np.clip(i, 1, len(xs) - 1)
        f0, f1 = fs[i - 1], fs[i]
        x0, x1 = xs[i - 1], xs[i]
        t = np.where(f1 > f0, (p - f0) / np.where(f1 > f0, f1 - f0, 1.0), 1.0)
        return x0 + t * (x1 - x0)

    def _cdf_breakpoints(self):
        pts = set(self.atom_locs.tolist())
        if self.values is not None:
            x = self.grid()
            cum = np.concatenate(([0.0], np.cumsum(np.diff(x) * (self.values[1:] + self.values[:-1]) / 2)))
            pts.update(x.tolist())
        else:
            x = cum = None
        xs_sorted = np.array(sorted(pts))
        cont = np.interp(xs_sorted, x, cum) if x is not None else np.zeros_like(xs_sorted)
        cum_atoms = np.concatenate(([0.0], np.cumsum(self.atom_masses)))
        left = cum_atoms[np.searchsorted(self.atom_locs, xs_sorted, side="left")]
        right = cum_atoms[np.searchsorted(self.atom_locs, xs_sorted, side="right")]
        xs = np.repeat(xs_sorted, 2)
        fs = np.empty_like(xs)
        fs[0::2] = cont + left
        fs[1::2] = cont + right
        return xs, np.maximum.accumulate(fs)

    # -- serialisation --

    def to_dict(self, digits: int = 12) -> dict:
        def r(x):
            return float(format(float(x), f".{digits}g"))

        out = {"atoms": [[r(a), r(w)] for a, w in self.atoms]}
        if self.values is not None:
            out["density"] = {"min": r(self.grid_min), "max": r(self.grid_max),
                              "values": [r(v) for v in self.values]}
        return out

    def to_json(self, digits: int = 12) -> str:
        return json.dumps(self.to_dict(digits))

    @classmethod
    def from_dict(cls, data: dict) -> SpectralMeasure:
        if not isinstance(data, dict) or "atoms" not in data and "density" not in data:
            raise ValueError("measure JSON needs 'atoms' and/or 'density'")
        dens = data.get("density")
        density = None
        if dens is not None:
            density = (dens["min"], dens["max"], dens["values"])
        return cls(atoms=[tuple(a) for a in data.get("atoms", [])], density=density)

    @classmethod
    def from_json(cls, text: str) -> SpectralMeasure:
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        d = f", density on [{self.grid_min:g}, {self.grid_max:g}] x {self.values.size}" if self.has_density else ""
        label = f"{self.name}: " if self.name else ""
        return f"SpectralMeasure({label}{len(self.atom_locs)} atoms{d})"


def _merge_intervals(ivs):
    ivs = sorted(ivs)
    out = []
    for a, b in ivs:
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _piecewise_linear_cauchy(z: np.ndarray, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Integral of rho/(z - t) with rho linear between grid points, done exactly per cell."""
    zf = z.reshape(-1, 1)
    h = np.diff(x)
    slope = np.diff(rho) / h
    x0, x1 = x[:-1], x[1:]
    # log((z - x0)/(z - x1)) written as log1p for accuracy far from the cell
    logr = np.log1p(h / (zf - x1))
    vals = (rho[:-1] + slope * (zf - x0)) * logr - slope * h
    return vals.sum(axis=1).reshape(z.shape)


@dataclass(frozen=True)
class CauchyEvaluation:
    z: complex
    G: complex
    F: complex


def cauchy(m: SpectralMeasure, z) -> CauchyEvaluation:
    """G and F of ``m`` at ``z`` (Im z > 0, or real z off the support)."""
    zc = np.asarray(z, dtype=complex)
    if np.any(zc.imag < 0):
        raise ValueError("z must lie in the closed upper half-plane")
    real = zc.imag == 0
    if np.any(real):
        for x in np.atleast_1d(zc.real[real]):
            if _on_support(m, float(x)):
                raise ValueError(f"real z={x} lies on the support of the measure")
    with np.errstate(divide="ignore", invalid="ignore"):
        G = m.G(zc)
        F = np.where(G != 0, 1.0 / np.where(G != 0, G, 1), np.inf)
    if zc.ndim == 0:
        return CauchyEvaluation(complex(zc), complex(G), complex(F))
    return CauchyEvaluation(zc, G, F)


def _on_support(m: SpectralMeasure, x: float) -> bool:
    if np.any(np.isclose(m.atom_locs, x, rtol=0, atol=1e-12)):
        return True
    if m.values is not None:
        if m.grid_min <= x <= m.grid_max and m.density_at(x) > 0:
            return True
        if m.grid_min < x < m.grid_max:
            # inside a zero stretch only if both neighbours vanish
            g = m.grid()
            k = int(np.searchsorted(g, x))
            return bool(m.values[k - 1] > 0 or m.values[k] > 0)
    return False


def stieltjes_invert(g_values: Callable, grid, epsilon: float, normalize: bool = False) -> SpectralMeasure:
    """Density max(0, -Im G(x + i eps)/pi) sampled on a uniform grid."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = make_grid(grid)
    if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0):
        raise ValueError("grid must be uniform")
    G = np.asarray(g_values(x + 1j * epsilon), dtype=complex)
    dens = np.maximum(0.0, -G.imag / np.pi)
    return SpectralMeasure(density=(x[0], x[-1], dens), normalize=normalize)


# -- matrices --


def _hermitian(M, what="matrix") -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{what} must be square")
    scale = max(1.0, float(np.abs(M).max(initial=0)))
    if np.abs(M - M.conj().T).max(initial=0) > SELF_ADJOINT_TOL * scale:
        raise ValueError(f"{what} is not self-adjoint")
    return M


def _merge_eigs(evals, masses):
    evals = np.asarray(evals, dtype=float)
    masses = np.asarray(masses, dtype=float)
    diam = float(evals[-1] - evals[0]) if evals.size else 0.0
    tol = MERGE_REL * diam
    breaks = np.flatnonzero(np.diff(evals) > tol) + 1
    groups = np.split(np.arange(evals.size), breaks)
    locs = np.array([evals[g].mean() for g in groups])
    ws = np.array([masses[g].sum() for g in groups])
    return locs, ws


def esd(M) -> SpectralMeasure:
    """Empirical spectral distribution: mass 1/N at each eigenvalue."""
    M = _hermitian(M)
    ev = np.linalg.eigvalsh(M)
    locs, ws = _merge_eigs(ev, np.full(ev.size, 1.0 / ev.size))
    return SpectralMeasure(atoms=zip(locs, ws))


def vesd(M, v) -> SpectralMeasure:
    """Spectral measure of M in the state of the unit vector v: masses |<v, u_lambda>|^2."""
    M = _hermitian(M)
    v = np.asarray(v)
    if v.shape != (M.shape[0],):
        raise ValueError("v must be a vector matching the matrix size")
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-10:
        raise ValueError("v must be a unit vector")
    ev, U = np.linalg.eigh(M)
    w = np.abs(U.conj().T @ v) ** 2
    locs, ws = _merge_eigs(ev, w)
    keep = ws > 0
    return SpectralMeasure(atoms=zip(locs[keep], ws[keep]))


# -- named measures --


def _semicircle_G(mean, var):
    s = math.sqrt(var)

    def G(z):
        w = np.asarray(z, dtype=complex) - mean
        # 2/(w + r) equals (w - r)/(2 s^2) but does not cancel for large |w|
        return 2.0 / (w + np.sqrt(w - 2 * s) * np.sqrt(w + 2 * s))

    return G


def _arcsine_G(a, b):
    def G(z):
        z = np.asarray(z, dtype=complex)
        return 1.0 / (np.sqrt(z - a) * np.sqrt(z - b))

    return G


def _catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def named_measure(name: str, params: dict | None = None, grid_points: int = DEFAULT_GRID) -> SpectralMeasure:
    """Closed-form measures: dirac, bernoulli, semicircle, arcsine, uniform-atoms.

    ``semicircle`` takes ``mean`` and ``variance``, ``arcsine`` takes ``a`` and
    ``b``, ``bernoulli`` takes ``p`` and optional points ``a`` and ``b``
    (default +-1 with equal weights), ``dirac`` takes ``theta`` and
    ``uniform-atoms`` takes ``points``.
    """
    params = dict(params or {})
    key = name.lower().replace("_", "-")
    if key == "dirac":
        theta = float(params.get("theta", 0.0))
        return SpectralMeasure(atoms=[(theta, 1.0)], transform=lambda z: 1.0 / (np.asarray(z, complex) - theta),
                               name=f"dirac({theta:g})", moments={k: theta**k for k in range(1, 13)})
    if key == "bernoulli":
        p = float(params.get("p", 0.5))
        a, b = float(params.get("a", -1.0)), float(params.get("b", 1.0))
        if not 0 < p < 1:
            raise ValueError("bernoulli weight must lie in (0, 1)")
        return SpectralMeasure(atoms=[(a, 1 - p), (b, p)], name="bernoulli",
                               moments={k: (1 - p) * a**k + p * b**k for k in range(1, 13)})
    if key == "semicircle":
        mean = float(params.get("mean", 0.0))
        var = float(params.get("variance", 1.0))
        if not var > 0:
            raise ValueError("semicircle variance must be positive")
        s = math.sqrt(var)
        x = np.linspace(mean - 2 * s, mean + 2 * s, grid_points)
        dens = np.sqrt(np.maximum(4 * var - (x - mean) ** 2, 0.0)) / (2 * math.pi * var)
        moments = {}
        if mean == 0:
            moments = {k: (_catalan(k // 2) * var ** (k // 2) if k % 2 == 0 else 0.0) for k in range(1, 13)}
        return SpectralMeasure(density=(x[0], x[-1], dens), transform=_semicircle_G(mean, var),
                               normalize=True, name="semicircle", moments=moments)
    if key == "arcsine":
        a, b = float(params.get("a", -2.0)), float(params.get("b", 2.0))
        if not b > a:
            raise ValueError("arcsine needs a < b")
        x = np.linspace(a, b, grid_points)
        h = x[1] - x[0]
        # cell averages of 1/(pi sqrt((t-a)(b-t))) keep the endpoint values finite
        cdf = lambda t: np.arcsin(np.clip((2 * t - a - b) / (b - a), -1, 1)) / math.pi
        lo, hi = np.maximum(x - h / 2, a), np.minimum(x + h / 2, b)
        dens = (cdf(hi) - cdf(lo)) / (hi - lo)
        c, r = (a + b) / 2, (b - a) / 2
        moments = {}
        if c == 0:
            moments = {k: (math.comb(k, k // 2) * (r / 2) ** k if k % 2 == 0 else 0.0) for k in range(1, 13)}
        return SpectralMeasure(density=(a, b, dens), transform=_arcsine_G(a, b), normalize=True,
                               name="arcsine", moments=moments)
    if key == "uniform-atoms":
        pts = [float(p) for p in params.get("points", [])]
        if not pts:
            raise ValueError("uniform-atoms needs a non-empty 'points' list")
        return SpectralMeasure(atoms=[(p, 1.0 / len(pts)) for p in pts], name="uniform-atoms")
    raise ValueError(f"unknown measure {name!r}")


def parse_measure_literal(text: str) -> SpectralMeasure:
    """Inline literals: ``dirac:THETA``, ``semicircle[:MEAN:VAR]``, ``bernoulli[:P]``,
    ``arcsine[:A:B]``, ``atoms:X1,X2,...``."""
    head, _, rest = text.partition(":")
    args = [a for a in rest.split(":") if a] if rest else []
    head = head.strip().lower()
    try:
        if head == "dirac":
            return named_measure("dirac", {"theta": float(args[0]) if args else 0.0})
        if head == "semicircle":
            p = {}
            if args:
                p["mean"] = float(args[0])
            if len(args) > 1:
                p["variance"] = float(args[1])
            return named_measure("semicircle", p)
        if head == "bernoulli":
            return named_measure("bernoulli", {"p": float(args[0])} if args else {})
        if head == "arcsine":
            return named_measure("arcsine", {"a": float(args[0]), "b": float(args[1])} if args else {})
        if head == "atoms":
            return named_measure("uniform-atoms", {"points": [float(t) for t in rest.split(",")]})
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad measure literal {text!r}: {exc}") from exc
    raise ValueError(f"unknown measure literal {text!r}")
