"""Monte Carlo experiments on randomly rotated matrices.

All experiments draw trial t from ``trial_rng(seed, t)`` and reduce the
per-trial values in trial order, so a run is bit-for-bit reproducible for any
thread count.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import reduce

import numpy as np
from scipy import stats

from ..convolve import outlier_predict, support_of_free_conv
from ..cumulants import MatrixTuple, free_product_eval, mixed_moment_exact
from ..measures import SpectralMeasure, named_measure
from .sampling import ENSEMBLES, gue, matrix_from_measure, rotate, run_trials, sample_rotation

__all__ = [
    "ExperimentConfig",
    "MCEstimate",
    "ScalingReport",
    "ResidualModel",
    "ResidualReport",
    "SumReport",
    "OutlierReport",
    "parse_word",
    "mc_mixed_moment",
    "freeness_scaling_probe",
    "default_residual_model",
    "independence_residuals",
    "sum_experiment",
    "outlier_experiment",
]

RESIDUAL_KINDS = ("type-B", "c-free", "cyclic-monotone", "monotone")


@dataclass
class ExperimentConfig:
    """Settings shared by the Monte Carlo drivers.

    ``params`` carries the experiment-specific keys (measures, theta, ...).
    """

    dims: list
    trials: int
    seed: int
    ensemble: str = "haar-unitary"
    word: str = "XYXY"
    outputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dims = [int(n) for n in self.dims]
        if not self.dims or any(n < 1 for n in self.dims):
            raise ValueError("dims must be a non-empty list of positive integers")
        if self.dims != sorted(self.dims):
            raise ValueError("dims must be sorted increasingly")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        self.trials = int(self.trials)
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"unknown ensemble {self.ensemble!r}; choose from {ENSEMBLES}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        known = {k: data.pop(k) for k in ("dims", "trials", "seed", "ensemble", "word", "outputs") if k in data}
        missing = {"dims", "trials", "seed"} - set(known)
        if missing:
            raise ValueError(f"config is missing {sorted(missing)}")
        params = data.pop("params", {})
        params.update(data)
        return cls(params=params, **known)

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MCEstimate:
    N: int
    mean: complex
    stderr: float
    trials: int
    values: np.ndarray = field(repr=False, default=None)


def _estimate(N: int, values) -> MCEstimate:
    v = np.asarray(values)
    n = v.size
    se = float(np.sqrt(np.sum(np.abs(v - v.mean()) ** 2) / (n - 1) / n)) if n > 1 else math.inf
    mean = v.mean()
    if np.iscomplexobj(v) and np.all(v.imag == 0):
        mean = mean.real
    return MCEstimate(N, mean, se, n, v)


def parse_word(word: str) -> int:
    """Number of (X, Y) pairs in an alternating word such as ``XYXY``; spaces are ignored."""
    w = word.replace(" ", "").upper()
    if not w or len(w) % 2 or any(c not in "XY" for c in w):
        raise ValueError(f"word {word!r} must alternate X and Y letters")
    if w != "XY" * (len(w) // 2):
        raise ValueError(f"word {word!r} must alternate X and Y, starting with X")
    return len(w) // 2


def _as_tuple(mats, n: int) -> list:
    mats = mats if isinstance(mats, (list, tuple)) else [mats]
    if len(mats) == 1:
        mats = list(mats) * n
    if len(mats) != n:
        raise ValueError(f"word needs {n} matrices per side, got {len(mats)}")
    return [np.asarray(m) for m in mats]


def _alternating_trace(A: list, R: list) -> complex:
    P = A[0] @ R[0]
    for a, r in zip(A[1:], R[1:]):
        P = P @ a @ r
    return np.trace(P) / P.shape[0]


def mc_mixed_moment(cfg: ExperimentConfig, a_builder, b_builder, threads: int | None = None) -> list[MCEstimate]:
    """Mean and standard error of tr_N(A_1 U B_1 U* ... A_n U B_n U*) for each N in cfg.dims.

    ``a_builder(N)`` and ``b_builder(N)`` return one matrix or a list of n
    matrices. U is drawn from ``cfg.ensemble``.
    """
    n = parse_word(cfg.word)
    out = []
    for N in cfg.dims:
        A = _as_tuple(a_builder(N), n)
        B = _as_tuple(b_builder(N), n)

        def trial(t, rng, A=A, B=B, N=N):
            U = sample_rotation(cfg.ensemble, N, rng)
            cache = {}
            R = [cache.setdefault(id(b), rotate(U, b)) for b in B]
            return _alternating_trace(A, R)

        vals = run_trials(trial, cfg.trials, cfg.seed, threads)
        out.append(_estimate(N, np.array(vals)))
    return out


@dataclass
class ScalingReport:
    """Distance to the free prediction per N, with a log-log fit of its decay."""

    dims: list
    values: list
    stderr: list
    exponent: float | None
    halfwidth: float | None
    intercept: float | None = None
    method: str = "exact"
    flagged: list = field(default_factory=list)
    estimates: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("estimates")
        return d


def _fit(dims, values):
    x, y = np.log(np.asarray(dims, float)), np.log(np.asarray(values, float))
    fit = stats.linregress(x, y)
    df = len(dims) - 2
    half = float(stats.t.ppf(0.975, df) * fit.stderr) if df > 0 else math.inf
    return float(fit.slope), half, float(fit.intercept)


def freeness_scaling_probe(cfg: ExperimentConfig, a_builder, b_builder, threads: int | None = None) -> ScalingReport:
    """Fit the decay exponent of |E tr(word) - free prediction| over cfg.dims.

    The unitary ensemble uses the exact Weingarten evaluation; orthogonal
    ensembles use Monte Carlo means. A dimension is flagged when its standard
    error exceeds half of the measured distance (more trials needed).
    """
    if len(cfg.dims) < 3:
        raise ValueError("the exponent fit needs at least 3 dims")
    n = parse_word(cfg.word)
    vals, ses, flagged, ests = [], [], [], []
    if cfg.ensemble == "haar-unitary":
        for N in cfg.dims:
            A = MatrixTuple(_as_tuple(a_builder(N), n))
            B = MatrixTuple(_as_tuple(b_builder(N), n))
            d = mixed_moment_exact(A, B, threads) - free_product_eval(A, B)
            vals.append(float(abs(complex(d))))
            ses.append(0.0)
        method = "exact"
    elif cfg.ensemble in ("haar-orthogonal", "haar-special-orthogonal"):
        ests = mc_mixed_moment(cfg, a_builder, b_builder, threads)
        for est in ests:
            A = MatrixTuple(_as_tuple(a_builder(est.N), n))
            B = MatrixTuple(_as_tuple(b_builder(est.N), n))
            d = abs(est.mean - complex(free_product_eval(A, B)))
            vals.append(float(d))
            ses.append(est.stderr)
            if est.stderr > 0.5 * d:
                flagged.append(est.N)
        method = "monte-carlo"
    else:
        raise ValueError("the scaling probe needs a rotation ensemble")
    if all(v == 0 for v in vals):
        # e.g. a scalar letter: the word is free from everything at every N
        return ScalingReport(cfg.dims, vals, ses, None, None, None, method, flagged, ests)
    if any(v == 0 for v in vals):
        raise ValueError("distance vanishes at some but not all N; no power law to fit")
    slope, half, icpt = _fit(cfg.dims, vals)
    return ScalingReport(cfg.dims, vals, ses, slope, half, icpt, method, flagged, ests)


# -- independence residuals --


@dataclass
class ResidualModel:
    """Letters for an independence identity.

    ``a`` holds deterministic A-side matrices, ``b`` the B-side matrices that
    get rotated by U in each trial. ``word`` lists letter names left to right.
    ``ideal`` names the A-side letters playing the role of ideal elements and
    ``v`` is the unit vector of the vector state.
    """

    a: dict
    b: dict
    word: list
    v: np.ndarray | None = None
    ideal: tuple = ()

    def side(self, name: str) -> int:
        if name in self.a:
            return 1
        if name in self.b:
            return 2
        raise KeyError(f"unknown letter {name!r}")

    def trace(self, name: str) -> float:
        M = self.a.get(name, self.b.get(name))
        return complex(np.trace(M)) / M.shape[0]


def _check_alternating(model: ResidualModel, letters) -> None:
    sides = [model.side(x) for x in letters]
    if any(s == t for s, t in zip(sides, sides[1:])):
        raise ValueError(f"word {letters} does not alternate between the two sides")


def _check_centered(model: ResidualModel, letters) -> None:
    for x in letters:
        M = model.a.get(x, model.b.get(x))
        if abs(model.trace(x)) > 1e-10 * max(1.0, float(np.abs(M).max())):
            raise ValueError(f"letter {x!r} must be centred for this identity (tr = {model.trace(x):.3g})")


def _prod(mats):
    return reduce(np.matmul, mats)


def _vstate(M, v):
    return complex(np.vdot(v, M @ v))


def _residual_sides(kind: str, model: ResidualModel, mats: dict) -> tuple[complex, complex]:
    w = model.word
    N = next(iter(mats.values())).shape[0]
    if kind == "type-B":
        k = [i for i, x in enumerate(w) if x in model.ideal]
        if len(k) != 1:
            raise ValueError("a type-B word holds exactly one ideal letter")
        k = k[0]
        rest = w[:k] + w[k + 1:]
        lhs = complex(np.trace(_prod([mats[x] for x in w])))
        rhs = complex(np.trace(mats[w[k]])) * complex(np.trace(_prod([mats[x] for x in rest]))) / N
        return lhs, rhs
    v = model.v
    if kind == "c-free":
        lhs = _vstate(_prod([mats[x] for x in w]), v)
        if all(model.side(x) == 2 for x in w):
            return lhs, complex(np.trace(_prod([mats[x] for x in w]))) / N
        return lhs, complex(np.prod([_vstate(mats[x], v) for x in w]))
    bs, As = w[0::2], w[1::2]
    if kind == "monotone":
        lhs = _vstate(_prod([mats[x] for x in w]), v)
        rhs = _vstate(_prod([mats[x] for x in As]), v) * np.prod([_vstate(mats[x], v) for x in bs])
        return lhs, complex(rhs)
    if kind == "cyclic-monotone":
        lhs = complex(np.trace(_prod([mats[x] for x in w])))
        mid = np.prod([complex(np.trace(mats[x])) / N for x in bs[1:-1]])
        ends = complex(np.trace(mats[bs[0]] @ mats[bs[-1]])) / N
        rhs = complex(np.trace(_prod([mats[x] for x in As]))) * mid * ends
        return lhs, complex(rhs)
    raise ValueError(f"unknown residual kind {kind!r}; choose from {RESIDUAL_KINDS}")


def _validate_model(kind: str, model: ResidualModel) -> None:
    w = list(model.word)
    if kind not in RESIDUAL_KINDS:
        raise ValueError(f"unknown residual kind {kind!r}; choose from {RESIDUAL_KINDS}")
    _check_alternating(model, w)
    if kind == "type-B":
        k = [i for i, x in enumerate(w) if x in model.ideal]
        if len(k) != 1:
            raise ValueError("a type-B word holds exactly one ideal letter")
        # outermost letters may be arbitrary, inner non-ideal letters must be centred
        _check_centered(model, [x for i, x in enumerate(w[1:-1], 1) if i != k[0]])
        return
    if model.v is None:
        raise ValueError(f"{kind} residuals need a unit vector v")
    if kind == "c-free":
        if len(w) > 1 and not all(model.side(x) == 2 for x in w):
            _check_centered(model, w[1:-1])
        return
    if len(w) < 3 or len(w) % 2 == 0 or any(model.side(x) != 2 for x in w[0::2]):
        raise ValueError("monotone-type words read b0 a1 b1 ... an bn with B-side b's")


def default_residual_model(kind: str, N: int, word: list | None = None) -> ResidualModel:
    """Standard letters: A = bernoulli quantiles, B = semicircle quantiles.

    A-side: ``a`` (diag +-1), ``p`` = e e* for the last basis vector e, ``q``
    = diag(2, -1, 0, ...) (rank two). B-side: ``b`` (semicircle) and ``b2`` = b^2.
    """
    d = matrix_from_measure(named_measure("bernoulli"), N, diagonal_only=True)
    s = matrix_from_measure(named_measure("semicircle"), N, diagonal_only=True)
    p = np.zeros((N, N))
    p[-1, -1] = 1.0
    q = np.zeros((N, N))
    q[0, 0], q[1, 1] = 2.0, -1.0
    a = {"a": np.diag(d), "p": p, "q": q}
    b = {"b": np.diag(s), "b2": np.diag(s * s)}
    if kind == "type-B":
        v, ideal = None, ("p",)
        word = word or ["b", "a", "b", "p", "b2"]
    elif kind == "c-free":
        # a non-eigenvector of a, so phi(a) is not trivial
        v = 1.0 + np.arange(N) / N
        v /= np.linalg.norm(v)
        ideal = ()
        word = word or ["b2", "a", "b2"]
    else:
        v = np.zeros(N)
        v[0] = 1.0
        ideal = ("q", "p")
        word = word or ["b2", "q", "b2", "q", "b2"]
    return ResidualModel(a, b, list(word), v, ideal)


@dataclass
class ResidualReport:
    kind: str
    N: int
    trials: int
    scaled: bool
    lhs: MCEstimate
    rhs: MCEstimate
    residual: MCEstimate
    abs_residual: MCEstimate

    def summary(self) -> dict:
        def c(x):
            x = complex(x)
            return x.real if x.imag == 0 else [x.real, x.imag]

        return {"kind": self.kind, "N": self.N, "trials": self.trials, "scaled_by_N": self.scaled,
                "lhs_mean": c(self.lhs.mean), "rhs_mean": c(self.rhs.mean),
                "residual_mean": c(self.residual.mean), "residual_stderr": self.residual.stderr,
                "abs_residual_mean": float(np.real(self.abs_residual.mean)),
                "abs_residual_stderr": self.abs_residual.stderr}


def independence_residuals(kind: str, model, N: int, trials: int, seed: int, ensemble: str = "haar-unitary",
                           threads: int | None = None) -> ResidualReport:
    """Sample both sides of an independence identity on A and U B U*.

    ``model`` is a ResidualModel or a callable N -> ResidualModel. type-B and
    cyclic-monotone identities involve the unnormalised trace, so their
    residual is N times the normalised-trace residual; c-free and monotone
    identities use the vector state and are reported unscaled.
    """
    model = model(N) if callable(model) else model
    _validate_model(kind, model)

    def trial(t, rng):
        U = sample_rotation(ensemble, N, rng)
        mats = dict(model.a)
        mats.update({k: rotate(U, np.diagonal(m) if _is_diag(m) else m) for k, m in model.b.items()})
        return _residual_sides(kind, model, mats)

    rows = np.array(run_trials(trial, trials, seed, threads))
    lhs, rhs = rows[:, 0], rows[:, 1]
    res = lhs - rhs
    scaled = kind in ("type-B", "cyclic-monotone")
    return ResidualReport(kind, N, trials, scaled, _estimate(N, lhs), _estimate(N, rhs), _estimate(N, res),
                          _estimate(N, np.abs(res)))


def _is_diag(m: np.ndarray) -> bool:
    return m.ndim == 2 and np.count_nonzero(m - np.diag(np.diagonal(m))) == 0


# -- spectra of A + U B U* --


def _resolve_v(spec, d: np.ndarray) -> np.ndarray:
    """Unit vector(s) of the vector state, as the columns of an N x k array.

    Specs: an explicit vector, ``uniform``, ``last``, ``basis:k``,
    ``eigenvector:x`` (the last basis vector with A_kk = x) and
    ``eigenspace:x`` (every basis vector with A_kk = x; the weighted ESDs are
    averaged over them, which keeps the expectation and cuts the variance).
    """
    N = d.size
    if isinstance(spec, (np.ndarray, list, tuple)):
        v = np.asarray(spec, dtype=complex)
        if v.shape != (N,):
            raise ValueError(f"v has shape {v.shape}, expected ({N},)")
        return (v / np.linalg.norm(v))[:, None]
    spec = "last" if spec is None else str(spec)
    if spec == "uniform":
        return np.full((N, 1), 1 / np.sqrt(N))
    if spec == "last":
        cols = [N - 1]
    elif spec.startswith("basis:"):
        cols = [int(spec.split(":", 1)[1])]
    elif spec.startswith(("eigenvector:", "eigenspace:")):
        theta = float(spec.split(":", 1)[1])
        hit = np.flatnonzero(np.abs(d - theta) <= 1e-9 * max(1.0, abs(theta)))
        if hit.size == 0:
            raise ValueError(f"A has no eigenvalue {theta}")
        cols = list(hit) if spec.startswith("eigenspace:") else [hit[-1]]
    else:
        raise ValueError(f"unknown vector spec {spec!r} (uniform, last, basis:k, eigenvector:x, eigenspace:x)")
    V = np.zeros((N, len(cols)))
    V[cols, np.arange(len(cols))] = 1.0
    return V


def _b_side(m2, N: int, ensemble: str, rng) -> np.ndarray:
    if isinstance(m2, str) and m2 == "gue":
        return gue(N, rng)
    if ensemble == "gue":
        raise ValueError("ensemble 'gue' draws B itself; pass m2='gue'")
    U = sample_rotation(ensemble, N, rng)
    return rotate(U, matrix_from_measure(m2, N, diagonal_only=True))


@dataclass
class SumReport:
    N: int
    trials: int
    esd_mean: np.ndarray
    esd_stderr: np.ndarray
    vesd_mean: np.ndarray
    vesd_stderr: np.ndarray
    esd_rows: np.ndarray = field(repr=False, default=None)
    vesd_rows: np.ndarray = field(repr=False, default=None)


def _mean_se(rows: np.ndarray):
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / np.sqrt(rows.shape[0]) if rows.shape[0] > 1 else np.full(rows.shape[1], np.inf)
    return mean, se


def sum_experiment(m1: SpectralMeasure, m2, N: int, trials: int, seed: int, v=None, spike: float | None = None,
                   kmax: int = 8, ensemble: str = "haar-unitary", threads: int | None = None) -> SumReport:
    """Moments 1..kmax of the ESD and of the v-weighted ESD of A + U B U*.

    A is the quantile diagonal of m1, optionally with its last entry replaced
    by ``spike``; v is a vector spec (see ``_resolve_v``; default: the last
    basis vector). m2 is a measure realised by quantiles and rotated, or the
    string 'gue' for a GUE sample.
    """
    d = matrix_from_measure(m1, N, diagonal_only=True)
    if spike is not None:
        d[-1] = float(spike)
    V = _resolve_v(v, d)
    ks = np.arange(1, kmax + 1)

    def trial(t, rng):
        M = _b_side(m2, N, ensemble, rng) + np.diag(d)
        lam, U = np.linalg.eigh(M)
        w = np.mean(np.abs(U.conj().T @ V) ** 2, axis=1)
        pw = lam[None, :] ** ks[:, None]
        return pw.mean(axis=1), pw @ w

    rows = run_trials(trial, trials, seed, threads)
    esd = np.array([r[0] for r in rows])
    ves = np.array([r[1] for r in rows])
    em, es = _mean_se(esd)
    vm, vs = _mean_se(ves)
    return SumReport(N, trials, em, es, vm, vs, esd, ves)


@dataclass
class OutlierReport:
    theta: float
    N: int
    trials: int
    predicted: list
    window: list
    top: np.ndarray
    bottom: np.ndarray
    n_outside: np.ndarray
    observed: np.ndarray
    overlaps: np.ndarray

    def summary(self) -> dict:
        out = {"theta": self.theta, "N": self.N, "trials": self.trials,
               "predicted": [{"rho": r, "overlap": o} for r, o in self.predicted],
               "window": self.window,
               "top_mean": float(self.top.mean()), "bottom_mean": float(self.bottom.mean())}
        for j, (r, o) in enumerate(self.predicted):
            out[f"rho{j}_observed_mean"] = float(np.nanmean(self.observed[:, j]))
            out[f"rho{j}_overlap_mean"] = float(np.mean(self.overlaps[:, j]))
        return out


def _gap_around(x: float, window: list) -> tuple[float, float]:
    lo, hi = -math.inf, math.inf
    for a, b in window:
        if a <= x <= b:
            raise ValueError(f"predicted outlier {x} falls inside the bulk window")
        if b < x:
            lo = max(lo, b)
        if a > x:
            hi = min(hi, a)
    return lo, hi


def outlier_experiment(theta: float, m1: SpectralMeasure, m2, N: int, trials: int, seed: int,
                       ensemble: str = "haar-unitary", margin: float = 0.05, threads: int | None = None,
                       predicted: list | None = None) -> OutlierReport:
    """Outliers of A + U B U* where A carries an extra eigenvalue theta on e_N.

    A = diag(quantiles of m1) with the last entry set to theta and v = e_N
    (for m1 = dirac:0 this is theta v v*). m2 is a measure or 'gue' (then the
    semicircle law is used for predictions). The bulk window is the support of
    m1 boxplus m2 dilated by ``margin`` times its diameter; for each predicted
    (rho, overlap) the observed eigenvalues and summed overlaps are taken in
    the gap of the window that contains rho.
    """
    law2 = named_measure("semicircle") if isinstance(m2, str) and m2 == "gue" else m2
    if predicted is None:
        predicted = outlier_predict(theta, m1, law2)
    supp = support_of_free_conv(m1, law2)
    diam = supp[-1][1] - supp[0][0]
    window = []
    for a, b in supp:
        a, b = a - margin * diam, b + margin * diam
        if window and a <= window[-1][1]:
            window[-1] = (window[-1][0], max(window[-1][1], b))
        else:
            window.append((a, b))
    gaps = [_gap_around(r, window) for r, _ in predicted]
    d = matrix_from_measure(m1, N, diagonal_only=True)
    d[-1] = float(theta)

    def trial(t, rng):
        M = _b_side(m2, N, ensemble, rng) + np.diag(d)
        lam, U = np.linalg.eigh(M)
        w = np.abs(U[-1, :]) ** 2
        inside = np.zeros(lam.size, dtype=bool)
        for a, b in window:
            inside |= (lam >= a) & (lam <= b)
        obs, ovl = [], []
        for (lo, hi), (rho, _) in zip(gaps, predicted):
            sel = (lam > lo) & (lam < hi)
            # the eigenvalue nearest the prediction stands for the outlier
            obs.append(lam[sel][np.argmin(np.abs(lam[sel] - rho))] if sel.any() else np.nan)
            ovl.append(w[sel].sum())
        return lam[-1], lam[0], int((~inside).sum()), obs, ovl

    rows = run_trials(trial, trials, seed, threads)
    k = len(predicted)
    return OutlierReport(float(theta), N, trials, [(float(r), float(o)) for r, o in predicted],
                         [[float(a), float(b)] for a, b in window],
                         np.array([r[0] for r in rows]), np.array([r[1] for r in rows]),
                         np.array([r[2] for r in rows]),
                         np.array([r[3] for r in rows], dtype=float).reshape(trials, k),
                         np.array([r[4] for r in rows], dtype=float).reshape(trials, k))
