"""Command line entry point: ``freeconv <subcommand> ...``.

Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import checks
from .convolve import ConvergenceError, cfree_conv, free_conv, monotone_conv, outlier_predict
from .cumulants import MatrixTuple, kappa2g_table, matricial_cumulants
from .measures import SpectralMeasure, named_measure, parse_measure_literal
from .rmt import experiments as ex
from .rmt.sampling import matrix_from_measure
from .symgroup import symmetric_group
from .weingarten import weingarten_symbolic

DIGITS = 12


class UsageError(Exception):
    pass


# -- formatting --


def fmt_number(x):
    """JSON-ready scalar: rationals as 'p/q', floats to 12 significant digits, complex as [re, im]."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        if x.imag == 0:
            return fmt_number(x.real)
        return [fmt_number(x.real), fmt_number(x.imag)]
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(format(x, f".{DIGITS}g"))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (str, type(None))):
        return obj
    return fmt_number(obj)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj))


def _csv_cell(x):
    v = fmt_number(x)
    if isinstance(v, list):
        return f"{v[0]}{v[1]:+}j"
    return "" if v is None else v


# -- inputs --


def load_measure(spec: str) -> SpectralMeasure:
    """A measure from a JSON file path or an inline literal such as ``dirac:2``."""
    path = Path(spec)
    if path.suffix == ".json" or path.is_file():
        return SpectralMeasure.from_json(path.read_text())
    return parse_measure_literal(spec)


def _entry(x):
    if isinstance(x, list):
        if len(x) != 2:
            raise ValueError(f"complex entries are [re, im] pairs, got {x!r}")
        re, im = x
        if im == 0 and isinstance(re, int):
            return re
        return complex(re, im)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (int, float)):
        return x
    raise ValueError(f"bad matrix entry {x!r}")


def load_matrices(path: str) -> list[np.ndarray]:
    """Matrices from JSON: ``{"matrices": [M1, ...]}`` or a bare list; rows of numbers,
    ``[re, im]`` pairs or ``"p/q"`` strings."""
    data = json.loads(Path(path).read_text())
    mats = data["matrices"] if isinstance(data, dict) else data
    out = []
    for m in mats:
        rows = [[_entry(x) for x in row] for row in m]
        exact = all(isinstance(x, (int, Fraction)) for row in rows for x in row)
        out.append(np.array(rows, dtype=object if exact else complex))
    return out


def parse_slot_word(spec: str | None, count: int) -> list[int]:
    """``"1,1,2"`` -> 0-based slots; None means every matrix once, in order."""
    if spec is None:
        return list(range(count))
    try:
        slots = [int(t) - 1 for t in spec.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise ValueError(f"--word expects comma separated 1-based indices, got {spec!r}") from exc
    if not slots or any(s < 0 or s >= count for s in slots):
        raise ValueError(f"--word indices must lie in 1..{count}")
    return slots


# -- subcommands --


def cmd_weingarten(args):
    wg = weingarten_symbolic(args.n)
    if args.at is None:
        return wg.to_strings()
    if args.at < 1:
        raise ValueError("--at must be a positive integer")
    return wg.evaluate(args.at)


def _table_json(table) -> dict:
    return {str(p): table.vector[i] for i, p in enumerate(symmetric_group(table.n))}


def cmd_cumulants(args):
    mats = load_matrices(args.matrices)
    slots = parse_slot_word(args.word, len(mats))
    M = MatrixTuple([mats[s] for s in slots])
    table = matricial_cumulants(M, threads=args.threads)
    if table.non_unique:
        print(json.dumps({"warning": f"N={M.dim} < n={M.n}: cumulants are not unique; "
                                     "minimum-norm solution reported"}), file=sys.stderr)
    if args.gmax is None:
        return _table_json(table)
    out = {"exact": _table_json(table)}
    for g in range(args.gmax + 1):
        out[f"order-{2 * g}"] = _table_json(kappa2g_table(M, g))
    return out


def cmd_convolve(args):
    m1, m2 = load_measure(args.mu1), load_measure(args.mu2)
    kw = {"epsilon": args.eps}
    if args.grid is not None:
        kw["grid"] = args.grid
    if args.kind == "free":
        res = free_conv(m1, m2, **kw)
    elif args.kind == "monotone":
        res = monotone_conv(m1, m2, **kw)
    else:
        if args.nu1 is None:
            raise UsageError("--kind cfree needs --nu1 (and optionally --nu2, default --mu2)")
        n1 = load_measure(args.nu1)
        n2 = m2 if args.nu2 is None else load_measure(args.nu2)
        res = cfree_conv(n1, n2, m1, m2, **kw)
    return res


def cmd_outliers(args):
    m1, m2 = load_measure(args.mu1), load_measure(args.mu2)
    return [{"rho": r, "overlap": o} for r, o in outlier_predict(args.theta, m1, m2)]


def cmd_check(args):
    report = checks.run_suite(args.suite, seed=args.seed, threads=args.threads)
    if args.suite in ("montecarlo", "all"):
        print(json.dumps({"seed": args.seed}), file=sys.stderr)
    return report


# -- simulate --


def _b_spec(spec):
    return "gue" if str(spec).lower() == "gue" else load_measure(spec)


def _quantile_builder(spec):
    m = load_measure(spec)

    def build(N):
        d = matrix_from_measure(m, N, diagonal_only=True)
        if np.all(d == np.round(d)):
            return np.diag(d.astype(int))
        return np.diag(d)

    return build


def _sim_scaling(cfg, threads):
    p = cfg.params
    a = _quantile_builder(p.get("a", "bernoulli"))
    b = _quantile_builder(p.get("b", p.get("a", "bernoulli")))
    rep = ex.freeness_scaling_probe(cfg, a, b, threads)
    rows = []
    if rep.method == "monte-carlo":
        header = ["N", "trial", "value"]
        for est in rep.estimates:
            rows += [[est.N, t, v] for t, v in enumerate(est.values)]
    else:
        header = ["N", "distance"]
        rows = [[N, v] for N, v in zip(rep.dims, rep.values)]
    return rep.to_dict(), header, rows


def _sim_residuals(cfg, threads):
    p = cfg.params
    kind = p.get("kind", "type-B")
    word = p.get("word_letters")
    summaries, rows = [], []
    for N in cfg.dims:
        r = ex.independence_residuals(kind, lambda n: ex.default_residual_model(kind, n, word), N, cfg.trials,
                                      cfg.seed, cfg.ensemble, threads)
        summaries.append(r.summary())
        rows += [[N, t, l, h, l - h] for t, (l, h) in enumerate(zip(r.lhs.values, r.rhs.values))]
    absr = [s["abs_residual_mean"] for s in summaries]
    ratios = [b / a if a else None for a, b in zip(absr, absr[1:])]
    return {"kind": kind, "per_N": summaries, "growth_ratios": ratios}, ["N", "trial", "lhs", "rhs", "residual"], rows


def _sim_sum(cfg, threads):
    p = cfg.params
    m1, m2 = load_measure(p.get("mu1", "bernoulli")), _b_spec(p.get("mu2", "semicircle"))
    kmax = int(p.get("kmax", 8))
    v, spike = p.get("v"), p.get("spike")
    law2 = named_measure("semicircle") if m2 == "gue" else m2
    per_n, rows = [], []
    for N in cfg.dims:
        r = ex.sum_experiment(m1, m2, N, cfg.trials, cfg.seed, v=v, spike=spike, kmax=kmax,
                              ensemble=cfg.ensemble, threads=threads)
        per_n.append({"N": N, "esd_mean": r.esd_mean, "esd_stderr": r.esd_stderr,
                      "vesd_mean": r.vesd_mean, "vesd_stderr": r.vesd_stderr})
        for t in range(cfg.trials):
            rows.append([N, t, *r.esd_rows[t], *r.vesd_rows[t]])
    out = {"kmax": kmax, "per_N": per_n}
    if p.get("compare", True):
        d = matrix_from_measure(m1, cfg.dims[-1], diagonal_only=True)
        if spike is not None:
            d[-1] = float(spike)
        V = ex._resolve_v(v, d)
        nu1 = _vesd_of_diag(d, V)
        out["free_moments"] = free_conv(m1, law2).moments(kmax)
        out["cfree_moments"] = cfree_conv(nu1, law2, m1, law2).moments(kmax)
    header = ["N", "trial"] + [f"esd_m{k}" for k in range(1, kmax + 1)] + [f"vesd_m{k}" for k in range(1, kmax + 1)]
    return out, header, rows


def _vesd_of_diag(d, V) -> SpectralMeasure:
    w = np.mean(np.abs(V) ** 2, axis=1)
    atoms = {}
    for x, m in zip(d, w):
        if m > 0:
            atoms[float(x)] = atoms.get(float(x), 0.0) + float(m)
    return SpectralMeasure(atoms=sorted(atoms.items()), normalize=True)


def _sim_outlier(cfg, threads):
    p = cfg.params
    if "theta" not in p:
        raise ValueError("outlier config needs 'theta'")
    theta = float(p["theta"])
    m1, m2 = load_measure(p.get("mu1", "dirac:0")), _b_spec(p.get("mu2", "gue"))
    margin = float(p.get("margin", 0.05))
    per_n, rows, pred = [], [], None
    for N in cfg.dims:
        r = ex.outlier_experiment(theta, m1, m2, N, cfg.trials, cfg.seed, cfg.ensemble if m2 != "gue" else "haar-unitary",
                                  margin, threads, predicted=pred)
        pred = r.predicted
        per_n.append(r.summary())
        for t in range(cfg.trials):
            rows.append([N, t, r.top[t], r.bottom[t], r.n_outside[t], *r.observed[t], *r.overlaps[t]])
    k = len(pred)
    header = ["N", "trial", "top", "bottom", "n_outside"] + [f"rho{j}_observed" for j in range(k)] + \
        [f"rho{j}_overlap" for j in range(k)]
    return {"theta": theta, "predicted": [{"rho": a, "overlap": b} for a, b in pred], "per_N": per_n}, header, rows


SIMULATIONS = {"sum": _sim_sum, "outlier": _sim_outlier, "scaling": _sim_scaling, "residuals": _sim_residuals}


def cmd_simulate(args):
    cfg_path = Path(args.config)
    cfg = ex.ExperimentConfig.from_json(cfg_path.read_text())
    if args.seed_given:
        cfg.seed = args.seed
    summary, header, rows = SIMULATIONS[args.experiment](cfg, args.threads)
    summary = {"experiment": args.experiment, "config": cfg.to_dict(), **summary}
    summary["config"].pop("outputs", None)
    csv_path = cfg.outputs.get("csv")
    if csv_path is None:
        csv_path = (Path(args.out).with_suffix(".csv") if args.out else cfg_path.with_suffix(".trials.csv"))
    json_path = cfg.outputs.get("json")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(x) for x in row])
    Path(csv_path).write_text(buf.getvalue())
    text = dumps(summary)
    if json_path is not None:
        Path(json_path).write_text(text + "\n")
    return RawJSON(text)


class RawJSON(str):
    """Already formatted JSON text."""


# -- parser --


def _common(default_suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = argparse.SUPPRESS if default_suppress else None
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS if default_suppress else 7,
                   help="base seed for random streams (default 7)")
    p.add_argument("--threads", type=int, default=d if default_suppress else os.cpu_count() or 1,
                   help="worker threads (default: machine parallelism)")
    p.add_argument("--out", default=d, help="write the result here instead of standard output")
    return p


def build_parser() -> argparse.ArgumentParser:
    sub_common = _common(True)
    parser = argparse.ArgumentParser(prog="freeconv", parents=[_common(False)],
                                     description="Weingarten calculus, matricial cumulants and free convolutions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weingarten", parents=[sub_common], help="exact Weingarten function on S_n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--at", type=int, help="evaluate at this integer N")
    p.set_defaults(func=cmd_weingarten)

    p = sub.add_parser("cumulants", parents=[sub_common], help="matricial cumulants of a matrix tuple")
    p.add_argument("--word", help="comma separated 1-based matrix indices, e.g. 1,1,2")
    p.add_argument("--matrices", required=True, help="JSON file of matrices")
    p.add_argument("--gmax", type=int, help="also emit the higher-order cumulants up to 2*gmax")
    p.set_defaults(func=cmd_cumulants)

    p = sub.add_parser("convolve", parents=[sub_common], help="free, monotone or c-free convolution")
    p.add_argument("--kind", choices=["free", "monotone", "cfree"], required=True)
    p.add_argument("--mu1", required=True)
    p.add_argument("--mu2", required=True)
    p.add_argument("--nu1")
    p.add_argument("--nu2")
    p.add_argument("--grid", help="a:b:n")
    p.add_argument("--eps", type=float, default=1e-6)
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("outliers", parents=[sub_common], help="predicted outliers and overlaps")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--mu1", required=True)
    p.add_argument("--mu2", required=True)
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("simulate", parents=[sub_common], help="Monte Carlo experiments from a config file")
    p.add_argument("experiment", choices=sorted(SIMULATIONS))
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", parents=[sub_common], help="run the self-check suites")
    p.add_argument("suite", nargs="?", default="all", choices=["exact", "analytic", "montecarlo", "all"])
    p.set_defaults(func=cmd_check)
    return parser


def _emit(result, out: str | None) -> None:
    if isinstance(result, SpectralMeasure):
        text = result.to_json(DIGITS)
    elif isinstance(result, RawJSON):
        text = str(result)
    else:
        text = dumps(result)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


_VALUE_FLAGS = {"--grid", "--theta", "--mu1", "--mu2", "--nu1", "--nu2", "--eps", "--word"}


def _join_dashed_values(argv: list[str]) -> list[str]:
    """Turn ``--grid -3:4:100`` into ``--grid=-3:4:100`` so argparse does not read it as a flag."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1] != "--":
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _join_dashed_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    if args.threads is not None and args.threads < 1:
        parser.print_usage(sys.stderr)
        print("freeconv: error: argument --threads: must be >= 1", file=sys.stderr)
        return 2
    try:
        result = args.func(args)
        _emit(result, args.out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"freeconv: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, ConvergenceError, KeyError, OSError, json.JSONDecodeError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    if args.command == "check" and not result["passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
