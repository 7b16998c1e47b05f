"""Run every Monte Carlo config in demos/configs through the CLI and print
a one-line digest of each summary.

Run:  python3 demos/run_simulations.py [outdir] [--threads K]
The orthogonal scaling run (4000 trials per N) takes about three minutes on
one core; the rest finish within a minute each.
"""

import argparse
import json
from pathlib import Path

from freeconv.cli import run

HERE = Path(__file__).parent
EXPERIMENT = {
    "scaling_unitary": "scaling",
    "scaling_orthogonal": "scaling",
    "sum_cfree": "sum",
    "outlier_gue": "outlier",
    "residuals_type_b": "residuals",
}


def digest(name, s):
    if s["experiment"] == "scaling":
        return f"exponent {s['exponent']:.3f} +- {s['halfwidth']:.3f} ({s['method']}), distances {s['values']}"
    if s["experiment"] == "sum":
        p = s["per_N"][-1]
        return f"VESD moments {[round(v, 3) for v in p['vesd_mean']]} vs c-free {[round(v, 3) for v in s['cfree_moments']]}"
    if s["experiment"] == "outlier":
        p = s["per_N"][-1]
        return (f"predicted {s['predicted']}, mean top {p['top_mean']:.4f}, "
                f"mean overlap {p['rho0_overlap_mean']:.4f}")
    return "N*|residual| " + ", ".join(f"{p['N']}: {p['abs_residual_mean']:.4f}" for p in s["per_N"])


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("outdir", nargs="?", default=str(HERE / "output"))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", choices=sorted(EXPERIMENT), action="append")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or EXPERIMENT:
        target = out / f"{name}.json"
        code = run(["simulate", EXPERIMENT[name], "--config", str(HERE / "configs" / f"{name}.json"),
                    "--threads", str(args.threads), "--out", str(target)])
        if code:
            print(f"{name}: exit code {code}")
            continue
        print(f"{name}: {digest(name, json.loads(target.read_text()))}")
