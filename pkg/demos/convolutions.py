"""Free, monotone and c-free convolutions on a grid, plus outlier predictions.

Run:  python3 demos/convolutions.py [outdir]
Writes one JSON per measure into outdir (default demos/output).
"""

import sys
from pathlib import Path

import numpy as np

from freeconv import cfree_conv, free_conv, monotone_conv, named_measure, outlier_predict

out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "output")
out.mkdir(parents=True, exist_ok=True)

sc = named_measure("semicircle")
be = named_measure("bernoulli")
d0 = named_measure("dirac", {"theta": 0})
d1 = named_measure("dirac", {"theta": 1})
d2 = named_measure("dirac", {"theta": 2})

results = {
    "semicircle_free_semicircle": free_conv(sc, sc),  # semicircle of variance 2
    "bernoulli_free_bernoulli": free_conv(be, be),  # arcsine law on [-2, 2]
    "bernoulli_free_semicircle": free_conv(be, sc),
    "dirac2_monotone_semicircle": monotone_conv(d2, sc),  # atom at 2.5 with mass 0.75
    "cfree_dirac1_bernoulli": cfree_conv(d1, sc, be, sc),
}
for name, m in results.items():
    mo = m.moments(6)
    atoms = ", ".join(f"{a:.4f}:{w:.4f}" for a, w in m.atoms) or "none"
    print(f"{name:28s} moments {np.round(mo, 4).tolist()}  atoms {atoms}")
    (out / f"{name}.json").write_text(m.to_json() + "\n")

# arcsine check away from the edges
bb = results["bernoulli_free_bernoulli"]
x = bb.grid()
keep = np.abs(x) < 1.8
print("arcsine sup error on |x| < 1.8:", float(np.max(np.abs(bb.values[keep] - 1 / (np.pi * np.sqrt(4 - x[keep] ** 2))))))

# spiked semicircle: outlier at theta + 1/theta with overlap 1 - 1/theta^2 above theta = 1
print("theta   predicted (rho, overlap)")
for theta in (0.5, 1.0, 1.5, 2.0, 3.0):
    print(f"{theta:5.2f}  ", outlier_predict(theta, d0, sc))
# with a bernoulli bulk the outlier moves and several roots can appear
print("bernoulli bulk, theta=3:", outlier_predict(3.0, be, sc))
