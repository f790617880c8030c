"""The punchline: polylogarithmic vs exponential resource curves.

For each depth R the hyperbolic route calibrates the sample count n* that
suffices for reliable path recovery, while the Euclidean route measures the
readout Lipschitz constant its geometry forces. One grows like R log R, the
other like exp(R / const).
"""

import math

import numpy as np

from hypertree import separation_experiment

Rs = list(range(4, 13, 2))
rows = separation_experiment(Rs, m=2, k=2, B=1.0, rho=0.1, eps=0.1, delta=0.1,
                             eta=0.1, seed=0, trials=200)

print(f"{'R':>3} {'n* (hyperbolic)':>16} {'n*/(R log 2R)':>14} "
      f"{'required Euclidean Lip':>23}")
for r in rows:
    norm = r["n_star"] / (r["R"] * math.log(2 * r["R"]))
    print(f"{r['R']:>3} {r['n_star']:>16.0f} {norm:>14.2f} "
          f"{r['lip_lower_bound']:>23.3e}")

xs = np.array([r["R"] for r in rows], dtype=float)
lip_slope = float(np.polyfit(xs, np.log([r["lip_lower_bound"] for r in rows]), 1)[0])
n_ratio = rows[-1]["n_star"] / rows[0]["n_star"]
print(f"\nEuclidean requirement grows like exp({lip_slope:.2f} R); "
      f"hyperbolic sample counts grew only {n_ratio:.1f}x over the same depths.")
print("Reproduce with the CLI:  hypertree separation --spec specs/separation.spec --out out/")
