"""Trees, the correlation metric, and its spin-model origin.

Walks through the tree builders, the weighted path metric, the regular-growth
check for random trees, couplings -> weights via -log tanh, high-temperature
correlation bounds, and lateral-edge extensions.
"""

import math

import numpy as np

from hypertree import (
    GrowthConfig,
    IsingParams,
    build_galton_watson,
    build_mary,
    check_regular_growth,
    extend_lateral,
    ising_weights,
    saw_correlation_bounds,
)

print("== complete m-ary trees ==")
tree = build_mary(3, 4, 0.5)
print(f"m=3, R=4, lam=0.5: {tree.n_nodes} nodes, {len(tree.leaves)} leaves")
u, v = int(tree.leaves[0]), int(tree.leaves[-1])
print(f"d_corr(leaf {u}, leaf {v}) = {tree.d_corr(u, v)}   (path through the root)")
print(f"d_corr(root, any leaf)   = {tree.d_corr(0, u)}   (= lam * R)")

print("\n== Galton-Watson trees and regular growth ==")
res = build_galton_watson({1: 1 / 3, 2: 1 / 3, 3: 1 / 3}, R=10, lam=1.0, seed=4)
print(f"offspring uniform{{1,2,3}} (mean 2), R=10, seed=4 -> "
      f"{len(res.tree.leaves)} leaves, extinct={res.extinct}")
rep = check_regular_growth(res.tree, GrowthConfig(eta=0.3, R=10, m=2.0))
print(f"level sizes: |L_5| = {rep.n_leaves_mid} in {rep.size_bounds_mid[0]:.1f}.."
      f"{rep.size_bounds_mid[1]:.1f}, |L_10| = {rep.n_leaves_full} in "
      f"{rep.size_bounds_full[0]:.1f}..{rep.size_bounds_full[1]:.1f}")
print(f"largest mid-depth subtree: {rep.max_mid_subtree} <= {rep.dominance_bound:.1f} "
      f"-> regular growth: {rep.ok}")

extinct = sum(build_galton_watson({0: 0.6, 2: 0.4}, R=6, seed=s).extinct
              for s in range(500))
print(f"subcritical-ish offspring {{0:0.6, 2:0.4}}: {extinct}/500 seeds died out by R=6")

print("\n== spin couplings induce the same metric ==")
chain = build_galton_watson({1: 1.0}, R=3, lam=1.0, seed=0).tree
ising = ising_weights(chain, 0.9)
print(f"chain of 3 edges, J=0.9 everywhere: w_e = {ising.tree.weight[1]:.6f}")
print(f"endpoint correlation  exp(-d_corr) = {ising.correlation(0, 3):.6f}")
print(f"product of tanh(J_e) along the path = {ising.correlation_product(0, 3):.6f}")

params = IsingParams.from_couplings([0.2, 0.25, 0.22], delta=3)
lo, hi = saw_correlation_bounds(params, 4)
print(f"degree-3 graph at alpha={params.alpha:.3f} (< 1): correlations at graph "
      f"distance 4 lie in [{lo:.5f}, {hi:.5f}]")

print("\n== lateral edges keep the metric tree-like ==")
base = build_mary(2, 5, 1.0)
rng = np.random.default_rng(1)
edges = []
while len(edges) < 6:
    a, b = rng.integers(0, base.n_nodes, 2)
    if a != b and base.hop_distance(a, b) <= 3:
        edges.append((int(a), int(b)))
g = extend_lateral(base, edges, K=3)
worst = 0.0
for s in range(base.n_nodes):
    d_g = g.all_hops(s)
    for t in range(base.n_nodes):
        if s != t:
            worst = max(worst, base.hop_distance(s, t) / d_g[t])
print(f"6 lateral edges with K=3: max d_T/d_G over all pairs = {worst:.2f} <= K = 3")
