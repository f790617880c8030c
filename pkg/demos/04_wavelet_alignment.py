"""Rank-k prediction spaces see only k of the N-1 hierarchical contrasts.

Builds the tree-Haar basis, verifies orthonormality, sweeps random low-rank
subspaces against the k/(N-1) average-alignment ceiling, and shows the
binary-tree wavelets are exactly scaled edge-cut labels.
"""

import numpy as np

from hypertree import (
    Subspace,
    alignment,
    build_wavelets,
    edge_cut_labels,
    fraction_approximated,
    gram_check,
)

print("== the basis ==")
basis = build_wavelets(2, 6)
rep = gram_check(basis)
print(f"m=2, R=6: {len(basis)} wavelets over {basis.N} leaves "
      f"(= N - 1 = {basis.N - 1})")
print(f"orthonormality: max |Gram - I| = {rep.max_deviation:.2e} "
      f"(same-node {rep.max_same_node:.1e}, ancestor {rep.max_ancestor:.1e}, "
      f"disjoint {rep.max_disjoint:.1e})")

print("\n== the alignment ceiling ==")
for k in (1, 4, 16):
    worst = 0.0
    for seed in range(100):
        S = Subspace.random(basis.N, k, seed=seed)
        worst = max(worst, alignment(basis, S).average)
    print(f"k = {k:>2}: worst average alignment over 100 random subspaces "
          f"= {worst:.5f}  (ceiling k/(N-1) = {k / (basis.N - 1):.5f})")

S = Subspace.span([basis.row(i) for i in range(4)])
print(f"a subspace spanned by 4 wavelets meets the ceiling exactly: "
      f"{alignment(basis, S).average:.6f} = 4/63 = {4 / 63:.6f}")

print("\n== fraction of tasks a bottleneck can carry ==")
S = Subspace.random(basis.N, 8, seed=1)
frac, implied = fraction_approximated(basis, S, eps=0.5)
print(f"k=8 random subspace, eps=0.5: fraction approximated = {frac:.4f}, "
      f"implied dimension bound {implied:.2f} (cannot exceed 8)")
S = Subspace.span([basis.row(i) for i in range(8)])
frac, implied = fraction_approximated(basis, S, eps=0.0)
print(f"k=8 wavelet-spanned subspace, eps=0: fraction = {frac:.4f}, "
      f"implied bound {implied:.1f}")

print("\n== edge cuts == ")
small = build_wavelets(2, 2)
labels, sizes = edge_cut_labels(small)
print(f"R=2 root cut: y = {labels[0].tolist()}, |S_v| = {sizes[0]}; "
      "psi = y / sqrt(|S_v|) holds for every internal node")
