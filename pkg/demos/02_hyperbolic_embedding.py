"""Embedding trees in the Poincare ball with near-unit distortion.

Shows spherical codes, the recursive construction, the curvature calibration
that replaces the theorem's unspecified constant, distortion scans, and the
cone margins that make child membership a large-margin problem.
"""

import math

import numpy as np

from hypertree import (
    build_mary,
    calibrate_curvature,
    classify_child,
    cone_margin,
    distortion,
    margin_classifier,
    packing_converse_check,
    sarkar_embed,
    spherical_code,
)

print("== spherical codes ==")
code = spherical_code(6, 3, min_angle=math.pi / 3, seed=0)
g = np.clip(code @ code.T, -1, 1)
np.fill_diagonal(g, -1)
print(f"6 directions in R^3: min pairwise angle {math.degrees(math.acos(g.max())):.1f} deg "
      "(repulsion descent lands near the octahedron)")

print("\n== curvature calibration ==")
tree = build_mary(3, 6, 1.0)
cal = calibrate_curvature(tree, k=2, eps=0.1)
print(f"m=3, R=6, k=2, target distortion 1.1:")
print(f"  smallest sqrt(kappa) = {math.sqrt(cal.kappa):.3f}  "
      f"(implied cap constant {cal.implied_C_k:.3f})")

emb = sarkar_embed(tree, k=2, kappa=cal.kappa, eps=0.1)
rep = distortion(tree, emb)
print(f"  all-pairs scan over {rep.n_pairs} pairs: D = {rep.D:.4f}, "
      f"expansion never exceeds {rep.worst_expansion:.4f}")
print(f"  worst parent-child edge-length error: {emb.edge_length_errors().max():.2e}")

depth6 = emb.point(int(tree.leaves[0]))
print(f"  a depth-6 leaf sits at hyperbolic radius {depth6.radius:.1f} "
      f"(Euclidean norm 1 - {1 - math.tanh(0.5 * depth6.radius * math.sqrt(cal.kappa)):.1e}; "
      "kept in polar form)")

print("\n== cone margins and the membership classifier ==")
gammas = []
for a in np.flatnonzero(tree.depth < tree.R):
    for c in tree.children[a]:
        _, gamma = cone_margin(emb, int(a), int(c))
        gammas.append(gamma)
print(f"margins over all {len(gammas)} (node, child) pairs: "
      f"min {min(gammas):.3f}, median {np.median(gammas):.3f}")

plane, gamma = cone_margin(emb, 0, int(tree.children[0][0]))
clf = margin_classifier(plane, gamma)
left = tree.subtree_leaves(int(tree.children[0][0]))
vals = clf(left)
print(f"margin classifier at the root: children of the first cone all score "
      f"{vals.min():+.0f} (saturated at the margin)")

truth = tree.ancestor_at_depth(tree.leaves, 1)
kids = list(tree.children[0])
assigned = classify_child(emb, 0, tree.leaves)
errors = sum(int(kids[a] != t) for a, t in zip(assigned, truth))
print(f"cone classification of all {len(tree.leaves)} leaves at the root: "
      f"{errors} errors")

print("\n== how small can the curvature be? ==")
conv = packing_converse_check(m=3, eta=0.2, k=2, s=1.0, D=rep.D, lam=1.0,
                              kappa_used=cal.kappa)
print(f"volume-packing requirement: sqrt(kappa) >= {conv.sqrt_kappa_required:.3f}; "
      f"used {math.sqrt(conv.kappa_used):.3f} -> consistent: {conv.consistent}")
