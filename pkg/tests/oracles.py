"""Independent oracles shared by the test modules."""

import numpy as np
from scipy.spatial import cKDTree


def cross_min_bruteforce(points, groups):
    """Exact minimum distance over pairs with distinct group labels."""
    n = len(points)
    best = (np.inf, -1, -1)
    for i in range(n):
        d = np.linalg.norm(points[i + 1:] - points[i], axis=1)
        mask = groups[i + 1:] != groups[i]
        if mask.any():
            dm = np.where(mask, d, np.inf)
            j = int(np.argmin(dm))
            cand = (float(dm[j]), i, i + 1 + j)
            if cand < best:
                best = cand
    return best


def cross_min_kdtree(points, groups, k0=8):
    """Exact cross-group minimum via nearest-neighbor queries.

    Queries widen until every point has seen a neighbor from another group
    or exhausted the cloud, so the result is exact.
    """
    tree = cKDTree(points)
    n = len(points)
    best = (np.inf, -1, -1)
    pending = np.arange(n)
    k = k0
    while len(pending) and k <= n:
        d, idx = tree.query(points[pending], k=min(k + 1, n))
        for row, i in enumerate(pending):
            others = idx[row][groups[idx[row]] != groups[i]]
            dists = d[row][groups[idx[row]] != groups[i]]
            if len(others):
                j = int(others[0])
                lo, hi = sorted((int(i), j))
                cand = (float(dists[0]), lo, hi)
                if cand < best:
                    best = cand
        found = []
        for row, i in enumerate(pending):
            if not np.any(groups[idx[row]] != groups[i]):
                found.append(i)
        pending = np.array(found, dtype=np.int64)
        k *= 4
    return best


def random_metric(n, seed):
    """Shortest-path metric of a random connected weighted graph."""
    rng = np.random.default_rng(seed)
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)

    def add_edge(i, j, w):
        D[i, j] = min(D[i, j], w)
        D[j, i] = D[i, j]

    for v in range(1, n):  # random spanning tree keeps it connected
        add_edge(v, int(rng.integers(0, v)), float(rng.uniform(0.1, 1.0)))
    for _ in range(2 * n):
        i, j = rng.integers(0, n, 2)
        if i != j:
            add_edge(int(i), int(j), float(rng.uniform(0.1, 1.0)))
    for k in range(n):  # Floyd-Warshall
        D = np.minimum(D, D[:, k][:, None] + D[k, :][None, :])
    return D
