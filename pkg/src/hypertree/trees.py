"""Rooted weighted trees, their correlation metric, and tree-like extensions.

Trees are stored as flat numpy arrays indexed by dense node ids assigned in
BFS order from the root (id 0). Child order is construction order. All
builders are pure functions of (config, seed) and the resulting objects are
immutable after construction.
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LEAF_CAP = 2 ** 24
DEFAULT_OFFSPRING = {1: 1.0 / 3.0, 2: 1.0 / 3.0, 3: 1.0 / 3.0}


def leaf_cap() -> int:
    """Configured leaf-count guard (env override HYPERTREE_LEAF_CAP)."""
    raw = os.environ.get("HYPERTREE_LEAF_CAP")
    return int(raw) if raw else DEFAULT_LEAF_CAP


class LeafCapError(RuntimeError):
    """Raised when a construction would exceed the leaf-count guard."""


class WeightedTree:
    """Rooted tree of depth R with strictly positive edge weights.

    The weight of the edge (v, parent(v)) is stored at index v; the root
    entry is NaN. The correlation metric d_corr(u, v) is the weighted length
    of the unique simple path between u and v.
    """

    def __init__(self, parent, weight, *, mode="custom", m=None, lam=None,
                 mean_offspring=None, validate=True):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.weight = np.asarray(weight, dtype=np.float64)
        n = self.parent.shape[0]
        if n == 0 or self.parent[0] != -1:
            raise ValueError("node 0 must be the root (parent -1)")
        self.depth = np.zeros(n, dtype=np.int64)
        for v in range(1, n):
            p = self.parent[v]
            if not 0 <= p < v:
                raise ValueError(f"node {v}: parent {p} must precede it (BFS order)")
            self.depth[v] = self.depth[p] + 1
        if validate and n > 1 and not np.all(self.weight[1:] > 0.0):
            raise ValueError("edge weights must be strictly positive")
        self.R = int(self.depth.max()) if n > 1 else 0
        self.mode = mode
        self.m = m
        self.lam = lam
        self.mean_offspring = mean_offspring
        # children[v] ascending == construction order
        order = np.argsort(self.parent[1:], kind="stable") + 1
        starts = np.searchsorted(self.parent[order], np.arange(n))
        ends = np.searchsorted(self.parent[order], np.arange(n), side="right")
        self.children = [order[s:e] for s, e in zip(starts, ends)]
        self.n_children = np.array([len(c) for c in self.children])
        self.dist_root = np.zeros(n, dtype=np.float64)
        for v in range(1, n):
            self.dist_root[v] = self.dist_root[self.parent[v]] + self.weight[v]
        self._depth_index = None

    @property
    def n_nodes(self) -> int:
        return self.parent.shape[0]

    @property
    def min_weight(self) -> float:
        return float(self.weight[1:].min()) if self.n_nodes > 1 else math.nan

    @property
    def max_degree(self) -> int:
        """Graph degree bound: children count plus one for the parent edge."""
        deg = self.n_children + (self.parent >= 0)
        return int(deg.max())

    def nodes_at_depth(self, t):
        if self._depth_index is None:
            self._depth_index = [np.flatnonzero(self.depth == d)
                                 for d in range(self.R + 1)]
        return self._depth_index[t]

    @property
    def leaves(self):
        return self.nodes_at_depth(self.R)

    def ancestor_at_depth(self, nodes, t):
        """Vectorized ancestor lookup: the depth-t ancestor of each node."""
        ids = np.atleast_1d(np.asarray(nodes, dtype=np.int64)).copy()
        if np.any(self.depth[ids] < t):
            raise ValueError("node shallower than requested ancestor depth")
        for _ in range(int(self.depth[ids].max()) - t):
            deeper = self.depth[ids] > t
            ids[deeper] = self.parent[ids[deeper]]
        return ids if np.ndim(nodes) else int(ids[0])

    def ancestor_matrix(self, nodes):
        """(len(nodes), max_depth+1) matrix of ancestors per depth (-1 pad)."""
        ids = np.asarray(nodes, dtype=np.int64)
        out = np.full((len(ids), self.R + 1), -1, dtype=np.int64)
        cur = ids.copy()
        for d in range(self.R, -1, -1):
            at = self.depth[cur] == d
            out[at, d] = cur[at]
            above = self.depth[cur] >= d
            cur[above] = self.parent[cur[above]]
        return out

    def lca(self, u, v):
        u, v = int(u), int(v)
        while self.depth[u] > self.depth[v]:
            u = self.parent[u]
        while self.depth[v] > self.depth[u]:
            v = self.parent[v]
        while u != v:
            u, v = self.parent[u], self.parent[v]
        return u

    def d_corr(self, u, v):
        """Weighted length of the unique simple path between u and v."""
        n = self.n_nodes
        if not (0 <= u < n and 0 <= v < n):
            raise KeyError(f"unknown node id in pair ({u}, {v})")
        w = self.lca(u, v)
        return float(self.dist_root[u] + self.dist_root[v] - 2.0 * self.dist_root[w])

    def hop_distance(self, u, v):
        """Unweighted path length (edge count) between u and v."""
        w = self.lca(u, v)
        return int(self.depth[u] + self.depth[v] - 2 * self.depth[w])

    def lca_depth_matrix(self, nodes):
        """Pairwise LCA depths for a node subset, vectorized over depths."""
        anc = self.ancestor_matrix(nodes)
        n = len(nodes)
        out = np.zeros((n, n), dtype=np.int64)
        for d in range(1, self.R + 1):
            col = anc[:, d]
            same = (col[:, None] == col[None, :]) & (col[:, None] >= 0)
            out[same] = d
        return out

    def pairwise_d_corr(self, nodes):
        """Dense matrix of d_corr over a node subset."""
        ids = np.asarray(nodes, dtype=np.int64)
        anc = self.ancestor_matrix(ids)
        dr = self.dist_root[ids]
        lca_dist = np.zeros((len(ids), len(ids)))
        for d in range(1, self.R + 1):
            col = anc[:, d]
            same = (col[:, None] == col[None, :]) & (col[:, None] >= 0)
            np.copyto(lca_dist, self.dist_root[np.maximum(col, 0)][:, None],
                      where=same)
        return dr[:, None] + dr[None, :] - 2.0 * lca_dist

    def subtree_nodes(self, v):
        """All descendants of v including v, in BFS order."""
        out = [np.array([v], dtype=np.int64)]
        frontier = self.children[v]
        while len(frontier):
            out.append(frontier)
            frontier = np.concatenate([self.children[c] for c in frontier]) \
                if len(frontier) else frontier
        return np.concatenate(out)

    def subtree_leaves(self, v):
        nodes = self.subtree_nodes(v)
        return nodes[self.depth[nodes] == self.R]


def build_mary(m: int, R: int, lam: float) -> WeightedTree:
    """Complete m-ary tree of depth R with homogeneous edge weight lam."""
    if m < 2:
        raise ValueError("branching factor m must be >= 2")
    if R < 1:
        raise ValueError("depth R must be >= 1")
    if not lam > 0:
        raise ValueError("edge weight lam must be positive")
    if m ** R > leaf_cap():
        raise LeafCapError(f"m^R = {m ** R} exceeds leaf cap {leaf_cap()}")
    n = (m ** (R + 1) - 1) // (m - 1)
    parent = np.empty(n, dtype=np.int64)
    parent[0] = -1
    parent[1:] = (np.arange(1, n) - 1) // m
    weight = np.full(n, lam)
    weight[0] = np.nan
    return WeightedTree(parent, weight, mode="mary", m=m, lam=lam,
                        mean_offspring=float(m))


@dataclass(frozen=True)
class GaltonWatsonResult:
    """Outcome of a truncated Galton-Watson generation.

    Extinction before the target depth is a distinct outcome, not an error:
    `tree` then holds the partial tree and `extinction_depth` the first empty
    level.
    """
    tree: WeightedTree
    requested_R: int
    extinct: bool
    extinction_depth: int | None


def _offspring_table(offspring):
    if isinstance(offspring, dict):
        vals = np.array(sorted(offspring), dtype=np.int64)
        probs = np.array([offspring[int(v)] for v in vals], dtype=np.float64)
    else:
        probs = np.asarray(offspring, dtype=np.float64)
        vals = np.arange(len(probs), dtype=np.int64)
    if np.any(vals < 0) or np.any(probs < 0):
        raise ValueError("offspring distribution must be on {0, 1, ...}")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("offspring probabilities must sum to 1")
    probs = probs / probs.sum()
    return vals, probs


def build_galton_watson(offspring=None, R=8, lam=1.0, seed=0) -> GaltonWatsonResult:
    """Galton-Watson tree truncated at depth R, deterministic for a seed.

    Args:
        offspring: distribution on {0..K_max}, as {value: prob} or a prob
            vector indexed by count. Defaults to uniform{1,2,3}.
        R: truncation depth.
        lam: homogeneous edge weight.
        seed: numpy Generator seed; the level-by-level draws replay exactly.
    """
    if R < 1:
        raise ValueError("depth R must be >= 1")
    if not lam > 0:
        raise ValueError("edge weight lam must be positive")
    vals, probs = _offspring_table(DEFAULT_OFFSPRING if offspring is None else offspring)
    mean = float(vals @ probs)
    rng = np.random.default_rng(seed)
    cap = leaf_cap()
    parents = [np.array([-1], dtype=np.int64)]
    frontier = np.array([0], dtype=np.int64)
    next_id = 1
    extinction_depth = None
    for t in range(1, R + 1):
        counts = rng.choice(vals, size=len(frontier), p=probs)
        total = int(counts.sum())
        if total == 0:
            extinction_depth = t
            break
        if total > cap:
            raise LeafCapError(f"level {t} would hold {total} nodes (cap {cap})")
        level_parents = np.repeat(frontier, counts)
        parents.append(level_parents)
        frontier = np.arange(next_id, next_id + total, dtype=np.int64)
        next_id += total
    parent = np.concatenate(parents)
    weight = np.full(len(parent), lam)
    weight[0] = np.nan
    tree = WeightedTree(parent, weight, mode="gw", m=None, lam=lam,
                        mean_offspring=mean)
    return GaltonWatsonResult(tree=tree, requested_R=R,
                              extinct=extinction_depth is not None,
                              extinction_depth=extinction_depth)


@dataclass(frozen=True)
class GrowthConfig:
    """Slack and scales for the regular-growth check.

    eta must sit in (0, log m); the collapse results additionally assume
    eta < log(m)/4, surfaced via `within_standing_assumption`.
    """
    eta: float
    R: int
    m: float

    def __post_init__(self):
        if not 0.0 < self.eta < math.log(self.m):
            raise ValueError("eta must lie in (0, log m)")
        if self.R < 2:
            raise ValueError("R must be >= 2")

    @property
    def within_standing_assumption(self) -> bool:
        return self.eta < 0.25 * math.log(self.m)


@dataclass(frozen=True)
class GrowthReport:
    size_ok_mid: bool
    size_ok_full: bool
    dominance_ok: bool
    n_leaves_mid: int
    n_leaves_full: int
    max_mid_subtree: int
    size_bounds_mid: tuple
    size_bounds_full: tuple
    dominance_bound: float

    @property
    def ok(self) -> bool:
        return self.size_ok_mid and self.size_ok_full and self.dominance_ok


def check_regular_growth(tree: WeightedTree, cfg: GrowthConfig) -> GrowthReport:
    """Check exponential level sizes at R/2 and R plus mid-subtree dominance."""
    if tree.R < cfg.R:
        raise ValueError(f"tree depth {tree.R} below requested R {cfg.R}")
    mid = cfg.R // 2
    log_m = math.log(cfg.m)
    counts = {}
    for t in (mid, cfg.R):
        lo = math.exp((log_m - cfg.eta) * t)
        hi = math.exp((log_m + cfg.eta) * t)
        counts[t] = (len(tree.nodes_at_depth(t)), lo, hi)
    leaves_full = np.flatnonzero(tree.depth == cfg.R)
    mid_anc = tree.ancestor_at_depth(leaves_full, mid)
    per_mid = np.bincount(mid_anc).max() if len(leaves_full) else 0
    dom_bound = math.exp((log_m + cfg.eta) * cfg.R / 2.0)
    n_mid, lo_mid, hi_mid = counts[mid]
    n_full, lo_full, hi_full = counts[cfg.R]
    return GrowthReport(
        size_ok_mid=lo_mid <= n_mid <= hi_mid,
        size_ok_full=lo_full <= n_full <= hi_full,
        dominance_ok=per_mid <= dom_bound,
        n_leaves_mid=n_mid,
        n_leaves_full=n_full,
        max_mid_subtree=int(per_mid),
        size_bounds_mid=(lo_mid, hi_mid),
        size_bounds_full=(lo_full, hi_full),
        dominance_bound=dom_bound,
    )


def _minus_log_tanh(J):
    """-log(tanh(J)) evaluated without cancellation for large J."""
    J = np.asarray(J, dtype=np.float64)
    z = np.exp(-2.0 * J)
    return np.log1p(z) - np.log1p(-z)


@dataclass(frozen=True)
class IsingTree:
    """Tree with weights w_e = -log tanh(J_e), exposing spin correlations."""
    tree: WeightedTree
    J: np.ndarray
    saturated: np.ndarray  # couplings so strong the weight underflowed

    def correlation(self, u, v) -> float:
        return math.exp(-self.tree.d_corr(u, v))

    def correlation_product(self, u, v) -> float:
        """Edge-wise product of tanh(J_e) along the path (independent route)."""
        w = self.tree.lca(u, v)
        prod = 1.0
        for x in (u, v):
            while x != w:
                prod *= math.tanh(self.J[x])
                x = self.tree.parent[x]
        return prod


def ising_weights(tree: WeightedTree, J) -> IsingTree:
    """Reweight a tree with ferromagnetic couplings J_e > 0 per edge.

    J may be a scalar or an array indexed by child node id (entry 0 ignored).
    Saturated couplings (tanh(J) rounding to 1) get the smallest positive
    weight and are flagged rather than rejected.
    """
    n = tree.n_nodes
    J_arr = np.broadcast_to(np.asarray(J, dtype=np.float64), (n,)).copy()
    if not np.all(J_arr[1:] > 0.0):
        raise ValueError("all couplings J_e must be strictly positive")
    w = _minus_log_tanh(J_arr)
    saturated = w == 0.0
    w[saturated] = np.nextafter(0.0, 1.0)
    w[0] = np.nan
    reweighted = WeightedTree(tree.parent, w, mode=tree.mode, m=tree.m,
                              lam=None, mean_offspring=tree.mean_offspring)
    saturated[0] = False
    return IsingTree(tree=reweighted, J=J_arr, saturated=saturated)


@dataclass(frozen=True)
class IsingParams:
    """High-temperature parameters for self-avoiding-walk correlation bounds."""
    t_min: float
    t_max: float
    delta: int  # graph degree bound
    alpha: float = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.t_min <= self.t_max < 1.0):
            raise ValueError("need 0 <= t_min <= t_max < 1")
        if self.delta < 2:
            raise ValueError("degree bound must be >= 2")
        object.__setattr__(self, "alpha", (self.delta - 1) * self.t_max)

    @classmethod
    def from_couplings(cls, J, delta):
        t = np.tanh(np.asarray(J, dtype=np.float64))
        return cls(t_min=float(t.min()), t_max=float(t.max()), delta=delta)

    @property
    def high_temperature(self) -> bool:
        return self.alpha < 1.0

    @property
    def C(self) -> float:
        if not self.high_temperature:
            raise ValueError("C_{Delta,alpha} defined only for alpha < 1")
        return self.delta / ((self.delta - 1) * (1.0 - self.alpha))


def saw_correlation_bounds(params: IsingParams, graph_distance: int):
    """Two-sided spin-correlation bounds at a given graph distance.

    Returns (lower, upper); upper is None when alpha >= 1 (the walk expansion
    does not converge there).
    """
    if graph_distance < 0:
        raise ValueError("distance must be nonnegative")
    lower = params.t_min ** graph_distance
    upper = params.C * params.alpha ** graph_distance \
        if params.high_temperature else None
    return lower, upper


class LateralGraph:
    """Tree plus lateral edges whose endpoints are within tree distance K."""

    def __init__(self, tree: WeightedTree, lateral_edges, K: int):
        if K < 1:
            raise ValueError("locality bound K must be >= 1")
        self.tree = tree
        self.K = K
        edges = [(int(u), int(v)) for u, v in lateral_edges]
        for u, v in edges:
            d = tree.hop_distance(u, v)
            if d > K:
                raise ValueError(f"lateral edge ({u},{v}) at tree distance {d} > K={K}")
        self.lateral_edges = edges
        n = tree.n_nodes
        adj = [[] for _ in range(n)]
        for v in range(1, n):
            p = int(tree.parent[v])
            adj[v].append(p)
            adj[p].append(v)
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        self.adj = [np.array(sorted(set(a)), dtype=np.int64) for a in adj]

    def d_graph(self, u, v) -> int:
        """BFS shortest-path hop count on the union graph."""
        if u == v:
            return 0
        n = self.tree.n_nodes
        dist = np.full(n, -1, dtype=np.int64)
        dist[u] = 0
        q = deque([u])
        while q:
            x = q.popleft()
            for y in self.adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    if y == v:
                        return int(dist[y])
                    q.append(y)
        raise RuntimeError("graph is connected by construction")

    def all_hops(self, source) -> np.ndarray:
        """BFS distances from one source to every node."""
        n = self.tree.n_nodes
        dist = np.full(n, -1, dtype=np.int64)
        dist[source] = 0
        q = deque([source])
        while q:
            x = q.popleft()
            for y in self.adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    q.append(y)
        return dist


def extend_lateral(tree: WeightedTree, lateral_edges, K: int) -> LateralGraph:
    """Attach lateral edges, rejecting any that violate the K-locality bound."""
    return LateralGraph(tree, lateral_edges, K)


def save_tree(tree: WeightedTree, path):
    """Write header `m R lambda mode` plus `child parent weight` lines."""
    m_repr = repr(tree.m) if tree.m is not None else "nan"
    lam_repr = repr(float(tree.lam)) if tree.lam is not None else "nan"
    lines = [f"{m_repr} {tree.R} {lam_repr} {tree.mode}"]
    for v in range(1, tree.n_nodes):
        lines.append(f"{v} {tree.parent[v]} {repr(float(tree.weight[v]))}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_tree(path) -> WeightedTree:
    with open(path) as fh:
        header = fh.readline().split()
        m_raw, _, lam_raw, mode = header
        m = None if m_raw == "nan" else int(m_raw)
        lam = None if lam_raw == "nan" else float(lam_raw)
        rows = [line.split() for line in fh if line.strip()]
    n = len(rows) + 1
    parent = np.full(n, -1, dtype=np.int64)
    weight = np.full(n, np.nan)
    for child, par, w in rows:
        parent[int(child)] = int(par)
        weight[int(child)] = float(w)
    mean = float(m) if m is not None else None
    return WeightedTree(parent, weight, mode=mode, m=m, lam=lam,
                        mean_offspring=mean)
