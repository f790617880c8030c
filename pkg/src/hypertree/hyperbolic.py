"""Poincare-ball geometry at curvature -kappa and the recursive tree embedding.

The model is the unit ball with distances normalized so that a point at
Euclidean norm tanh(tau*sqrt(kappa)/2) lies at hyperbolic distance tau from
the origin. Internally most computations run in *scaled* units s = sqrt(kappa)
times hyperbolic length, which makes them curvature-free.

Deep points: at the curvatures the embedding needs, Cartesian coordinates
saturate float64 within a few levels (1 - |x| underflows). The k=2 backend
therefore never relies on global Cartesian positions; every node carries its
polar coordinates relative to every ancestor (radius + angle in the ancestor's
frame), maintained by stable hyperbolic-triangle recursions. Distances are
evaluated in the frame of the pair's lowest common ancestor, where angles are
O(1) and float64 is exact enough at any depth. For k >= 3 the construction
uses direct Mobius arithmetic, which is accurate while points stay away from
the boundary; saturation is detected and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .trees import WeightedTree

_TWO_PI = 2.0 * math.pi
_SMALL_BRANCH = 150.0  # sinh still representable below this (scaled units)
_CARTESIAN_LIMIT = 1.0 - 1e-12


class BoundaryError(ValueError):
    """A point on or outside the unit sphere was passed to a ball operation."""


class SphericalCodeError(RuntimeError):
    """Requested minimum angle could not be achieved."""

    def __init__(self, message, achieved_angle):
        super().__init__(message)
        self.achieved_angle = achieved_angle


def _wrap(x):
    """Map angles to [-pi, pi)."""
    return (np.asarray(x) + math.pi) % _TWO_PI - math.pi


def _logsinh(x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(x > 0.0,
                        x + np.log1p(-np.exp(-2.0 * np.minimum(x, 700.0))) - math.log(2.0),
                        -np.inf)


def _side_scaled(a, b, cos_theta):
    """Hyperbolic law of cosines: the side opposite angle theta.

    Returns acosh(cosh a cosh b - sinh a sinh b cos theta) through the
    cancellation-free form z - 1 = 2 sin^2(t/2) sinh^2((a+b)/2)
    + 2 cos^2(t/2) sinh^2((a-b)/2), switching to log-domain when sinh
    would overflow. Inputs are scaled lengths (sqrt(kappa) * distance).
    """
    a, b, cos_theta = np.broadcast_arrays(
        np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64),
        np.asarray(cos_theta, dtype=np.float64))
    s2 = np.clip(0.5 * (1.0 - cos_theta), 0.0, 1.0)
    c2 = np.clip(0.5 * (1.0 + cos_theta), 0.0, 1.0)
    p = 0.5 * (a + b)
    q = 0.5 * (a - b)
    small = p < _SMALL_BRANCH
    ps = np.where(small, p, 0.0)
    qs = np.where(small, q, 0.0)
    w = 2.0 * (s2 * np.sinh(ps) ** 2 + c2 * np.sinh(qs) ** 2)
    d_small = np.log1p(w + np.sqrt(w * (w + 2.0)))
    with np.errstate(divide="ignore"):
        lw = np.logaddexp(math.log(2.0) + np.log(s2) + 2.0 * _logsinh(np.abs(p)),
                          math.log(2.0) + np.log(c2) + 2.0 * _logsinh(np.abs(q)))
    wl = np.exp(np.minimum(lw, 350.0))
    d_mid = np.log1p(wl + np.sqrt(wl * (wl + 2.0)))
    d_large = np.where(lw < 350.0, d_mid, lw + math.log(2.0))
    return np.where(small, d_small, d_large)


def _angle_at_anchor(a, b, cos_theta, sin_theta):
    """Angle at the anchor O of triangle O-X-C.

    Sides: OX = a, XC = b, with interior angle theta at X (between X->O and
    X->C). Exponentially small output is produced at full relative precision.
    """
    s2 = np.clip(0.5 * (1.0 - cos_theta), 0.0, 1.0)
    c2 = np.clip(0.5 * (1.0 + cos_theta), 0.0, 1.0)
    num = sin_theta * (np.exp(-a) - np.exp(-a - 2.0 * b))
    den = s2 * (1.0 - np.exp(-2.0 * (a + b))) + c2 * (np.exp(-2.0 * b) - np.exp(-2.0 * a))
    return np.arctan2(num, den)


def _angle_at_far(a, b, cos_theta, sin_theta):
    """Angle at C of triangle O-X-C (sides OX = a, XC = b, angle theta at X)."""
    s2 = np.clip(0.5 * (1.0 - cos_theta), 0.0, 1.0)
    c2 = np.clip(0.5 * (1.0 + cos_theta), 0.0, 1.0)
    num = sin_theta * (np.exp(-b) - np.exp(-b - 2.0 * a))
    den = s2 * (1.0 - np.exp(-2.0 * (a + b))) + c2 * (np.exp(-2.0 * a) - np.exp(-2.0 * b))
    return np.arctan2(num, den)


def _asinh_sinh(s, c):
    """asinh(sinh(s) * c), stable for large scaled radii s."""
    s = np.asarray(s, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    direct = np.arcsinh(np.sinh(np.minimum(s, 700.0)) * c)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.sign(c) * (s + np.log(np.abs(c)) + np.log1p(-np.exp(-2.0 * np.minimum(s, 700.0))))
    return np.where(s < 700.0, direct, np.where(c == 0.0, 0.0, tail))


# -- ball points and Mobius operations --------------------------------------

@dataclass(frozen=True)
class BallPoint:
    """Point of the Poincare ball, as coordinates and/or polar form.

    `radius` is the hyperbolic distance from the origin at the curvature the
    point was created under; `direction` is the Euclidean unit direction.
    Cartesian coordinates are omitted for points too deep to represent
    (norm beyond 1 - 1e-12).
    """
    cartesian: np.ndarray | None = None
    radius: float | None = None
    direction: np.ndarray | None = None

    @classmethod
    def from_cartesian(cls, x):
        x = np.asarray(x, dtype=np.float64)
        if np.linalg.norm(x) >= 1.0:
            raise BoundaryError("point must lie strictly inside the unit ball")
        return cls(cartesian=x)

    @classmethod
    def from_polar(cls, radius, direction, kappa):
        direction = np.asarray(direction, dtype=np.float64)
        direction = direction / np.linalg.norm(direction)
        norm = math.tanh(0.5 * radius * math.sqrt(kappa))
        cart = norm * direction if norm < _CARTESIAN_LIMIT else None
        return cls(cartesian=cart, radius=float(radius), direction=direction)

    def scaled_radius(self, kappa):
        """sqrt(kappa) times the hyperbolic radius."""
        if self.radius is not None:
            return self.radius * math.sqrt(kappa)
        norm = np.linalg.norm(self.cartesian)
        if norm >= 1.0:
            raise BoundaryError("point must lie strictly inside the unit ball")
        return 2.0 * math.atanh(norm)

    def unit_direction(self):
        if self.direction is not None:
            return self.direction
        norm = np.linalg.norm(self.cartesian)
        if norm == 0.0:
            e1 = np.zeros_like(self.cartesian)
            e1[0] = 1.0
            return e1
        return self.cartesian / norm


def _as_point(x):
    return x if isinstance(x, BallPoint) else BallPoint.from_cartesian(x)


def hyp_distance(x, y, kappa=1.0) -> float:
    """Geodesic distance at curvature -kappa between ball points.

    Uses the Mobius-difference form when both points are Cartesian
    (accurate for nearby points) and the polar law of cosines otherwise
    (accurate arbitrarily deep).
    """
    px, py = _as_point(x), _as_point(y)
    if px.radius is None and py.radius is None:
        for p in (px, py):
            if np.linalg.norm(p.cartesian) >= 1.0:
                raise BoundaryError("point must lie strictly inside the unit ball")
        if np.array_equal(px.cartesian, py.cartesian):
            return 0.0
        diff = np.linalg.norm(mobius_add(-px.cartesian, py.cartesian))
        return 2.0 * math.atanh(min(diff, 1.0 - 1e-17)) / math.sqrt(kappa)
    a = px.scaled_radius(kappa)
    b = py.scaled_radius(kappa)
    cos_theta = float(np.clip(px.unit_direction() @ py.unit_direction(), -1.0, 1.0))
    return float(_side_scaled(a, b, cos_theta)) / math.sqrt(kappa)


def mobius_add(x, y):
    """Mobius gyrovector addition on the unit ball."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xy = float(x @ y)
    x2 = float(x @ x)
    y2 = float(y @ y)
    num = (1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y
    return num / (1.0 + 2.0 * xy + x2 * y2)


@dataclass(frozen=True)
class MobiusShift:
    """Isometry handle phi_p with phi_p(p) = 0 and its inverse."""
    p: np.ndarray

    def apply(self, y):
        return mobius_add(-self.p, np.asarray(y, dtype=np.float64))

    def inverse(self, y):
        return mobius_add(self.p, np.asarray(y, dtype=np.float64))


def mobius_to_origin(p) -> MobiusShift:
    p = np.asarray(p, dtype=np.float64)
    if np.linalg.norm(p) >= _CARTESIAN_LIMIT:
        raise BoundaryError("base point too close to the boundary for Cartesian "
                            "Mobius arithmetic; use the polar machinery")
    return MobiusShift(p=p)


def mobius_back(handle: MobiusShift, y):
    return handle.inverse(y)


def align(u_from, u_to) -> np.ndarray:
    """Rotation matrix taking unit vector u_from onto u_to."""
    u = np.asarray(u_from, dtype=np.float64)
    v = np.asarray(u_to, dtype=np.float64)
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    k = len(u)
    c = float(np.clip(u @ v, -1.0, 1.0))
    eye = np.eye(k)
    if c >= 1.0 - 1e-15:
        return eye
    if c <= -1.0 + 1e-15:
        if k == 2:
            return -eye  # 180-degree rotation
        # compose two reflections: u -> -u, determinant +1
        w = np.zeros(k)
        w[int(np.argmin(np.abs(u)))] = 1.0
        w = w - (w @ u) * u
        w /= np.linalg.norm(w)
        return (eye - 2.0 * np.outer(w, w)) @ (eye - 2.0 * np.outer(u, u))
    vp = v - c * u
    s = np.linalg.norm(vp)
    vp = vp / s
    return (eye + (c - 1.0) * (np.outer(u, u) + np.outer(vp, vp))
            + s * (np.outer(vp, u) - np.outer(u, vp)))


# -- spherical codes ---------------------------------------------------------

def _min_pairwise_angle(vectors):
    g = np.clip(vectors @ vectors.T, -1.0, 1.0)
    np.fill_diagonal(g, -1.0)
    return float(np.arccos(g.max()))


def spherical_code(n, k, min_angle=None, seed=0, iters=800):
    """n unit vectors in R^k with large pairwise angles.

    k=2 uses exact equal spacing (first vector e1); n<=2 is handled exactly in
    any dimension; otherwise seeded Riesz-energy repulsion descent with a
    fixed iteration budget. Raises SphericalCodeError (carrying the achieved
    angle) if min_angle is requested but not met.
    """
    if n < 1 or k < 2:
        raise ValueError("need n >= 1 and k >= 2")
    if n == 1:
        out = np.zeros((1, k))
        out[0, 0] = 1.0
    elif n == 2:
        out = np.zeros((2, k))
        out[0, 0] = 1.0
        out[1, 0] = -1.0
    elif k == 2:
        ang = _TWO_PI * np.arange(n) / n
        out = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, k))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        for it in range(iters):
            diff = x[:, None, :] - x[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            np.fill_diagonal(d2, np.inf)
            force = (diff / (d2 ** 1.5)[:, :, None]).sum(axis=1)
            force -= (np.einsum("ij,ij->i", force, x))[:, None] * x
            x += (0.5 / (n * math.sqrt(it + 1.0))) * force
            x /= np.linalg.norm(x, axis=1, keepdims=True)
        out = x
    achieved = _min_pairwise_angle(out) if n > 1 else math.pi
    if min_angle is not None and achieved < min_angle - 1e-12:
        raise SphericalCodeError(
            f"requested min angle {min_angle:.6f} infeasible for (n={n}, k={k}); "
            f"achieved {achieved:.6f}", achieved_angle=achieved)
    return out


# -- the recursive embedding -------------------------------------------------

@dataclass(frozen=True)
class CurvatureReport:
    """Whether sqrt(kappa) >= C_k log(Delta) / (lambda * eps) held."""
    sqrt_kappa: float
    required: float
    C_k: float
    delta: int
    satisfied: bool


class HyperbolicEmbedding:
    """Node -> Poincare-ball map with per-node polar data.

    Built by `sarkar_embed`. The tree root sits at the origin; the children
    of every node are placed at their edge's hyperbolic length along
    spherical-code directions, with one code slot reserved for the parent
    direction.
    """

    def __init__(self, tree, kappa, k, eps, tau, step_scaled, curvature_report):
        self.tree = tree
        self.kappa = float(kappa)
        self.k = int(k)
        self.eps = float(eps)
        self.tau = tau
        self.step_scaled = step_scaled  # per-edge sqrt(kappa)*length
        self.curvature_report = curvature_report
        self._sqrt_kappa = math.sqrt(kappa)

    # populated by the builders
    # planar backend: nu, v_angle, s_anc, alpha_anc, anc_full
    # cartesian backend: X, local_dir, s_global, dir_global, n_saturated

    @property
    def n_nodes(self):
        return self.tree.n_nodes

    def scaled_radii(self):
        if self.k == 2:
            return self.s_anc[:, 0].copy()
        return self.s_global.copy()

    def global_direction(self, v):
        if self.k == 2:
            chi = self.alpha_anc[v, 0] if v else 0.0
            return np.array([math.cos(chi), math.sin(chi)])
        return self.dir_global[v].copy()

    def point(self, v) -> BallPoint:
        s = 0.0 if v == 0 else float(self.scaled_radii()[v])
        direction = self.global_direction(v)
        norm = math.tanh(0.5 * s)
        cart = norm * direction if norm < _CARTESIAN_LIMIT else None
        return BallPoint(cartesian=cart, radius=s / self._sqrt_kappa,
                         direction=direction)

    # -- distances -----------------------------------------------------------

    def _lca_depths(self, us, vs):
        au = self.anc_full[us]
        av = self.anc_full[vs]
        same = (au == av) & (au >= 0)
        return same.cumprod(axis=1).sum(axis=1) - 1

    def distance_pairs(self, us, vs):
        """Vector of hyperbolic distances for node-id pairs."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        if self.k != 2:
            a = self.s_global[us]
            b = self.s_global[vs]
            cos_t = np.clip(np.einsum("ij,ij->i", self.dir_global[us],
                                      self.dir_global[vs]), -1.0, 1.0)
            out = _side_scaled(a, b, cos_t) / self._sqrt_kappa
            out[us == vs] = 0.0
            return out
        dw = self._lca_depths(us, vs)
        rows = np.arange(len(us))
        out = np.empty(len(us), dtype=np.float64)
        du = self.tree.depth[us]
        dv = self.tree.depth[vs]
        anc_case = (dw == du) | (dw == dv)  # one node is the ancestor
        if anc_case.any():
            top = np.where(du[anc_case] <= dv[anc_case], us[anc_case], vs[anc_case])
            bot = np.where(du[anc_case] <= dv[anc_case], vs[anc_case], us[anc_case])
            idx = np.minimum(self.tree.depth[top], self.s_anc.shape[1] - 1)
            res = self.s_anc[bot, idx]
            res[top == bot] = 0.0
            out[anc_case] = res
        rest = ~anc_case
        if rest.any():
            d = dw[rest]
            su = self.s_anc[us[rest], d]
            sv = self.s_anc[vs[rest], d]
            dang = _wrap(self.alpha_anc[us[rest], d] - self.alpha_anc[vs[rest], d])
            out[rest] = _side_scaled(su, sv, np.cos(dang))
        return out / self._sqrt_kappa

    def distance(self, u, v) -> float:
        return float(self.distance_pairs(np.array([u]), np.array([v]))[0])

    def frame_coords(self, anchor, nodes):
        """Polar coordinates of descendants in the anchor's frame.

        Returns (scaled radii, unit direction matrix). Directions live in the
        tangent frame at the anchor, the same frame hyperplane normals use.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        d = int(self.tree.depth[anchor])
        if self.k == 2:
            if not np.all(self.anc_full[nodes, d] == anchor):
                raise ValueError("frame_coords expects descendants of the anchor")
            s = self.s_anc[nodes, d]
            ang = self.alpha_anc[nodes, d]
            return s, np.column_stack([np.cos(ang), np.sin(ang)])
        shift = MobiusShift(p=self.X[anchor])
        rel = np.array([shift.apply(self.X[v]) for v in nodes])
        norms = np.linalg.norm(rel, axis=1)
        s = 2.0 * np.arctanh(np.minimum(norms, 1.0 - 1e-16))
        dirs = rel / np.where(norms > 0, norms, 1.0)[:, None]
        return s, dirs

    def child_directions(self, a):
        """Local placement directions of a's children (tangent frame at a)."""
        kids = self.tree.children[a]
        if self.k == 2:
            ang = self.nu[kids]
            return kids, np.column_stack([np.cos(ang), np.sin(ang)])
        return kids, self.local_dir[kids]

    def edge_length_errors(self):
        """Relative error of each parent-child hyperbolic length vs its step.

        Depth >= 2 edges are re-derived in the grandparent's frame, an
        independent route through the triangle recursion (the LCA shortcut
        would just read back the placement value).
        """
        errs = np.zeros(self.n_nodes)
        ids = np.arange(self.n_nodes)
        deep = ids[self.tree.depth[ids] >= 2]
        if not len(deep):
            return errs
        ps = self.tree.parent[deep]
        if self.k == 2:
            dg = self.tree.depth[ps] - 1
            su = self.s_anc[ps, dg]
            sv = self.s_anc[deep, dg]
            dang = _wrap(self.alpha_anc[ps, dg] - self.alpha_anc[deep, dg])
            d = _side_scaled(su, sv, np.cos(dang))
        else:
            d = self.distance_pairs(ps, deep) * self._sqrt_kappa
        errs[deep] = np.abs(d - self.step_scaled[deep]) / self.step_scaled[deep]
        return errs


def _planar_build(emb: HyperbolicEmbedding):
    tree = emb.tree
    n = tree.n_nodes
    R = tree.R
    b = emb.step_scaled
    nu = np.zeros(n)
    v_angle = np.zeros(n)
    s_anc = np.full((n, max(R, 1)), np.nan)
    alpha_anc = np.full((n, max(R, 1)), np.nan)
    zeta = np.full((n, max(R, 1)), np.nan)

    for a in range(n):
        dp = int(tree.depth[a])
        if a > 0:
            p = int(tree.parent[a])
            if dp == 1:
                s_anc[a, 0] = b[a]
                alpha_anc[a, 0] = nu[a]
                v_angle[a] = _wrap(nu[a] + math.pi)
                zeta[a, 0] = v_angle[a]
            else:
                ds = np.arange(dp - 1)
                delta = _wrap(nu[a] - zeta[p, ds])
                cos_t = np.cos(delta)
                sin_t = np.abs(np.sin(delta))
                sgn = np.where(delta == 0.0, 1.0, np.sign(delta))
                sp = s_anc[p, ds]
                s_anc[a, ds] = _side_scaled(sp, b[a], cos_t)
                beta = _angle_at_anchor(sp, b[a], cos_t, sin_t)
                alpha_anc[a, ds] = _wrap(alpha_anc[p, ds] - sgn * beta)
                theta_c = _angle_at_far(sp, b[a], cos_t, sin_t)
                v_angle[a] = _wrap(alpha_anc[a, 0] + math.pi - sgn[0] * theta_c[0])
                zeta[a, ds] = _wrap(v_angle[a] + sgn * theta_c)
                s_anc[a, dp - 1] = b[a]
                alpha_anc[a, dp - 1] = nu[a]
                zeta[a, dp - 1] = v_angle[a]
        kids = tree.children[a]
        c = len(kids)
        if c == 0:
            continue
        if a == 0:
            nu[kids] = _TWO_PI * np.arange(c) / c
        else:
            nu[kids] = _wrap(v_angle[a] + _TWO_PI * (1.0 + np.arange(c)) / (c + 1))
    emb.nu = nu
    emb.v_angle = v_angle
    emb.s_anc = s_anc
    emb.alpha_anc = alpha_anc
    emb.anc_full = tree.ancestor_matrix(np.arange(n))


def _cartesian_build(emb: HyperbolicEmbedding, code_seed):
    tree = emb.tree
    n = tree.n_nodes
    k = emb.k
    X = np.zeros((n, k))
    local_dir = np.zeros((n, k))
    codes = {}

    def code_for(size):
        if size not in codes:
            codes[size] = spherical_code(size, k, seed=code_seed)
        return codes[size]

    for a in range(n):
        kids = tree.children[a]
        c = len(kids)
        if c == 0:
            continue
        rho = np.tanh(0.5 * emb.step_scaled[kids])
        if a == 0:
            dirs = code_for(c)[:c]
        else:
            p = int(tree.parent[a])
            shift = MobiusShift(p=X[a])
            z = shift.apply(X[p])
            nz = np.linalg.norm(z)
            if nz < 1e-300:
                raise BoundaryError("parent image degenerate; curvature too "
                                    "large for the Cartesian (k >= 3) backend")
            v = z / nz
            code = code_for(c + 1)
            rot = align(code[0], v)
            dirs = code[1:] @ rot.T
        for dvec, rho_i, child in zip(dirs, rho, kids):
            local_dir[child] = dvec
            X[child] = mobius_add(X[a], rho_i * dvec)
    norms = np.linalg.norm(X, axis=1)
    emb.X = X
    emb.local_dir = local_dir
    emb.s_global = 2.0 * np.arctanh(np.minimum(norms, 1.0 - 1e-16))
    dirs = X / np.where(norms > 0, norms, 1.0)[:, None]
    dirs[0] = 0.0
    dirs[0, 0] = 1.0
    emb.dir_global = dirs
    emb.n_saturated = int((norms > _CARTESIAN_LIMIT).sum())
    emb.anc_full = tree.ancestor_matrix(np.arange(n))


def sarkar_embed(tree: WeightedTree, k=2, kappa=1.0, tau=None, eps=0.1,
                 C_k=1.0, code_seed=0) -> HyperbolicEmbedding:
    """Recursive spherical-code embedding of a rooted weighted tree.

    The root maps to the origin. Children of a node are placed at hyperbolic
    length tau (or their edge weight w_e when tau is None) on spherical-code
    directions; at non-root nodes one code slot is reserved for the parent
    direction so children point away from it. The returned embedding records
    whether the curvature condition sqrt(kappa) >= C_k log(Delta)/(lambda eps)
    held with the configured C_k.
    """
    if k < 2:
        raise ValueError("embedding dimension k must be >= 2")
    if kappa <= 0 or eps <= 0:
        raise ValueError("kappa and eps must be positive")
    if tau is not None and tau <= 0:
        raise ValueError("tau must be positive")
    sq = math.sqrt(kappa)
    steps = np.full(tree.n_nodes, np.nan)
    if tau is None:
        steps[1:] = tree.weight[1:]
    else:
        steps[1:] = tau
    lam = float(np.nanmin(steps[1:]))
    delta = tree.max_degree
    required = C_k * math.log(max(delta, 2)) / (lam * eps)
    report = CurvatureReport(sqrt_kappa=sq, required=required, C_k=C_k,
                             delta=delta, satisfied=sq >= required)
    emb = HyperbolicEmbedding(tree=tree, kappa=kappa, k=k, eps=eps, tau=tau,
                              step_scaled=steps * sq, curvature_report=report)
    if k == 2:
        _planar_build(emb)
    else:
        _cartesian_build(emb, code_seed)
    return emb


# -- distortion --------------------------------------------------------------

@dataclass(frozen=True)
class DistortionReport:
    """Worst-case expansion/contraction against d_corr with scale s = 1."""
    worst_expansion: float
    worst_contraction: float
    n_pairs: int
    exact: bool
    worst_pair: tuple

    @property
    def D(self) -> float:
        return max(self.worst_expansion, self.worst_contraction)


def _tree_distance_pairs(tree, us, vs):
    au = tree.ancestor_matrix(us)
    av = tree.ancestor_matrix(vs)
    same = (au == av) & (au >= 0)
    lca_depth = same.cumprod(axis=1).sum(axis=1) - 1
    lca = au[np.arange(len(us)), lca_depth]
    return tree.dist_root[us] + tree.dist_root[vs] - 2.0 * tree.dist_root[lca]


def distortion(tree: WeightedTree, emb, pair_budget=2_000_000, seed=0,
               nodes=None) -> DistortionReport:
    """Bi-Lipschitz distortion report over node pairs.

    Exact over all pairs when their count fits the budget, otherwise a seeded
    uniform sample of pairs (mode recorded in the report). Accepts hyperbolic
    embeddings (all tree nodes) or the Euclidean leaf embeddings from
    `hypertree.euclidean`.
    """
    is_euclidean = hasattr(emb, "points")
    if nodes is None:
        nodes = np.asarray(emb.leaf_ids) if is_euclidean else np.arange(tree.n_nodes)
    nodes = np.asarray(nodes, dtype=np.int64)
    n = len(nodes)
    total = n * (n - 1) // 2
    exact = total <= pair_budget
    if exact:
        iu, iv = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        iu = rng.integers(0, n, pair_budget)
        iv = rng.integers(0, n, pair_budget)
        keep = iu != iv
        iu, iv = iu[keep], iv[keep]
    us, vs = nodes[iu], nodes[iv]
    d_tree = _tree_distance_pairs(tree, us, vs)
    if is_euclidean:
        pos = {int(v): i for i, v in enumerate(emb.leaf_ids)}
        pu = np.array([pos[int(u)] for u in us])
        pv = np.array([pos[int(v)] for v in vs])
        d_emb = np.linalg.norm(emb.points[pu] - emb.points[pv], axis=1)
    else:
        d_emb = emb.distance_pairs(us, vs)
    with np.errstate(divide="ignore"):
        expansion = d_emb / d_tree
        contraction = d_tree / d_emb
    worst_exp = float(expansion.max())
    i_con = int(np.argmax(contraction))
    worst_con = float(contraction[i_con])
    return DistortionReport(worst_expansion=worst_exp,
                            worst_contraction=worst_con,
                            n_pairs=len(us), exact=exact,
                            worst_pair=(int(us[i_con]), int(vs[i_con])))


@dataclass(frozen=True)
class CalibrationResult:
    kappa: float
    distortion: float
    implied_C_k: float
    n_evals: int


def calibrate_curvature(tree: WeightedTree, k=2, eps=0.1, tau=None,
                        pair_budget=2_000_000, iters=24) -> CalibrationResult:
    """Smallest curvature (by bisection on sqrt(kappa)) with distortion <= 1+eps.

    The spherical-cap constant of the existence theorem is not pinned down
    numerically anywhere, so it is measured: the result reports the implied
    constant sqrt(kappa) * lambda * eps / log(Delta).
    """
    lam = tau if tau is not None else float(tree.weight[1:].min())
    delta = tree.max_degree

    def measure(sq):
        emb = sarkar_embed(tree, k=k, kappa=sq * sq, tau=tau, eps=eps)
        return distortion(tree, emb, pair_budget=pair_budget).D

    n_evals = 0
    lo, hi = 0.25, 4.0
    while measure(hi) > 1.0 + eps:
        n_evals += 1
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise RuntimeError("calibration failed to bracket the curvature")
    for _ in range(iters):
        n_evals += 1
        mid = 0.5 * (lo + hi)
        if measure(mid) <= 1.0 + eps:
            hi = mid
        else:
            lo = mid
    d_final = measure(hi)
    n_evals += 1
    return CalibrationResult(kappa=hi * hi, distortion=float(d_final),
                             implied_C_k=hi * lam * eps / math.log(max(delta, 2)),
                             n_evals=n_evals)


# -- geodesic hyperplanes, cone margins, classifiers -------------------------

@dataclass(frozen=True)
class GeodesicHyperplane:
    """Totally geodesic hypersurface through a base point.

    The unit normal lives in the tangent frame at the base point; in the
    frame where the base point sits at the origin the surface is the flat
    hyperplane orthogonal to the normal.
    """
    base: BallPoint
    normal: np.ndarray
    anchor_node: int | None = None
    embedding: object = field(default=None, repr=False, compare=False)

    def signed_distance_nodes(self, nodes):
        """Signed distances for descendant node ids of the anchor."""
        if self.embedding is None or self.anchor_node is None:
            raise ValueError("hyperplane not bound to an embedding")
        emb = self.embedding
        s, dirs = emb.frame_coords(self.anchor_node, nodes)
        comp = np.clip(dirs @ self.normal, -1.0, 1.0)
        return _asinh_sinh(s, comp) / math.sqrt(emb.kappa)

    def signed_distance_point(self, point, kappa):
        """Signed distance for an arbitrary ball point (Cartesian route)."""
        p = _as_point(point)
        base = self.base
        if base.cartesian is None or p.cartesian is None:
            raise BoundaryError("Cartesian route needs representable points; "
                                "use signed_distance_nodes for deep nodes")
        rel = mobius_add(-base.cartesian, p.cartesian)
        n2 = float(rel @ rel)
        comp = float(rel @ self.normal)
        return math.asinh(2.0 * comp / (1.0 - n2)) / math.sqrt(kappa)


def _sibling_bisector(emb, a, dirs, i, j):
    diff = dirs[i] - dirs[j]
    normal = diff / np.linalg.norm(diff)
    return GeodesicHyperplane(base=emb.point(a), normal=normal, anchor_node=a,
                              embedding=emb)


def cone_margin(emb: HyperbolicEmbedding, a, c):
    """Bisector hyperplane between child c and its nearest sibling, plus the
    margin gamma = min |signed distance| over the leaves below a's children.

    A node with a single child has no sibling: returns (None, inf).
    """
    kids, dirs = emb.child_directions(a)
    kids = list(kids)
    if c not in kids:
        raise ValueError(f"{c} is not a child of {a}")
    i = kids.index(c)
    if len(kids) == 1:
        return None, math.inf
    cos_ij = dirs @ dirs[i]
    cos_ij[i] = -2.0
    j = int(np.argmax(cos_ij))  # nearest sibling direction
    plane = _sibling_bisector(emb, a, dirs, i, j)
    gamma = math.inf
    for child in kids:
        leaves = emb.tree.subtree_leaves(child)
        if len(leaves) == 0:
            continue
        sd = plane.signed_distance_nodes(leaves)
        gamma = min(gamma, float(np.min(np.abs(sd))))
        want_positive = child == c
        if want_positive and np.any(sd <= 0):
            gamma = min(gamma, 0.0)
        if child == kids[j] and np.any(sd >= 0):
            gamma = min(gamma, 0.0)
    return plane, gamma


def margin_classifier(plane: GeodesicHyperplane, gamma, kappa=None):
    """clip(signed distance / gamma): a (1/gamma)-Lipschitz score in [-1, 1].

    The returned callable accepts node-id arrays (descendants of the plane's
    anchor) or individual ball points.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    kap = plane.embedding.kappa if plane.embedding is not None else kappa

    def classify(x):
        if isinstance(x, BallPoint) or (np.asarray(x).dtype.kind == "f"):
            sd = plane.signed_distance_point(x, kap)
            return float(np.clip(sd / gamma, -1.0, 1.0))
        sd = plane.signed_distance_nodes(np.atleast_1d(x))
        out = np.clip(sd / gamma, -1.0, 1.0)
        return out if np.ndim(x) else float(out[0])

    return classify


def classify_child(emb: HyperbolicEmbedding, a, nodes):
    """Assign each descendant node to a child cone of `a`.

    Uses pairwise bisector hyperplanes: the winner maximizes its minimum
    signed distance over bisectors against every sibling.
    """
    nodes = np.atleast_1d(np.asarray(nodes, dtype=np.int64))
    kids, dirs = emb.child_directions(a)
    c = len(kids)
    if c == 1:
        return np.zeros(len(nodes), dtype=np.int64)
    s, node_dirs = emb.frame_coords(a, nodes)
    scores = np.full((c, len(nodes)), np.inf)
    for i in range(c):
        for j in range(c):
            if i == j:
                continue
            diff = dirs[i] - dirs[j]
            normal = diff / np.linalg.norm(diff)
            comp = np.clip(node_dirs @ normal, -1.0, 1.0)
            sd = _asinh_sinh(s, comp)
            scores[i] = np.minimum(scores[i], sd)
    return np.argmax(scores, axis=0)


# -- bound bookkeeping x pushforward ------------------------------------------

@dataclass(frozen=True)
class PackingConverseReport:
    """Leading term of the volume-packing curvature requirement."""
    sqrt_kappa_required: float
    kappa_required: float
    kappa_used: float
    consistent: bool


def packing_converse_check(m, eta, k, s, D, lam, kappa_used) -> PackingConverseReport:
    """Evaluate sqrt(kappa) >= (log m - eta) / ((k-1) s D lambda) (leading term)."""
    term = (math.log(m) - eta) / ((k - 1) * s * D * lam)
    term = max(term, 0.0)
    return PackingConverseReport(sqrt_kappa_required=term,
                                 kappa_required=term * term,
                                 kappa_used=float(kappa_used),
                                 consistent=math.sqrt(kappa_used) >= term)


@dataclass(frozen=True)
class PushforwardReport:
    empirical_lipschitz: float
    worst_pair: tuple


def lipschitz_pushforward(tree: WeightedTree, emb: HyperbolicEmbedding,
                          g, nodes=None) -> PushforwardReport:
    """Empirical Lipschitz constant of g (function of the node) on the
    embedded points: max |g(u)-g(v)| / d_H(phi(u), phi(v)) over pairs."""
    if nodes is None:
        nodes = np.arange(tree.n_nodes)
    nodes = np.asarray(nodes, dtype=np.int64)
    vals = np.asarray([g[v] for v in nodes], dtype=np.float64) \
        if not callable(g) else np.asarray([g(v) for v in nodes], dtype=np.float64)
    iu, iv = np.triu_indices(len(nodes), k=1)
    d = emb.distance_pairs(nodes[iu], nodes[iv])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(vals[iu] - vals[iv]) / d
    ratio = np.nan_to_num(ratio, nan=0.0)
    i = int(np.argmax(ratio))
    return PushforwardReport(empirical_lipschitz=float(ratio[i]),
                             worst_pair=(int(nodes[iu[i]]), int(nodes[iv[i]])))


# -- serialization -----------------------------------------------------------

def embedding_to_csv(emb: HyperbolicEmbedding, path, distortion_report=None,
                     sidecar_path=None):
    """CSV dump `node_id, coord_0..coord_{k-1}, polar_radius` plus a JSON
    sidecar with kappa, tau, k, eps and the distortion report."""
    import json

    header = ["node_id"] + [f"coord_{i}" for i in range(emb.k)] + ["polar_radius"]
    lines = [",".join(header)]
    for v in range(emb.n_nodes):
        pt = emb.point(v)
        if pt.cartesian is not None:
            coords = pt.cartesian
        else:
            coords = math.tanh(0.5 * pt.radius * math.sqrt(emb.kappa)) * pt.direction
        row = [str(v)] + [repr(float(c)) for c in coords] + [repr(float(pt.radius))]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if sidecar_path is not None:
        meta = {"kappa": emb.kappa, "tau": emb.tau, "k": emb.k, "eps": emb.eps}
        if distortion_report is not None:
            meta["distortion"] = {
                "D": distortion_report.D,
                "worst_expansion": distortion_report.worst_expansion,
                "worst_contraction": distortion_report.worst_contraction,
                "n_pairs": distortion_report.n_pairs,
                "exact": distortion_report.exact,
            }
        with open(sidecar_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
