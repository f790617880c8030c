"""Tree-Haar wavelets over the leaves of a balanced m-ary tree.

The N-1 wavelets (one (m-1)-block of child contrasts per internal node) form
an orthonormal basis of the mean-zero subspace of R^N. That single linear
algebra fact drives the rank bound: the average squared projection of the
basis onto any k-dimensional prediction space is at most k/(N-1), by the
trace identity sum_psi psi psi^T = P_{1^perp}.

Leaves are indexed in lexicographic path order, so every subtree occupies a
contiguous block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trees import leaf_cap


def contrast_basis(m: int) -> np.ndarray:
    """Orthonormal basis of 1^perp in R^m: Gram-Schmidt on {e_i - e_{i+1}}."""
    vecs = []
    for i in range(m - 1):
        v = np.zeros(m)
        v[i], v[i + 1] = 1.0, -1.0
        for u in vecs:
            v -= (v @ u) * u
        v /= np.linalg.norm(v)
        vecs.append(v)
    return np.array(vecs)


def _validate_contrast(A, m):
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (m - 1, m):
        raise ValueError(f"contrast basis must be ({m - 1}, {m})")
    if np.abs(A @ np.ones(m)).max() > 1e-10:
        raise ValueError("contrast vectors must be orthogonal to the ones vector")
    if np.abs(A @ A.T - np.eye(m - 1)).max() > 1e-10:
        raise ValueError("contrast vectors must be orthonormal")
    return A


class WaveletBasis:
    """The N-1 tree-Haar vectors of the balanced m-ary depth-R tree.

    Wavelets are stored by (depth, node index within depth, contrast index);
    rows materialize densely on demand.
    """

    def __init__(self, m, R, contrast=None):
        if m < 2 or R < 1:
            raise ValueError("need m >= 2 and R >= 1")
        if m ** R > leaf_cap():
            raise OverflowError(f"m^R = {m ** R} exceeds the leaf cap")
        self.m = int(m)
        self.R = int(R)
        self.N = m ** R
        self.contrast = (_validate_contrast(contrast, m) if contrast is not None
                         else contrast_basis(m))
        index = []
        for depth in range(R):
            for node in range(m ** depth):
                for j in range(m - 1):
                    index.append((depth, node, j))
        self.index = index  # length N - 1

    def __len__(self):
        return len(self.index)

    def node_block(self, depth, node):
        """Leaf index range [start, stop) under the given internal node."""
        size = self.m ** (self.R - depth)
        return node * size, (node + 1) * size

    def row(self, i) -> np.ndarray:
        depth, node, j = self.index[i]
        start, stop = self.node_block(depth, node)
        child = (stop - start) // self.m
        scale = 1.0 / math.sqrt((stop - start) / self.m)
        out = np.zeros(self.N)
        for c in range(self.m):
            out[start + c * child: start + (c + 1) * child] = self.contrast[j, c] * scale
        return out

    def to_matrix(self) -> np.ndarray:
        return np.array([self.row(i) for i in range(len(self))])


def build_wavelets(m, R, contrast=None) -> WaveletBasis:
    """Tree-Haar basis of 1^perp with m^R - 1 vectors."""
    return WaveletBasis(m, R, contrast=contrast)


@dataclass(frozen=True)
class GramReport:
    max_deviation: float
    max_same_node: float
    max_ancestor: float
    max_disjoint: float
    max_diag: float


def gram_check(basis: WaveletBasis) -> GramReport:
    """Maximum |Gram - I| entry, also split by the three orthogonality cases
    (same node, ancestor-descendant, disjoint supports)."""
    W = basis.to_matrix()
    G = W @ W.T
    n = len(basis)
    dev = np.abs(G - np.eye(n))
    blocks = [basis.node_block(d, v) for d, v, _ in basis.index]
    same = np.zeros((n, n), dtype=bool)
    anc = np.zeros((n, n), dtype=bool)
    for i in range(n):
        si, ei = blocks[i]
        for j in range(i + 1, n):
            sj, ej = blocks[j]
            if (si, ei) == (sj, ej):
                same[i, j] = True
            elif (si <= sj and ej <= ei) or (sj <= si and ei <= ej):
                anc[i, j] = True
    disj = ~(same | anc | np.eye(n, dtype=bool))
    disj &= np.triu(np.ones((n, n), dtype=bool), k=1)
    return GramReport(
        max_deviation=float(dev.max()),
        max_same_node=float(dev[same].max()) if same.any() else 0.0,
        max_ancestor=float(dev[anc].max()) if anc.any() else 0.0,
        max_disjoint=float(dev[disj].max()) if disj.any() else 0.0,
        max_diag=float(np.abs(np.diag(G) - 1.0).max()),
    )


class Subspace:
    """k-dimensional subspace of R^N held as an orthonormal basis matrix."""

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2:
            raise ValueError("expected an (N, k) matrix")
        if np.abs(Q.T @ Q - np.eye(Q.shape[1])).max() > 1e-10:
            raise ValueError("columns must be orthonormal (1e-10)")
        self.Q = Q

    @property
    def N(self):
        return self.Q.shape[0]

    @property
    def k(self):
        return self.Q.shape[1]

    @classmethod
    def random(cls, N, k, seed=0):
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.standard_normal((N, k)))
        return cls(Q)

    @classmethod
    def span(cls, vectors):
        V = np.asarray(vectors, dtype=np.float64).T
        Q, _ = np.linalg.qr(V)
        return cls(Q[:, : np.linalg.matrix_rank(V)])


@dataclass(frozen=True)
class AlignmentReport:
    per_wavelet: np.ndarray
    average: float
    bound: float
    within_bound: bool


def alignment(basis: WaveletBasis, S: Subspace) -> AlignmentReport:
    """Per-wavelet |P_S psi|^2 and the k/(N-1) average bound."""
    if S.N != basis.N:
        raise ValueError(f"subspace lives in R^{S.N}, wavelets in R^{basis.N}")
    W = basis.to_matrix()
    proj = W @ S.Q
    per = np.einsum("ij,ij->i", proj, proj)
    avg = float(per.mean())
    bound = S.k / (basis.N - 1)
    return AlignmentReport(per_wavelet=per, average=avg, bound=bound,
                           within_bound=avg <= bound + 1e-10)


def fraction_approximated(basis: WaveletBasis, S: Subspace, eps):
    """Fraction of wavelets within squared distance eps of S, and the implied
    dimension bound fraction * (1 - eps) * (N - 1)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    rep = alignment(basis, S)
    # min-dist^2 = 1 - alignment; 1e-12 slack absorbs projector rounding
    close = rep.per_wavelet >= 1.0 - eps - 1e-12
    fraction = float(close.mean())
    implied = fraction * (1.0 - eps) * (basis.N - 1)
    return fraction, implied


def edge_cut_labels(basis: WaveletBasis):
    """Binary-tree edge-cut labels y_v in {-1, 0, +1}^N per internal node,
    verified against psi_v = y_v / sqrt(|S_v|).

    Only defined for m = 2 (each internal node contributes one contrast).
    """
    if basis.m != 2:
        raise ValueError("edge-cut labels are a binary-tree construction")
    labels = np.zeros((len(basis), basis.N), dtype=np.int8)
    sizes = np.zeros(len(basis), dtype=np.int64)
    sign = 1.0 if basis.contrast[0, 0] > 0 else -1.0
    for i, (depth, node, _) in enumerate(basis.index):
        start, stop = basis.node_block(depth, node)
        half = (stop - start) // 2
        labels[i, start:start + half] = int(sign)
        labels[i, start + half:stop] = -int(sign)
        sizes[i] = stop - start
        got = basis.row(i)
        want = labels[i] / math.sqrt(sizes[i])
        if np.abs(got - want).max() > 1e-14:
            raise AssertionError("edge-cut scaling identity violated")
    return labels, sizes
