"""Empirical extrinsic curvature: second fundamental form, mean curvature,
Weitzenboeck endomorphisms, Riemann tensor, and first Pontryagin forms.

The ambient-extended empirical second fundamental form at a base point p is

    B(u, v) = Pi_perp [ (vol / m t) sum_j Phi_t(p, x_j) chi_delta(p, x_j)
                          <Pi u, x_j - p>  Pi_{x_j} Pi_p v ]

with empirical projections Pi = Pi_p; both slots are projected so the tensor
extends the intrinsic bilinear form by annihilating normal directions. All
tensors are stored in ambient coordinates; frame-compressed versions feed the
spectral pipeline.

Two zeroth-order endomorphisms of Lambda^k are derived from B:
  * the mean-curvature contraction sum <H, B(e_j, e_l)> e_j^* wedge i_{e_l}
    (the classical End_H(B); ``weitzenboeck``);
  * the Hodge correction DerExt(G) - q(R) with G the B-Gram matrix
    G_{pl} = sum_j <B(e_j,e_p), B(e_j,e_l)> and q(R) the Lichnerowicz
    curvature term of the Weitzenboeck formula (``hodge_correction``).
The two agree exactly on flat submanifolds; the diffusion operator's
zeroth-order defect is DerExt(G), so the Hodge correction is what the
spectral pipeline subtracts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from math import comb, pi

import numpy as np

from hodgecloud.errors import ConfigError, DisconnectedCloudError, IsolatedPointError
from hodgecloud.exterior import _wedge_table, lift_matrix, wedge_interior_matrix
from hodgecloud.tangent import KernelConfig, ProjectionField, cutoff_profile
from hodgecloud.zoo import ManifoldSpec, curvature_from_b, oracle_frame


@lru_cache(maxsize=None)
def _wedge_interior_stack(n: int, k: int) -> np.ndarray:
    """E[p, l] = matrix of e_p^* wedge i_{e_l} on Lambda^k R^n."""
    nc = comb(n, k)
    E = np.zeros((n, n, nc, nc))
    eye = np.eye(n)
    for p in range(n):
        for l in range(n):
            E[p, l] = wedge_interior_matrix(eye[p], eye[l], n, k)
    return E


def derivation_matrix(A: np.ndarray, k: int) -> np.ndarray:
    """Derivation extension of an n x n matrix to Lambda^k R^n."""
    n = A.shape[0]
    E = _wedge_interior_stack(n, k)
    return np.einsum("pl,plij->ij", A, E)


def lichnerowicz_term(R4f: np.ndarray, k: int) -> np.ndarray:
    """q(R) on Lambda^k R^n from the frame curvature tensor.

    q(R) = sum_{a,b} (e_a^* wedge i_{e_b}) o DerExt(rho_ab) with
    <rho_ab e_v, e_u> = R(e_a, e_b, e_v, e_u); equals (n-1) Id on 1-forms of
    the unit sphere and k(n-k) Id on k-forms in constant curvature one.
    """
    n = R4f.shape[0]
    E = _wedge_interior_stack(n, k)
    inner = np.einsum("abvu,uvij->abij", R4f, E)
    return np.einsum("abxy,abyz->xz", E, inner)


class SecondFundamentalField:
    """Per-point empirical second fundamental form over a projection field.

    Frame tensors ``Bf[j]`` have shape (n, n, d): ``Bf[j][a, b]`` is the
    normal-valued vector B(e_a-hat, e_b-hat) at sample j. Ambient d x d x d
    tensors are produced on demand.
    """

    def __init__(self, proj_field: ProjectionField, config: KernelConfig | None = None,
                 symmetrized: bool = False):
        self.field = proj_field
        self.config = config if config is not None else proj_field.config
        self.symmetrized = symmetrized
        self._frame_cache: dict[int, np.ndarray] = {}

    @property
    def cloud(self):
        return self.field.cloud

    def _neighbor_indices(self, p):
        span = self.cloud.points.max(axis=0) - self.cloud.points.min(axis=0)
        if self.config.delta >= 0.5 * float(np.linalg.norm(span)):
            return slice(None)
        return self.field.tree.query_ball_point(np.asarray(p, float),
                                                self.config.delta)

    def _raw_frame_tensor(self, p, V):
        """B-hat in the frame V at point p: (n, n, d) array (not symmetrized)."""
        cloud = self.cloud
        cfg = self.config
        idx = self._neighbor_indices(p)
        sub = cloud.points[idx]
        diff = sub - p
        r2 = np.einsum("ja,ja->j", diff, diff)
        t = cfg.t
        w = (4.0 * pi * t) ** (-cfg.n / 2.0) * np.exp(-r2 / (4.0 * t))
        w *= cutoff_profile(np.sqrt(r2) / cfg.delta)
        if not np.any(w[r2 > 0.0] > 0.0):
            raise IsolatedPointError(
                "all cutoff weights vanish at the base point; cannot "
                "estimate curvature"
            )
        # vol/(2mt): the kernel's second moment is 2t per coordinate, so the
        # raw first-moment sum converges to twice the second fundamental form.
        w *= cfg.vol / (2.0 * cloud.m * t)
        frames = self.field.frames[idx]                      # (j, d, n)
        VtN = np.einsum("jdr,dn->jrn", frames, V)            # V_{x_j}^T V_p
        PjV = np.einsum("jbr,jrc->jbc", frames, VtN)         # Pi_{x_j} V_p: (j, d, n)
        # M[a, b, c]: a = contraction slot, b = value component, c = 2nd arg
        M = np.einsum("j,ja,jbc->abc", w, diff, PjV)         # (d, d, n)
        T = np.einsum("ai,abc->ibc", V, M)                   # project first slot
        perp = np.eye(cloud.d) - V @ V.T
        Bv = np.einsum("be,iec->ibc", perp, T)               # project values
        return Bv.transpose(0, 2, 1)                         # (n, n, d)

    def frame_tensor(self, j: int) -> np.ndarray:
        """Frame tensor at sample j (cached)."""
        if j not in self._frame_cache:
            V = self.field.frames[j]
            Bf = self._raw_frame_tensor(self.cloud.points[j], V)
            if self.symmetrized:
                Bf = 0.5 * (Bf + Bf.transpose(1, 0, 2))
            self._frame_cache[j] = Bf
        return self._frame_cache[j]

    def frame_tensor_at(self, p, V=None):
        """Frame tensor at an arbitrary point (frame estimated when absent)."""
        if V is None:
            V, _ = self.field.evaluate(p)
        Bf = self._raw_frame_tensor(p, V)
        if self.symmetrized:
            Bf = 0.5 * (Bf + Bf.transpose(1, 0, 2))
        return Bf, V

    def ambient_tensor(self, j: int) -> np.ndarray:
        """Ambient-extended d x d x d tensor at sample j."""
        V = self.field.frames[j]
        Bf = self.frame_tensor(j)
        return np.einsum("ia,jb,abk->ijk", V, V, Bf)

    def symmetrize(self) -> "SecondFundamentalField":
        out = SecondFundamentalField(self.field, self.config, symmetrized=True)
        for j, Bf in self._frame_cache.items():
            out._frame_cache[j] = 0.5 * (Bf + Bf.transpose(1, 0, 2))
        return out


def empirical_B(cloud, proj_field: ProjectionField, p, config=None):
    """Ambient-extended empirical second fundamental form at p (d x d x d)."""
    if cloud is not proj_field.cloud:
        raise ConfigError("projection field belongs to a different cloud")
    field = SecondFundamentalField(proj_field, config, symmetrized=False)
    Bf, V = field.frame_tensor_at(np.asarray(p, float))
    return np.einsum("ia,jb,abk->ijk", V, V, Bf)


def symmetrize(B: np.ndarray) -> np.ndarray:
    """Symmetrize a d x d x d bilinear-form tensor in its argument slots."""
    return 0.5 * (B + B.transpose(1, 0, 2))


def mean_curvature_from_frame(Bf_sym: np.ndarray) -> np.ndarray:
    """H = sum_a B(e_a-hat, e_a-hat); equals the ambient-basis trace of the
    extension because normal slots are annihilated."""
    return np.einsum("aak->k", Bf_sym)


def mean_curvature(B_sym_ambient: np.ndarray) -> np.ndarray:
    """Ambient-basis trace of an ambient-extended symmetric form."""
    return np.einsum("iik->k", B_sym_ambient)


def weitzenboeck_frame(Bf_sym: np.ndarray, k: int) -> np.ndarray:
    """Mean-curvature contraction End_H(B) in frame coordinates.

    sum_{j,l} <H, B(e_j, e_l)> e_j^* wedge i_{e_l} on Lambda^k R^n;
    symmetric because B is symmetrized.
    """
    n = Bf_sym.shape[0]
    if k == 0:
        return np.zeros((1, 1))
    H = mean_curvature_from_frame(Bf_sym)
    c = np.einsum("jlk,k->jl", Bf_sym, H)
    E = _wedge_interior_stack(n, k)
    return np.einsum("jl,jlab->ab", c, E)


def weitzenboeck(Bf_sym: np.ndarray, V: np.ndarray, k: int) -> np.ndarray:
    """Ambient End_H(B) estimator at one point: Lambda^k V W_frame (Lambda^k V)^T."""
    L = lift_matrix(V, k)
    return L @ weitzenboeck_frame(Bf_sym, k) @ L.T


def b_gram(Bf_sym: np.ndarray) -> np.ndarray:
    """G_{pl} = sum_j <B(e_j, e_p), B(e_j, e_l)>, the diffusion drift matrix."""
    return np.einsum("jpk,jlk->pl", Bf_sym, Bf_sym)


def riemann_frame(Bf_sym: np.ndarray) -> np.ndarray:
    """Frame-coordinate Riemann tensor from the Gauss equation."""
    return curvature_from_b(Bf_sym)


def hodge_correction_frame(Bf_sym: np.ndarray, k: int) -> np.ndarray:
    """Zeroth-order correction DerExt(G) - q(R) in frame coordinates.

    Subtracting it from the empirical diffusion operator yields the Hodge
    Laplacian in the small-bandwidth limit; on flat submanifolds it equals
    the mean-curvature contraction End_H(B).
    """
    if k == 0:
        return np.zeros((1, 1))
    Q = derivation_matrix(b_gram(Bf_sym), k)
    q = lichnerowicz_term(riemann_frame(Bf_sym), k)
    W = Q - q
    return 0.5 * (W + W.T)


def riemann_curvature(B_sym_ambient: np.ndarray) -> np.ndarray:
    """Ambient-extended empirical Riemann tensor via the Gauss equation."""
    return curvature_from_b(B_sym_ambient)


@lru_cache(maxsize=None)
def _wedge22_table(n):
    return _wedge_table(n, 2, 2)


def pontryagin_frame(R4f: np.ndarray) -> np.ndarray:
    """First Pontryagin 4-form in frame coordinates (C(n,4) components).

    p_1 = -(1/8 pi^2) tr(Omega ^ Omega) with
    Omega^i_j = (1/2) sum_{a,b} R(e_i, e_j, e_a, e_b) e_a^* ^ e_b^*.
    """
    n = R4f.shape[0]
    if n < 4:
        raise ConfigError("Pontryagin forms need intrinsic dimension n >= 4")
    pairs = list(_basis_pairs(n))
    # Omega[i, j, :] over the C(n,2) basis (a < b)
    Om = np.stack(
        [[np.array([R4f[i, j, a, b] for a, b in pairs]) for j in range(n)]
         for i in range(n)]
    )
    ia, ib, ic, sg = _wedge22_table(n)
    out = np.zeros(comb(n, 4))
    for i in range(n):
        for j in range(n):
            np.add.at(out, ic, sg * Om[i, j][ia] * Om[j, i][ib])
    return -out / (8.0 * pi**2)


@lru_cache(maxsize=None)
def _basis_pairs(n):
    from itertools import combinations

    return tuple(combinations(range(n), 2))


def pontryagin_form(Bf_sym: np.ndarray, V: np.ndarray, r: int = 1):
    """Ambient first Pontryagin form at one point as C(d,4) coefficients.

    Frame-independent (trace of a conjugation-covariant matrix of 2-forms).
    Only r = 1 is supported; p_r for 4r > n vanishes and desk-scale targets
    have n <= 4.
    """
    if r != 1:
        raise ConfigError("only the first Pontryagin form (r=1) is supported")
    R4f = riemann_frame(Bf_sym)
    p1 = pontryagin_frame(R4f)
    return lift_matrix(V, 4) @ p1


def orient_frames(proj_field: ProjectionField, spec: ManifoldSpec | None = None,
                  graph=None) -> np.ndarray:
    """Per-sample orientation signs for the empirical frames.

    Oracle mode (``spec`` given): sign of det(V_oracle^T V-hat). Graph mode:
    breadth-first sign propagation by det(V_i^T V_j) agreement over the
    neighbor graph; raises DisconnectedCloudError when the graph is not
    connected.
    """
    m = proj_field.m
    frames = proj_field.frames
    if spec is not None:
        signs = np.empty(m)
        for j in range(m):
            Vo = oracle_frame(spec, proj_field.cloud.points[j])
            det = np.linalg.det(Vo.T @ frames[j])
            if abs(det) < 1e-8:
                raise ConfigError(f"frame at sample {j} is degenerate vs oracle")
            signs[j] = np.sign(det)
        return signs
    if graph is None:
        raise ConfigError("graph mode needs a NeighborGraph")
    signs = np.zeros(m)
    signs[0] = 1.0
    stack = [0]
    while stack:
        i = stack.pop()
        for j in graph.neighbors(i):
            if j == i or signs[j] != 0.0:
                continue
            det = np.linalg.det(frames[i].T @ frames[j])
            if abs(det) < 1e-6:
                continue
            signs[j] = signs[i] * np.sign(det)
            stack.append(j)
    if np.any(signs == 0.0):
        raise DisconnectedCloudError(
            f"{int((signs == 0).sum())} samples unreachable during orientation "
            "propagation"
        )
    return signs


@dataclass
class CurvaturePackage:
    """Per-point curvature tensors in ambient coordinates."""

    indices: np.ndarray
    B_sym: np.ndarray          # (npts, d, d, d)
    H: np.ndarray              # (npts, d)
    R: np.ndarray | None = None        # (npts, d, d, d, d)
    W: np.ndarray | None = None        # (npts, C(d,k), C(d,k))
    k: int | None = None

    def dump_jsonl(self, path, points):
        with open(path, "w") as fh:
            for row, j in enumerate(self.indices):
                rec = {
                    "index": int(j),
                    "p": points[j].tolist(),
                    "B": self.B_sym[row].ravel().tolist(),
                    "H": self.H[row].tolist(),
                }
                if self.R is not None:
                    rec["R"] = self.R[row].ravel().tolist()
                if self.W is not None:
                    rec[f"W_{self.k}"] = self.W[row].ravel().tolist()
                fh.write(json.dumps(rec) + "\n")


def curvature_package(proj_field: ProjectionField, indices=None, config=None,
                      with_riemann=False, weitzenboeck_degree=None) -> CurvaturePackage:
    """Batch-evaluate the symmetrized curvature tensors at sample indices."""
    if indices is None:
        indices = np.arange(proj_field.m)
    indices = np.asarray(indices, dtype=int)
    field = SecondFundamentalField(proj_field, config, symmetrized=True)
    d = proj_field.cloud.d
    npts = indices.size
    B = np.empty((npts, d, d, d))
    H = np.empty((npts, d))
    R = np.empty((npts, d, d, d, d)) if with_riemann else None
    W = None
    if weitzenboeck_degree is not None:
        nck = comb(d, weitzenboeck_degree)
        W = np.empty((npts, nck, nck))
    for row, j in enumerate(indices):
        Bf = field.frame_tensor(int(j))
        V = proj_field.frames[int(j)]
        B[row] = np.einsum("ia,jb,abk->ijk", V, V, Bf)
        H[row] = mean_curvature_from_frame(Bf)
        if with_riemann:
            R[row] = curvature_from_b(B[row])
        if W is not None:
            W[row] = weitzenboeck(Bf, V, weitzenboeck_degree)
    return CurvaturePackage(indices, B, H, R, W, weitzenboeck_degree)
