"""The discrete empirical Hodge Laplacian on k-forms.

The diffusion part acts on discrete k-forms (one Lambda^k R^d value per
sample) through factored tangent lifts,

    (L w)(p) = (vol / m t) sum_j Phi_t(p, x_j) chi_delta(p, x_j)
               [ Pi_p w(p) - Pi_p Pi_{x_j} w(x_j) ],    Pi = Lambda^k Pi-hat,

and the operator subtracts a per-point zeroth-order curvature correction,

    Delta = L - W_corr,

where W_corr is the Hodge correction DerExt(G) - q(R) built from the
empirical second fundamental form (see ``curvature``). The diffusion term's
small-bandwidth limit is the connection Laplacian plus DerExt(G), so the
subtraction converges to the Hodge Laplacian; on flat manifolds W_corr equals
the mean-curvature contraction End_H(B).

Eigenproblems are solved on the tangential subspace by compressing each
sample's value through its factored lift (C(n,k) coordinates per sample),
which deflates the m (C(d,k) - C(n,k))-dimensional trivial normal kernel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from math import comb, pi, sqrt

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from hodgecloud.curvature import (
    SecondFundamentalField,
    lichnerowicz_term,
    riemann_frame,
    weitzenboeck_frame,
)
from hodgecloud.errors import (
    BandwidthTooLargeError,
    ConfigError,
    EigensolverError,
    IsolatedPointError,
)
from hodgecloud.exterior import KVector, lift_matrix
from hodgecloud.tangent import KernelConfig, ProjectionField, cutoff_profile
from hodgecloud.zoo import PointCloud

DENSE_FALLBACK_DIM = 4000
ASSEMBLY_CAP = 40000


class NeighborGraph:
    """Symmetric sparse kernel weights within the cutoff radius.

    ``weights`` holds (vol / m t) Phi_t(x_i, x_j) chi_delta(x_i, x_j) in CSR
    form, self-loops included; ``row_sums`` are the diagonal coefficients of
    the diffusion operator.
    """

    def __init__(self, weights: sp.csr_matrix, config: KernelConfig):
        self.weights = weights
        self.config = config
        self.row_sums = np.asarray(weights.sum(axis=1)).ravel()

    @property
    def m(self):
        return self.weights.shape[0]

    def neighbors(self, i: int):
        return self.weights.indices[self.weights.indptr[i]:self.weights.indptr[i + 1]]

    def degree_stats(self):
        deg = np.diff(self.weights.indptr)
        return int(deg.min()), float(deg.mean()), int(deg.max())


def kernel_row(points, x, config: KernelConfig):
    """(vol / m t) Phi_t(x, x_j) chi_delta(x, x_j) against every sample."""
    x = np.asarray(x, dtype=float)
    diff = points - x
    r2 = np.einsum("ja,ja->j", diff, diff)
    t = config.t
    w = (4.0 * pi * t) ** (-config.n / 2.0) * np.exp(-r2 / (4.0 * t))
    w *= cutoff_profile(np.sqrt(r2) / config.delta)
    return w * (config.vol / (points.shape[0] * t))


def build_graph(cloud: PointCloud, config: KernelConfig) -> NeighborGraph:
    """Assemble the neighbor-truncated kernel matrix.

    delta below the minimum pairwise spacing leaves only self-loops, which the
    operator constructors reject as isolated points; delta at or above the
    diameter yields the complete graph.
    """
    m = cloud.m
    X = cloud.points
    scale = config.vol / (m * config.t)
    span = X.max(axis=0) - X.min(axis=0)
    dense = config.delta >= 0.35 * float(np.linalg.norm(span))
    if dense:
        rows = []
        chunk = max(1, int(2**22 // max(m, 1)) + 1)
        for start in range(0, m, chunk):
            P = X[start:start + chunk]
            diff = X[None, :, :] - P[:, None, :]
            r2 = np.einsum("pja,pja->pj", diff, diff)
            w = np.exp(-r2 / (4.0 * config.t))
            w *= cutoff_profile(np.sqrt(r2) / config.delta)
            w *= (4.0 * pi * config.t) ** (-config.n / 2.0) * scale
            rows.append(sp.csr_matrix(w))
        W = sp.vstack(rows, format="csr")
    else:
        tree = cKDTree(X)
        coo = tree.sparse_distance_matrix(tree, config.delta, output_type="coo_matrix")
        r = coo.data
        vals = (4.0 * pi * config.t) ** (-config.n / 2.0) * np.exp(
            -(r**2) / (4.0 * config.t)
        )
        vals *= cutoff_profile(r / config.delta) * scale
        W = sp.csr_matrix((vals, (coo.row, coo.col)), shape=(m, m))
        W.setdiag((4.0 * pi * config.t) ** (-config.n / 2.0) * scale)
    W.eliminate_zeros()
    return NeighborGraph(W, config)


@dataclass
class DiscreteKForm:
    """Discrete k-form: one Lambda^k R^d coefficient row per sample."""

    k: int
    values: np.ndarray  # (m, C(d,k))
    tangential: bool = False

    @property
    def m(self):
        return self.values.shape[0]

    def kvector(self, j: int, d: int) -> KVector:
        return KVector(d, self.k, self.values[j].copy())


class HodgeOperatorHandle:
    """Symmetric block operator Delta = L - W_corr on discrete k-forms.

    Evaluable matrix-free (ambient or tangentially compressed) or assembled
    sparse. ``correction`` selects the zeroth-order term:

    * "hodge" (default): half the projection-increment defect minus the
      Lichnerowicz curvature term q(R-hat). The defect estimator

          D(p) = (vol / m t) sum_j Phi chi [Pi_p - Pi_p Pi_{x_j} Pi_p]

      tends to 2 DerExt(G) with the same kernel moments, truncation, and
      chord distortion as the diffusion term itself, so the subtraction
      cancels the diffusion operator's zeroth-order defect to higher order
      in t than any independently-normalized curvature estimate;
    * "mean-curvature": the End_H(B) contraction of the empirical second
      fundamental form (the classical Weitzenboeck term; equals the Hodge
      correction on flat submanifolds in the small-t limit);
    * "none": pure diffusion.
    """

    def __init__(self, cloud: PointCloud, proj_field: ProjectionField, k: int,
                 graph: NeighborGraph | None = None,
                 config: KernelConfig | None = None,
                 correction: str = "hodge",
                 curvature_config: KernelConfig | None = None):
        self.cloud = cloud
        self.field = proj_field
        self.k = int(k)
        self.config = config if config is not None else proj_field.config
        if self.k < 0 or self.k > self.config.n:
            raise ConfigError(f"form degree k={k} outside [0, n={self.config.n}]")
        self.graph = graph if graph is not None else build_graph(cloud, self.config)
        if np.any(np.diff(self.graph.weights.indptr) <= 1) and cloud.m > 1:
            lonely = int(np.argmax(np.diff(self.graph.weights.indptr) <= 1))
            raise IsolatedPointError(
                f"sample {lonely} has no neighbors within delta="
                f"{self.config.delta:.4g}", index=lonely,
            )
        self.d = cloud.d
        self.n = self.config.n
        self.N = comb(self.d, self.k)
        self.Nc = comb(self.n, self.k)
        self.lifts = np.stack(
            [lift_matrix(proj_field.frames[j], self.k) for j in range(cloud.m)]
        )
        self.correction = correction
        self._bfield = None
        self._Wc = self._build_correction(correction, curvature_config)

    def _curvature_field(self, curvature_config=None):
        if self._bfield is None:
            self._bfield = SecondFundamentalField(
                self.field, curvature_config, symmetrized=True
            )
        return self._bfield

    def _projector_sums(self):
        """S_i = sum_j w_ij Lambda^k Pi_j as (m, N, N), via one sparse MVP."""
        m = self.cloud.m
        P_flat = np.einsum("jxc,jyc->jxy", self.lifts, self.lifts).reshape(
            m, self.N * self.N
        )
        return (self.graph.weights @ P_flat).reshape(m, self.N, self.N)

    def _direct_defect(self):
        """D_i = s_i I - L_i^T S_i L_i, the compressed projection-increment
        defect at every sample; tends to 2 DerExt(G) on Lambda^k."""
        m = self.cloud.m
        S = self._projector_sums()
        D = np.empty((m, self.Nc, self.Nc))
        for i in range(m):
            D[i] = self.graph.row_sums[i] * np.eye(self.Nc) \
                - self.lifts[i].T @ S[i] @ self.lifts[i]
            D[i] = 0.5 * (D[i] + D[i].T)
        return D

    def _build_correction(self, correction, curvature_config):
        m = self.cloud.m
        if correction == "none" or self.k == 0:
            return np.zeros((m, self.Nc, self.Nc))
        if correction == "hodge":
            Wc = 0.5 * self._direct_defect()
            bfield = self._curvature_field(curvature_config)
            for j in range(m):
                R4f = riemann_frame(bfield.frame_tensor(j))
                q = lichnerowicz_term(R4f, self.k)
                Wc[j] -= 0.5 * (q + q.T)
            return Wc
        if correction == "mean-curvature":
            bfield = self._curvature_field(curvature_config)
            Wc = np.empty((m, self.Nc, self.Nc))
            for j in range(m):
                Wc[j] = weitzenboeck_frame(bfield.frame_tensor(j), self.k)
            return Wc
        raise ConfigError(f"unknown correction mode {correction!r}")

    # -- matrix-free evaluation ------------------------------------------------

    def project_values(self, values: np.ndarray) -> np.ndarray:
        """Apply Lambda^k Pi-hat at every sample (m, N) -> (m, N)."""
        down = np.einsum("jxc,jx->jc", self.lifts, values)
        return np.einsum("jxc,jc->jx", self.lifts, down)

    def compress(self, values: np.ndarray) -> np.ndarray:
        return np.einsum("jxc,jx->jc", self.lifts, values)

    def expand(self, comp: np.ndarray) -> np.ndarray:
        return np.einsum("jxc,jc->jx", self.lifts, comp)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """Ambient matrix-free MVP on an (m, N) value array."""
        W = self.graph.weights
        s = self.graph.row_sums
        y = self.expand(self.compress(values))          # Pi_j w_j
        z = W @ y
        comp = self.compress(s[:, None] * values - z)
        comp -= np.einsum("jab,jb->ja", self._Wc, self.compress(values))
        return self.expand(comp)

    def apply(self, omega: DiscreteKForm) -> DiscreteKForm:
        if omega.k != self.k or omega.values.shape != (self.cloud.m, self.N):
            raise ConfigError("discrete form shape/degree mismatch")
        return DiscreteKForm(self.k, self.apply_values(omega.values),
                             tangential=True)

    def apply_diffusion(self, omega: DiscreteKForm, j: int) -> KVector:
        """Diffusion term alone at sample j."""
        W = self.graph.weights
        row = W.getrow(j)
        idx = row.indices
        vals = omega.values[idx]
        down = np.einsum("jxc,jx->jc", self.lifts[idx], vals)
        proj = np.einsum("jxc,jc->jx", self.lifts[idx], down)
        z = row.data @ proj
        s = row.data.sum()
        Lj = self.lifts[j]
        out = Lj @ (Lj.T @ (s * omega.values[j] - z))
        return KVector(self.d, self.k, out)

    def compressed_matvec(self, comp_flat: np.ndarray) -> np.ndarray:
        """MVP in tangential coordinates: (m * C(n,k),) -> same shape."""
        m = self.cloud.m
        comp = comp_flat.reshape(m, self.Nc)
        y = self.expand(comp)
        z = self.graph.weights @ y
        out = self.graph.row_sums[:, None] * comp - self.compress(z)
        out -= np.einsum("jab,jb->ja", self._Wc, comp)
        return out.ravel()

    # -- assembly ---------------------------------------------------------------

    def assemble(self, compressed: bool = False, cap: int = ASSEMBLY_CAP):
        """Explicit sparse block matrix, exactly symmetrized.

        Ambient blocks: W_ij = -w_ij Lambda^k Pi_i Lambda^k Pi_j off the
        diagonal; diagonal (s_i - w_ii) Lambda^k Pi_i - W_corr,i. Built in
        block-sparse form from the scalar kernel pattern.
        """
        m = self.cloud.m
        blk = self.Nc if compressed else self.N
        dim = m * blk
        if dim > cap:
            raise ConfigError(
                f"assembled dimension {dim} exceeds the memory guard {cap}"
            )
        Wcsr = self.graph.weights
        indptr, indices, wdata = Wcsr.indptr, Wcsr.indices, Wcsr.data
        nnz = wdata.size
        rows = np.repeat(np.arange(m), np.diff(indptr))
        blocks = np.empty((nnz, blk, blk))
        chunk = max(1, int(2**22 // (blk * blk)) + 1)
        for start in range(0, nnz, chunk):
            sl = slice(start, min(start + chunk, nnz))
            Li, Lj = self.lifts[rows[sl]], self.lifts[indices[sl]]
            gram = np.einsum("exa,exb->eab", Li, Lj)
            if compressed:
                blocks[sl] = -wdata[sl][:, None, None] * gram
            else:
                blocks[sl] = -wdata[sl][:, None, None] * np.einsum(
                    "exa,eab,eyb->exy", Li, gram, Lj
                )
        diag_w = Wcsr.diagonal()
        # overwrite self-loop blocks with the full diagonal block
        for i in range(m):
            row_slice = slice(indptr[i], indptr[i + 1])
            local = np.where(indices[row_slice] == i)[0]
            coeff = self.graph.row_sums[i] - diag_w[i]
            if compressed:
                dblock = coeff * np.eye(self.Nc) - self._Wc[i]
            else:
                Li = self.lifts[i]
                dblock = coeff * (Li @ Li.T) - Li @ self._Wc[i] @ Li.T
            if local.size:
                blocks[indptr[i] + local[0]] = dblock
        A = sp.bsr_matrix((blocks, indices, indptr), shape=(dim, dim)).tocsr()
        return (A + A.T) * 0.5

    def _dense_compressed(self) -> np.ndarray:
        """Dense compressed operator for the small-dimension eigensolver path."""
        m, Nc = self.cloud.m, self.Nc
        Wd = self.graph.weights.toarray()
        gram = np.einsum("ixa,jxb->iajb", self.lifts, self.lifts)
        A = -(Wd[:, None, :, None] * gram)
        idx = np.arange(m)
        diag_coeff = self.graph.row_sums - np.diag(Wd)
        A[idx, :, idx, :] = diag_coeff[:, None, None] * np.eye(Nc) - self._Wc
        A = A.reshape(m * Nc, m * Nc)
        return (A + A.T) * 0.5

    # -- eigensolver -------------------------------------------------------------

    def eigensolve(self, count: int, tol: float = 1e-8,
                   maxiter: int = 5000) -> "SpectralPackage":
        """Lowest eigenpairs of the operator on the tangential subspace.

        Dense solve below DENSE_FALLBACK_DIM, else implicitly restarted
        Lanczos on the matrix-free compressed MVP. Eigenvectors are
        orthonormalized in the (vol/m)-weighted discrete inner product.
        """
        m = self.cloud.m
        dim = m * self.Nc
        if count > dim:
            raise ConfigError(f"requested {count} eigenpairs from a {dim}-dim space")
        if dim <= DENSE_FALLBACK_DIM:
            A = self._dense_compressed()
            vals, vecs = np.linalg.eigh(A)
            vals, vecs = vals[:count], vecs[:, :count]
        else:
            op = spla.LinearOperator(
                (dim, dim), matvec=self.compressed_matvec, dtype=float
            )
            try:
                vals, vecs = spla.eigsh(
                    op, k=count, which="SA", tol=tol,
                    maxiter=maxiter, ncv=min(dim, max(4 * count + 1, 40)),
                )
            except spla.ArpackNoConvergence as exc:
                res = None
                if exc.eigenvalues is not None and len(exc.eigenvalues):
                    res = [float(v) for v in exc.eigenvalues]
                raise EigensolverError(
                    f"eigensolver failed to converge within {maxiter} iterations",
                    residuals=res,
                ) from exc
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
        residuals = np.empty(count)
        for i in range(count):
            av = self.compressed_matvec(vecs[:, i])
            residuals[i] = np.linalg.norm(av - vals[i] * vecs[:, i])
        # normalize in the (vol/m)-weighted inner product
        vecs = vecs * sqrt(m / self.config.vol)
        return SpectralPackage(self, np.asarray(vals, float), vecs, residuals,
                               tol=tol)

    # -- local operators and Nystrom extension -----------------------------------

    def local_frame(self, x):
        V, _ = self.field.evaluate(np.asarray(x, float))
        return V

    def degree_scalar(self, x) -> float:
        return float(kernel_row(self.cloud.points, x, self.config).sum())

    def degree_operator(self, x):
        """(d(x), Lambda^k V_x): the local degree operator d(x) Lambda^k Pi_x."""
        V = self.local_frame(x)
        return self.degree_scalar(x), lift_matrix(V, self.k)

    def correction_at(self, x, V=None) -> np.ndarray:
        """Compressed zeroth-order correction at an arbitrary query point."""
        if self.correction == "none" or self.k == 0:
            return np.zeros((self.Nc, self.Nc))
        if V is None:
            V = self.local_frame(x)
        x = np.asarray(x, dtype=float)
        bfield = self._curvature_field()
        if self.correction == "hodge":
            w = kernel_row(self.cloud.points, x, self.config)
            S = np.einsum("j,jxc,jyc->xy", w, self.lifts, self.lifts)
            Lx = lift_matrix(V, self.k)
            D = float(w.sum()) * np.eye(self.Nc) - Lx.T @ S @ Lx
            Bf, _ = bfield.frame_tensor_at(x, V)
            q = lichnerowicz_term(riemann_frame(Bf), self.k)
            W = 0.5 * D - q
            return 0.5 * (W + W.T)
        Bf, _ = bfield.frame_tensor_at(x, V)
        return weitzenboeck_frame(Bf, self.k)

    def shift_operator(self, x, lam: float, V=None):
        """The local shift d(x) I - W_corr(x) - lam I on the compressed space.

        Returns (V_frame, shift_matrix, inverse). Raises
        BandwidthTooLargeError when the shift is not positive definite.
        """
        if V is None:
            V = self.local_frame(x)
        shift = self.degree_scalar(x) * np.eye(self.Nc)
        shift -= self.correction_at(x, V)
        shift -= lam * np.eye(self.Nc)
        vals = np.linalg.eigvalsh(shift)
        if vals.min() <= 0.0:
            raise BandwidthTooLargeError(
                f"local shift not positive definite (min eig {vals.min():.3e}); "
                "decrease the bandwidth t"
            )
        return V, shift, np.linalg.inv(shift)

    def kernel_apply_compressed(self, comp: np.ndarray, x, V=None) -> np.ndarray:
        """K[v](x) in the frame at x: sum_j w(x, x_j) Pi_x Pi_j v_j, compressed."""
        if V is None:
            V = self.local_frame(x)
        w = kernel_row(self.cloud.points, x, self.config)
        y = self.expand(comp)                    # Pi_j v_j, ambient
        z = w @ y
        Lx = lift_matrix(V, self.k)
        return Lx.T @ z

    def nystrom_extend(self, comp: np.ndarray, lam: float, x) -> KVector:
        """Exact Nystrom extension of a compressed eigenvector at query x."""
        x = np.asarray(x, dtype=float)
        V, _, inv = self.shift_operator(x, lam)
        rhs = self.kernel_apply_compressed(comp, x, V)
        Lx = lift_matrix(V, self.k)
        return KVector(self.d, self.k, Lx @ (inv @ rhs))

    def nystrom_extend_many(self, comps: np.ndarray, lams, X) -> np.ndarray:
        """Batch Nystrom: comps (r, m, Nc), lams (r,), X (npts, d) ->
        (npts, r, N) ambient values."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        r = comps.shape[0]
        out = np.empty((X.shape[0], r, self.N))
        expanded = [self.expand(comps[i]) for i in range(r)]
        for row, x in enumerate(X):
            V = self.local_frame(x)
            Lx = lift_matrix(V, self.k)
            w = kernel_row(self.cloud.points, x, self.config)
            dscalar = float(w.sum())
            corr = self.correction_at(x, V)
            for i in range(r):
                shift = (dscalar - lams[i]) * np.eye(self.Nc) - corr
                vals = np.linalg.eigvalsh(shift)
                if vals.min() <= 0.0:
                    raise BandwidthTooLargeError(
                        "local shift not positive definite during Nystrom batch"
                    )
                rhs = Lx.T @ (w @ expanded[i])
                out[row, i] = Lx @ np.linalg.solve(shift, rhs)
        return out


@dataclass
class SpectralPackage:
    """Eigenvalues, discrete eigenvectors, residuals and gap diagnostics."""

    handle: HodgeOperatorHandle
    eigenvalues: np.ndarray
    compressed: np.ndarray          # (dim, count), (vol/m)-orthonormal columns
    residuals: np.ndarray
    tol: float = 1e-8
    kernel_threshold: float = 10.0
    kernel_eps: float = 1e-9

    def eigenvector(self, i: int) -> DiscreteKForm:
        m = self.handle.cloud.m
        comp = self.compressed[:, i].reshape(m, self.handle.Nc)
        return DiscreteKForm(self.handle.k, self.handle.expand(comp),
                             tangential=True)

    def compressed_vector(self, i: int) -> np.ndarray:
        m = self.handle.cloud.m
        return self.compressed[:, i].reshape(m, self.handle.Nc)

    @property
    def kernel_dim(self) -> int:
        """Largest b with lambda_{b+1} / max(lambda_b, eps) >= threshold."""
        lam = np.abs(self.eigenvalues)
        for b in range(len(lam) - 1, 0, -1):
            if lam[b] / max(lam[b - 1], self.kernel_eps) >= self.kernel_threshold:
                return b
        return 0

    @property
    def gap_ratio(self) -> float:
        lam = np.abs(self.eigenvalues)
        b = self.kernel_dim
        if b == 0 or b >= len(lam):
            return float("nan")
        return float(lam[b] / max(lam[b - 1], self.kernel_eps))

    @property
    def negative_flags(self):
        """Indices of eigenvalues below -10 * tol (reported, never clamped)."""
        return np.where(self.eigenvalues < -10.0 * self.tol)[0]

    def to_dict(self):
        n = self.handle.config.n
        return {
            "k": self.handle.k,
            "t": self.handle.config.t,
            "m": self.handle.cloud.m,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residuals": [float(r) for r in self.residuals],
            "kernel_dim": int(self.kernel_dim),
            "gap_ratio": None if np.isnan(self.gap_ratio) else float(self.gap_ratio),
            "negative_flags": [int(i) for i in self.negative_flags],
            "regime": "proved" if n >= 3 else "outside proved regime",
        }

    def dump_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def betti(spectral: SpectralPackage) -> int:
    """Betti number estimate: dimension of the sub-gap eigenvalue cluster."""
    return spectral.kernel_dim
