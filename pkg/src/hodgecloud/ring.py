"""Cohomology-ring recovery: chain integration, period matrices, gauge
fixing, Betti numbers, cup-product structure constants, Pontryagin numbers.

Harmonic representatives enter as Nystrom-evaluable bases (point evaluation
on chains needs off-sample values); oracle bases plug into the same
interfaces for dual-route checks. Gauge fixing re-mixes an arbitrary
L2-orthonormal near-kernel basis by the inverse period matrix so that the
basis becomes dual to the supplied homology cycles.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from hodgecloud.errors import ConfigError, GaugeFailureError
from hodgecloud.exterior import KVector, _wedge_table, lift_matrix
from hodgecloud.hodge import HodgeOperatorHandle, SpectralPackage, kernel_row
from hodgecloud.zoo import ManifoldSpec, PointCloud, SimplicialChain, oracle_harmonic_form

GAUGE_CONDITION_LIMIT = 1e6


class HarmonicBasis:
    """Nystrom-evaluable span of near-kernel eigenforms with a gauge matrix.

    ``evaluate_at(X)`` returns (npts, b, C(d,k)) ambient coefficient values of
    the mixed basis  omega_i = sum_a Q[a, i] * raw_a.
    """

    def __init__(self, handle: HodgeOperatorHandle, compressed: np.ndarray,
                 eigenvalues: np.ndarray, mix: np.ndarray | None = None):
        self.handle = handle
        self.compressed = compressed            # (b, m, Nc)
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        b = compressed.shape[0]
        self.mix = np.eye(b) if mix is None else np.asarray(mix, dtype=float)

    @classmethod
    def from_spectral(cls, spectral: SpectralPackage, count: int | None = None):
        b = spectral.kernel_dim if count is None else count
        if b == 0:
            raise GaugeFailureError("no sub-gap eigenvalue cluster to span")
        comps = np.stack([spectral.compressed_vector(i) for i in range(b)])
        return cls(spectral.handle, comps, spectral.eigenvalues[:b])

    @property
    def size(self):
        return self.compressed.shape[0]

    @property
    def degree(self):
        return self.handle.k

    def evaluate_raw(self, X) -> np.ndarray:
        out = self.handle.nystrom_extend_many(
            self.compressed, self.eigenvalues, X
        )
        return out  # (npts, b, N)

    def evaluate_at(self, X) -> np.ndarray:
        raw = self.evaluate_raw(X)
        return np.einsum("pbN,bi->piN", raw, self.mix)

    def evaluate_at_samples(self) -> np.ndarray:
        """Fast Nystrom at the sample points through the cached graph."""
        h = self.handle
        m = h.cloud.m
        b = self.size
        out = np.empty((m, b, h.N))
        corr = h._Wc
        d_scalar = h.graph.row_sums
        for i in range(b):
            z = h.graph.weights @ h.expand(self.compressed[i])
            rhs = h.compress(z)
            for j in range(m):
                shift = (d_scalar[j] - self.eigenvalues[i]) * np.eye(h.Nc) - corr[j]
                out[j, i] = h.lifts[j] @ np.linalg.solve(shift, rhs[j])
        return np.einsum("pbN,bi->piN", out, self.mix)

    def remixed(self, Q) -> "HarmonicBasis":
        return HarmonicBasis(self.handle, self.compressed, self.eigenvalues,
                             mix=self.mix @ Q)


class OracleFormBasis:
    """Closed-form harmonic basis of a zoo manifold, same evaluation API."""

    def __init__(self, spec: ManifoldSpec, k: int, indices=None,
                 mix: np.ndarray | None = None):
        from hodgecloud.zoo import betti_number

        self.spec = spec
        self.k = k
        self.indices = list(range(betti_number(spec, k))) if indices is None \
            else list(indices)
        b = len(self.indices)
        self.mix = np.eye(b) if mix is None else np.asarray(mix, dtype=float)

    @property
    def size(self):
        return len(self.indices)

    @property
    def degree(self):
        return self.k

    def evaluate_at(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        nck = comb(self.spec.d, self.k)
        raw = np.empty((X.shape[0], self.size, nck))
        for p_row, x in enumerate(X):
            for col, idx in enumerate(self.indices):
                raw[p_row, col] = oracle_harmonic_form(
                    self.spec, self.k, idx, x
                ).coeffs
        return np.einsum("pbN,bi->piN", raw, self.mix)

    def remixed(self, Q) -> "OracleFormBasis":
        return OracleFormBasis(self.spec, self.k, self.indices,
                               mix=self.mix @ Q)


# ---------------------------------------------------------------------------
# chain refinement and integration


def _cone_split(vertices: np.ndarray):
    """Split a q-simplex into q+1 positively-oriented children through its
    centroid; the children sum to the parent as chains."""
    centroid = vertices.mean(axis=0)
    out = []
    for i in range(vertices.shape[0]):
        child = vertices.copy()
        child[i] = centroid
        out.append(child)
    return out


def refine_chain(chain: SimplicialChain, levels: int) -> SimplicialChain:
    simplices = chain.simplices
    for _ in range(max(0, levels)):
        simplices = [(child, coeff) for verts, coeff in simplices
                     for child in _cone_split(np.asarray(verts, dtype=float))]
    return SimplicialChain(chain.degree, simplices, chain.refinement + levels,
                           chain.name)


def simplex_kvector(vertices: np.ndarray) -> np.ndarray:
    """Oriented k-vector of a q-simplex: (v1-v0) ^ ... ^ (vq-v0) / q!."""
    verts = np.asarray(vertices, dtype=float)
    q = verts.shape[0] - 1
    edges = (verts[1:] - verts[0]).T          # (d, q)
    return lift_matrix(edges, q)[:, 0] / factorial(q)


def _chain_quadrature(chain: SimplicialChain, quad_order: int):
    refined = refine_chain(chain, quad_order)
    centroids = np.stack([np.asarray(v).mean(axis=0)
                          for v, _ in refined.simplices])
    kvecs = np.stack([simplex_kvector(v) for v, _ in refined.simplices])
    coeffs = np.array([c for _, c in refined.simplices])
    return centroids, kvecs, coeffs


def integrate_chain(form, chain: SimplicialChain, quad_order: int = 2) -> float:
    """Integrate a query-evaluable k-form over a simplicial k-chain.

    Centroid quadrature after ``quad_order`` uniform refinements; ``form`` is
    a callable x -> KVector of degree equal to the chain degree.
    """
    probe = form(np.asarray(chain.simplices[0][0], dtype=float).mean(axis=0))
    if probe.k != chain.degree:
        raise ConfigError(
            f"form degree {probe.k} does not match chain degree {chain.degree}"
        )
    centroids, kvecs, coeffs = _chain_quadrature(chain, quad_order)
    total = 0.0
    for x, sigma, c in zip(centroids, kvecs, coeffs):
        total += c * float(form(x).coeffs @ sigma)
    return total


def integrate_basis(basis, chain: SimplicialChain, quad_order: int = 2):
    """Integrate every form of a basis over one chain (vectorized)."""
    if basis.degree != chain.degree:
        raise ConfigError(
            f"basis degree {basis.degree} does not match chain degree "
            f"{chain.degree}"
        )
    centroids, kvecs, coeffs = _chain_quadrature(chain, quad_order)
    values = basis.evaluate_at(centroids)          # (npts, b, N)
    return np.einsum("p,pbN,pN->b", coeffs, values, kvecs)


@dataclass
class PeriodMatrix:
    """P[j][a] = integral of form a over cycle j, plus conditioning data."""

    matrix: np.ndarray
    condition_number: float
    cycle_names: tuple
    quad_order: int


def period_matrix(basis, cycles, quad_order: int = 2) -> PeriodMatrix:
    """Empirical period matrix of a form basis against homology cycles."""
    cycles = list(cycles)
    if len(cycles) != basis.size:
        raise GaugeFailureError(
            f"period matrix not square: {basis.size} forms vs "
            f"{len(cycles)} cycles"
        )
    if not cycles:
        raise GaugeFailureError("no cycles supplied")
    P = np.stack([integrate_basis(basis, gamma, quad_order) for gamma in cycles])
    cond = float(np.linalg.cond(P))
    if not np.isfinite(cond) or cond >= GAUGE_CONDITION_LIMIT:
        raise GaugeFailureError(
            f"period matrix condition number {cond:.3e} exceeds "
            f"{GAUGE_CONDITION_LIMIT:.0e}"
        )
    return PeriodMatrix(P, cond, tuple(c.name for c in cycles), quad_order)


def gauge_fix(basis, period: PeriodMatrix):
    """Re-mix a basis to be dual to the cycles: omega_i = sum_a (P^-1)_{ai} raw_a."""
    return basis.remixed(np.linalg.inv(period.matrix))


def betti(spectral: SpectralPackage) -> int:
    """Betti number from the sub-gap eigenvalue cluster of the Hodge operator."""
    return spectral.kernel_dim


def _batch_wedge(a_vals: np.ndarray, b_vals: np.ndarray, d: int, k: int, l: int):
    """Pointwise wedge of coefficient arrays (..., C(d,k)) x (..., C(d,l))."""
    ia, ib, ic, sg = _wedge_table(d, k, l)
    out = np.zeros(a_vals.shape[:-1] + (comb(d, k + l),))
    for r in range(ia.size):
        out[..., ic[r]] += sg[r] * a_vals[..., ia[r]] * b_vals[..., ib[r]]
    return out


@dataclass
class StructureConstantTensor:
    """Cup-product structure constants and their Gram-normalized resolution."""

    degrees: tuple
    raw: np.ndarray              # (b_k, b_l, b_{k+l})
    gram: np.ndarray             # (b_{k+l}, b_{k+l})
    normalized: np.ndarray       # raw @ gram^{-1}

    def to_dict(self):
        return {
            "degrees": list(self.degrees),
            "raw": self.raw.tolist(),
            "gram": self.gram.tolist(),
            "normalized": self.normalized.tolist(),
        }


def structure_constants(forms_k, forms_l, forms_kl, cloud: PointCloud,
                        vol: float | None = None,
                        values_k=None, values_l=None, values_kl=None
                        ) -> StructureConstantTensor:
    """Monte-Carlo cup-product structure constants over the sample cloud.

    c[i, j, l] = (vol/m) sum_a < omega_i ^ omega_j, omega_l >(x_a), together
    with the Gram matrix of the degree-(k+l) basis and the Gram-normalized
    coefficients resolving each wedge in that basis. Pre-evaluated sample
    values can be passed to avoid repeated Nystrom sweeps.
    """
    k, l = forms_k.degree, forms_l.degree
    d = cloud.d
    if k + l > d:
        raise ConfigError(f"degree overflow: {k}+{l} > d={d}")
    if forms_kl.degree != k + l:
        raise ConfigError("target basis degree must be k+l")
    if vol is None:
        vol = cloud.spec.volume
    X = cloud.points

    def sample_values(basis, cached):
        if cached is not None:
            return cached
        if hasattr(basis, "evaluate_at_samples"):
            return basis.evaluate_at_samples()
        return basis.evaluate_at(X)

    vk = sample_values(forms_k, values_k)          # (m, bk, Nk)
    vl = sample_values(forms_l, values_l)
    vkl = sample_values(forms_kl, values_kl)
    m = cloud.m
    bk, bl, bkl = forms_k.size, forms_l.size, forms_kl.size
    raw = np.empty((bk, bl, bkl))
    for i in range(bk):
        for j in range(bl):
            w = _batch_wedge(vk[:, i, :], vl[:, j, :], d, k, l)   # (m, Nkl)
            raw[i, j] = (vol / m) * np.einsum("mN,mlN->l", w, vkl)
    gram = (vol / m) * np.einsum("miN,mjN->ij", vkl, vkl)
    normalized = raw @ np.linalg.inv(gram)
    return StructureConstantTensor((k, l), raw, gram, normalized)


def pontryagin_number_fundamental(p1_values: np.ndarray, lifts_top: np.ndarray,
                                  signs: np.ndarray, vol: float) -> float:
    """Fundamental-class Pontryagin number on a 4-manifold.

    vol * mean over samples of <p1(x_a), oriented unit tangent 4-vector>;
    ``p1_values`` is (m, C(d,4)), ``lifts_top`` the Lambda^4 frame columns
    (m, C(d,4)), ``signs`` the orientation of each frame.
    """
    if signs is None:
        raise ConfigError("fundamental-class integration needs orientations")
    pairing = np.einsum("mN,mN->m", p1_values, lifts_top) * signs
    return float(vol * pairing.mean())


def pontryagin_number_chain(p1_form, chain: SimplicialChain,
                            quad_order: int = 2) -> float:
    """Chain-mode Pontryagin number: integrate the 4-form over a 4-cycle."""
    return integrate_chain(p1_form, chain, quad_order)
