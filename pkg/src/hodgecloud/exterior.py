"""Exact exterior algebra over R^d.

Multi-index bases of Lambda^k R^d in global lexicographic order, wedge and
interior products, the induced inner product, and factored lifts Lambda^k V
of column-orthonormal maps (matrices of k x k minors).

Conventions shared by all modules:
  * basis k-vectors are indexed by strictly increasing multi-indices, ordered
    lexicographically;
  * Lambda^k (R^d)^* is identified with Lambda^k R^d through the Euclidean
    metric, so forms and multivectors use the same coefficient arrays;
  * interior(v, .) is the adjoint of v-wedge: <interior(v,a), b> = <a, v^b>.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np


def multi_index_basis(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    """All strictly increasing k-tuples in [0, d), lexicographically ordered."""
    if k < 0:
        raise ValueError(f"negative degree k={k}")
    if k > d:
        raise ValueError(f"degree k={k} exceeds ambient dimension d={d}")
    return _basis_cached(d, k)


@lru_cache(maxsize=None)
def _basis_cached(d, k):
    return tuple(combinations(range(d), k))


@lru_cache(maxsize=None)
def _position(d, k):
    return {idx: i for i, idx in enumerate(_basis_cached(d, k))}


def _merge_sign(left, right):
    # (-1)^{number of transpositions needed to sort left+right}
    inversions = sum(1 for a in left for b in right if a > b)
    return -1.0 if inversions % 2 else 1.0


@lru_cache(maxsize=None)
def _wedge_table(d, k1, k2):
    """Rows (ia, ib, ic, sign) with basis_I ^ basis_J = sign * basis_{I u J}."""
    pos = _position(d, k1 + k2)
    ia, ib, ic, sg = [], [], [], []
    for i, left in enumerate(_basis_cached(d, k1)):
        left_set = set(left)
        for j, right in enumerate(_basis_cached(d, k2)):
            if left_set & set(right):
                continue
            ia.append(i)
            ib.append(j)
            ic.append(pos[tuple(sorted(left + right))])
            sg.append(_merge_sign(left, right))
    return (np.asarray(ia), np.asarray(ib), np.asarray(ic), np.asarray(sg))


@lru_cache(maxsize=None)
def _interior_table(d, k):
    """Rows (i_out, i_in, slot, sign): (i_v a)[J] += sign * v[slot] * a[I]."""
    pos = _position(d, k - 1)
    io, ii, sl, sg = [], [], [], []
    for i, idx in enumerate(_basis_cached(d, k)):
        for r, p in enumerate(idx):
            rest = idx[:r] + idx[r + 1:]
            io.append(pos[rest])
            ii.append(i)
            sl.append(p)
            sg.append(-1.0 if r % 2 else 1.0)
    return (np.asarray(io), np.asarray(ii), np.asarray(sl), np.asarray(sg))


@dataclass(frozen=True)
class KVector:
    """Element of Lambda^k R^d as a dense coefficient array.

    Coefficients are indexed by ``multi_index_basis(d, k)``; degree 0 is a
    single scalar coefficient.
    """

    d: int
    k: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.shape != (comb(self.d, self.k),):
            raise ValueError(
                f"KVector(d={self.d}, k={self.k}) needs {comb(self.d, self.k)} "
                f"coefficients, got shape {coeffs.shape}"
            )

    @classmethod
    def zero(cls, d, k):
        return cls(d, k, np.zeros(comb(d, k)))

    @classmethod
    def basis(cls, d, k, indices):
        """Basis k-vector e_{i1} ^ ... ^ e_{ik} for an increasing index tuple."""
        c = np.zeros(comb(d, k))
        c[_position(d, k)[tuple(indices)]] = 1.0
        return cls(d, k, c)

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v.shape[0], 1, v.copy())

    def __add__(self, other):
        self._check(other)
        return KVector(self.d, self.k, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return KVector(self.d, self.k, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return KVector(self.d, self.k, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def _check(self, other):
        if not isinstance(other, KVector) or (self.d, self.k) != (other.d, other.k):
            raise ValueError("KVector degree/dimension mismatch")

    def norm(self):
        return float(np.linalg.norm(self.coeffs))


def wedge(a: KVector, b: KVector) -> KVector:
    """Exterior product; bilinear and graded-antisymmetric."""
    if a.d != b.d:
        raise ValueError("ambient dimension mismatch")
    k = a.k + b.k
    if k > a.d:
        raise ValueError(f"wedge degree overflow: {a.k}+{b.k} > d={a.d}")
    ia, ib, ic, sg = _wedge_table(a.d, a.k, b.k)
    out = np.zeros(comb(a.d, k))
    if ia.size:
        np.add.at(out, ic, sg * a.coeffs[ia] * b.coeffs[ib])
    return KVector(a.d, k, out)


def interior(v: np.ndarray, a: KVector) -> KVector:
    """Interior product i_v a, the adjoint of v-wedge."""
    if a.k < 1:
        raise ValueError("interior product needs degree k >= 1")
    v = np.asarray(v, dtype=float)
    if v.shape != (a.d,):
        raise ValueError("contraction vector dimension mismatch")
    io, ii, sl, sg = _interior_table(a.d, a.k)
    out = np.zeros(comb(a.d, a.k - 1))
    np.add.at(out, io, sg * v[sl] * a.coeffs[ii])
    return KVector(a.d, a.k - 1, out)


def inner(a: KVector, b: KVector) -> float:
    """Euclidean inner product; the multi-index basis is orthonormal."""
    a._check(b)
    return float(a.coeffs @ b.coeffs)


def wedge_matrix(u: np.ndarray, d: int, k: int) -> np.ndarray:
    """Matrix of (u ^ .): Lambda^k -> Lambda^{k+1} in the multi-index bases."""
    u = np.asarray(u, dtype=float)
    ia, ib, ic, sg = _wedge_table(d, 1, k)
    out = np.zeros((comb(d, k + 1), comb(d, k)))
    np.add.at(out, (ic, ib), sg * u[ia])
    return out


def interior_matrix(w: np.ndarray, d: int, k: int) -> np.ndarray:
    """Matrix of i_w: Lambda^k -> Lambda^{k-1}."""
    w = np.asarray(w, dtype=float)
    io, ii, sl, sg = _interior_table(d, k)
    out = np.zeros((comb(d, k - 1), comb(d, k)))
    np.add.at(out, (io, ii), sg * w[sl])
    return out


def wedge_interior_matrix(u: np.ndarray, w: np.ndarray, d: int, k: int) -> np.ndarray:
    """Matrix of the degree-preserving composition u^* wedge i_w on Lambda^k."""
    if k == 0:
        return np.zeros((1, 1))
    return wedge_matrix(u, d, k - 1) @ interior_matrix(w, d, k)


@dataclass(frozen=True)
class FactoredLift:
    """Factored exterior power of a column-orthonormal frame.

    ``matrix`` is the C(d,k) x C(n,k) array of k x k minors of ``frame``;
    its columns are orthonormal and matrix @ matrix.T equals
    Lambda^k(frame @ frame.T).
    """

    frame: np.ndarray
    k: int
    matrix: np.ndarray

    @property
    def d(self):
        return self.frame.shape[0]

    @property
    def n(self):
        return self.frame.shape[1]


def lift_map(V: np.ndarray, k: int, tol: float = 1e-8) -> FactoredLift:
    """Lift a column-orthonormal d x n matrix to Lambda^k (matrix of minors)."""
    V = np.asarray(V, dtype=float)
    d, n = V.shape
    if k > n:
        raise ValueError(f"lift degree k={k} exceeds frame rank n={n}")
    defect = np.abs(V.T @ V - np.eye(n)).max()
    if defect > tol:
        raise ValueError(f"frame is not column-orthonormal (defect {defect:.2e})")
    return FactoredLift(V, k, lift_matrix(V, k))


def lift_matrix(V: np.ndarray, k: int) -> np.ndarray:
    """The C(d,k) x C(n,k) matrix of k x k minors of V (no orthonormality check)."""
    V = np.asarray(V, dtype=float)
    d, n = V.shape
    if k == 0:
        return np.ones((1, 1))
    if k == 1:
        return V.copy()
    rows = np.asarray(_basis_cached(d, k))
    cols = np.asarray(_basis_cached(n, k))
    sub = V[rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(sub)


def project_k(lift: FactoredLift, w: KVector) -> KVector:
    """Apply Lambda^k(V V^T) to w through the factored lift."""
    if w.k != lift.k or w.d != lift.d:
        raise ValueError("degree/dimension mismatch between lift and k-vector")
    m = lift.matrix
    return KVector(w.d, w.k, m @ (m.T @ w.coeffs))
