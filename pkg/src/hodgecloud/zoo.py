"""Analytic test manifolds: generators and oracles.

Uniform samplers plus closed-form oracles (tangent projections, second
fundamental form, curvature, Hodge spectra, harmonic forms, homology cycles)
for the round spheres, flat tori built from unit circles, products of round
spheres, and the projective plane CP^2 embedded by rank-one Hermitian
projections.

Orientation conventions (fixed per kind so top-form integrals have
determinate signs):
  * sphere: a frame V is positively oriented when det([p/r | V]) = +1
    (outward normal first);
  * flat torus: the circle-tangent frame (tau_1, ..., tau_n) in coordinate
    order;
  * product sphere: concatenation of the factor conventions;
  * cp2: the complex orientation (X, JX, Y, JY).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from math import comb, gamma, pi, sqrt

import numpy as np

from hodgecloud import exterior
from hodgecloud.errors import ConfigError
from hodgecloud.exterior import KVector, lift_matrix, wedge_interior_matrix

KINDS = ("sphere", "flat-torus", "product-sphere", "cp2", "s4", "raw")

_BINARY_MAGIC = b"HODGECLD"


def sphere_volume(n: int, r: float) -> float:
    """Surface volume of S^n(r) in R^{n+1}."""
    return 2.0 * pi ** ((n + 1) / 2.0) / gamma((n + 1) / 2.0) * r**n


@dataclass(frozen=True)
class ManifoldSpec:
    """A test manifold: kind, dimensions, scale parameters, orientation flag."""

    kind: str
    n: int
    d: int
    radii: tuple = ()
    oriented: bool = True
    factor_dims: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unsupported manifold kind {self.kind!r}")
        if self.kind != "raw" and not (2 <= self.n < self.d):
            raise ConfigError(f"need 2 <= n < d, got n={self.n}, d={self.d}")

    @property
    def volume(self) -> float:
        if self.kind == "sphere":
            return sphere_volume(self.n, self.radii[0])
        if self.kind == "flat-torus":
            return (2.0 * pi) ** self.n
        if self.kind == "product-sphere":
            n1, n2 = self.factor_dims
            return sphere_volume(n1, self.radii[0]) * sphere_volume(n2, self.radii[1])
        if self.kind == "cp2":
            # Frobenius embedding doubles the Fubini-Study metric: vol = 4 * pi^2/2.
            return 2.0 * pi**2
        raise ConfigError(f"volume unknown for kind {self.kind!r}")

    def to_dict(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "d": self.d,
            "radii": list(self.radii),
            "oriented": self.oriented,
            "factor_dims": list(self.factor_dims),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            kind=data["kind"],
            n=int(data["n"]),
            d=int(data["d"]),
            radii=tuple(data.get("radii", ())),
            oriented=bool(data.get("oriented", True)),
            factor_dims=tuple(data.get("factor_dims", ())),
        )


def sphere(n: int, radius: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec("sphere", n, n + 1, (float(radius),))


def s4(radius: float = 1.0) -> ManifoldSpec:
    return sphere(4, radius)


def flat_torus(n: int) -> ManifoldSpec:
    return ManifoldSpec("flat-torus", n, 2 * n)


def product_sphere(n1: int, n2: int, r1: float = 1.0, r2: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec(
        "product-sphere", n1 + n2, n1 + n2 + 2, (float(r1), float(r2)),
        factor_dims=(n1, n2),
    )


def cp2() -> ManifoldSpec:
    return ManifoldSpec("cp2", 4, 9)


@dataclass(frozen=True)
class PointCloud:
    """m sample points in R^d with manifold metadata."""

    points: np.ndarray
    spec: ManifoldSpec
    seed: int
    m: int = field(init=False, default=0)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "m", pts.shape[0])
        if pts.ndim != 2:
            raise ConfigError("points must be an m x d array")

    @property
    def d(self):
        return self.points.shape[1]


# ---------------------------------------------------------------------------
# sampling


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def _sample_sphere(rng, m, n, r):
    g = rng.normal(size=(m, n + 1))
    return r * g / np.linalg.norm(g, axis=1, keepdims=True)


def _sample_torus(rng, m, n):
    ang = rng.uniform(0.0, 2.0 * pi, size=(m, n))
    out = np.empty((m, 2 * n))
    out[:, 0::2] = np.cos(ang)
    out[:, 1::2] = np.sin(ang)
    return out


def _hermitian_to_vec(P: np.ndarray) -> np.ndarray:
    s = sqrt(2.0)
    return np.array(
        [
            P[0, 0].real, P[1, 1].real, P[2, 2].real,
            s * P[0, 1].real, s * P[0, 1].imag,
            s * P[0, 2].real, s * P[0, 2].imag,
            s * P[1, 2].real, s * P[1, 2].imag,
        ]
    )


def _vec_to_hermitian(x: np.ndarray) -> np.ndarray:
    s = 1.0 / sqrt(2.0)
    P = np.empty((3, 3), dtype=complex)
    P[0, 0], P[1, 1], P[2, 2] = x[0], x[1], x[2]
    P[0, 1] = s * (x[3] + 1j * x[4])
    P[0, 2] = s * (x[5] + 1j * x[6])
    P[1, 2] = s * (x[7] + 1j * x[8])
    P[1, 0], P[2, 0], P[2, 1] = np.conj(P[0, 1]), np.conj(P[0, 2]), np.conj(P[1, 2])
    return P


def _sample_cp2(rng, m):
    z = rng.normal(size=(m, 3)) + 1j * rng.normal(size=(m, 3))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    out = np.empty((m, 9))
    s = sqrt(2.0)
    zc = np.conj(z)
    out[:, 0] = np.abs(z[:, 0]) ** 2
    out[:, 1] = np.abs(z[:, 1]) ** 2
    out[:, 2] = np.abs(z[:, 2]) ** 2
    for col, (i, j) in zip((3, 5, 7), ((0, 1), (0, 2), (1, 2))):
        pij = z[:, i] * zc[:, j]
        out[:, col] = s * pij.real
        out[:, col + 1] = s * pij.imag
    return out


def sample(spec: ManifoldSpec, m: int, seed: int) -> PointCloud:
    """Draw m i.i.d. points from the uniform (Riemannian volume) measure."""
    if m < 1:
        raise ConfigError("need m >= 1 samples")
    rng = _rng(seed)
    if spec.kind == "sphere":
        pts = _sample_sphere(rng, m, spec.n, spec.radii[0])
    elif spec.kind == "flat-torus":
        pts = _sample_torus(rng, m, spec.n)
    elif spec.kind == "product-sphere":
        n1, n2 = spec.factor_dims
        a = _sample_sphere(rng, m, n1, spec.radii[0])
        b = _sample_sphere(rng, m, n2, spec.radii[1])
        pts = np.hstack([a, b])
    elif spec.kind == "cp2":
        pts = _sample_cp2(rng, m)
    else:
        raise ConfigError(f"cannot sample kind {spec.kind!r}")
    return PointCloud(pts, spec, seed)


def on_manifold_residual(spec: ManifoldSpec, p: np.ndarray) -> float:
    """Max violation of the defining equations at p."""
    p = np.asarray(p, dtype=float)
    if spec.kind == "sphere":
        return abs(np.linalg.norm(p) - spec.radii[0])
    if spec.kind == "flat-torus":
        circ = p.reshape(-1, 2)
        return float(np.abs(np.linalg.norm(circ, axis=1) - 1.0).max())
    if spec.kind == "product-sphere":
        n1, _ = spec.factor_dims
        d1 = n1 + 1
        return max(
            abs(np.linalg.norm(p[:d1]) - spec.radii[0]),
            abs(np.linalg.norm(p[d1:]) - spec.radii[1]),
        )
    if spec.kind == "cp2":
        P = _vec_to_hermitian(p)
        return float(
            max(
                np.abs(P @ P - P).max(),
                abs(np.trace(P).real - 1.0),
                np.abs(P - P.conj().T).max(),
            )
        )
    raise ConfigError(f"no defining equations for kind {spec.kind!r}")


def _check_on_manifold(spec, p, tol=1e-8):
    res = on_manifold_residual(spec, p)
    if res > tol:
        raise ConfigError(f"point is off the manifold (residual {res:.2e})")


# ---------------------------------------------------------------------------
# tangent frames and projections


def _sphere_frame(p, r):
    """Oriented orthonormal basis of the tangent space of S^n(r) at p."""
    nu = np.asarray(p, dtype=float) / r
    d = nu.shape[0]
    u = nu - np.eye(d)[0]
    norm = np.linalg.norm(u)
    if norm < 1e-12:
        V = np.eye(d)[:, 1:]
    else:
        H = np.eye(d) - 2.0 * np.outer(u, u) / norm**2
        V = H[:, 1:]
    # Householder has det -1; make det([nu | V]) = +1.
    if np.linalg.det(np.column_stack([nu, V])) < 0:
        V = V.copy()
        V[:, -1] = -V[:, -1]
    return V


def _torus_frame(p):
    n = p.shape[0] // 2
    V = np.zeros((2 * n, n))
    for i in range(n):
        V[2 * i, i] = -p[2 * i + 1]
        V[2 * i + 1, i] = p[2 * i]
    return V


def _cp2_z_basis(p):
    """Eigen-line z and a deterministic orthonormal basis (w1, w2) of z-perp."""
    P = _vec_to_hermitian(np.asarray(p, dtype=float))
    vals, vecs = np.linalg.eigh(P)
    z = vecs[:, -1]
    j = int(np.argmax(np.abs(z)))
    z = z * (np.conj(z[j]) / abs(z[j]))  # phase-fix: largest entry real positive
    basis = []
    for e in np.eye(3, dtype=complex):
        w = e - z * np.vdot(z, e)
        for b in basis:
            w = w - b * np.vdot(b, w)
        nrm = np.linalg.norm(w)
        if nrm > 1e-7:
            basis.append(w / nrm)
        if len(basis) == 2:
            break
    return z, basis[0], basis[1]


def _cp2_frame(p):
    z, w1, w2 = _cp2_z_basis(p)
    cols = []
    for v in (w1, 1j * w1, w2, 1j * w2):
        X = np.outer(v, np.conj(z)) + np.outer(z, np.conj(v))
        cols.append(_hermitian_to_vec(X) / sqrt(2.0))
    return np.column_stack(cols)


def oracle_frame(spec: ManifoldSpec, p: np.ndarray) -> np.ndarray:
    """Positively oriented orthonormal tangent frame (d x n) at p."""
    p = np.asarray(p, dtype=float)
    _check_on_manifold(spec, p)
    if spec.kind == "sphere":
        return _sphere_frame(p, spec.radii[0])
    if spec.kind == "flat-torus":
        return _torus_frame(p)
    if spec.kind == "product-sphere":
        n1, n2 = spec.factor_dims
        d1 = n1 + 1
        V1 = _sphere_frame(p[:d1], spec.radii[0])
        V2 = _sphere_frame(p[d1:], spec.radii[1])
        V = np.zeros((spec.d, spec.n))
        V[:d1, :n1] = V1
        V[d1:, n1:] = V2
        return V
    if spec.kind == "cp2":
        return _cp2_frame(p)
    raise ConfigError(f"no oracle frame for kind {spec.kind!r}")


def oracle_projection(spec: ManifoldSpec, p: np.ndarray) -> np.ndarray:
    """True orthogonal projection R^d -> T_p M as a d x d matrix."""
    V = oracle_frame(spec, p)
    return V @ V.T


# ---------------------------------------------------------------------------
# extrinsic curvature oracles (all ambient-extended: slots are projected)


def oracle_second_fundamental(spec: ManifoldSpec, p: np.ndarray) -> np.ndarray:
    """Ambient-extended second fundamental form as a d x d x d tensor.

    ``B[i, j, :]`` is the normal-valued vector B(Pi e_i, Pi e_j); the tensor
    is symmetric in its first two slots.
    """
    p = np.asarray(p, dtype=float)
    _check_on_manifold(spec, p)
    d = spec.d
    if spec.kind == "sphere":
        r = spec.radii[0]
        Pi = oracle_projection(spec, p)
        return -np.einsum("ij,k->ijk", Pi, p) / r**2
    if spec.kind == "flat-torus":
        n = spec.n
        B = np.zeros((d, d, d))
        for i in range(n):
            tau = np.zeros(d)
            tau[2 * i], tau[2 * i + 1] = -p[2 * i + 1], p[2 * i]
            nu = np.zeros(d)
            nu[2 * i], nu[2 * i + 1] = p[2 * i], p[2 * i + 1]
            B -= np.einsum("i,j,k->ijk", tau, tau, nu)
        return B
    if spec.kind == "product-sphere":
        n1, n2 = spec.factor_dims
        d1 = n1 + 1
        B = np.zeros((d, d, d))
        B1 = oracle_second_fundamental(sphere(n1, spec.radii[0]), p[:d1])
        B2 = oracle_second_fundamental(sphere(n2, spec.radii[1]), p[d1:])
        B[:d1, :d1, :d1] = B1
        B[d1:, d1:, d1:] = B2
        return B
    if spec.kind == "cp2":
        z, w1, w2 = _cp2_z_basis(p)
        P = _vec_to_hermitian(p)
        V = _cp2_frame(p)
        Pi_perp = np.eye(9) - V @ V.T
        vs = (w1, 1j * w1, w2, 1j * w2)
        Bf = np.zeros((4, 4, 9))
        for a, va in enumerate(vs):
            for b, vb in enumerate(vs):
                hess = np.outer(va, np.conj(vb)) + np.outer(vb, np.conj(va))
                if a == b:
                    hess = hess - 2.0 * P
                Bf[a, b] = 0.5 * (Pi_perp @ _hermitian_to_vec(hess))
        return np.einsum("ia,jb,abk->ijk", V, V, Bf)
    raise ConfigError(f"no curvature oracle for kind {spec.kind!r}")


def oracle_mean_curvature(spec: ManifoldSpec, p: np.ndarray) -> np.ndarray:
    """Unnormalized mean curvature vector H = sum_i B(e_i, e_i)."""
    B = oracle_second_fundamental(spec, p)
    return np.einsum("iik->k", B)


def curvature_from_b(B: np.ndarray) -> np.ndarray:
    """Gauss equation in flat ambient space, as a 4-tensor.

    R(X, Y, Z, W) = <B(X,Z), B(Y,W)> - <B(X,W), B(Y,Z)>.
    """
    G = np.einsum("ikm,jlm->ijkl", B, B)
    return G - np.einsum("ijlk->ijkl", G)


def oracle_curvature(spec: ManifoldSpec, p: np.ndarray) -> np.ndarray:
    """Ambient-extended Riemann tensor R(X,Y,Z,W) via the Gauss equation."""
    return curvature_from_b(oracle_second_fundamental(spec, p))


def weitzenboeck_from_frame(B: np.ndarray, H: np.ndarray, V: np.ndarray, k: int):
    """End_H(B) on Lambda^k, compressed to the frame: the C(n,k)^2 matrix of

    sum_{j,l} <H, B(e_j, e_l)> e_j^* wedge i_{e_l}
    in frame coordinates. The ambient operator is L @ W @ L.T with
    L = lift_matrix(V, k).
    """
    n = V.shape[1]
    if k == 0:
        return np.zeros((1, 1))
    Bf = np.einsum("ia,jb,ijk->abk", V, V, B)
    c = np.einsum("abk,k->ab", Bf, H)
    W = np.zeros((comb(n, k), comb(n, k)))
    eye = np.eye(n)
    for j in range(n):
        for l in range(n):
            if c[j, l] != 0.0:
                W += c[j, l] * wedge_interior_matrix(eye[j], eye[l], n, k)
    return W


def oracle_weitzenboeck(spec: ManifoldSpec, p: np.ndarray, k: int) -> np.ndarray:
    """End_H(B) at p as an ambient C(d,k) x C(d,k) matrix (zero on normals)."""
    V = oracle_frame(spec, p)
    B = oracle_second_fundamental(spec, p)
    H = oracle_mean_curvature(spec, p)
    L = lift_matrix(V, k)
    return L @ weitzenboeck_from_frame(B, H, V, k) @ L.T


# ---------------------------------------------------------------------------
# spectra, harmonic forms, cycles


def _sphere_harmonic_dim(n, l):
    """dim of degree-l spherical harmonics on S^n."""
    return comb(l + n, n) - comb(l + n - 2, n)


def oracle_spectrum(spec: ManifoldSpec, k: int, count: int):
    """Lowest Hodge eigenvalues on k-forms as (eigenvalue, multiplicity) pairs."""
    out = []
    if spec.kind in ("sphere",):
        r = spec.radii[0]
        n = spec.n
        if k == 0:
            l = 0
            while sum(m for _, m in out) < count:
                out.append((l * (l + n - 1) / r**2, _sphere_harmonic_dim(n, l)))
                l += 1
            return out
        if n == 2 and k == 1:
            l = 1
            while sum(m for _, m in out) < count:
                out.append((l * (l + 1) / r**2, 2 * (2 * l + 1)))
                l += 1
            return out
        if n == 2 and k == 2:
            l = 0
            while sum(m for _, m in out) < count:
                out.append((l * (l + 1) / r**2, _sphere_harmonic_dim(2, l)))
                l += 1
            return out
        raise ConfigError(f"sphere spectrum unsupported for n={n}, k={k}")
    if spec.kind == "flat-torus":
        n = spec.n
        # scalar eigenvalues |q|^2 over the integer lattice; each eigenvalue
        # acts diagonally on the C(n,k) constant-coefficient form components.
        qmax = 1
        while True:
            values = {}
            rng = range(-qmax, qmax + 1)
            grids = np.meshgrid(*([list(rng)] * n), indexing="ij")
            qs = np.stack([g.ravel() for g in grids], axis=1)
            norms = (qs**2).sum(axis=1)
            for v in norms:
                values[int(v)] = values.get(int(v), 0) + 1
            complete = [v for v in sorted(values) if v <= qmax**2]
            total = 0
            out = []
            for v in complete:
                out.append((float(v), values[v] * comb(n, k)))
                total += values[v] * comb(n, k)
                if total >= count:
                    return out
            qmax += 1
    raise ConfigError(f"no spectrum oracle for kind {spec.kind!r}")


def flatten_spectrum(pairs, count):
    """Expand (value, multiplicity) pairs into a sorted eigenvalue list."""
    vals = []
    for v, m in pairs:
        vals.extend([v] * m)
        if len(vals) >= count:
            break
    return np.asarray(vals[:count])


def betti_number(spec: ManifoldSpec, k: int) -> int:
    if spec.kind == "sphere":
        return 1 if k in (0, spec.n) else 0
    if spec.kind == "flat-torus":
        return comb(spec.n, k)
    if spec.kind == "product-sphere":
        n1, n2 = spec.factor_dims
        b1 = [1 if j in (0, n1) else 0 for j in range(k + 1)]
        b2 = [1 if j in (0, n2) else 0 for j in range(k + 1)]
        return sum(b1[j] * b2[k - j] for j in range(k + 1) if k - j <= n2)
    if spec.kind == "cp2":
        return 1 if k in (0, 2, 4) else 0
    raise ConfigError(f"no Betti oracle for kind {spec.kind!r}")


def oracle_harmonic_form(spec: ManifoldSpec, k: int, index: int, p: np.ndarray) -> KVector:
    """Gauge-fixed harmonic representative number ``index`` evaluated at p.

    Torus representatives are dual to the coordinate cycles of
    ``oracle_cycles``; degree-0 forms are L2-normalized constants.
    """
    p = np.asarray(p, dtype=float)
    d = spec.d
    if k == 0:
        if index != 0:
            raise ConfigError("b_0 = 1 on connected manifolds")
        return KVector(d, 0, np.array([1.0 / sqrt(spec.volume)]))
    if spec.kind == "flat-torus":
        n = spec.n
        combos = list(combinations(range(n), k))
        if not 0 <= index < len(combos):
            raise ConfigError(f"index {index} out of range for b_{k}={len(combos)}")
        V = _torus_frame(p)
        picked = combos[index]
        form = KVector.from_vector(V[:, picked[0]])
        for i in picked[1:]:
            form = exterior.wedge(form, KVector.from_vector(V[:, i]))
        return (1.0 / (2.0 * pi) ** k) * form
    if spec.kind == "sphere" and k == spec.n:
        if index != 0:
            raise ConfigError("b_n = 1")
        V = oracle_frame(spec, p)
        top = lift_matrix(V, spec.n)[:, 0]
        return KVector(d, spec.n, top / spec.volume)
    raise ConfigError(f"no harmonic-form oracle for kind {spec.kind!r}, k={k}")


@dataclass
class SimplicialChain:
    """Formal sum of oriented q-simplices with real coefficients."""

    degree: int
    simplices: list  # [(vertices (q+1) x d array, coeff), ...]
    refinement: int = 0
    name: str = ""

    def to_dict(self):
        return {
            "degree": self.degree,
            "simplices": [
                {"vertices": np.asarray(v).tolist(), "coeff": float(c)}
                for v, c in self.simplices
            ],
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, data):
        simplices = [
            (np.asarray(s["vertices"], dtype=float), float(s["coeff"]))
            for s in data["simplices"]
        ]
        return cls(degree=int(data["degree"]), simplices=simplices,
                   name=data.get("name", ""))


def save_cycles(chains, path):
    with open(path, "w") as fh:
        json.dump([c.to_dict() for c in chains], fh)


def load_cycles(path):
    with open(path) as fh:
        data = json.load(fh)
    return [SimplicialChain.from_dict(c) for c in data]


def _torus_point(spec, angles):
    p = np.zeros(spec.d)
    for i, a in enumerate(angles):
        p[2 * i] = np.cos(a)
        p[2 * i + 1] = np.sin(a)
    return p


def oracle_cycles(spec: ManifoldSpec, q: int, segments: int = 64):
    """Polygonal homology generators in degree q.

    Flat tori get their coordinate loops (q=1) and coordinate 2-tori as grid
    triangulations (q=2); spheres have no cycles in degrees 0 < q < n.
    """
    if spec.kind == "sphere":
        if 0 < q < spec.n:
            return []
        raise ConfigError(f"no cycle oracle for sphere degree q={q}")
    if spec.kind != "flat-torus":
        raise ConfigError(f"no cycle oracle for kind {spec.kind!r}")
    n = spec.n
    if q == 1:
        chains = []
        for i in range(n):
            simplices = []
            for s in range(segments):
                a0 = np.zeros(n)
                a1 = np.zeros(n)
                a0[i] = 2.0 * pi * s / segments
                a1[i] = 2.0 * pi * (s + 1) / segments
                verts = np.stack([_torus_point(spec, a0), _torus_point(spec, a1)])
                simplices.append((verts, 1.0))
            chains.append(SimplicialChain(1, simplices, segments, f"loop-{i}"))
        return chains
    if q == 2:
        chains = []
        for combo in combinations(range(n), 2):
            i, j = combo
            simplices = []
            for a in range(segments):
                for b in range(segments):
                    corners = {}
                    for da, db in ((0, 0), (1, 0), (0, 1), (1, 1)):
                        ang = np.zeros(n)
                        ang[i] = 2.0 * pi * (a + da) / segments
                        ang[j] = 2.0 * pi * (b + db) / segments
                        corners[(da, db)] = _torus_point(spec, ang)
                    v00, v10 = corners[(0, 0)], corners[(1, 0)]
                    v01, v11 = corners[(0, 1)], corners[(1, 1)]
                    simplices.append((np.stack([v00, v10, v11]), 1.0))
                    simplices.append((np.stack([v00, v11, v01]), 1.0))
            chains.append(
                SimplicialChain(2, simplices, segments, f"torus-{i}{j}")
            )
        return chains
    raise ConfigError(f"cycle oracle unsupported for degree q={q}")


# ---------------------------------------------------------------------------
# point-cloud export / ingest


def write_csv(cloud: PointCloud, path):
    np.savetxt(path, cloud.points, delimiter=",", fmt="%.17g")


def read_csv(path) -> np.ndarray:
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    bad = np.where(~np.isfinite(pts).all(axis=1))[0]
    if bad.size:
        raise ConfigError(f"non-finite value in CSV at row {int(bad[0])}")
    return pts


def write_binary(cloud: PointCloud, path):
    header = _BINARY_MAGIC + np.array(
        [cloud.m, cloud.d, cloud.spec.n], dtype="<u8"
    ).tobytes()
    assert len(header) == 32
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(cloud.points, dtype="<f8").tobytes())


def read_binary(path):
    """Returns (points, n). Raises ConfigError on malformed headers."""
    with open(path, "rb") as fh:
        header = fh.read(32)
        if len(header) < 32 or header[:8] != _BINARY_MAGIC:
            raise ConfigError("malformed binary point-cloud header")
        m, d, n = np.frombuffer(header[8:], dtype="<u8")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != m * d:
        raise ConfigError("binary payload size does not match header")
    return data.reshape(int(m), int(d)).copy(), int(n)
