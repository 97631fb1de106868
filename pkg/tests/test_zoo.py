"""Manifold-zoo oracles: defining equations, curvature identities, spectra,
sampling measure correctness, export formats."""

from math import pi, sqrt

import numpy as np
import pytest

from hodgecloud import zoo
from hodgecloud.errors import ConfigError

ALL_SPECS = [
    zoo.sphere(2),
    zoo.sphere(4),
    zoo.flat_torus(2),
    zoo.flat_torus(3),
    zoo.product_sphere(2, 2),
    zoo.cp2(),
]


@pytest.fixture(params=ALL_SPECS, ids=lambda s: f"{s.kind}-n{s.n}")
def spec(request):
    return request.param


def test_sample_on_manifold(spec):
    cloud = zoo.sample(spec, 50, seed=0)
    for p in cloud.points:
        assert zoo.on_manifold_residual(spec, p) < 1e-10


def test_sample_deterministic(spec):
    a = zoo.sample(spec, 20, seed=42).points
    b = zoo.sample(spec, 20, seed=42).points
    np.testing.assert_array_equal(a, b)
    c = zoo.sample(spec, 20, seed=43).points
    assert not np.array_equal(a, c)


def test_single_sphere_sample_has_unit_norm():
    cloud = zoo.sample(zoo.sphere(2), 1, seed=5)
    assert np.linalg.norm(cloud.points[0]) == pytest.approx(1.0)


def test_torus_defining_equations():
    cloud = zoo.sample(zoo.flat_torus(2), 30, seed=1)
    circ = cloud.points.reshape(30, 2, 2)
    np.testing.assert_allclose(np.linalg.norm(circ, axis=2), 1.0, atol=1e-12)


def test_cp2_points_are_rank_one_projections():
    cloud = zoo.sample(zoo.cp2(), 100, seed=2)
    for p in cloud.points:
        P = zoo._vec_to_hermitian(p)
        assert np.abs(P @ P - P).max() < 1e-12
        assert abs(np.trace(P).real - 1.0) < 1e-12
        assert np.abs(P - P.conj().T).max() < 1e-12


class TestProjectionOracle:
    def test_sphere_north_pole(self):
        P = zoo.oracle_projection(zoo.sphere(2), np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(P, np.diag([1.0, 1.0, 0.0]), atol=1e-14)

    def test_torus_frozen_point(self):
        P = zoo.oracle_projection(zoo.flat_torus(2), np.array([1.0, 0, 1, 0]))
        np.testing.assert_allclose(P, np.diag([0.0, 1.0, 0.0, 1.0]), atol=1e-14)

    def test_projector_invariants(self, spec):
        cloud = zoo.sample(spec, 8, seed=3)
        for p in cloud.points:
            P = zoo.oracle_projection(spec, p)
            np.testing.assert_allclose(P, P.T, atol=1e-10)
            np.testing.assert_allclose(P @ P, P, atol=1e-10)
            assert np.trace(P) == pytest.approx(spec.n, abs=1e-10)
            assert np.abs(P @ p_normal(spec, p)).max() < 1e-8

    def test_off_manifold_rejected(self):
        with pytest.raises(ConfigError):
            zoo.oracle_projection(zoo.sphere(2), np.array([0.0, 0.0, 1.5]))


def p_normal(spec, p):
    """A vector guaranteed normal to the tangent space at p."""
    if spec.kind in ("sphere", "product-sphere"):
        out = np.array(p, dtype=float)
        return out
    if spec.kind == "flat-torus":
        return np.array(p, dtype=float)
    P = zoo.oracle_projection(spec, p)
    rng = np.random.default_rng(0)
    v = rng.normal(size=spec.d)
    return v - P @ v


class TestSecondFundamentalOracle:
    def test_unit_sphere_value(self):
        p = np.array([0.0, 0.0, 1.0])
        B = zoo.oracle_second_fundamental(zoo.sphere(2), p)
        np.testing.assert_allclose(B[0, 0], -p, atol=1e-14)
        np.testing.assert_allclose(B[1, 1], -p, atol=1e-14)
        np.testing.assert_allclose(B[0, 1], 0.0, atol=1e-14)

    def test_sphere_operator_norm_vs_reach(self):
        # |B|_op = 1 on the unit sphere, within the reach bound 1/tau = 1
        p = zoo.sample(zoo.sphere(2), 1, seed=9).points[0]
        B = zoo.oracle_second_fundamental(zoo.sphere(2), p)
        V = zoo.oracle_frame(zoo.sphere(2), p)
        Bf = np.einsum("ia,jb,ijk->abk", V, V, B)
        norms = np.linalg.norm(Bf, axis=2)
        assert np.linalg.norm(norms, ord=2) == pytest.approx(1.0, abs=1e-10)

    def test_torus_mixed_term_vanishes(self):
        tor = zoo.flat_torus(2)
        p = zoo.sample(tor, 1, seed=4).points[0]
        V = zoo.oracle_frame(tor, p)
        B = zoo.oracle_second_fundamental(tor, p)
        Bf = np.einsum("ia,jb,ijk->abk", V, V, B)
        assert np.abs(Bf[0, 1]).max() < 1e-12

    def test_symmetric_and_normal_valued(self, spec):
        cloud = zoo.sample(spec, 5, seed=6)
        for p in cloud.points:
            B = zoo.oracle_second_fundamental(spec, p)
            np.testing.assert_allclose(B, B.transpose(1, 0, 2), atol=1e-10)
            P = zoo.oracle_projection(spec, p)
            assert np.abs(np.einsum("ijk,kl->ijl", B, P)).max() < 1e-10


class TestCurvatureOracle:
    def test_unit_sphere_sectional(self):
        sp = zoo.sphere(2)
        p = zoo.sample(sp, 1, seed=7).points[0]
        V = zoo.oracle_frame(sp, p)
        R = zoo.oracle_curvature(sp, p)
        Rf = np.einsum("ai,bj,ck,dl,abcd->ijkl", V, V, V, V, R)
        assert Rf[0, 1, 0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_radius_scaling(self):
        sp = zoo.sphere(2, radius=2.0)
        p = zoo.sample(sp, 1, seed=8).points[0]
        V = zoo.oracle_frame(sp, p)
        Rf = np.einsum("ai,bj,ck,dl,abcd->ijkl", V, V, V, V,
                       zoo.oracle_curvature(sp, p))
        assert Rf[0, 1, 0, 1] == pytest.approx(0.25, abs=1e-12)

    def test_flat_torus_vanishes(self):
        tor = zoo.flat_torus(3)
        p = zoo.sample(tor, 1, seed=9).points[0]
        assert np.abs(zoo.oracle_curvature(tor, p)).max() < 1e-12

    def test_algebraic_symmetries(self, spec):
        p = zoo.sample(spec, 1, seed=10).points[0]
        R = zoo.oracle_curvature(spec, p)
        np.testing.assert_allclose(R, -R.transpose(1, 0, 2, 3), atol=1e-10)
        np.testing.assert_allclose(R, -R.transpose(0, 1, 3, 2), atol=1e-10)
        np.testing.assert_allclose(R, R.transpose(2, 3, 0, 1), atol=1e-10)
        # first Bianchi: R(X,Y,Z,.) + R(Y,Z,X,.) + R(Z,X,Y,.) = 0
        bianchi = R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)
        assert np.abs(bianchi).max() < 1e-10


class TestMeanCurvatureAndWeitzenboeck:
    def test_sphere_mean_curvature(self):
        sp = zoo.sphere(2)
        p = zoo.sample(sp, 1, seed=11).points[0]
        np.testing.assert_allclose(zoo.oracle_mean_curvature(sp, p), -2.0 * p,
                                   atol=1e-12)

    def test_torus_mean_curvature(self):
        tor = zoo.flat_torus(2)
        p = np.array([1.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(zoo.oracle_mean_curvature(tor, p),
                                   [-1.0, 0.0, -1.0, 0.0], atol=1e-12)

    def test_sphere_endomorphism_is_nk_identity(self):
        for n, k in ((2, 1), (4, 1), (4, 2)):
            sp = zoo.sphere(n)
            p = zoo.sample(sp, 1, seed=n).points[0]
            W = zoo.oracle_weitzenboeck(sp, p, k)
            V = zoo.oracle_frame(sp, p)
            from hodgecloud.exterior import lift_matrix

            L = lift_matrix(V, k)
            np.testing.assert_allclose(W, n * k * (L @ L.T), atol=1e-10)

    def test_torus_weitzenboeck_eigenvalues(self):
        tor = zoo.flat_torus(2)
        p = np.array([1.0, 0.0, 1.0, 0.0])
        W = zoo.oracle_weitzenboeck(tor, p, 1)
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(W)),
                                   [0.0, 0.0, 1.0, 1.0], atol=1e-12)


class TestSpectraOracle:
    def test_sphere_scalar(self):
        pairs = zoo.oracle_spectrum(zoo.sphere(2), 0, 16)
        assert pairs[:4] == [(0.0, 1), (2.0, 3), (6.0, 5), (12.0, 7)]

    def test_torus_one_forms(self):
        pairs = zoo.oracle_spectrum(zoo.flat_torus(2), 1, 10)
        assert pairs[0] == (0.0, 2)
        assert pairs[1] == (1.0, 8)

    def test_t3_harmonic_multiplicity(self):
        pairs = zoo.oracle_spectrum(zoo.flat_torus(3), 1, 4)
        assert pairs[0] == (0.0, 3)

    def test_s4_scalar(self):
        pairs = zoo.oracle_spectrum(zoo.sphere(4), 0, 7)
        assert pairs[0] == (0.0, 1)
        assert pairs[1] == (4.0, 5)

    def test_betti_numbers(self):
        assert zoo.betti_number(zoo.flat_torus(2), 1) == 2
        assert zoo.betti_number(zoo.flat_torus(3), 1) == 3
        assert zoo.betti_number(zoo.sphere(2), 1) == 0
        assert zoo.betti_number(zoo.cp2(), 2) == 1
        assert zoo.betti_number(zoo.product_sphere(2, 2), 2) == 2


class TestHarmonicFormsOracle:
    def test_torus_one_form_value(self):
        tor = zoo.flat_torus(2)
        theta = 0.3
        p = np.array([np.cos(theta), np.sin(theta), 1.0, 0.0])
        form = zoo.oracle_harmonic_form(tor, 1, 0, p)
        expected = np.array([-np.sin(theta), np.cos(theta), 0.0, 0.0]) / (2 * pi)
        np.testing.assert_allclose(form.coeffs, expected, atol=1e-12)

    def test_constant_normalization(self):
        sp = zoo.sphere(2)
        p = np.array([0.0, 0.0, 1.0])
        form = zoo.oracle_harmonic_form(sp, 0, 0, p)
        assert form.coeffs[0] == pytest.approx(1.0 / sqrt(4 * pi))


class TestCyclesOracle:
    def test_sphere_has_no_one_cycles(self):
        assert zoo.oracle_cycles(zoo.sphere(2), 1) == []

    def test_torus_loops(self):
        loops = zoo.oracle_cycles(zoo.flat_torus(2), 1)
        assert len(loops) == 2
        assert all(len(c.simplices) == 64 for c in loops)
        # closed polygonal loops: endpoints match start of the next segment
        verts = np.array([s[0] for s in loops[0].simplices])
        np.testing.assert_allclose(verts[1:, 0], verts[:-1, 1], atol=1e-12)
        np.testing.assert_allclose(verts[0, 0], verts[-1, 1], atol=1e-12)

    def test_torus_fundamental_class(self):
        chains = zoo.oracle_cycles(zoo.flat_torus(2), 2, segments=8)
        assert len(chains) == 1
        assert len(chains[0].simplices) == 2 * 8 * 8

    def test_cycle_json_roundtrip(self, tmp_path):
        loops = zoo.oracle_cycles(zoo.flat_torus(2), 1)
        path = tmp_path / "cycles.json"
        zoo.save_cycles(loops, path)
        back = zoo.load_cycles(path)
        assert len(back) == 2
        np.testing.assert_allclose(back[0].simplices[0][0],
                                   loops[0].simplices[0][0])


class TestSamplingMeasure:
    """Empirical moments vs closed-form integrals, 4 standard errors."""

    M = 100_000

    def check(self, samples, exact, bound_scale=1.0):
        mean = samples.mean()
        se = samples.std(ddof=1) / sqrt(len(samples))
        assert abs(mean - exact) < 4.0 * se + 1e-12 * bound_scale

    def test_sphere_second_moment(self):
        pts = zoo.sample(zoo.sphere(2), self.M, seed=1).points
        self.check(pts[:, 0] ** 2, 1.0 / 3.0)
        self.check(pts[:, 0] * pts[:, 1], 0.0)

    def test_torus_moments(self):
        pts = zoo.sample(zoo.flat_torus(2), self.M, seed=2).points
        self.check(pts[:, 0] ** 2, 0.5)
        self.check(pts[:, 0], 0.0)
        self.check(pts[:, 0] * pts[:, 2], 0.0)

    def test_cp2_moments(self):
        pts = zoo.sample(zoo.cp2(), self.M, seed=3).points
        # E[P_11] = 1/3; E[P_11^2] = 1/6; E[(sqrt2 Re P_12)^2] = 1/12
        self.check(pts[:, 0], 1.0 / 3.0)
        self.check(pts[:, 0] ** 2, 1.0 / 6.0)
        self.check(pts[:, 3] ** 2, 1.0 / 12.0)


class TestExport:
    def test_csv_roundtrip(self, tmp_path):
        cloud = zoo.sample(zoo.sphere(2), 25, seed=5)
        path = tmp_path / "cloud.csv"
        zoo.write_csv(cloud, path)
        pts = zoo.read_csv(path)
        np.testing.assert_array_equal(pts, cloud.points)  # 17 sig digits

    def test_csv_rejects_nanerror_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.1,0.2\nnan,0.3\n")
        with pytest.raises(ConfigError, match="row 1"):
            zoo.read_csv(path)

    def test_binary_roundtrip(self, tmp_path):
        cloud = zoo.sample(zoo.flat_torus(2), 17, seed=6)
        path = tmp_path / "cloud.bin"
        zoo.write_binary(cloud, path)
        pts, n = zoo.read_binary(path)
        assert n == 2
        np.testing.assert_array_equal(pts, cloud.points)

    def test_binary_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMAGIC" + b"\0" * 24)
        with pytest.raises(ConfigError, match="header"):
            zoo.read_binary(path)


def test_volumes():
    assert zoo.sphere(2).volume == pytest.approx(4 * pi)
    assert zoo.sphere(4).volume == pytest.approx(8 * pi**2 / 3)
    assert zoo.flat_torus(2).volume == pytest.approx(4 * pi**2)
    assert zoo.cp2().volume == pytest.approx(2 * pi**2)


def test_spec_validation():
    with pytest.raises(ConfigError):
        zoo.ManifoldSpec("klein", 2, 4)
    with pytest.raises(ConfigError):
        zoo.ManifoldSpec("sphere", 1, 2)
