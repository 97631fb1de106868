"""Cohomology-ring tests: chain integration, period matrices, gauge fixing,
structure constants, Pontryagin numbers."""

from math import pi

import numpy as np
import pytest

from hodgecloud import ring, tangent, zoo
from hodgecloud.errors import ConfigError, GaugeFailureError
from hodgecloud.exterior import KVector


def const_form(d, k, coeffs):
    arr = np.asarray(coeffs, dtype=float)

    def evaluate(x):
        return KVector(d, k, arr.copy())

    return evaluate


class TestIntegrateChain:
    def test_dx_over_unit_segment(self):
        seg = zoo.SimplicialChain(
            1, [(np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0)], name="seg"
        )
        val = ring.integrate_chain(const_form(2, 1, [1.0, 0.0]), seg)
        assert val == pytest.approx(1.0)

    def test_exact_for_affine_any_refinement(self):
        seg = zoo.SimplicialChain(
            1, [(np.array([[0.0, 0.0], [1.0, 2.0]]), 1.0)], name="seg"
        )
        for order in (0, 1, 3):
            val = ring.integrate_chain(const_form(2, 1, [1.0, 1.0]), seg,
                                       quad_order=order)
            assert val == pytest.approx(3.0)

    def test_opposite_orientation_cancels(self):
        tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        flipped = tri[[1, 0, 2]]
        chain = zoo.SimplicialChain(2, [(tri, 1.0), (flipped, 1.0)], name="pair")
        val = ring.integrate_chain(const_form(2, 2, [3.0]), chain)
        assert val == pytest.approx(0.0, abs=1e-14)

    def test_oracle_loop_period(self):
        # the inscribed 64-gon carries exactly (32/pi) sin(pi/32) of the
        # period: a 1.61e-3 chord deficit on top of exact quadrature
        tor = zoo.flat_torus(2)
        loop = zoo.oracle_cycles(tor, 1)[0]
        form = lambda x: zoo.oracle_harmonic_form(tor, 1, 0, x)
        val = ring.integrate_chain(form, loop, quad_order=2)
        assert val == pytest.approx(32.0 * np.sin(pi / 32.0) / pi, abs=1e-12)
        assert abs(val - 1.0) < 2e-3

    def test_degree_mismatch(self):
        seg = zoo.SimplicialChain(
            1, [(np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0)], name="seg"
        )
        with pytest.raises(ConfigError):
            ring.integrate_chain(const_form(2, 2, [1.0]), seg)

    def test_cone_refinement_preserves_chain(self):
        tri = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
        chain = zoo.SimplicialChain(2, [(tri, 1.0)], name="tri")
        refined = ring.refine_chain(chain, 2)
        assert len(refined.simplices) == 9
        total = sum(ring.simplex_kvector(v) * c for v, c in refined.simplices)
        np.testing.assert_allclose(total, ring.simplex_kvector(tri), atol=1e-13)


class TestPeriodMatrix:
    def test_oracle_duality(self):
        tor = zoo.flat_torus(2)
        basis = ring.OracleFormBasis(tor, 1)
        loops = zoo.oracle_cycles(tor, 1)
        P = ring.period_matrix(basis, loops)
        np.testing.assert_allclose(P.matrix, np.eye(2), atol=2e-3)

    def test_linear_in_forms(self):
        tor = zoo.flat_torus(2)
        basis = ring.OracleFormBasis(tor, 1, mix=np.diag([2.0, 1.0]))
        loops = zoo.oracle_cycles(tor, 1)
        P = ring.period_matrix(basis, loops)
        assert P.matrix[0, 0] == pytest.approx(2.0 * 0.9983941, abs=1e-3)

    def test_count_mismatch(self):
        tor = zoo.flat_torus(2)
        basis = ring.OracleFormBasis(tor, 1)
        with pytest.raises(GaugeFailureError, match="square"):
            ring.period_matrix(basis, zoo.oracle_cycles(tor, 1)[:1])

    def test_empty_cycles(self):
        with pytest.raises(GaugeFailureError):
            ring.period_matrix(ring.OracleFormBasis(zoo.sphere(2), 0), [])

    def test_singular_matrix_rejected(self):
        tor = zoo.flat_torus(2)
        # both basis elements equal -> rank-1 period matrix
        basis = ring.OracleFormBasis(tor, 1, indices=[0, 0])
        with pytest.raises(GaugeFailureError, match="condition"):
            ring.period_matrix(basis, zoo.oracle_cycles(tor, 1))


class TestGaugeFix:
    def test_already_dual_unchanged(self):
        tor = zoo.flat_torus(2)
        basis = ring.OracleFormBasis(tor, 1)
        loops = zoo.oracle_cycles(tor, 1)
        P = ring.period_matrix(basis, loops)
        fixed = ring.gauge_fix(basis, P)
        np.testing.assert_allclose(fixed.mix, np.eye(2), atol=3e-3)

    def test_random_mixing_restored(self):
        tor = zoo.flat_torus(2)
        rng = np.random.default_rng(5)
        Q = np.linalg.qr(rng.normal(size=(2, 2)))[0]
        basis = ring.OracleFormBasis(tor, 1, mix=Q)
        loops = zoo.oracle_cycles(tor, 1)
        P = ring.period_matrix(basis, loops)
        fixed = ring.gauge_fix(basis, P)
        P2 = ring.period_matrix(fixed, loops)
        np.testing.assert_allclose(P2.matrix, np.eye(2), atol=1e-12)

    def test_idempotent(self):
        tor = zoo.flat_torus(2)
        basis = ring.OracleFormBasis(tor, 1, mix=np.array([[1.0, 0.3],
                                                           [-0.2, 0.9]]))
        loops = zoo.oracle_cycles(tor, 1)
        fixed1 = ring.gauge_fix(basis, ring.period_matrix(basis, loops))
        fixed2 = ring.gauge_fix(fixed1, ring.period_matrix(fixed1, loops))
        np.testing.assert_allclose(fixed1.mix, fixed2.mix, atol=1e-10)

    def test_stokes_contractible_loop(self):
        # closed gauge-fixed 1-form integrates to ~0 over a contractible loop
        tor = zoo.flat_torus(2)
        basis = ring.OracleFormBasis(tor, 1)
        s = np.linspace(0.0, 2 * pi, 33)
        angles = np.stack([0.5 + 0.3 * np.cos(s), 0.5 + 0.3 * np.sin(s)], axis=1)
        pts = np.stack([zoo._torus_point(tor, a) for a in angles])
        simplices = [(np.stack([pts[i], pts[i + 1]]), 1.0) for i in range(32)]
        loop = zoo.SimplicialChain(1, simplices, name="contractible")
        vals = ring.integrate_basis(basis, loop, quad_order=2)
        assert np.abs(vals).max() <= 1e-2


class TestStructureConstants:
    def test_flat_torus_exact(self):
        tor = zoo.flat_torus(2)
        cloud = zoo.sample(tor, 3000, 0)
        b1 = ring.OracleFormBasis(tor, 1)
        b2 = ring.OracleFormBasis(tor, 2)
        sc = ring.structure_constants(b1, b1, b2, cloud)
        target = 1.0 / (4 * pi**2)
        assert sc.raw[0, 1, 0] == pytest.approx(target, rel=1e-10)
        assert sc.raw[1, 0, 0] == pytest.approx(-target, rel=1e-10)
        assert sc.normalized[0, 1, 0] == pytest.approx(1.0, rel=1e-10)

    def test_antisymmetry_in_one_forms(self):
        tor = zoo.flat_torus(2)
        cloud = zoo.sample(tor, 1000, 1)
        b1 = ring.OracleFormBasis(tor, 1)
        b2 = ring.OracleFormBasis(tor, 2)
        sc = ring.structure_constants(b1, b1, b2, cloud)
        np.testing.assert_allclose(sc.raw[0, 1], -sc.raw[1, 0], atol=1e-14)

    def test_degree_overflow(self):
        tor = zoo.flat_torus(2)
        cloud = zoo.sample(tor, 100, 2)
        b2 = ring.OracleFormBasis(tor, 2)
        with pytest.raises(ConfigError):
            ring.structure_constants(b2, b2, b2, cloud)

    def test_mixing_invariance(self):
        # orthogonal pre-gauge mixing changes nothing after gauge fixing
        tor = zoo.flat_torus(2)
        cloud = zoo.sample(tor, 2000, 3)
        loops = zoo.oracle_cycles(tor, 1)
        rng = np.random.default_rng(7)
        Q = np.linalg.qr(rng.normal(size=(2, 2)))[0]
        raw_vals = []
        for mix in (np.eye(2), Q):
            basis = ring.OracleFormBasis(tor, 1, mix=mix)
            fixed = ring.gauge_fix(basis, ring.period_matrix(basis, loops))
            b2 = ring.OracleFormBasis(tor, 2)
            sc = ring.structure_constants(fixed, fixed, b2, cloud)
            raw_vals.append(sc.raw[0, 1, 0])
        assert raw_vals[0] == pytest.approx(raw_vals[1], rel=0.05)


class TestPontryaginNumber:
    def test_cp2_oracle_fundamental(self):
        from hodgecloud.exterior import lift_matrix

        cp = zoo.cp2()
        cloud = zoo.sample(cp, 300, 0)
        p1_vals, tops = [], []
        for p in cloud.points:
            V = zoo.oracle_frame(cp, p)
            B = zoo.oracle_second_fundamental(cp, p)
            Bf = np.einsum("ia,jb,ijk->abk", V, V, B)
            from hodgecloud.curvature import pontryagin_form

            p1_vals.append(pontryagin_form(Bf, V))
            tops.append(lift_matrix(V, 4)[:, 0])
        total = ring.pontryagin_number_fundamental(
            np.array(p1_vals), np.array(tops), np.ones(300), cp.volume
        )
        assert total == pytest.approx(3.0, abs=1e-10)

    def test_orientation_reversal_negates(self):
        from hodgecloud.curvature import pontryagin_form
        from hodgecloud.exterior import lift_matrix

        cp = zoo.cp2()
        cloud = zoo.sample(cp, 50, 1)
        p1_vals, tops = [], []
        for p in cloud.points:
            V = zoo.oracle_frame(cp, p)
            Bf = np.einsum("ia,jb,ijk->abk", V, V,
                           zoo.oracle_second_fundamental(cp, p))
            p1_vals.append(pontryagin_form(Bf, V))
            tops.append(lift_matrix(V, 4)[:, 0])
        plus = ring.pontryagin_number_fundamental(
            np.array(p1_vals), np.array(tops), np.ones(50), cp.volume
        )
        minus = ring.pontryagin_number_fundamental(
            np.array(p1_vals), np.array(tops), -np.ones(50), cp.volume
        )
        assert minus == pytest.approx(-plus)

    def test_missing_orientation(self):
        with pytest.raises(ConfigError):
            ring.pontryagin_number_fundamental(
                np.zeros((3, 5)), np.zeros((3, 5)), None, 1.0
            )


class TestHarmonicBasisEmpirical:
    @pytest.fixture(scope="class")
    def torus_run(self):
        from hodgecloud import hodge

        tor = zoo.flat_torus(2)
        cloud = zoo.sample(tor, 2500, 13)
        t = 0.04
        cfg = tangent.KernelConfig(t=t, delta=4 * np.sqrt(t), n=2,
                                   vol=tor.volume)
        field = tangent.projection_field(cloud, cfg)
        h = hodge.HodgeOperatorHandle(cloud, field, k=1, config=cfg)
        spec = h.eigensolve(6, tol=1e-7)
        return tor, cloud, spec

    def test_betti(self, torus_run):
        _, _, spec = torus_run
        assert ring.betti(spec) == 2

    def test_gauge_fixed_periods_identity(self, torus_run):
        tor, cloud, spec = torus_run
        basis = ring.HarmonicBasis.from_spectral(spec)
        loops = zoo.oracle_cycles(tor, 1)
        P = ring.period_matrix(basis, loops, quad_order=1)
        fixed = ring.gauge_fix(basis, P)
        P2 = ring.period_matrix(fixed, loops, quad_order=1)
        np.testing.assert_allclose(P2.matrix, np.eye(2), atol=1e-10)

    def test_gauge_fixed_forms_near_oracle(self, torus_run):
        tor, cloud, spec = torus_run
        basis = ring.HarmonicBasis.from_spectral(spec)
        loops = zoo.oracle_cycles(tor, 1)
        fixed = ring.gauge_fix(basis, ring.period_matrix(basis, loops,
                                                         quad_order=1))
        probes = zoo.sample(tor, 50, 77).points
        vals = fixed.evaluate_at(probes)
        oracle = ring.OracleFormBasis(tor, 1).evaluate_at(probes)
        err = np.abs(vals - oracle).max()
        assert err <= 0.15 * np.abs(oracle).max() + 0.02

    def test_sample_evaluation_fast_path(self, torus_run):
        tor, cloud, spec = torus_run
        basis = ring.HarmonicBasis.from_spectral(spec)
        fast = basis.evaluate_at_samples()
        slow = basis.evaluate_at(cloud.points[:7])
        np.testing.assert_allclose(fast[:7], slow, atol=1e-10)
