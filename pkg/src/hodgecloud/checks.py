"""Named runnable checks: one per acceptance criterion.

Each check returns a dict {name, passed, elapsed_s, budget_s, details} and is
exposed through the CLI ``check --preset <name>`` verb as well as the
acceptance test suite. Tolerances are pinned here, not recalibrated at run
time.
"""

from __future__ import annotations

import time
import warnings
from math import comb, pi, sqrt

import numpy as np
from scipy.integrate import quad as _quad
from scipy.linalg import orthogonal_procrustes
from scipy.stats import linregress

from hodgecloud import curvature, hodge, ring, tangent, zoo
from hodgecloud.errors import (
    DegenerateSpectrumError,
    GaugeFailureError,
    IsolatedPointError,
    ScalingWarning,
)
from hodgecloud.exterior import (
    KVector,
    inner,
    interior,
    lift_map,
    lift_matrix,
    wedge,
)

CHECKS = {}


def _register(name, budget_s):
    def wrap(fn):
        fn.check_name = name
        fn.budget_s = budget_s

        def runner(**kwargs):
            start = time.time()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ScalingWarning)
                passed, details = fn(**kwargs)
            elapsed = time.time() - start
            details["within_budget"] = elapsed < budget_s
            return {
                "name": name,
                "passed": bool(passed) and elapsed < budget_s,
                "elapsed_s": round(elapsed, 2),
                "budget_s": budget_s,
                "details": details,
            }

        runner.check_name = name
        runner.budget_s = budget_s
        CHECKS[name] = runner
        return runner

    return wrap


def _ortho(rng, d, n):
    return np.linalg.qr(rng.normal(size=(d, n)))[0][:, :n]


@_register("exterior-suite", budget_s=5.0)
def check_exterior(**_):
    """Adjointness, functoriality, projector idempotence at stated tolerances."""
    rng = np.random.default_rng(0)
    worst_adj = 0.0
    for _ in range(200):
        d, k = 6, 3
        v = rng.normal(size=d)
        a = KVector(d, k, rng.normal(size=comb(d, k)))
        b = KVector(d, k - 1, rng.normal(size=comb(d, k - 1)))
        lhs = inner(interior(v, a), b)
        rhs = inner(a, wedge(KVector.from_vector(v), b))
        worst_adj = max(worst_adj, abs(lhs - rhs) / max(1.0, abs(lhs)))
    worst_fun = 0.0
    worst_proj = 0.0
    worst_trace = 0.0
    for _ in range(50):
        d, n, k = 6, 3, 2
        A = _ortho(rng, d, n)
        B = _ortho(rng, n, n)
        lhs = lift_map(A @ B, k).matrix
        rhs = lift_map(A, k).matrix @ lift_matrix(B, k)
        worst_fun = max(worst_fun, np.abs(lhs - rhs).max())
        L = lift_map(A, k).matrix
        P = L @ L.T
        worst_proj = max(worst_proj, np.abs(P @ P - P).max(),
                         np.abs(P - P.T).max())
        worst_trace = max(worst_trace, abs(np.trace(P) - comb(n, k)))
    passed = (worst_adj <= 1e-12 and worst_fun <= 1e-10
              and worst_proj <= 1e-10 and worst_trace <= 1e-10)
    return passed, {
        "adjointness": worst_adj, "functoriality": worst_fun,
        "idempotence": worst_proj, "trace": worst_trace,
    }


@_register("tangent-consistency", budget_s=120.0)
def check_tangent_consistency(seed=0, **_):
    """S^2 projector sup-error: monotone along the sweep, log-log slope vs t
    in [0.6, 1.4] (rate <= C t)."""
    sp = zoo.sphere(2)
    sups, ts = [], []
    for m in (1000, 4000, 16000):
        cloud = zoo.sample(sp, m, seed)
        t = m**-0.25
        cfg = tangent.KernelConfig(t=t, delta=tangent.default_delta(cloud, t),
                                   n=2, vol=sp.volume)
        field = tangent.projection_field(cloud, cfg)
        P = field.projectors()
        Po = np.stack([zoo.oracle_projection(sp, p) for p in cloud.points])
        sups.append(float(np.linalg.norm(P - Po, ord=2, axis=(1, 2)).max()))
        ts.append(t)
    slope = float(np.polyfit(np.log(ts), np.log(sups), 1)[0])
    monotone = sups[0] > sups[1] > sups[2]
    return (monotone and 0.6 <= slope <= 1.4), {
        "sup_errors": sups, "bandwidths": ts, "slope": slope,
        "monotone": monotone,
    }


@_register("self-adjointness", budget_s=60.0)
def check_self_adjointness(seed=0, **_):
    """Assembled Hodge operator symmetric to 1e-10 relative; matrix-free and
    assembled evaluations agree to 1e-12, for k in {0, 1} on a 500-point T2."""
    tor = zoo.flat_torus(2)
    cloud = zoo.sample(tor, 500, seed)
    cfg = tangent.KernelConfig(t=0.05, delta=1.5, n=2, vol=tor.volume)
    field = tangent.projection_field(cloud, cfg)
    rng = np.random.default_rng(1)
    details = {}
    ok = True
    for k in (0, 1):
        h = hodge.HodgeOperatorHandle(cloud, field, k=k, config=cfg)
        A = h.assemble()
        asym = abs(A - A.T).max()
        scale = abs(A).max()
        x = rng.normal(size=(cloud.m, h.N))
        mf = h.apply_values(h.project_values(x))
        asm = (A @ h.project_values(x).ravel()).reshape(cloud.m, h.N)
        # the assembled operator's action agrees on tangential inputs
        agree = np.abs(mf - asm).max() / max(1.0, np.abs(mf).max())
        details[f"k{k}_rel_asymmetry"] = float(asym / scale)
        details[f"k{k}_matrixfree_agreement"] = float(agree)
        ok = ok and asym / scale <= 1e-10 and agree <= 1e-12
    return ok, details


@_register("sphere-spectrum", budget_s=180.0)
def check_sphere_spectrum(seed=7, **_):
    """S^2 scalar spectrum: lambda_1 <= 0.05; eigenvalues 2-4 within 15% of 2
    and gap to the next cluster >= 2x."""
    sp = zoo.sphere(2)
    m = 3000
    cloud = zoo.sample(sp, m, seed)
    t = m**-0.25
    cfg = tangent.KernelConfig(t=t, delta=5.0, n=2, vol=sp.volume)
    field = tangent.projection_field(cloud, cfg)
    h = hodge.HodgeOperatorHandle(cloud, field, k=0, config=cfg)
    spec = h.eigensolve(6)
    lam = spec.eigenvalues
    cluster = lam[1:4]
    ok = (
        abs(lam[0]) <= 0.05
        and np.all(np.abs(cluster - 2.0) <= 0.3)
        and lam[4] >= 2.0 * lam[3]
    )
    return bool(ok), {
        "eigenvalues": [float(v) for v in lam],
        "lambda1": float(lam[0]),
        "cluster_rel_err": float(np.abs(cluster - 2.0).max() / 2.0),
        "next_gap_factor": float(lam[4] / lam[3]),
    }


@_register("t3-betti", budget_s=600.0)
def check_t3_betti(seed=11, **_):
    """Flat T^3, k=1, m=10^4: exactly 3 sub-gap eigenvalues, ratio >= 10."""
    t3 = zoo.flat_torus(3)
    cloud = zoo.sample(t3, 10_000, seed)
    t = 0.05
    cfg = tangent.KernelConfig(t=t, delta=4 * sqrt(t), n=3, vol=t3.volume)
    field = tangent.projection_field(cloud, cfg)
    h = hodge.HodgeOperatorHandle(cloud, field, k=1, config=cfg)
    spec = h.eigensolve(9, tol=1e-7)
    b1 = ring.betti(spec)
    ok = b1 == 3 and spec.gap_ratio >= 10.0
    return bool(ok), {
        "eigenvalues": [float(v) for v in spec.eigenvalues],
        "betti_1": int(b1),
        "gap_ratio": float(spec.gap_ratio),
    }


def _sphere_curvature_errors(cloud, field, tB, n_eval):
    cfgB = tangent.KernelConfig(t=tB, delta=5.0, n=2, vol=4 * pi)
    bf = curvature.SecondFundamentalField(field, cfgB, symmetrized=True)
    step = max(1, cloud.m // n_eval)
    errs = [
        abs(curvature.riemann_frame(bf.frame_tensor(j))[0, 1, 0, 1] - 1.0)
        for j in range(0, cloud.m, step)
    ]
    return float(np.mean(errs))


@_register("curvature-recovery", budget_s=240.0)
def check_curvature(seed=1, **_):
    """Sectional curvature on S^2 within 0.2 on average, flat T^2 within 0.1;
    sphere errors track the sqrt-t rate across a halving sweep."""
    sp = zoo.sphere(2)
    m = 10_000
    cloud = zoo.sample(sp, m, seed)
    cfgP = tangent.KernelConfig(t=0.04, delta=5.0, n=2, vol=sp.volume)
    field = tangent.projection_field(cloud, cfgP)
    sweep_t = (0.024, 0.012, 0.006)
    sweep_err = [_sphere_curvature_errors(cloud, field, tB, 400)
                 for tB in sweep_t]
    ratios = [sweep_err[i] / sweep_err[i + 1] for i in range(2)]
    ratio_ok = all(sqrt(2) * 0.5 <= r <= sqrt(2) * 1.5 for r in ratios)
    sphere_mean = sweep_err[-1]

    tor = zoo.flat_torus(2)
    cloud_t = zoo.sample(tor, m, seed)
    cfgPt = tangent.KernelConfig(t=0.04, delta=1.5, n=2, vol=tor.volume)
    field_t = tangent.projection_field(cloud_t, cfgPt)
    cfgBt = tangent.KernelConfig(t=0.05, delta=2.0, n=2, vol=tor.volume)
    bft = curvature.SecondFundamentalField(field_t, cfgBt, symmetrized=True)
    flat_errs = [
        abs(curvature.riemann_frame(bft.frame_tensor(j))[0, 1, 0, 1])
        for j in range(0, m, 25)
    ]
    flat_mean = float(np.mean(flat_errs))
    ok = sphere_mean <= 0.2 and flat_mean <= 0.1 and ratio_ok
    return bool(ok), {
        "sphere_mean_error": sphere_mean,
        "flat_mean_error": flat_mean,
        "sweep_t": list(sweep_t),
        "sweep_errors": sweep_err,
        "halving_ratios": [float(r) for r in ratios],
    }


@_register("weitzenboeck", budget_s=240.0)
def check_weitzenboeck(seed=1, **_):
    """Mean-curvature contraction vs the oracle 2 Lambda^1 Pi on unit S^2:
    sup over samples <= 0.3 at m = 10^4."""
    sp = zoo.sphere(2)
    m = 10_000
    cloud = zoo.sample(sp, m, seed)
    cfgP = tangent.KernelConfig(t=0.04, delta=5.0, n=2, vol=sp.volume)
    field = tangent.projection_field(cloud, cfgP)
    cfgB = tangent.KernelConfig(t=0.009, delta=5.0, n=2, vol=sp.volume)
    bf = curvature.SecondFundamentalField(field, cfgB, symmetrized=True)
    errs = np.empty(m)
    for j in range(m):
        W = curvature.weitzenboeck(bf.frame_tensor(j), field.frames[j], 1)
        errs[j] = np.linalg.norm(W - 2.0 * field.projector(j), ord=2)
    sup = float(errs.max())
    return sup <= 0.3, {
        "sup_error": sup,
        "mean_error": float(errs.mean()),
        "q99_error": float(np.quantile(errs, 0.99)),
    }


@_register("nystrom-fidelity", budget_s=180.0)
def check_nystrom(seed=7, holdout_seed=99, **_):
    """Nystrom extension of the first nonzero S^2 eigentriple at 200 held-out
    points vs the oracle degree-one harmonics, after optimal rotation."""
    sp = zoo.sphere(2)
    m = 3000
    cloud = zoo.sample(sp, m, seed)
    t = m**-0.25
    cfg = tangent.KernelConfig(t=t, delta=5.0, n=2, vol=sp.volume)
    field = tangent.projection_field(cloud, cfg)
    h = hodge.HodgeOperatorHandle(cloud, field, k=0, config=cfg)
    spec = h.eigensolve(4)
    held = zoo.sample(sp, 200, holdout_seed).points
    comps = np.stack([spec.compressed_vector(i) for i in (1, 2, 3)])
    vals = h.nystrom_extend_many(comps, spec.eigenvalues[1:4], held)[:, :, 0]
    oracle = sqrt(3.0 / (4 * pi)) * held
    Q, _ = orthogonal_procrustes(vals, oracle)
    err = float(np.abs(vals @ Q - oracle).max())
    tol = 0.2 * sqrt(3.0 / (4 * pi))
    # at-sample reproduction of the discrete eigenvector
    v1 = spec.eigenvector(1).values[:, 0]
    at_samples = np.array([
        h.nystrom_extend(comps[0], spec.eigenvalues[1], cloud.points[j]).coeffs[0]
        for j in range(0, m, 101)
    ])
    rel = float(np.abs(at_samples - v1[::101]).max() / np.abs(v1).max())
    return err <= tol and rel <= 1e-3 * 10, {
        "max_error": err, "tolerance": tol,
        "at_sample_rel_error": rel,
    }


@_register("torus-ring", budget_s=480.0)
def check_torus_ring(seed=13, **_):
    """T^2 ring recovery: gauge-fixed period matrix = I, Gram-normalized cup
    coefficient 1 +- 0.1, raw constant 1/(4 pi^2) +- 10%."""
    tor = zoo.flat_torus(2)
    m = 10_000
    cloud = zoo.sample(tor, m, seed)
    t = 0.025
    cfg = tangent.KernelConfig(t=t, delta=4 * sqrt(t), n=2, vol=tor.volume)
    field = tangent.projection_field(cloud, cfg)
    h1 = hodge.HodgeOperatorHandle(cloud, field, k=1, config=cfg)
    s1 = h1.eigensolve(8, tol=1e-7)
    h2 = hodge.HodgeOperatorHandle(cloud, field, k=2, config=cfg,
                                   graph=h1.graph)
    s2 = h2.eigensolve(5, tol=1e-7)
    b1, b2 = ring.betti(s1), ring.betti(s2)
    if b1 != 2 or b2 != 1:
        return False, {"betti_1": b1, "betti_2": b2}
    basis1 = ring.HarmonicBasis.from_spectral(s1)
    basis2 = ring.HarmonicBasis.from_spectral(s2)
    loops = zoo.oracle_cycles(tor, 1)
    P1 = ring.period_matrix(basis1, loops, quad_order=1)
    g1 = ring.gauge_fix(basis1, P1)
    chain2 = zoo.oracle_cycles(tor, 2, segments=48)[0]
    P2 = ring.period_matrix(basis2, [chain2], quad_order=0)
    g2 = ring.gauge_fix(basis2, P2)
    P1_fixed = ring.period_matrix(g1, loops, quad_order=1).matrix
    period_err = float(np.abs(P1_fixed - np.eye(2)).max())
    sc = ring.structure_constants(g1, g1, g2, cloud)
    raw = float(sc.raw[0, 1, 0])
    normalized = float(sc.normalized[0, 1, 0])
    target = 1.0 / (4 * pi**2)
    ok = (
        period_err <= 1e-2
        and abs(raw - target) <= 0.1 * target
        and abs(normalized - 1.0) <= 0.1
    )
    return bool(ok), {
        "betti_1": b1, "betti_2": b2,
        "period_error": period_err,
        "raw_constant": raw, "raw_target": target,
        "normalized": normalized,
        "eigenvalues_k1": [float(v) for v in s1.eigenvalues],
        "eigenvalues_k2": [float(v) for v in s2.eigenvalues],
    }


@_register("pontryagin-s4", budget_s=900.0)
def check_pontryagin_s4(seed=1, **_):
    """Round S^4: |integral of p1| <= 0.3 at m = 2 * 10^4."""
    s4 = zoo.s4()
    m = 20_000
    cloud = zoo.sample(s4, m, seed)
    cfgP = tangent.KernelConfig(t=0.05, delta=1.2, n=4, vol=s4.volume)
    field = tangent.projection_field(cloud, cfgP)
    signs = curvature.orient_frames(field, s4)
    cfgB = tangent.KernelConfig(t=0.08, delta=5.0, n=4, vol=s4.volume)
    bf = curvature.SecondFundamentalField(field, cfgB, symmetrized=True)
    cfgV = tangent.KernelConfig(t=0.05, delta=5.0, n=4, vol=s4.volume)
    volhat = tangent.estimate_volume(cloud, cfgV)
    rng = np.random.default_rng(0)
    eval_idx = rng.choice(m, size=2000, replace=False)
    p1_vals = np.empty((eval_idx.size, comb(5, 4)))
    tops = np.empty((eval_idx.size, comb(5, 4)))
    for row, j in enumerate(eval_idx):
        Bf = bf.frame_tensor(int(j))
        p1_vals[row] = curvature.pontryagin_form(Bf, field.frames[j])
        tops[row] = lift_matrix(field.frames[j], 4)[:, 0]
    total = ring.pontryagin_number_fundamental(
        p1_vals, tops, signs[eval_idx], volhat
    )
    return abs(total) <= 0.3, {
        "integral": float(total), "vol_estimate": float(volhat),
        "eval_points": int(eval_idx.size),
    }


@_register("pontryagin-cp2", budget_s=1800.0)
def check_pontryagin_cp2(seed=0, **_):
    """CP^2 slow preset: integral of p1 = 3 +- 0.75.

    The Gauss-equation curvature estimator attenuates like exp(-c t) per
    factor on strongly curved manifolds, so the preset measures the
    fundamental-class integral on a shrinking bandwidth grid and reports the
    log-linear extrapolation to t = 0.
    """
    cp = zoo.cp2()
    m = 30_000
    cloud = zoo.sample(cp, m, seed)
    cfgP = tangent.KernelConfig(t=0.02, delta=0.8, n=4, vol=cp.volume)
    field = tangent.projection_field(cloud, cfgP)
    signs = curvature.orient_frames(field, cp)
    rng = np.random.default_rng(0)
    eval_idx = rng.choice(m, size=2500, replace=False)
    tops = np.empty((eval_idx.size, comb(9, 4)))
    for row, j in enumerate(eval_idx):
        tops[row] = lift_matrix(field.frames[j], 4)[:, 0]
    grid = (0.030, 0.040, 0.055)
    estimates = []
    for tB in grid:
        cfgB = tangent.KernelConfig(t=tB, delta=4 * sqrt(tB), n=4,
                                    vol=cp.volume)
        bf = curvature.SecondFundamentalField(field, cfgB, symmetrized=True)
        p1_vals = np.empty((eval_idx.size, comb(9, 4)))
        for row, j in enumerate(eval_idx):
            Bf = bf.frame_tensor(int(j))
            p1_vals[row] = curvature.pontryagin_form(Bf, field.frames[j])
        est = ring.pontryagin_number_fundamental(
            p1_vals, tops, signs[eval_idx], cp.volume
        )
        estimates.append(float(est))
    fit = linregress(grid, np.log(np.maximum(estimates, 1e-12)))
    extrapolated = float(np.exp(fit.intercept))
    return abs(extrapolated - 3.0) <= 0.75, {
        "bandwidth_grid": list(grid),
        "raw_estimates": estimates,
        "extrapolated": extrapolated,
        "fit_slope": float(fit.slope),
    }


@_register("density-diagnostic", budget_s=300.0)
def check_density(seed=3, **_):
    """Sup deviation of the empirical kernel density on S^2 scales like
    sqrt(log m / (m t^{n/2})) within +-0.5 in log-log slope."""
    sp = zoo.sphere(2)
    devs, rates = [], []
    for m in (1000, 4000, 16000):
        cloud = zoo.sample(sp, m, seed)
        t = m**-0.25
        delta = 4 * sqrt(t)
        cfg = tangent.KernelConfig(t=t, delta=delta, n=2, vol=sp.volume)

        def integrand(theta, t=t, delta=delta):
            chord2 = 2.0 - 2.0 * np.cos(theta)
            phi = (4 * pi * t) ** -1.0 * np.exp(-chord2 / (4 * t))
            chi = tangent.cutoff_profile(np.sqrt(chord2) / delta)
            return phi * chi * 2 * pi * np.sin(theta) / (4 * pi)

        expected, _ = _quad(integrand, 0.0, pi, limit=200)
        X = cloud.points
        sup_dev = 0.0
        chunk = 512
        for start in range(0, m, chunk):
            P = X[start:start + chunk]
            diff = X[None, :, :] - P[:, None, :]
            r2 = np.einsum("pja,pja->pj", diff, diff)
            w = (4 * pi * t) ** -1.0 * np.exp(-r2 / (4 * t))
            w *= tangent.cutoff_profile(np.sqrt(r2) / delta)
            sup_dev = max(sup_dev, float(np.abs(w.mean(axis=1) - expected).max()))
        devs.append(sup_dev)
        rates.append(sqrt(np.log(m) / (m * t)))
    fit = linregress(np.log(rates), np.log(devs))
    slope = float(fit.slope)
    return 0.5 <= slope <= 1.5, {
        "sup_deviations": devs, "theoretical_rates": rates, "slope": slope,
    }


@_register("degenerate-suite", budget_s=60.0)
def check_degenerate(**_):
    """Planted degeneracies raise their designated errors, never a silent
    wrong answer."""
    sp = zoo.sphere(2)
    outcomes = {}

    # duplicate points -> degenerate covariance spectrum
    pts = np.repeat(zoo.sample(sp, 4, 0).points, 25, axis=0)
    cloud = zoo.PointCloud(pts, sp, 0)
    cfg = tangent.KernelConfig(t=1e-4, delta=0.05, n=2, vol=sp.volume)
    try:
        tangent.projection_field(cloud, cfg)
        outcomes["duplicates"] = "missed"
    except DegenerateSpectrumError as exc:
        outcomes["duplicates"] = f"DegenerateSpectrumError(index={exc.index})"

    # isolated point -> isolated-point error from the curvature estimator
    base = zoo.sample(sp, 400, 1)
    cfg2 = tangent.KernelConfig(t=0.01, delta=0.5, n=2, vol=sp.volume)
    field = tangent.projection_field(base, cfg2)
    bf = curvature.SecondFundamentalField(field, cfg2, symmetrized=True)
    try:
        bf.frame_tensor_at(np.array([0.0, 0.0, 50.0]),
                           V=np.eye(3)[:, :2])
        outcomes["isolated_query"] = "missed"
    except IsolatedPointError:
        outcomes["isolated_query"] = "IsolatedPointError"

    # delta below the minimum spacing -> only self-loops in the graph
    tiny = zoo.sample(sp, 50, 2)
    cfg3 = tangent.KernelConfig(t=1e-8, delta=1e-3, n=2, vol=sp.volume)
    degenerate_field = tangent.ProjectionField(
        tiny, cfg3, np.zeros((50, 3, 2)), np.zeros(50)
    )
    try:
        hodge.HodgeOperatorHandle(tiny, degenerate_field, k=0, config=cfg3)
        outcomes["delta_below_spacing"] = "missed"
    except IsolatedPointError as exc:
        outcomes["delta_below_spacing"] = f"IsolatedPointError(index={exc.index})"

    # eigengap failure at a planted planar degeneracy
    try:
        tangent.tangent_frame(np.eye(3), 2)
        outcomes["eigengap"] = "missed"
    except DegenerateSpectrumError:
        outcomes["eigengap"] = "DegenerateSpectrumError"

    # empty cycle list -> gauge failure
    try:
        ring.period_matrix(ring.OracleFormBasis(zoo.sphere(2), 0), [])
        outcomes["empty_cycles"] = "missed"
    except GaugeFailureError:
        outcomes["empty_cycles"] = "GaugeFailureError"

    passed = all(not v.startswith("missed") for v in outcomes.values())
    return passed, outcomes


ACCEPTANCE_ORDER = [
    "exterior-suite",
    "tangent-consistency",
    "self-adjointness",
    "sphere-spectrum",
    "t3-betti",
    "curvature-recovery",
    "weitzenboeck",
    "nystrom-fidelity",
    "torus-ring",
    "pontryagin-s4",
    "pontryagin-cp2",
    "density-diagnostic",
    "degenerate-suite",
]


def run_check(name, **kwargs):
    if name not in CHECKS:
        raise KeyError(f"unknown check {name!r}; available: {sorted(CHECKS)}")
    return CHECKS[name](**kwargs)
