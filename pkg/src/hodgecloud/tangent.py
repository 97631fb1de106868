"""Empirical tangent projections from localized covariance.

The local covariance at p is

    Sigma(p) = (1/m) sum_j Phi_t(p, x_j) (x_j - p)(x_j - p)^T chi_delta(p, x_j)

with the extrinsic Gaussian kernel Phi_t(x,y) = (4 pi t)^{-n/2}
exp(-|x-y|^2 / 4t) and a C^2 quintic-smoothstep cutoff chi_delta supported in
the extrinsic delta-ball. The empirical projection is onto the span of the
top n eigenvectors; its eigengap certifies the estimate, and a degenerate gap
is a hard error rather than a silent fallback.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import log, pi, sqrt

import numpy as np
from scipy.spatial import cKDTree

from hodgecloud.errors import (
    ConfigError,
    DegenerateSpectrumError,
    IsolatedPointError,
    ScalingWarning,
)
from hodgecloud.zoo import PointCloud

DEFAULT_GAP_FRACTION = 0.05


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth, cutoff radius, intrinsic dimension and volume of the target.

    ``t`` has units of length^2, ``delta`` of length. The constructor enforces
    2 sqrt(t) <= delta (the envelope optimization domain) and warns when the
    concentration guard t^{n/2+2} >= log(m)/m fails for the paired sample
    size.
    """

    t: float
    delta: float
    n: int
    vol: float
    scaling: str = "explicit"

    def __post_init__(self):
        if self.t <= 0:
            raise ConfigError(f"bandwidth t must be positive, got {self.t}")
        if self.delta <= 0:
            raise ConfigError(f"cutoff radius must be positive, got {self.delta}")
        if 2.0 * sqrt(self.t) > self.delta:
            raise ConfigError(
                f"cutoff radius delta={self.delta:.4g} below the envelope bound "
                f"2 sqrt(t)={2*sqrt(self.t):.4g}"
            )
        if self.n < 2:
            raise ConfigError("intrinsic dimension must be >= 2")
        if self.vol <= 0:
            raise ConfigError("manifold volume must be positive")

    def check_scaling(self, m: int):
        """Warn when t^{n/2+2} < log(m)/m (concentration guard with C0 = 1)."""
        if self.t ** (self.n / 2.0 + 2.0) < log(m) / m:
            warnings.warn(
                f"bandwidth t={self.t:.4g} violates t^(n/2+2) >= log(m)/m at "
                f"m={m}; estimates may be noise-dominated",
                ScalingWarning,
                stacklevel=2,
            )


def scaled_bandwidth(m: int, n: int) -> float:
    """The default bandwidth rule t = m^(-1/2n)."""
    return float(m) ** (-1.0 / (2.0 * n))


def default_delta(cloud: PointCloud, t: float) -> float:
    """4x the median distance to the ceil(log m)-th nearest neighbor,
    clamped from below by the envelope bound 2 sqrt(t)."""
    m = cloud.m
    kth = min(max(2, int(np.ceil(log(max(m, 3))))), m - 1)
    tree = cKDTree(cloud.points)
    dist, _ = tree.query(cloud.points, k=kth + 1)
    return max(4.0 * float(np.median(dist[:, -1])), 2.0 * sqrt(t))


def make_config(cloud: PointCloud, t=None, delta=None, vol=None,
                scaling="auto") -> KernelConfig:
    """Resolve defaults against a cloud: auto bandwidth scaling, knn cutoff
    rule, oracle volume when the cloud knows its manifold."""
    n = cloud.spec.n
    if t is None:
        t = scaled_bandwidth(cloud.m, n)
        scaling = "t=m^(-1/2n)"
    if delta is None:
        delta = default_delta(cloud, t)
    if vol is None:
        vol = cloud.spec.volume
    cfg = KernelConfig(t=float(t), delta=float(delta), n=n, vol=float(vol),
                       scaling=scaling)
    cfg.check_scaling(cloud.m)
    return cfg


def gaussian_kernel(x, y, config: KernelConfig) -> float:
    """Extrinsic Gaussian kernel (4 pi t)^(-n/2) exp(-|x-y|^2/4t)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = config.t
    return (4.0 * pi * t) ** (-config.n / 2.0) * float(
        np.exp(-np.sum((x - y) ** 2) / (4.0 * t))
    )


def cutoff_profile(s):
    """Quintic smoothstep bridge: 1 for s <= 1/2, 0 for s >= 1, C^2 monotone."""
    s = np.asarray(s, dtype=float)
    u = np.clip(2.0 * s - 1.0, 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def cutoff(x, y, delta: float) -> float:
    """Smooth spatial cutoff chi_delta(x, y) in [0, 1]."""
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    return float(cutoff_profile(r / delta))


def kernel_weights(points, p, config, with_cutoff=True):
    """Phi_t(p, x_j) * chi_delta(p, x_j) for every row of ``points``."""
    diff = points - p
    r2 = np.einsum("jd,jd->j", diff, diff)
    t = config.t
    w = (4.0 * pi * t) ** (-config.n / 2.0) * np.exp(-r2 / (4.0 * t))
    if with_cutoff:
        w = w * cutoff_profile(np.sqrt(r2) / config.delta)
    return w


def local_covariance(cloud: PointCloud, p, config: KernelConfig,
                     hard_cutoff=False) -> np.ndarray:
    """Kernel-weighted covariance of displacements around p (PSD d x d)."""
    p = np.asarray(p, dtype=float)
    diff = cloud.points - p
    r2 = np.einsum("jd,jd->j", diff, diff)
    t = config.t
    w = (4.0 * pi * t) ** (-config.n / 2.0) * np.exp(-r2 / (4.0 * t))
    r = np.sqrt(r2)
    w = w * (r <= config.delta) if hard_cutoff else w * cutoff_profile(r / config.delta)
    return np.einsum("j,ja,jb->ab", w, diff, diff) / cloud.m


def tangent_frame(sigma: np.ndarray, n: int,
                  gap_fraction: float = DEFAULT_GAP_FRACTION):
    """Top-n eigenframe of a symmetric matrix with its eigengap.

    Columns carry a deterministic sign (largest-magnitude entry positive,
    ties to the lower index). Raises DegenerateSpectrumError when
    lambda_n - lambda_{n+1} < gap_fraction * lambda_n.
    """
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[0]
    if n >= d:
        raise ConfigError("intrinsic dimension must be below ambient dimension")
    vals, vecs = np.linalg.eigh(sigma)
    lam_n = vals[d - n]
    gap = lam_n - vals[d - n - 1]
    if lam_n <= 0.0 or gap < gap_fraction * lam_n:
        raise DegenerateSpectrumError(
            f"covariance eigengap {gap:.3e} below {gap_fraction} * lambda_n "
            f"({lam_n:.3e}); tangent space not certified"
        )
    V = vecs[:, : d - n - 1 : -1]  # top n eigenvectors, descending
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(n)])
    signs[signs == 0] = 1.0
    return V * signs, float(gap)


class ProjectionField:
    """Per-sample tangent frames plus an evaluator at arbitrary queries."""

    def __init__(self, cloud: PointCloud, config: KernelConfig, frames, gaps,
                 failures=()):
        self.cloud = cloud
        self.config = config
        self.frames = frames          # (m, d, n); NaN rows for failures
        self.gaps = gaps              # (m,)
        self.failures = tuple(failures)
        self.tree = cKDTree(cloud.points)

    @property
    def m(self):
        return self.cloud.m

    def projector(self, j: int) -> np.ndarray:
        V = self.frames[j]
        return V @ V.T

    def projectors(self) -> np.ndarray:
        return np.einsum("jdn,jen->jde", self.frames, self.frames)

    def evaluate(self, q):
        """Frame and eigengap at an arbitrary query point near the manifold."""
        q = np.asarray(q, dtype=float)
        idx = self.tree.query_ball_point(q, self.config.delta)
        if not idx:
            raise IsolatedPointError(
                "no samples within the cutoff radius of the query point"
            )
        sub = self.cloud.points[idx]
        diff = sub - q
        w = kernel_weights(sub, q, self.config)
        sigma = np.einsum("j,ja,jb->ab", w, diff, diff) / self.m
        return tangent_frame(sigma, self.config.n)

    def evaluate_projector(self, q) -> np.ndarray:
        V, _ = self.evaluate(q)
        return V @ V.T


def projection_field(cloud: PointCloud, config: KernelConfig,
                     strict: bool = True) -> ProjectionField:
    """Estimate tangent frames at every sample.

    With ``strict`` (default), the first degenerate eigengap raises
    DegenerateSpectrumError carrying the offending index; otherwise failures
    are collected and flagged in the field (frames set to NaN).

    Covariances are accumulated in deterministic chunked order, so results
    are bitwise-reproducible for a fixed cloud and configuration.
    """
    m, d, n = cloud.m, cloud.d, config.n
    frames = np.full((m, d, n), np.nan)
    gaps = np.zeros(m)
    failures = []
    t = config.t
    norm = (4.0 * pi * t) ** (-config.n / 2.0)
    X = cloud.points
    chunk = max(1, min(m, int(2**22 // max(m, 1)) + 1))
    for start in range(0, m, chunk):
        P = X[start:start + chunk]
        diff = X[None, :, :] - P[:, None, :]
        r2 = np.einsum("pja,pja->pj", diff, diff)
        w = norm * np.exp(-r2 / (4.0 * t))
        w *= cutoff_profile(np.sqrt(r2) / config.delta)
        sigmas = np.einsum("pj,pja,pjb->pab", w, diff, diff) / m
        for row in range(P.shape[0]):
            j = start + row
            try:
                frames[j], gaps[j] = tangent_frame(sigmas[row], n)
            except DegenerateSpectrumError as exc:
                if strict:
                    raise DegenerateSpectrumError(
                        f"sample {j}: {exc}", index=j
                    ) from None
                failures.append(j)
    return ProjectionField(cloud, config, frames, gaps, failures)


def estimate_volume(cloud: PointCloud, config: KernelConfig) -> float:
    """vol-hat = m / mean_p sum_j Phi_t(p, x_j) chi_delta(p, x_j).

    The kernel integrates to ~1 against d(vol), so the mean kernel sum per
    base point estimates m / vol(M).
    """
    m = cloud.m
    X = cloud.points
    total = 0.0
    chunk = max(1, min(m, int(2**22 // max(m, 1)) + 1))
    for start in range(0, m, chunk):
        P = X[start:start + chunk]
        diff = X[None, :, :] - P[:, None, :]
        r2 = np.einsum("pja,pja->pj", diff, diff)
        w = (4.0 * pi * config.t) ** (-config.n / 2.0) * np.exp(-r2 / (4.0 * config.t))
        w *= cutoff_profile(np.sqrt(r2) / config.delta)
        total += float(w.sum())
    mean_density = total / m
    if mean_density <= 0.0:
        raise IsolatedPointError("zero mean kernel density; cloud too sparse")
    return cloud.m / mean_density


@dataclass(frozen=True)
class EigengapReport:
    min_gap: float
    mean_gap: float
    failure_indices: tuple

    @property
    def healthy(self):
        return not self.failure_indices and self.min_gap > 0.0


def eigengap_report(field: ProjectionField) -> EigengapReport:
    ok = np.setdiff1d(np.arange(field.m), np.asarray(field.failures, dtype=int))
    gaps = field.gaps[ok]
    return EigengapReport(
        min_gap=float(gaps.min()) if gaps.size else 0.0,
        mean_gap=float(gaps.mean()) if gaps.size else 0.0,
        failure_indices=field.failures,
    )
