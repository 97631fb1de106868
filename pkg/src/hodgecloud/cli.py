"""Configuration-driven pipelines and the command-line interface.

Verbs: generate | tangents | curvature | spectrum | ring | pontryagin |
sweep | check, with flags --config, --out, --seed, --threads, --preset.
Configs are JSON with an explicit schema version; every resolved default is
recorded into the output bundle, and identical config+seed runs produce
byte-identical JSON results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.stats import linregress

from hodgecloud import __version__, checks, curvature, hodge, ring, tangent, zoo
from hodgecloud.errors import ConfigError, HodgeCloudError, ScalingWarning

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    """Validated pipeline configuration."""

    manifold: dict | None = None
    input: dict | None = None
    kernel: dict = dc_field(default_factory=dict)
    m: int = 1000
    degrees: list = dc_field(default_factory=lambda: [0])
    eigen: dict = dc_field(default_factory=lambda: {"count": 8, "tol": 1e-8})
    cycles: str | list = "oracle"
    sweep: dict = dc_field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    out: str = "results"
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema version {version}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in data.items()})
        if (cfg.manifold is None) == (cfg.input is None):
            raise ConfigError(
                "exactly one of 'manifold' and 'input' must be given"
            )
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def manifold_spec(self) -> zoo.ManifoldSpec | None:
        if self.manifold is None:
            return None
        data = dict(self.manifold)
        kind = data.pop("kind")
        if kind == "sphere":
            return zoo.sphere(int(data.get("n", 2)), float(data.get("radius", 1.0)))
        if kind == "s4":
            return zoo.s4(float(data.get("radius", 1.0)))
        if kind == "flat-torus":
            return zoo.flat_torus(int(data.get("n", 2)))
        if kind == "product-sphere":
            return zoo.product_sphere(
                int(data["n1"]), int(data["n2"]),
                float(data.get("r1", 1.0)), float(data.get("r2", 1.0)),
            )
        if kind == "cp2":
            return zoo.cp2()
        raise ConfigError(f"unknown manifold kind {kind!r}")

    def resolved_kernel(self, cloud: zoo.PointCloud) -> tangent.KernelConfig:
        spec = self.kernel
        t = spec.get("t")
        delta = spec.get("delta")
        vol = spec.get("vol")
        vol_rule = spec.get("vol_rule", "oracle")
        if t is None and spec.get("scaling", "auto") != "auto":
            raise ConfigError("kernel needs either 't' or scaling='auto'")
        if t is None:
            t = tangent.scaled_bandwidth(cloud.m, cloud.spec.n)
        if delta is None:
            rule = spec.get("delta_rule", "knn")
            if rule != "knn":
                raise ConfigError(f"unknown delta rule {rule!r}")
            delta = tangent.default_delta(cloud, t)
        if vol is None:
            if vol_rule == "oracle":
                vol = cloud.spec.volume
            elif vol_rule == "estimate":
                probe = tangent.KernelConfig(
                    t=t, delta=max(delta, 2 * np.sqrt(t)), n=cloud.spec.n,
                    vol=1.0,
                )
                vol = tangent.estimate_volume(cloud, probe)
            else:
                raise ConfigError(f"unknown vol rule {vol_rule!r}")
        cfg = tangent.KernelConfig(t=float(t), delta=float(delta),
                                   n=cloud.spec.n, vol=float(vol),
                                   scaling=spec.get("scaling", "explicit"))
        cfg.check_scaling(cloud.m)
        return cfg

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "manifold": self.manifold,
            "input": self.input,
            "kernel": self.kernel,
            "m": self.m,
            "degrees": self.degrees,
            "eigen": self.eigen,
            "cycles": self.cycles,
            "sweep": self.sweep,
            "seed": self.seed,
            "threads": self.threads,
            "out": self.out,
        }


@dataclass
class RateFit:
    """Log-log slope fit of an error quantity against the bandwidth."""

    quantity: str
    bandwidths: list
    errors: list
    slope: float
    slope_ci: tuple
    expected_window: tuple
    passed: bool

    @classmethod
    def fit(cls, quantity, bandwidths, errors, window):
        if len(bandwidths) < 3:
            raise ConfigError("rate fits need at least 3 sweep points")
        res = linregress(np.log(bandwidths), np.log(errors))
        ci = (res.slope - 2 * res.stderr, res.slope + 2 * res.stderr)
        passed = window[0] <= res.slope <= window[1]
        return cls(quantity, list(map(float, bandwidths)),
                   list(map(float, errors)), float(res.slope),
                   (float(ci[0]), float(ci[1])),
                   (float(window[0]), float(window[1])), bool(passed))

    def to_dict(self):
        return {
            "quantity": self.quantity,
            "bandwidths": self.bandwidths,
            "errors": self.errors,
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "expected_window": list(self.expected_window),
            "passed": self.passed,
        }


def load_cloud(config: RunConfig) -> zoo.PointCloud:
    if config.manifold is not None:
        spec = config.manifold_spec()
        return zoo.sample(spec, config.m, config.seed)
    return ingest(config.input["path"], config.input.get("format", "csv"),
                  n=config.input.get("n"))


def ingest(path, fmt: str, n=None) -> zoo.PointCloud:
    """Read a point cloud from CSV or the 32-byte-header binary format.

    Raw clouds carry no oracle volume; configs must set kernel.vol or
    vol_rule="estimate".
    """
    if fmt == "csv":
        pts = zoo.read_csv(path)
        if n is None:
            raise ConfigError("CSV ingest needs the intrinsic dimension 'n'")
    elif fmt == "binary":
        pts, n_header = zoo.read_binary(path)
        n = n_header if n is None else n
    else:
        raise ConfigError(f"unknown ingest format {fmt!r}")
    spec = zoo.ManifoldSpec("raw", int(n), pts.shape[1])
    return zoo.PointCloud(pts, spec, seed=-1)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _bundle(config: RunConfig, kernel: tangent.KernelConfig | None, extra):
    payload = {
        "version": __version__,
        "config": config.to_dict(),
        "resolved_kernel": None if kernel is None else {
            "t": kernel.t, "delta": kernel.delta, "n": kernel.n,
            "vol": kernel.vol, "scaling": kernel.scaling,
        },
    }
    payload.update(extra)
    return payload


# ---------------------------------------------------------------------------
# verbs


def cmd_generate(config: RunConfig, outdir):
    spec = config.manifold_spec()
    if spec is None:
        raise ConfigError("generate needs a manifold spec")
    cloud = zoo.sample(spec, config.m, config.seed)
    zoo.write_csv(cloud, os.path.join(outdir, "cloud.csv"))
    zoo.write_binary(cloud, os.path.join(outdir, "cloud.bin"))
    _write_json(os.path.join(outdir, "generate.json"), _bundle(config, None, {
        "m": cloud.m, "d": cloud.d, "files": ["cloud.csv", "cloud.bin"],
    }))
    return 0


def cmd_tangents(config: RunConfig, outdir):
    cloud = load_cloud(config)
    kernel = config.resolved_kernel(cloud)
    field = tangent.projection_field(cloud, kernel)
    report = tangent.eigengap_report(field)
    _write_json(os.path.join(outdir, "tangents.json"), _bundle(config, kernel, {
        "eigengap": {
            "min": report.min_gap, "mean": report.mean_gap,
            "failures": list(report.failure_indices),
        },
    }))
    np.save(os.path.join(outdir, "frames.npy"), field.frames)
    return 0


def cmd_curvature(config: RunConfig, outdir, with_riemann=True):
    cloud = load_cloud(config)
    kernel = config.resolved_kernel(cloud)
    field = tangent.projection_field(cloud, kernel)
    deg = config.degrees[0] if config.degrees else None
    package = curvature.curvature_package(
        field, config=kernel, with_riemann=with_riemann,
        weitzenboeck_degree=deg,
    )
    package.dump_jsonl(os.path.join(outdir, "curvature.jsonl"), cloud.points)
    _write_json(os.path.join(outdir, "curvature.json"), _bundle(config, kernel, {
        "tensors": ["B", "H"] + (["R"] if with_riemann else [])
        + ([f"W_{deg}"] if deg is not None else []),
        "records": int(cloud.m),
    }))
    return 0


def cmd_spectrum(config: RunConfig, outdir):
    cloud = load_cloud(config)
    kernel = config.resolved_kernel(cloud)
    field = tangent.projection_field(cloud, kernel)
    graph = hodge.build_graph(cloud, kernel)
    results = {}
    for k in config.degrees:
        handle = hodge.HodgeOperatorHandle(cloud, field, k=k, config=kernel,
                                           graph=graph)
        spec = handle.eigensolve(int(config.eigen.get("count", 8)),
                                 tol=float(config.eigen.get("tol", 1e-8)))
        spec.dump_json(os.path.join(outdir, f"spectrum_k{k}.json"))
        results[str(k)] = spec.to_dict()
    _write_json(os.path.join(outdir, "spectrum.json"),
                _bundle(config, kernel, {"spectra": results}))
    return 0


def _load_cycles(config: RunConfig, spec, q):
    if config.cycles == "oracle":
        return zoo.oracle_cycles(spec, q)
    chains = []
    for path in config.cycles:
        chains.extend(c for c in zoo.load_cycles(path) if c.degree == q)
    return chains


def cmd_ring(config: RunConfig, outdir):
    cloud = load_cloud(config)
    spec = cloud.spec
    kernel = config.resolved_kernel(cloud)
    field = tangent.projection_field(cloud, kernel)
    graph = hodge.build_graph(cloud, kernel)
    degrees = config.degrees or [1]
    wanted = list(degrees)
    if len(degrees) >= 2:
        wanted.append(degrees[0] + degrees[1])
    bases = {}
    spectra = {}
    for k in wanted:
        if k in bases or k > spec.n:
            continue
        handle = hodge.HodgeOperatorHandle(cloud, field, k=k, config=kernel,
                                           graph=graph)
        spectral = handle.eigensolve(int(config.eigen.get("count", 8)),
                                     tol=float(config.eigen.get("tol", 1e-7)))
        spectra[k] = spectral
        basis = ring.HarmonicBasis.from_spectral(spectral)
        cycles = _load_cycles(config, spec, k)
        period = ring.period_matrix(basis, cycles, quad_order=1)
        bases[k] = ring.gauge_fix(basis, period)
    out = {"betti": {str(k): int(ring.betti(s)) for k, s in spectra.items()}}
    if len(degrees) >= 2:
        k, l = degrees[0], degrees[1]
        sc = ring.structure_constants(bases[k], bases[l], bases[k + l], cloud)
        out["structure_constants"] = sc.to_dict()
    _write_json(os.path.join(outdir, "ring.json"),
                _bundle(config, kernel, out))
    return 0


def cmd_pontryagin(config: RunConfig, outdir):
    cloud = load_cloud(config)
    kernel = config.resolved_kernel(cloud)
    field = tangent.projection_field(cloud, kernel)
    signs = curvature.orient_frames(field, cloud.spec)
    bf = curvature.SecondFundamentalField(field, kernel, symmetrized=True)
    from hodgecloud.exterior import lift_matrix
    from math import comb as _comb

    p1_vals = np.empty((cloud.m, _comb(cloud.d, 4)))
    tops = np.empty_like(p1_vals)
    for j in range(cloud.m):
        p1_vals[j] = curvature.pontryagin_form(bf.frame_tensor(j),
                                               field.frames[j])
        tops[j] = lift_matrix(field.frames[j], 4)[:, 0]
    total = ring.pontryagin_number_fundamental(p1_vals, tops, signs,
                                               kernel.vol)
    _write_json(os.path.join(outdir, "pontryagin.json"),
                _bundle(config, kernel, {"p1_number": float(total)}))
    return 0


def cmd_sweep(config: RunConfig, outdir):
    if not config.sweep.get("m_list"):
        raise ConfigError("sweep needs a nonempty m_list")
    m_list = [int(m) for m in config.sweep["m_list"]]
    spec = config.manifold_spec()
    if spec is None:
        raise ConfigError("sweep needs a manifold spec")
    fixed_t = config.sweep.get("t")
    results = []
    sups, ts = [], []
    for m in m_list:
        cloud = zoo.sample(spec, m, config.seed)
        t = float(fixed_t) if fixed_t else tangent.scaled_bandwidth(m, spec.n)
        delta = tangent.default_delta(cloud, t)
        kernel = tangent.KernelConfig(t=t, delta=delta, n=spec.n,
                                      vol=spec.volume)
        field = tangent.projection_field(cloud, kernel)
        P = field.projectors()
        Po = np.stack([zoo.oracle_projection(spec, p) for p in cloud.points])
        sup = float(np.linalg.norm(P - Po, ord=2, axis=(1, 2)).max())
        results.append({"m": m, "t": t, "delta": delta, "sup_error": sup})
        sups.append(sup)
        ts.append(t)
    payload = {"points": results}
    if len(m_list) >= 3 and not fixed_t:
        fit = RateFit.fit("projector_sup_error", ts, sups, (0.6, 1.4))
        payload["rate_fit"] = fit.to_dict()
    else:
        payload["rate_fit"] = None
        payload["warning"] = "fewer than 3 scaling points; no rate fit"
    _write_json(os.path.join(outdir, "sweep.json"),
                _bundle(config, None, payload))
    return 0


def cmd_check(preset, outdir):
    result = checks.run_check(preset)
    _write_json(os.path.join(outdir, f"check_{preset}.json"), result)
    status = "PASS" if result["passed"] else "FAIL"
    print(f"{preset}: {status} ({result['elapsed_s']}s)")
    return 0 if result["passed"] else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hodgecloud",
        description="Differential-geometric invariants from point clouds",
    )
    parser.add_argument("verb", choices=[
        "generate", "tangents", "curvature", "spectrum", "ring",
        "pontryagin", "sweep", "check",
    ])
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="parallelism hint (recorded; BLAS-level only)")
    parser.add_argument("--preset", help="named check for the check verb")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.verb == "check":
            if not args.preset:
                raise ConfigError("check needs --preset <name>")
            return cmd_check(args.preset, args.out)
        if not args.config:
            raise ConfigError(f"{args.verb} needs --config <file>")
        config = RunConfig.load(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.threads is not None:
            config.threads = args.threads
        handler = {
            "generate": cmd_generate,
            "tangents": cmd_tangents,
            "curvature": cmd_curvature,
            "spectrum": cmd_spectrum,
            "ring": cmd_ring,
            "pontryagin": cmd_pontryagin,
            "sweep": cmd_sweep,
        }[args.verb]
        with warnings.catch_warnings():
            warnings.simplefilter("default", ScalingWarning)
            return handler(config, args.out)
    except HodgeCloudError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
