"""CLI and configuration tests: schema validation, round trips, determinism,
exit codes, rate fitting."""

import json
import warnings

import numpy as np
import pytest

from hodgecloud import cli, zoo
from hodgecloud.cli import RateFit, RunConfig
from hodgecloud.errors import ConfigError, ScalingWarning


def sphere_config(tmp_path, m=300, seed=3, degrees=(0,)):
    return {
        "schema_version": 1,
        "manifold": {"kind": "sphere", "n": 2},
        "kernel": {"t": 0.08, "delta": 1.5, "vol_rule": "oracle"},
        "m": m,
        "degrees": list(degrees),
        "eigen": {"count": 4, "tol": 1e-8},
        "seed": seed,
        "out": str(tmp_path),
    }


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestRunConfig:
    def test_requires_exactly_one_source(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"schema_version": 1})
        with pytest.raises(ConfigError):
            RunConfig.from_dict({
                "schema_version": 1,
                "manifold": {"kind": "sphere", "n": 2},
                "input": {"path": "x.csv"},
            })

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            RunConfig.from_dict({
                "schema_version": 1,
                "manifold": {"kind": "sphere", "n": 2},
                "bogus": 1,
            })

    def test_rejects_wrong_schema_version(self):
        with pytest.raises(ConfigError, match="schema version"):
            RunConfig.from_dict({"schema_version": 99,
                                 "manifold": {"kind": "sphere", "n": 2}})

    def test_kernel_resolution_auto(self):
        cfg = RunConfig.from_dict({
            "schema_version": 1,
            "manifold": {"kind": "sphere", "n": 2},
            "m": 500,
        })
        cloud = zoo.sample(cfg.manifold_spec(), cfg.m, cfg.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ScalingWarning)
            kernel = cfg.resolved_kernel(cloud)
        assert kernel.t == pytest.approx(500 ** -0.25)
        assert kernel.vol == pytest.approx(4 * np.pi)

    def test_volume_estimate_rule(self):
        cfg = RunConfig.from_dict({
            "schema_version": 1,
            "manifold": {"kind": "sphere", "n": 2},
            "kernel": {"t": 0.08, "delta": 5.0, "vol_rule": "estimate"},
            "m": 4000,
        })
        cloud = zoo.sample(cfg.manifold_spec(), cfg.m, cfg.seed)
        kernel = cfg.resolved_kernel(cloud)
        assert kernel.vol == pytest.approx(4 * np.pi, rel=0.1)


class TestIngest:
    def test_roundtrip_csv(self, tmp_path):
        cloud = zoo.sample(zoo.sphere(2), 40, 5)
        path = tmp_path / "cloud.csv"
        zoo.write_csv(cloud, path)
        back = cli.ingest(str(path), "csv", n=2)
        np.testing.assert_array_equal(back.points, cloud.points)
        assert back.spec.kind == "raw"

    def test_roundtrip_binary(self, tmp_path):
        cloud = zoo.sample(zoo.flat_torus(2), 30, 6)
        path = tmp_path / "cloud.bin"
        zoo.write_binary(cloud, path)
        back = cli.ingest(str(path), "binary")
        np.testing.assert_array_equal(back.points, cloud.points)
        assert back.spec.n == 2

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"JUNKJUNK" + b"\0" * 40)
        with pytest.raises(ConfigError):
            cli.ingest(str(path), "binary")

    def test_csv_needs_dimension(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("1.0,2.0\n")
        with pytest.raises(ConfigError, match="intrinsic dimension"):
            cli.ingest(str(path), "csv")


class TestVerbs:
    def test_generate_and_spectrum(self, tmp_path):
        cfg_path = write_config(tmp_path, sphere_config(tmp_path))
        assert cli.main(["generate", "--config", cfg_path,
                         "--out", str(tmp_path)]) == 0
        assert (tmp_path / "cloud.csv").exists()
        assert (tmp_path / "cloud.bin").exists()
        assert cli.main(["spectrum", "--config", cfg_path,
                         "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "spectrum.json").read_text())
        eigs = data["spectra"]["0"]["eigenvalues"]
        assert abs(eigs[0]) < 1e-8

    def test_tangents_verb(self, tmp_path):
        cfg_path = write_config(tmp_path, sphere_config(tmp_path))
        assert cli.main(["tangents", "--config", cfg_path,
                         "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "tangents.json").read_text())
        assert report["eigengap"]["min"] > 0

    def test_curvature_verb_jsonl(self, tmp_path):
        config = sphere_config(tmp_path, m=200)
        config["degrees"] = [1]
        cfg_path = write_config(tmp_path, config)
        assert cli.main(["curvature", "--config", cfg_path,
                         "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "curvature.jsonl").read_text().strip().split("\n")
        assert len(lines) == 200
        rec = json.loads(lines[0])
        assert set(rec) == {"index", "p", "B", "H", "R", "W_1"}

    def test_determinism_byte_identical(self, tmp_path):
        cfg_path = write_config(tmp_path, sphere_config(tmp_path))
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        for out in (out1, out2):
            assert cli.main(["spectrum", "--config", cfg_path,
                             "--out", str(out)]) == 0
        assert (out1 / "spectrum.json").read_bytes() == \
            (out2 / "spectrum.json").read_bytes()

    def test_seed_override_changes_results(self, tmp_path):
        cfg_path = write_config(tmp_path, sphere_config(tmp_path))
        out1 = tmp_path / "s1"
        out2 = tmp_path / "s2"
        cli.main(["spectrum", "--config", cfg_path, "--out", str(out1)])
        cli.main(["spectrum", "--config", cfg_path, "--out", str(out2),
                  "--seed", "77"])
        a = json.loads((out1 / "spectrum.json").read_text())
        b = json.loads((out2 / "spectrum.json").read_text())
        assert a["spectra"]["0"]["eigenvalues"] != b["spectra"]["0"]["eigenvalues"]

    def test_bad_config_exit_code(self, tmp_path):
        cfg_path = write_config(tmp_path, {"schema_version": 1})
        assert cli.main(["spectrum", "--config", cfg_path,
                         "--out", str(tmp_path)]) == 2

    def test_check_verb_exit_codes(self, tmp_path):
        assert cli.main(["check", "--preset", "exterior-suite",
                         "--out", str(tmp_path)]) == 0
        result = json.loads(
            (tmp_path / "check_exterior-suite.json").read_text()
        )
        assert result["passed"] is True

    def test_sweep_single_point_warns(self, tmp_path):
        config = sphere_config(tmp_path)
        config["sweep"] = {"m_list": [400]}
        del config["kernel"]["t"]
        del config["kernel"]["delta"]
        cfg_path = write_config(tmp_path, config)
        assert cli.main(["sweep", "--config", cfg_path,
                         "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "sweep.json").read_text())
        assert data["rate_fit"] is None
        assert "warning" in data

    def test_sweep_empty_grid_error(self, tmp_path):
        config = sphere_config(tmp_path)
        config["sweep"] = {"m_list": []}
        cfg_path = write_config(tmp_path, config)
        assert cli.main(["sweep", "--config", cfg_path,
                         "--out", str(tmp_path)]) == 2

    def test_fixed_t_sweep_bypasses_scaling(self, tmp_path):
        config = sphere_config(tmp_path)
        config["sweep"] = {"m_list": [300, 600], "t": 0.1}
        cfg_path = write_config(tmp_path, config)
        assert cli.main(["sweep", "--config", cfg_path,
                         "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "sweep.json").read_text())
        assert all(p["t"] == 0.1 for p in data["points"])


class TestRateFit:
    def test_requires_three_points(self):
        with pytest.raises(ConfigError):
            RateFit.fit("x", [0.1, 0.2], [1.0, 2.0], (0.5, 1.5))

    def test_recovers_clean_slope(self):
        ts = np.array([0.01, 0.02, 0.04, 0.08])
        errs = 3.0 * ts**1.0
        fit = RateFit.fit("err", ts, errs, (0.6, 1.4))
        assert fit.slope == pytest.approx(1.0, abs=1e-10)
        assert fit.passed

    def test_window_check(self):
        ts = np.array([0.01, 0.02, 0.04])
        errs = ts**2.5
        fit = RateFit.fit("err", ts, errs, (0.6, 1.4))
        assert not fit.passed
