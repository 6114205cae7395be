import io
import json
from pathlib import Path

import pytest

from spdelab import cli

LINEAR_SIM = """
experiment = simulate
model.regime = dirichlet
model.drift = zero
model.sigma = affine-sin
model.sigma.offset = 1.0
model.sigma.amp = 0.0
model.u0 = zero
model.t = 0.125
grid.nx = 32
grid.nt = 128
ensemble.n = 16
ensemble.seed = 4
"""


def _write_cfg(tmp_path, text, name="run.cfg", **overrides):
    lines = [ln for ln in text.strip().splitlines()]
    for key, value in overrides.items():
        lines.append(f"{key} = {value}")
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def _run(cfg_path):
    err = io.StringIO()
    code = cli.run(cfg_path, stderr=err)
    return code, err.getvalue()


# -- config parsing ---------------------------------------------------------------

def test_parse_rejects_unknown_key():
    with pytest.raises(cli.ConfigError, match="line 1.*unknown key"):
        cli.parse_config_text("simulate.cadence = 5\n")


def test_parse_rejects_malformed_and_duplicate_lines():
    with pytest.raises(cli.ConfigError, match="line 2"):
        cli.parse_config_text("experiment = simulate\ngrid.nx 64\n")
    with pytest.raises(cli.ConfigError, match="duplicate"):
        cli.parse_config_text("grid.nx = 64\ngrid.nx = 32\n")
    with pytest.raises(cli.ConfigError, match="empty"):
        cli.parse_config_text("grid.nx =\n")


def test_parse_strips_comments_and_blanks():
    raw = cli.parse_config_text(
        "# full line comment\n\nexperiment = simulate  # trailing\n")
    assert raw == {"experiment": "simulate"}


def test_config_requires_known_experiment():
    with pytest.raises(cli.ConfigError, match="missing required"):
        cli.RunConfig({"grid.nx": "64"})
    with pytest.raises(cli.ConfigError, match="unknown experiment"):
        cli.RunConfig({"experiment": "calibrate"})


def test_config_hash_ignores_volatile_keys():
    a = cli.RunConfig({"experiment": "simulate", "output.dir": "a",
                       "ensemble.workers": "1"})
    b = cli.RunConfig({"experiment": "simulate", "output.dir": "b",
                       "ensemble.workers": "8"})
    assert a.hash() == b.hash()
    c = cli.RunConfig({"experiment": "simulate", "ensemble.seed": "1"})
    assert c.hash() != a.hash()


def test_coefficient_params_collected_by_prefix():
    cfg = cli.RunConfig({"experiment": "simulate", "model.drift": "sin",
                         "model.drift.amp": "0.5", "model.drift.freq": "2.0"})
    assert cfg.params("model.drift.") == {"amp": 0.5, "freq": 2.0}
    with pytest.raises(cli.ConfigError, match="number"):
        cli.RunConfig({"experiment": "simulate", "model.drift.amp": "big"})


# -- exit-code contract -------------------------------------------------------------

def test_missing_config_file_exits_2(tmp_path):
    code, msg = _run(tmp_path / "absent.cfg")
    assert code == 2
    assert msg.startswith("config error:")


def test_unknown_coefficient_parameter_exits_2(tmp_path):
    cfg = _write_cfg(tmp_path, LINEAR_SIM, **{"model.drift.wiggle": "2.0"})
    code, msg = _run(cfg)
    assert code == 2
    assert "config error" in msg


def test_density_requires_large_ensemble(tmp_path):
    cfg = _write_cfg(tmp_path, LINEAR_SIM.replace("simulate", "density"),
                     **{"output.dir": str(tmp_path / "out")})
    code, msg = _run(cfg)
    assert code == 2
    assert "ensemble.n >= 1000" in msg


def test_failing_check_exits_1_and_names_the_check(tmp_path):
    cfg = _write_cfg(tmp_path, """
experiment = holder
model.regime = dirichlet
model.t = 0.25
grid.nx = 64
grid.nt = 512
ensemble.n = 8
holder.axis = time
holder.lo = 0.9
holder.hi = 0.95
""", **{"output.dir": str(tmp_path / "out")})
    code, msg = _run(cfg)
    assert code == 1
    assert "check failed: holder-window" in msg
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["checks"][0]["status"] == "fail"


# -- simulate outputs -----------------------------------------------------------------

def test_simulate_writes_artifacts_and_passes(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, LINEAR_SIM, **{"output.dir": str(out)})
    code, msg = _run(cfg)
    assert code == 0 and msg == ""
    for name in ("probes.csv", "probes.json", "probes.svg", "manifest.json"):
        assert (out / name).is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["artifact_version"] == cli.ARTIFACT_VERSION
    assert manifest["experiment"] == "simulate"
    assert {c["status"] for c in manifest["checks"]} == {"pass"}
    header = (out / "probes.csv").read_text().splitlines()[0]
    assert header == f"# manifest={manifest['config_hash']}"
    payload = json.loads((out / "probes.json").read_text())
    assert payload["manifest_hash"] == manifest["config_hash"]
    assert "law_variance" in payload["probes"][0]


def test_eigenmode_decay_check(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, """
experiment = simulate
model.regime = dirichlet
model.drift = zero
model.sigma = zero
model.u0 = eigenmode-sin
model.u0.k = 2
model.t = 0.125
grid.nx = 32
grid.nt = 128
ensemble.n = 1
""", **{"output.dir": str(out)})
    code, _ = _run(cfg)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    ids = [c["id"] for c in manifest["checks"]]
    assert "eigenmode-decay" in ids
    payload = json.loads((out / "probes.json").read_text())
    assert payload["eigenmode_max_error"] < 1e-6


def test_output_dir_env_override(tmp_path, monkeypatch):
    redirected = tmp_path / "elsewhere"
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(redirected))
    cfg = _write_cfg(tmp_path, LINEAR_SIM,
                     **{"output.dir": str(tmp_path / "ignored")})
    code, _ = _run(cfg)
    assert code == 0
    assert (redirected / "manifest.json").is_file()
    assert not (tmp_path / "ignored").exists()


# -- reproducibility -------------------------------------------------------------------

def _masked_manifest(path):
    data = json.loads(Path(path).read_text())
    data.pop("wall_time_s")
    return data


def _compare_runs(dir_a, dir_b):
    names = sorted(p.name for p in Path(dir_a).iterdir())
    assert names == sorted(p.name for p in Path(dir_b).iterdir())
    for name in names:
        a, b = Path(dir_a) / name, Path(dir_b) / name
        if name == "manifest.json":
            assert _masked_manifest(a) == _masked_manifest(b)
        else:
            assert a.read_bytes() == b.read_bytes(), name


def test_rerun_is_byte_identical(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cfg_a = _write_cfg(tmp_path, LINEAR_SIM, name="a.cfg",
                       **{"output.dir": str(out_a)})
    cfg_b = _write_cfg(tmp_path, LINEAR_SIM, name="b.cfg",
                       **{"output.dir": str(out_b)})
    assert _run(cfg_a)[0] == 0
    assert _run(cfg_b)[0] == 0
    _compare_runs(out_a, out_b)


def test_worker_count_does_not_change_outputs(tmp_path):
    out_a, out_b = tmp_path / "w1", tmp_path / "w2"
    base = LINEAR_SIM.replace("ensemble.n = 16", "ensemble.n = 48")
    cfg_a = _write_cfg(tmp_path, base, name="w1.cfg",
                       **{"output.dir": str(out_a), "ensemble.workers": "1"})
    cfg_b = _write_cfg(tmp_path, base, name="w2.cfg",
                       **{"output.dir": str(out_b), "ensemble.workers": "2"})
    assert _run(cfg_a)[0] == 0
    assert _run(cfg_b)[0] == 0
    _compare_runs(out_a, out_b)


def test_json_outputs_use_sorted_keys(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, LINEAR_SIM, **{"output.dir": str(out)})
    assert _run(cfg)[0] == 0
    payload = json.loads((out / "probes.json").read_text())
    assert list(payload) == sorted(payload)
    manifest = json.loads((out / "manifest.json").read_text())
    assert list(manifest) == sorted(manifest)


# -- kernels-verify ----------------------------------------------------------------------

def test_kernels_verify_writes_per_bound_artifacts(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, """
experiment = kernels-verify
kernels.bounds = G_le_p,p_L2
kernels.refine = false
""", **{"output.dir": str(out)})
    code, _ = _run(cfg)
    assert code == 0
    assert (out / "bound_G_le_p.json").is_file()
    assert (out / "bound_p_L2.json").is_file()
    assert (out / "bounds.csv").is_file()
    assert (out / "bounds.svg").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert [c["id"] for c in manifest["checks"]] == ["G_le_p", "p_L2"]


def test_kernels_verify_rejects_unknown_bound(tmp_path):
    cfg = _write_cfg(tmp_path, """
experiment = kernels-verify
kernels.bounds = G_le_q
""", **{"output.dir": str(tmp_path / "out")})
    code, msg = _run(cfg)
    assert code == 2
    assert "unknown bound id" in msg


# -- report ---------------------------------------------------------------------------

def test_report_empty_directory_exits_2(tmp_path):
    err = io.StringIO()
    code = cli.report(tmp_path, stderr=err)
    assert code == 2
    assert "no manifests" in err.getvalue()


def test_report_collects_checks_and_reruns_identically(tmp_path):
    out = tmp_path / "runs" / "sim"
    cfg = _write_cfg(tmp_path, LINEAR_SIM, **{"output.dir": str(out)})
    assert _run(cfg)[0] == 0
    root = tmp_path / "runs"
    assert cli.report(root) == 0
    table = (root / "report.txt").read_text()
    assert "linear-law-probe-0" in table
    assert "0 failed" in table
    first = (root / "report.json").read_bytes()
    first_txt = (root / "report.txt").read_bytes()
    assert cli.report(root) == 0
    assert (root / "report.json").read_bytes() == first
    assert (root / "report.txt").read_bytes() == first_txt


def test_report_flags_failed_runs(tmp_path):
    out = tmp_path / "runs" / "bad"
    cfg = _write_cfg(tmp_path, """
experiment = holder
model.regime = dirichlet
model.t = 0.25
grid.nx = 64
grid.nt = 512
ensemble.n = 8
holder.lo = 0.9
holder.hi = 0.95
""", **{"output.dir": str(out)})
    assert _run(cfg)[0] == 1
    err = io.StringIO()
    assert cli.report(tmp_path / "runs", stderr=err) == 1
    assert "check failed: all-runs-pass" in err.getvalue()
    table = (tmp_path / "runs" / "report.txt").read_text()
    assert "holder-window" in table and "fail" in table


# -- argparse entry point -----------------------------------------------------------------

def test_main_dispatches_run_and_report(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, LINEAR_SIM, **{"output.dir": str(out)})
    assert cli.main(["run", str(cfg)]) == 0
    assert cli.main(["report", str(out)]) == 0
    with pytest.raises(SystemExit):
        cli.main([])
