import json

import numpy as np
import pytest

from waveinv import io as wio
from waveinv.cli import contrast_error, format_report, main
from waveinv.config import RunConfig, load_config, parse_overrides, thread_count
from waveinv.errors import ConfigError

TINY = {
    "domain_lo": [0, 0, 0],
    "domain_hi": [0.8, 0.8, 0.8],
    "inner_lo": [0.2, 0.2, 0.2],
    "inner_hi": [0.6, 0.6, 0.6],
    "h": 0.1,
    "tau": 0.01,
    "T": 0.5,
    "omega": 15.0,
    "ic": "zero",
    "phantom": "balls",
    "balls": [[0.4, 0.4, 0.4, 0.1, 3.0]],
    "sigma": 0.0,
    "max_iter": 3,
    "gamma": 1e-4,
}


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(TINY))
    return p


def test_config_roundtrip():
    cfg = RunConfig.from_dict(dict(TINY, sigma=3.0, gamma_nu=0.1, threads=2))
    assert RunConfig.loads(cfg.dumps()) == cfg
    assert RunConfig.loads(RunConfig().dumps()) == RunConfig()


def test_config_defaults_full_scale():
    cfg = RunConfig()
    assert (cfg.h, cfg.tau, cfg.T, cfg.omega, cfg.gamma, cfg.theta) == (0.1, 0.006, 3.0, 40.0, 0.01, 1e-6)
    assert cfg.upper == 10.0
    assert RunConfig(phantom="balls").upper == 5.0


def test_config_cfl_cross_check():
    with pytest.raises(ConfigError, match="CFL"):
        RunConfig(tau=0.03)
    with pytest.raises(ConfigError, match="CFL"):
        RunConfig(tau=0.02, d=10.0)
    RunConfig(tau=0.02, d=2.0, phantom="uniform", phantom_value=2.0)


def test_config_phantom_above_d():
    with pytest.raises(ConfigError, match="exceeds d"):
        RunConfig(phantom="gaussian1", d=5.0)
    with pytest.raises(ConfigError, match="exceeds d"):
        RunConfig.from_dict(dict(TINY, balls=[[0.4, 0.4, 0.4, 0.1, 6.0]]))


def test_config_rejects_unknown_and_bad_types():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"hh": 0.1})
    with pytest.raises(ConfigError):
        RunConfig.loads("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.loads("{not json")
    with pytest.raises(ConfigError):
        RunConfig(alpha_rule="fixed")


def test_overrides():
    assert parse_overrides(["sigma=10", "phantom=balls", "balls=[[0,0,0,0.2,4]]", "d=null"]) == {
        "sigma": 10,
        "phantom": "balls",
        "balls": [[0, 0, 0, 0.2, 4]],
        "d": None,
    }
    with pytest.raises(ConfigError):
        parse_overrides(["sigma"])


def test_load_config_layers(tiny):
    cfg = load_config(str(tiny), "desk", ["sigma=10"])
    assert cfg.sigma == 10 and cfg.h == 0.1 and cfg.T == 0.5 and cfg.alpha0_floor == 0.0
    with pytest.raises(ConfigError):
        load_config(None, "nope")


def test_thread_count(monkeypatch):
    monkeypatch.delenv("WAVEINV_THREADS", raising=False)
    assert thread_count(RunConfig(threads=3)) == 3
    monkeypatch.setenv("WAVEINV_THREADS", "2")
    assert thread_count(RunConfig(threads=3)) == 2
    monkeypatch.setenv("WAVEINV_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_count(RunConfig())


def test_simulate_deterministic(tiny, tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--config", str(tiny), "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "data.wvtr").read_bytes()
    assert a == (tmp_path / "b" / "data.wvtr").read_bytes()
    saved = RunConfig.loads((tmp_path / "a" / "config.json").read_text())
    assert saved == load_config(str(tiny))
    trace = wio.load_trace(tmp_path / "a" / "data.wvtr")
    assert trace.values.shape == (51, 81)


def test_simulate_gaussian1_origin_cell(tmp_path):
    args = [
        "simulate", "--out", str(tmp_path),
        "--set", "domain_lo=[-0.45,-0.45,-0.45]", "--set", "domain_hi=[0.45,0.45,0.45]",
        "--set", "inner_lo=[-0.25,-0.25,-0.25]", "--set", "inner_hi=[0.25,0.25,0.25]",
        "--set", "T=0.12", "--set", "sigma=0",
    ]
    assert main(args) == 0
    dims, origin, spacing, vals = wio.read_vtk(tmp_path / "c_exact.vtk")
    assert vals.max() == 6.0
    assert vals[4, 4, 4] == 6.0


def test_simulate_full_scale(tmp_path):
    assert main(["simulate", "--preset", "full", "--set", "sigma=0", "--out", str(tmp_path)]) == 0
    trace = wio.load_trace(tmp_path / "data.wvtr")
    assert trace.values.shape == (501, 69 * 17)
    assert np.all(np.isfinite(trace.values))
    assert np.abs(trace.values).max() <= 10.0


def test_invert_homogeneous(tmp_path):
    out = tmp_path / "run"
    common = ["--config", str(_write(tmp_path, dict(TINY, phantom="uniform", balls=None, refine=1))), "--out", str(out)]
    assert main(["simulate"] + common) == 0
    assert main(["invert"] + common) == 0
    c = wio.load_field(out / "c_final.wvcf")
    assert np.max(np.abs(c.values - 1.0)) <= 1e-8
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_iter"] == 0


def _write(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def test_invert_outputs(tiny, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(tiny), "--set", "sigma=3", "--out", str(out)]) == 0
    assert main(["invert", "--config", str(tiny), "--set", "sigma=3", "--out", str(out)]) == 0
    for name in ("c_final.vtk", "c_final.wvcf", "c_post.vtk", "iterations.csv", "error_bound.csv", "summary.json"):
        assert (out / name).is_file(), name
    rows = (out / "iterations.csv").read_text().splitlines()
    assert rows[0] == "m,J,gnorm,max_c,alpha,beta,wall"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["monotone"] and summary["c_star_max"] == 3.0
    bound = (out / "error_bound.csv").read_text().splitlines()
    assert bound[0] == "m,lhs,rhs" and len(bound) == len(rows)


def test_invert_missing_trace(tiny, tmp_path, capsys):
    code = main(["invert", "--config", str(tiny), "--data", str(tmp_path / "none.wvtr"), "--out", str(tmp_path)])
    assert code == 2
    assert "not found" in capsys.readouterr().err


def test_invert_corrupt_trace(tiny, tmp_path):
    bad = tmp_path / "bad.wvtr"
    bad.write_bytes(b"WVTR1\x00")
    assert main(["invert", "--config", str(tiny), "--data", str(bad), "--out", str(tmp_path)]) == 2


def test_bad_config_exit_code(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    assert main(["simulate", "--config", str(p)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["simulate", "--set", "tau=1.0"]) == 2


def test_numerical_failure_exit_code(tiny, tmp_path, monkeypatch):
    from waveinv import cli
    from waveinv.errors import NonFiniteField

    def boom(*a, **k):
        raise NonFiniteField("forced")

    monkeypatch.setattr(cli, "simulate_data", boom)
    assert main(["simulate", "--config", str(tiny), "--out", str(tmp_path)]) == 1


def test_gradcheck_command(tiny, capsys):
    assert main(["gradcheck", "--config", str(tiny)]) == 0
    out = capsys.readouterr().out
    assert "best relative error" in out
    assert len([l for l in out.splitlines() if l.strip().startswith("1e-")]) == 5


def test_postprocess_command(tiny, tmp_path):
    assert main(["simulate", "--config", str(tiny), "--out", str(tmp_path)]) == 0
    out = tmp_path / "post.wvcf"
    assert main(["postprocess", str(tmp_path / "c_exact.wvcf"), "0.7", "--out", str(out)]) == 0
    c = wio.load_field(tmp_path / "c_exact.wvcf")
    post = wio.load_field(out)
    assert np.array_equal(post.values, np.where(c.values > 0.7 * c.values.max(), c.values, 1.0))
    assert main(["postprocess", str(tmp_path / "c_exact.wvcf"), "0.7", "--out", str(tmp_path / "p.vtk")]) == 0
    assert main(["postprocess", str(tmp_path / "c_exact.wvcf"), "1.5", "--out", str(out)]) == 2


def test_report_error_convention(tmp_path, capsys):
    run = tmp_path / "case_i"
    run.mkdir()
    (run / "summary.json").write_text(json.dumps({"max_c": 2.21, "c_star_max": 4.0, "n_iter": 7}))
    assert main(["report", str(run)]) == 0
    out = capsys.readouterr().out
    assert "44.75" in out and "2.21" in out
    assert contrast_error(2.21, 4.0) == pytest.approx(44.75)
    assert contrast_error(5.91, 6.0) == pytest.approx(1.5)


def test_report_bad_summary(tmp_path):
    p = tmp_path / "summary.json"
    p.write_text("{}")
    assert main(["report", str(p)]) == 2
    assert main(["report", str(tmp_path / "absent")]) == 2


def test_format_report_columns():
    text = format_report([{"case": "iii", "max_c": 5.91, "error_pct": 1.5, "n_iter": 12}])
    assert text.splitlines()[1].split() == ["iii", "5.91", "1.50", "12"]
