import json

import pytest

from qnet.cli import main
from qnet.config import ConfigError, build_config, merge_overrides, parse_config


def test_minimal_config_defaults():
    cfg = build_config({"engine": "harmonic", "N": 50, "J": 1, "Np": 10, "connectivity": "all_to_all"})
    assert cfg.network.is_all_to_all and cfg.Np == 10 and cfg.t_max == 50
    assert cfg.network.disorder.is_clean and cfg.seed == 0


@pytest.mark.parametrize("raw,field", [
    ({"engine": "lindblad", "model": "jc", "N": 3}, "rates"),
    ({"engine": "harmonic", "N": 3, "rates": {"kappa": 0.1}}, "rates"),
    ({"engine": "harmonic", "N": 3, "colour": 1}, "colour"),
    ({"engine": "warp", "N": 3}, "engine"),
    ({"engine": "harmonic"}, "N"),
    ({"engine": "quantum", "N": 3}, "model"),
    ({"engine": "semiclassical-jc", "N": 3, "U": 1.0}, "U"),
    ({"engine": "semiclassical-bh", "N": 3, "g": 1.0}, "g"),
    ({"engine": "semiclassical-bh", "N": 3, "sector": True}, "sector"),
    ({"engine": "harmonic", "N": 3, "disorder": {"delta_w": 1}}, "disorder.delta_w"),
    ({"engine": "harmonic", "N": 3, "Np": 2.5}, "Np"),
    ({"engine": "harmonic", "N": 3, "connectivity": {"type": "finite_range", "D": 0}}, "connectivity"),
    ({"engine": "lindblad", "model": "bh", "N": 3, "rates": {"gamma": 0.1}}, "rates"),
    ({"engine": "harmonic", "N": 3, "integrator": {"method": "euler"}}, "integrator"),
])
def test_invalid_configs_name_the_field(raw, field):
    with pytest.raises(ConfigError) as e:
        build_config(raw)
    assert e.value.field == field


def test_flag_overrides_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"engine": "semiclassical-jc", "N": 4, "g": 2}))
    assert parse_config(p, {"g": 40}).g == 40
    assert parse_config(p).g == 2
    assert parse_config(p, {"D": 1}).network.D == 1
    assert parse_config(p, {"kappa": None}).rates is None


def test_overrides_build_nested_blocks():
    m = merge_overrides({"engine": "lindblad", "N": 2}, {"kappa": 0.1, "delta_J": 0.2, "all_to_all": True})
    assert m["rates"] == {"kappa": 0.1} and m["disorder"] == {"delta_J": 0.2}


def test_roundtrip_through_dict():
    cfg = build_config({"engine": "lindblad", "model": "jc", "N": 3, "Np": 5, "g": 2,
                        "rates": {"kappa": 0.01, "gamma": 0.01}, "connectivity": {"type": "finite_range", "D": 1}})
    assert build_config(cfg.to_dict()) == cfg


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{engine: harmonic")
    with pytest.raises(ConfigError):
        parse_config(p)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = _run(["run", "--engine", "harmonic", "--N", "50", "--Np", "10", "--all-to-all",
                            "--samples", "2001", "--out", str(out)], capsys)
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["eta"] == pytest.approx(0.9216, abs=1e-4)
    assert s["config"]["N"] == 50 and s["seed"] == 0 and "version" in s
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0].startswith("# qnet") and json.loads(lines[1][len("# config: "):])["N"] == 50
    assert lines[2].split(",")[:3] == ["t", "P", "n_0"]
    assert len(lines) == 3 + 2001


def test_cli_jc_columns_and_determinism(tmp_path, capsys):
    args = ["run", "--engine", "semiclassical-jc", "--N", "3", "--Np", "4", "--g", "1.5", "--D", "1",
            "--t-max", "2", "--samples", "201"]
    assert _run(args + ["--out", str(tmp_path / "a")], capsys)[0] == 0
    assert _run(args + ["--out", str(tmp_path / "b")], capsys)[0] == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    header = a.decode().splitlines()[2].split(",")
    assert header == ["t", "P", "n_0", "n_1", "n_2", "sz_0", "sz_1", "sz_2"]


def test_cli_lindblad_has_Z_column(tmp_path, capsys):
    code, _, _ = _run(["run", "--engine", "lindblad", "--model", "jc", "--N", "2", "--Np", "1", "--g", "1",
                       "--kappa", "0.1", "--t-max", "1", "--samples", "11", "--out", str(tmp_path)], capsys)
    assert code == 0
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[2].split(",")
    assert header[:3] == ["t", "P", "Z"]


def test_cli_errors_are_json(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"engine": "lindblad", "model": "jc", "N": 3}))
    code, _, err = _run(["run", "--config", str(p)], capsys)
    assert code == 2
    assert json.loads(err)["error"]["field"] == "rates"
    code, _, err = _run(["run", "--engine", "quantum", "--model", "jc", "--N", "10", "--Np", "10",
                         "--g", "1", "--out", str(tmp_path / "q")], capsys)
    assert code == 1
    assert json.loads(err)["error"]["type"] == "DimensionError"
    code, _, err = _run(["run", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 2


def test_cli_validate(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"engine": "semiclassical-jc", "N": 4, "g": 2}))
    code, out, _ = _run(["validate", "--config", str(p), "--g", "40"], capsys)
    assert code == 0 and json.loads(out)["config"]["g"] == 40


def test_cli_sweep(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("QNET_THREADS", "2")
    plan = {"base": {"engine": "harmonic", "N": 2, "Np": 10}, "axes": [{"name": "N", "range": [2, 8]}]}
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(plan))
    code, out, _ = _run(["sweep", "--config", str(p), "--out", str(tmp_path / "s")], capsys)
    assert code == 0 and json.loads(out)["points"] == 7
    rows = (tmp_path / "s" / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("N,eta_mean") and len(rows) == 8
    meta = json.loads((tmp_path / "s" / "sweep.json").read_text())
    assert meta["engine"] == "harmonic" and len(meta["wall_time"]) == 7


def test_cli_oracle(tmp_path, capsys):
    code, out, _ = _run(["oracle", "--suite", "linear-limit", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.count("PASS") == 4
    assert json.loads((tmp_path / "oracle.json").read_text())["passed"]
    code, _, err = _run(["oracle", "--suite", "nope"], capsys)
    assert code == 2
