import json
from pathlib import Path

import pytest
import yaml

from anisolap.cli import build_report, main, payload_bytes, sweep_grid
from anisolap.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _inline(family="linear", T=2, lam=1.0, **extra):
    return parse_config({"instance": {"family": family, "T": T, "lambda": lam}, **extra})


def test_load_shipped_configs():
    for path in CONFIGS.glob("*.yaml"):
        cfg = load_config(path)
        assert cfg.source == str(path)
        cfg.instance.build()


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config({"instance": {"family": "linear", "T": 2}, "solvr": {}})
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config({"instance": {"family": "linear", "T": 2, "lam": 1}})
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config({"instance": {"family": "linear", "T": 2}, "solver": {"tolerance": 1}})


@pytest.mark.parametrize(
    "raw",
    [
        {},
        {"instance": {"family": "linear"}},
        {"instance": {"family": "linear", "T": 0}},
        {"instance": {"family": "linear", "T": 2, "lambda": -1}},
        {"instance": {"family": "linear", "T": 2}, "seed": -3},
        {"instance": {"family": "linear", "T": 2}, "sweep": {"n_points": 1}},
        {"instance": {"family": "linear", "T": 2}, "cascade": {"c_seq": [0.1, 0.2]}},
        {"instance": "does/not/exist.yaml"},
        {"instance": {"family": "linear", "T": 2}, "format": "xml"},
    ],
)
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_instance_file_reference(tmp_path):
    (tmp_path / "inst.yaml").write_text(yaml.safe_dump({"family": "linear", "T": 3, "lambda": 2.0}))
    (tmp_path / "run.yaml").write_text(yaml.safe_dump({"instance": "inst.yaml"}))
    cfg = load_config(tmp_path / "run.yaml")
    assert cfg.instance.T == 3 and cfg.instance.lam == 2.0


def test_exponent_profiles():
    cfg = parse_config({"instance": {"family": "linear", "T": 2, "exponents": {"values": [3, 2, 3, 2]}}})
    assert cfg.instance.build().exponents.values == (3, 2, 3, 2)
    with pytest.raises(ConfigError):
        parse_config({"instance": {"family": "linear", "T": 2, "exponents": {"values": [3, 2]}}}).instance.build()


def test_sweep_grid_clamped_and_fallback():
    lams, fb = sweep_grid(1.0, 100.0, 9, 0.01, (0.1, 10))
    assert not fb and len(lams) == 9
    assert lams[0] == pytest.approx(1.01) and lams[-1] == pytest.approx(99.0)
    lams, fb = sweep_grid(0.0, float("inf"), 5, 0.01, (0.1, 10))
    assert fb and lams[0] == pytest.approx(0.1) and lams[-1] == pytest.approx(10)
    assert sweep_grid(2.0, 1.0, 5, 0.01, (0.1, 10))[0] == []


def test_theory_on_linear_reports_empty_interval():
    rep, _, code = build_report("theory", _inline("linear", T=9))
    res = rep["payload"]["result"]
    assert code == 0
    assert res["kappa"] == pytest.approx(2 / 10)
    assert "jz" in res["embedding_bounds"]
    assert res["interval_thm_main"]["nonempty"] is False
    assert "empty" in res["diagnosis"]


def test_report_is_self_describing():
    rep, _, _ = build_report("solve", _inline("linear", T=4))
    p = rep["payload"]
    assert p["instance"] == {"family": "linear", "T": 4, "lambda": 1.0, "params": {}, "exponents": None}
    assert p["status"] == "ok" and p["result"]["converged"]
    assert set(rep["metadata"]) >= {"timestamp", "elapsed_s", "version"}


def _bad():
    cfg = _inline("linear", T=2)
    cfg.instance.exponents = {"constant": 1.0}
    return cfg


def test_invalid_instance_exit_code():
    rep, _, code = build_report("solve", _bad())
    assert code == 1 and rep["payload"]["status"] == "invalid"


def test_validate_command_reports_violation():
    rep, _, code = build_report("validate", _bad())
    assert code == 1 and any("exponent" in e for e in rep["payload"]["errors"])


@pytest.mark.parametrize("command", ["validate", "theory", "solve", "multistart", "example"])
def test_payload_deterministic(command):
    cfg = _inline("polynomial", T=3, lam=5.0)
    cfg.instance.params = {"coefficients": [0.0, 1.0, 0.0, -1.0]}
    cfg.solver.n_starts = 6
    a = payload_bytes(build_report(command, cfg)[0])
    b = payload_bytes(build_report(command, cfg)[0])
    assert a == b


def test_main_writes_json_and_csv(tmp_path):
    out = tmp_path / "r.json"
    code = main(["solve", "--family", "linear", "--T", "9", "--out", str(out), "--format", "both"])
    assert code == 0
    data = json.loads(out.read_text())
    u = data["payload"]["result"]["solution"]["u"]
    assert u[5] == pytest.approx(12.5)
    assert (tmp_path / "r_solutions.csv").read_text().startswith("index,level")


def test_main_config_error_exit(tmp_path, capsys):
    code = main(["theory", "--config", str(tmp_path / "missing.yaml")])
    assert code == 1
    assert json.loads(capsys.readouterr().out)["payload"]["status"] == "invalid"


def test_main_unknown_family(capsys):
    assert main(["theory", "--family", "nope"]) == 1


def test_example_command(capsys):
    assert main(["example", "--family", "example_esempio(3)"]) == 0
    res = json.loads(capsys.readouterr().out)["payload"]["result"]
    assert res["upper_decreasing"] and res["lower_increasing"] and res["nu"] == 4
    assert res["probe"]["negative"] and res["probe"]["bound_holds"]
