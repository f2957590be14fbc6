import json
from pathlib import Path

import numpy as np
import pytest

from wavedecay.cli import ConfigError, main, parse_config, run_diagnose, run_solve, run_sweep

BASE_CONFIG = """
[model]
d = 3
p = 3.0
gamma0 = 1.5
epsilon = 0.1

[data]
family = gaussian
amplitude = 1.0

[solver]
dr = 0.1
r_max = 30
t_final = 12
record_every = 2
node_stride = 1

[output]
csv_time_stride = 10
csv_node_stride = 5
"""


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_and_defaults(tmp_path):
    cfg = parse_config(write_config(tmp_path, BASE_CONFIG))
    assert cfg["model"]["p"] == 3.0
    assert cfg["solver"]["cfl"] == 0.4  # default fills the gap
    assert cfg["analysis"]["fit_window_hi"] == 32.0


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(write_config(tmp_path, BASE_CONFIG.replace("record_every = 2", "record_every = 2\ndx = 3")))
    with pytest.raises(ConfigError, match="unknown config section"):
        parse_config(write_config(tmp_path, BASE_CONFIG + "\n[turbo]\nx = 1\n"))
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "missing.cfg")


def test_supercritical_power_rejected(tmp_path, capsys):
    bad = BASE_CONFIG.replace("p = 3.0", "p = 5.1")
    code = main(["solve", "--config", str(write_config(tmp_path, bad)), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "supercritical" in capsys.readouterr().err


def test_critical_power_accepted(tmp_path):
    ok = BASE_CONFIG.replace("p = 3.0", "p = 5.0").replace("gamma0 = 1.5", "gamma0 = 1.5")
    cfg = parse_config(write_config(tmp_path, ok))
    from wavedecay.cli import build_model

    params = build_model(cfg)
    assert params.p == 5.0


def test_gamma_window_enforced(tmp_path):
    bad = BASE_CONFIG.replace("gamma0 = 1.5", "gamma0 = 0.5")
    from wavedecay.cli import build_model

    with pytest.raises(ConfigError, match="window"):
        build_model(parse_config(write_config(tmp_path, bad)))
    # mode none disables the admissibility gate
    loose = bad.replace("[model]", "[model]\nmode = none").replace("epsilon = 0.1", "epsilon = 0.1")
    build_model(parse_config(write_config(tmp_path, loose)))


def test_solve_outputs_and_determinism(tmp_path):
    cfg_path = write_config(tmp_path, BASE_CONFIG)
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert main(["solve", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["solve", "--config", str(cfg_path), "--out", str(out2)]) == 0
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["config_hash"] == m2["config_hash"]
    assert m1["record_id"] == m2["record_id"]
    assert (out1 / "record.csv").read_bytes() == (out2 / "record.csv").read_bytes()
    assert (out1 / "record.npz").exists() and (out1 / "checkpoint.txt").exists()
    assert m1["E0"] == pytest.approx(6.254124, rel=1e-5)


def test_zero_amplitude_solve(tmp_path):
    cfg_path = write_config(tmp_path, BASE_CONFIG.replace("amplitude = 1.0", "amplitude = 0.0"))
    out = tmp_path / "zero"
    assert main(["solve", "--config", str(cfg_path), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["E0"] == 0.0
    from wavedecay.solver import load_record

    rec = load_record(out / "record.npz")
    assert not rec.phi.any()


@pytest.fixture(scope="module")
def solved_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("solved")
    cfg_path = write_config(tmp, BASE_CONFIG)
    out = tmp / "run"
    assert main(["solve", "--config", str(cfg_path), "--out", str(out)]) == 0
    return out


def test_diagnose_conservation(solved_dir, tmp_path):
    out = tmp_path / "diag"
    assert main(["diagnose", "--record", str(solved_dir), "--suite", "conservation",
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    item = report["items"]["conservation"]
    assert item["passed"] and item["drift"] < 5e-4
    assert (out / "energy_time.csv").exists()


def test_diagnose_error_items_do_not_abort(solved_dir, tmp_path):
    # exterior suite on compact data: zero fluxes make the fit impossible;
    # the failure must land in the item, not abort the batch
    out = tmp_path / "diag2"
    assert main(["diagnose", "--record", str(solved_dir), "--suite", "exterior",
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert "error" in report["items"]["exterior"]


def test_report_formats(solved_dir, tmp_path, capsys):
    out = tmp_path / "diag3"
    main(["diagnose", "--record", str(solved_dir), "--suite", "conservation", "--out", str(out)])
    assert main(["report", "--in", str(out), "--format", "json"]) == 0
    assert '"conservation"' in capsys.readouterr().out
    assert main(["report", "--in", str(out), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "item,key,value"
    assert any(line.startswith("conservation,drift,") for line in lines)


def test_sweep_single_cell_matches_solve(tmp_path):
    text = BASE_CONFIG + "\n[sweep]\np = 3.0\nsuite = conservation\n"
    cfg_path = write_config(tmp_path, text)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
    agg = json.loads((out / "sweep_report.json").read_text())
    assert len(agg["cells"]) == 1 and agg["cells"][0]["status"] == "ok"
    solo = tmp_path / "solo"
    cfg = parse_config(cfg_path)
    run_solve(cfg, solo)
    m_cell = json.loads((out / "cell_000" / "manifest.json").read_text())
    m_solo = json.loads((solo / "manifest.json").read_text())
    assert m_cell["record_id"] == m_solo["record_id"]


def test_sweep_invalid_cell_skipped(tmp_path):
    text = BASE_CONFIG + "\n[sweep]\np = 3.0, 9.0\nsuite = conservation\n"
    cfg_path = write_config(tmp_path, text)
    out = tmp_path / "sweep2"
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
    agg = json.loads((out / "sweep_report.json").read_text())
    statuses = {c["cell"]["p"]: c["status"] for c in agg["cells"]}
    assert statuses[3.0] == "ok" and statuses[9.0] == "skipped"
    skipped = [c for c in agg["cells"] if c["status"] == "skipped"][0]
    assert "supercritical" in skipped["reason"]
