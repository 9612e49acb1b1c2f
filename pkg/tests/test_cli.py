"""Config-driven driver: schema validation, outputs, exit codes,
determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from sidestep.cli import main

BASE_CONFIG = {
    "schema": "sidestep-config/1",
    "seed": 20240901,
    "model": {
        "kind": "planted",
        "lambda0": 1.0,
        "lambda1": 4.0,
        "fixed_part": [0.5],
        "plants": [{"ell": 2.0, "amplitude": 5.0, "level": 1}],
    },
    "n_grid": [100, 200, 400],
    "m": 2000,
    "k_max": 18,
    "fit": {"r": 2},
    "detect": {"max_bases": 3},
    "estimate": {"theta": 0.3},
    "certify": {"D": 2, "L": [2.0], "epsilon": 0.5, "alpha": 2.0},
}


def write_config(tmp_path, overrides=None, drop=None, **extra):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    for key, value in (overrides or {}).items():
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
    for key in drop or []:
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node[part]
        del node[parts[-1]]
    cfg.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def run_cli(*args):
    return main([str(a) for a in args])


def test_run_produces_tables(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    for n in (100, 200, 400):
        path = out / f"trace_n{n}.csv"
        assert path.exists()
        lines = path.read_text().splitlines()
        assert lines[0] == "n,k,mean,stderr"
        assert len(lines) == 1 + 18
    assert (out / "run_summary.csv").exists()


def test_run_byte_identical_reruns(tmp_path):
    cfg = write_config(tmp_path)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli("run", "--config", cfg, "--out", out1) == 0
    assert run_cli("run", "--config", cfg, "--out", out2) == 0
    for path1 in sorted(out1.iterdir()):
        path2 = out2 / path1.name
        assert path1.read_bytes() == path2.read_bytes()


def test_run_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli("run", "--config", cfg, "--out", out1) == 0
    assert run_cli("run", "--config", cfg, "--out", out2, "--seed", 7) == 0
    assert (out1 / "trace_n100.csv").read_bytes() != (
        out2 / "trace_n100.csv"
    ).read_bytes()


def test_missing_required_field_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, drop=["model.lambda1"])
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "model" in err and "lambda1" in err


def test_unknown_field_rejected(tmp_path):
    cfg = write_config(tmp_path, overrides={"model.window": 3})
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 2


def test_bad_schema_version(tmp_path):
    cfg = write_config(tmp_path, overrides={"schema": "sidestep-config/2"})
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 2


def test_odd_certify_degree_exits_2(tmp_path):
    cfg = write_config(tmp_path, overrides={"certify.D": 3})
    assert run_cli("certify", "--config", cfg, "--out", tmp_path / "o") == 2


def test_analyze_before_run_exits_4(tmp_path):
    cfg = write_config(tmp_path)
    assert run_cli("analyze", "--config", cfg, "--out", tmp_path / "o") == 4


def test_analyze_reports_level_and_base(tmp_path):
    cfg = write_config(tmp_path, overrides={"m": 20000})
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    assert run_cli("analyze", "--config", cfg, "--out", out) == 0
    text = (out / "analysis.txt").read_text()
    assert "j=1" in text
    assert "ℓ≈2.00" in text
    amp = float(text.split("C≈")[1].split()[0])
    assert abs(amp - 5.0) / 5.0 <= 0.15
    expansion = (out / "expansion.csv").read_text().splitlines()
    assert expansion[0] == "k,c0,c1,residual"
    bases = (out / "bases.csv").read_text().splitlines()
    assert len(bases) == 2  # header plus the detected base
    records = json.loads((out / "detected_polyexp.json").read_text())
    assert "level_1" in records
    assert abs(records["level_1"][0]["re_base"] - 2.0) <= 0.01


def test_analyze_two_plants_sorted_by_modulus(tmp_path):
    cfg = write_config(
        tmp_path,
        overrides={
            "model.plants": [
                {"ell": 2.0, "amplitude": 5.0, "level": 1},
                {"ell": -3.0, "amplitude": 8.0, "level": 1},
            ],
            "m": 30000,
            "n_grid": [100, 200, 400, 800],
        },
    )
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    assert run_cli("analyze", "--config", cfg, "--out", out) == 0
    lines = [
        line
        for line in (out / "analysis.txt").read_text().splitlines()
        if line.startswith("j=")
    ]
    assert len(lines) == 2
    first = float(lines[0].split("ℓ≈")[1].split(",")[0])
    second = float(lines[1].split("ℓ≈")[1].split(",")[0])
    assert abs(first) > abs(second)


def test_shipped_demo_configs_validate():
    from pathlib import Path

    from sidestep.cli import load_experiment

    root = Path(__file__).resolve().parent.parent / "configs"
    for name in ("demo.json", "lift_demo.json"):
        exp = load_experiment(root / name)
        assert exp.n_grid[0] >= 1


def test_env_var_threads(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv("SIDESTEP_THREADS", "0")
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 2
    monkeypatch.setenv("SIDESTEP_THREADS", "3")
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o2") == 0


def test_analyze_no_plants_reports_decay_regime(tmp_path):
    cfg = write_config(tmp_path, overrides={"model.plants": []})
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    assert run_cli("analyze", "--config", cfg, "--out", out) == 0
    text = (out / "analysis.txt").read_text()
    assert "no larger bases" in text
    assert "O(n^-j)" in text


def test_certify_demo_passes(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    assert run_cli("certify", "--config", cfg, "--out", out) == 0
    text = (out / "certify.txt").read_text()
    assert "PASS" in text
    assert "annihilator coefficients" in text
    csv = (out / "certificates.csv").read_text().splitlines()
    assert csv[0] == "kind,n,k,lhs,rhs,slack,passed"
    assert len(csv) > 3


def test_certify_missing_base_exits_5(tmp_path):
    cfg = write_config(tmp_path, overrides={"certify.L": []})
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    assert run_cli("certify", "--config", cfg, "--out", out) == 5
    text = (out / "certify.txt").read_text()
    assert "FAIL" in text
    assert "worst slack" in text
    assert "2.0" in text  # the flagged missing base


def test_report_consolidates(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    assert run_cli("analyze", "--config", cfg, "--out", out) == 0
    assert run_cli("report", "--config", cfg, "--out", out) == 0
    text = (out / "report.txt").read_text()
    assert "run_summary.csv" in text
    assert "analysis.txt" in text


def test_report_without_outputs_exits_4(tmp_path):
    cfg = write_config(tmp_path)
    assert run_cli("report", "--config", cfg, "--out", tmp_path / "o") == 4


def test_lift_run_writes_spectra(tmp_path):
    adjacency = [[0, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]]
    cfg = write_config(
        tmp_path,
        overrides={
            "model": {
                "kind": "lift",
                "base_adjacency": adjacency,
                "hashimoto": False,
            },
            "n_grid": [3, 5],
            "m": 2,
            "k_max": 2,
        },
        drop=["certify", "fit", "detect"],
    )
    out = tmp_path / "out"
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    for n in (3, 5):
        lines = (out / f"spectra_n{n}.csv").read_text().splitlines()
        assert lines[0] == "sample_id,re,im"
        assert len(lines) == 1 + 2 * 4 * (n - 1)  # m samples, v(n-1) rows each


def test_threads_flag_validated(tmp_path):
    cfg = write_config(tmp_path)
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o", "--threads", 0) == 2
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o2", "--threads", 2) == 0
