import json
import subprocess
import sys

import numpy as np
import pytest

from multibaker import cli
from multibaker.cli import ExperimentConfig, main, read_table, run_experiment


def run_csv(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = main(["run", *args, "--out", str(out)])
    assert code == 0
    return read_table(str(out))


def floats(rows, col):
    return np.array([float(r[col]) if r[col] != "" else np.nan for r in rows])


def test_quantum_trace_columns_and_positive_branch(tmp_path):
    meta, cols, rows = run_csv(tmp_path, "quantum-trace", "--dim", "32", "--d1", "30")
    assert cols == ["t", "J", "J_smooth", "mean_x"]
    assert len(rows) == 450 and rows[0][0] == "1" and rows[-1][0] == "450"
    t = floats(rows, 0)
    smoothed = floats(rows, 2)
    assert np.all(np.isnan(smoothed[t < 20]))
    assert np.all(smoothed[t >= 100] > 0)
    j = floats(rows, 1)
    assert abs(j.sum() - floats(rows, 3)[-1]) <= 1e-10
    assert meta["summary"]["J_avg"] > 0
    assert meta["summary"]["stationarity"]["stationary"]


def test_quantum_trace_symmetric_null(tmp_path):
    _, _, rows = run_csv(tmp_path, "quantum-trace", "--dim", "32", "--d1", "16")
    assert np.max(np.abs(floats(rows, 1))) <= 1e-10


def test_quantum_trace_negative_branch():
    table = run_experiment(ExperimentConfig(kind="quantum-trace", dim=32, d1=17))
    assert table.summary["J_avg"] < 0


def test_snapshot_time_zero(tmp_path):
    _, cols, rows = run_csv(tmp_path, "quantum-snapshot", "--time", "0")
    assert cols == ["m", "P"]
    assert len(rows) == 1 and rows[0][0] == "0"
    assert float(rows[0][1]) == pytest.approx(1.0, abs=1e-14)


def test_snapshot_at_200(tmp_path):
    meta, _, rows = run_csv(tmp_path, "quantum-snapshot", "--dim", "32", "--d1", "30", "--time", "200")
    m, p = floats(rows, 0), floats(rows, 1)
    assert len(rows) == 401
    assert np.count_nonzero(p) <= 401
    assert abs(p.sum() - 1) <= 1e-10
    assert np.dot(m, p) > 0
    assert meta["summary"]["mean_x"] == pytest.approx(np.dot(m, p), abs=1e-12)


def test_sweep_dim_rules():
    up = run_experiment(ExperimentConfig(kind="sweep-dim", rule="d1=D-2", dims=[64, 16, 32]))
    down = run_experiment(ExperimentConfig(kind="sweep-dim", rule="d1=D/2+1", dims=[16, 32, 64]))
    assert [r[0] for r in up.rows] == [16, 32, 64]
    assert [r[1] for r in up.rows] == [14, 30, 62]
    up_j = np.array([r[3] for r in up.rows])
    down_j = np.array([r[3] for r in down.rows])
    assert np.all(up_j > 0) and np.all(down_j < 0)


def test_sweep_dim_degenerate_dim_four():
    table = run_experiment(ExperimentConfig(kind="sweep-dim", rule="d1=D-2", dims=[4]))
    assert table.rows[0][:3] == (4, 2, 0.5)
    assert abs(table.rows[0][3]) <= 1e-10


def test_sweep_dim_rejects_odd(tmp_path, capsys):
    assert main(["run", "sweep-dim", "--dims", "16", "33"]) == 2
    assert "even" in capsys.readouterr().err


def test_sweep_s_rows_and_mirror():
    table = run_experiment(ExperimentConfig(kind="sweep-s", dim=16))
    assert [r[1] for r in table.rows] == list(range(8, 16))
    assert abs(table.rows[0][3]) <= 1e-10
    below = run_experiment(ExperimentConfig(kind="sweep-s", dim=16, d1_values=[1, 3, 7]))
    above = {r[1]: r[3] for r in table.rows}
    for d, d1, s, j in below.rows:
        assert j == pytest.approx(-above[16 - d1], abs=1e-9)


def test_sweep_parallel_matches_serial():
    kw = dict(kind="sweep-s", dim=8, d1_values=[7, 5, 6], steps=120, avg_from=20, avg_to=120)
    serial = run_experiment(ExperimentConfig(**kw))
    par = run_experiment(ExperimentConfig(**kw, parallel=2))
    assert serial.rows == par.rows
    assert [r[1] for r in serial.rows] == [5, 6, 7]


def test_classical_trace_single_particle(tmp_path):
    meta, cols, rows = run_csv(
        tmp_path, "classical-trace", "--s", "0.6", "--samples", "1", "--steps", "50",
        "--avg-from", "10", "--avg-to", "50", "--region", "full",
    )
    assert cols == ["t", "J_class", "stderr"]
    assert set(np.abs(floats(rows, 1))) == {1.0}
    assert meta["summary"]["s"] == 0.6


def test_classical_trace_defaults_s_from_dims():
    table = run_experiment(
        ExperimentConfig(kind="classical-trace", dim=32, d1=17, samples=2000, steps=30, avg_from=5, avg_to=30)
    )
    assert table.summary["s"] == 17 / 32
    assert table.summary["region"] == "box:0.0,1.0,0.46875,0.53125"


def test_symmetry_check(tmp_path):
    _, cols, rows = run_csv(tmp_path, "symmetry-check", "--dim", "8", "--d1", "5", "--steps", "50")
    assert cols == ["D", "D1", "steps", "max_deviation"]
    assert float(rows[0][3]) <= 1e-10


def test_byte_identical_outputs(tmp_path):
    args = ["run", "classical-trace", "--samples", "3000", "--steps", "40", "--avg-from", "5", "--avg-to", "40"]
    a, b = tmp_path / "a.csv", tmp_path / "a2.csv"
    assert main([*args, "--out", str(a)]) == 0
    first = a.read_bytes()
    a.rename(b)
    assert main([*args, "--out", str(a)]) == 0
    assert a.read_bytes() == first


def test_config_round_trip(tmp_path):
    meta, _, rows = run_csv(tmp_path, "quantum-trace", "--dim", "16", "--d1", "13", "--steps", "120")
    config = ExperimentConfig.from_dict(meta["config"])
    assert config.dim == 16 and config.steps == 120
    config.out = str(tmp_path / "again.csv")
    table = run_experiment(config)
    again = [[cli._cell(v) for v in row] for row in table.rows]
    assert again == rows


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "quantum-trace", "dim": 8, "d1": 5, "steps": 60, "smooth": 5}))
    meta, _, rows = run_csv(tmp_path, "quantum-trace", "--config", str(cfg), "--d1", "6")
    assert meta["config"]["d1"] == 6 and meta["config"]["dim"] == 8
    assert len(rows) == 60


def test_json_format(tmp_path):
    out = tmp_path / "o.json"
    assert main(["run", "sweep-s", "--dim", "8", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["columns"] == ["D", "D1", "s", "J_avg"]
    assert len(doc["rows"]) == 4
    assert doc["metadata"]["kind"] == "sweep-s"


def test_timing_only_when_requested(tmp_path):
    meta, _, _ = run_csv(tmp_path, "symmetry-check", "--dim", "4", "--d1", "3", "--steps", "5")
    assert "wall_time_s" not in meta
    meta, _, _ = run_csv(tmp_path, "symmetry-check", "--dim", "4", "--d1", "3", "--steps", "5", "--record-timing")
    assert meta["wall_time_s"] >= 0


@pytest.mark.parametrize(
    "args",
    [
        ["quantum-trace", "--dim", "31", "--d1", "5"],
        ["quantum-trace", "--dim", "8", "--d1", "8"],
        ["classical-trace", "--region", "ring"],
        ["classical-trace", "--s", "1.5"],
        ["quantum-trace", "--steps", "0"],
        ["sweep-s", "--dim", "8", "--d1-values", "9"],
        ["sweep-dim", "--avg-from", "400", "--avg-to", "100"],
    ],
)
def test_invalid_config_exit_code(args):
    assert main(["run", *args]) == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dimension": 8}))
    assert main(["run", "quantum-trace", "--config", str(cfg)]) == 2


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["run", "no-such-kind"])
    assert exc.value.code == 2


def test_missing_config_file_exit_code(tmp_path):
    assert main(["run", "quantum-trace", "--config", str(tmp_path / "nope.json")]) == 3


def test_unwritable_output_exit_code(tmp_path, capsys):
    target = tmp_path / "missing-dir" / "out.csv"
    assert main(["run", "symmetry-check", "--dim", "4", "--d1", "3", "--steps", "3", "--out", str(target)]) == 3
    assert str(target) in capsys.readouterr().err


def test_invariant_violation_exit_code(monkeypatch):
    monkeypatch.setattr(cli, "check_s1_antisymmetry", lambda params, steps: 1e-3)
    assert main(["run", "symmetry-check", "--dim", "8", "--d1", "5", "--steps", "5"]) == 4


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "multibaker", "run", "quantum-snapshot", "--dim", "8", "--d1", "5",
         "--time", "3", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    meta, cols, rows = read_table(str(out))
    assert len(rows) == 7
