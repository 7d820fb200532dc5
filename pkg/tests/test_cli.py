import csv
import json

import pytest

from dfsion.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_verify_algebra_passes_and_detects_mutation(capsys):
    code, out = run(capsys, "verify-algebra", "--trials", "20")
    assert code == 0 and "ALL PASS" in out.out
    assert "33:2" in out.out
    code, out = run(capsys, "verify-algebra", "--trials", "20", "--mutate", "kappa")
    assert code == 1 and "FAILURES PRESENT" in out.out


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["teleport"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--wrappers", "magic"])
    assert exc.value.code == 2
    code, out = run(capsys, "simulate", "--fock-dim", "0")
    assert code == 2 and "fock-dim" in out.err


def test_config_error_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("scenario: exchange\nmodel: exact\n", encoding="utf-8")
    code, out = run(capsys, "simulate", "--config", str(p))
    assert code == 2 and "bad.yaml:2" in out.err
    code, out = run(capsys, "simulate", "--config", str(tmp_path / "none.yaml"))
    assert code == 2


def test_simulate_writes_csv_and_json_reproducibly(tmp_path, capsys):
    args = ["simulate", "--scenario", "exchange", "--model", "effective", "--fock-dim", "2"]
    assert run(capsys, *args, "--out", str(tmp_path / "a"))[0] == 0
    assert run(capsys, *args, "--out", str(tmp_path / "b"))[0] == 0
    a = (tmp_path / "a" / "exchange_populations.csv").read_bytes()
    assert a == (tmp_path / "b" / "exchange_populations.csv").read_bytes()
    rows = list(csv.reader(a.decode("utf-8").splitlines()))
    assert rows[0] == ["time_s", "00", "01", "10", "11", "dfs4_weight"]
    last = [float(v) for v in rows[-1]]
    # a pi/2 exchange moves |10> to |01> completely
    assert last[2] == pytest.approx(1.0, abs=1e-9) and last[3] == pytest.approx(0.0, abs=1e-9)
    summary = json.loads((tmp_path / "a" / "exchange_final.json").read_text(encoding="utf-8"))
    assert summary["fidelity"] == pytest.approx(1.0, abs=1e-9)
    assert summary["pulse_area_two_body_pi"] == pytest.approx(1.0)
    assert len(summary["final_state"]["re"]) == 8


def test_simulate_with_config(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text("scenario: empty\ninitial: \"0110\"\nfock_dim: 1\noutput: {prefix: idle}\n", encoding="utf-8")
    code, _ = run(capsys, "simulate", "--config", str(p), "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "idle_final.json").read_text(encoding="utf-8"))
    assert summary["fidelity"] == 1.0 and summary["duration_s"] == 0


def test_cnot_table_effective(tmp_path, capsys):
    code, out = run(capsys, "cnot-table", "--model", "effective", "--wrappers", "ideal", "--fock-dim", "1",
                    "--out", str(tmp_path))
    assert code == 0
    table = json.loads((tmp_path / "cnot_table.json").read_text(encoding="utf-8"))
    assert [r["expected"] for r in table["rows"]] == ["0101", "0110", "1010", "1001"]
    assert table["min_fidelity"] > 0.9999
    code, _ = run(capsys, "cnot-table", "--model", "effective", "--fock-dim", "1", "--min-fidelity", "1.01")
    assert code == 1
    code, _ = run(capsys, "cnot-table", "--model", "effective", "--addressing-error", "0.9")
    assert code == 2


def test_dfs_memory(tmp_path, capsys):
    code, out = run(capsys, "dfs-memory", "--samples", "2000", "--seed", "1", "--out", str(tmp_path))
    assert code == 0
    res = json.loads((tmp_path / "dfs_memory.json").read_text(encoding="utf-8"))
    assert res["encoded"] == pytest.approx(1.0, abs=1e-9)
    assert res["bare"] == pytest.approx(0.5, abs=0.03)


def test_sweep(tmp_path, capsys):
    p = tmp_path / "s.yaml"
    p.write_text("scenario: exchange\ninitial: \"10\"\nmodel: effective\nfock_dim: 2\n"
                 "sweep: {axis: eta, values: [0.01, 0.0165]}\n", encoding="utf-8")
    code, _ = run(capsys, "sweep", "--config", str(p), "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.reader((tmp_path / "sweep_eta.csv").read_text(encoding="utf-8").splitlines()))
    assert rows[0] == ["eta", "fidelity", "duration_s", "leakage"] and len(rows) == 3
    assert float(rows[1][2]) > float(rows[2][2])
    code, _ = run(capsys, "sweep", "--out", str(tmp_path))
    assert code == 2


def test_hot_exchange_sweeps_fock_levels(tmp_path, capsys):
    p = tmp_path / "h.yaml"
    p.write_text("scenario: hot-exchange\ninitial: \"10\"\nmodel: effective\nfock_dim: 5\n", encoding="utf-8")
    code, out = run(capsys, "sweep", "--config", str(p), "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.reader((tmp_path / "sweep_fock.csv").read_text(encoding="utf-8").splitlines()))
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3"]
    assert all(float(r[1]) == pytest.approx(1.0, abs=1e-9) for r in rows[1:])
