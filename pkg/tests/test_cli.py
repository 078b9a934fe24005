import csv
import io
import json
import subprocess
import sys

import pytest

from mcbeam.cli import CSV_COLUMNS, UsageError, load_config, main, parse_int_list, parse_power
from mcbeam.core import PerAntenna, SolverConfig, SumPower

GOLDEN_HEADER = "trial,N,M,K,solver,lambda_final,t_repeat,min_snr_db,wall_ms,sca_iters,converged"


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def strip_wall(text):
    lines = text.splitlines()
    i = lines[0].split(",").index("wall_ms")
    return [",".join(c for k, c in enumerate(l.split(",")) if k != i) for l in lines]


def test_golden_header():
    assert ",".join(CSV_COLUMNS) == GOLDEN_HEADER


def test_gen_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        code, _ = run("gen", "--n", "10", "--m", "50", "--power", "sum:10", "--seed", "7",
                      "--out", str(p))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    d = json.loads(a.read_text())
    assert d["N"] == 10 and d["M"] == 50 and d["power"] == {"type": "sum", "P": 10.0}


def test_gen_massive_instance():
    code, text = run("gen", "--n", "200", "--m", "50", "--power", "per:0.5", "--seed", "1")
    assert code == 0
    d = json.loads(text)
    assert d["power"]["type"] == "per" and d["power"]["P"] == [0.5] * 200
    assert len(d["H"]) == 50 and len(d["H"][0]) == 200


def test_missing_n_is_usage_error(capsys):
    code, _ = run("gen", "--m", "5")
    assert code == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ("gen", "--n", "4"),
    ("gen", "--n", "4", "--m", "2", "--power", "max:3"),
    ("gen", "--n", "4", "--m", "2", "--power", "per:1,2"),
    ("sweep", "--n", "4", "--m", "2"),
    ("sweep", "--n", "4", "--m", "2", "--k", "2", "--solver", "newton"),
    ("sweep", "--n", "4", "--m", "2", "--k-list", "2-x"),
    ("solve", "--m", "3"),
    ("bench", "--scenario", "nowhere"),
    ("nosuch",),
])
def test_usage_errors(argv):
    assert run(*argv)[0] == 2


def test_solve_penalized_from_file(tmp_path):
    inst = tmp_path / "i.json"
    run("gen", "--n", "4", "--m", "3", "--seed", "2", "--out", str(inst))
    out = tmp_path / "r.csv"
    code, _ = run("solve", "--instance", str(inst), "--lambda", "0.1", "--solver",
                  "spmp,admm", "--out", str(out))
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == GOLDEN_HEADER
    rows = rows_of(text)
    assert [r["solver"] for r in rows] == ["spmp", "admm"]
    side = json.loads((tmp_path / "r.json").read_text())
    assert side["config"]["admm_rho"] == 3.0
    assert side["columns"] == list(CSV_COLUMNS)
    for r in side["rows"]:
        tr = r["objective_trace"]
        assert len(tr) == r["sca_iters"] + 1
        assert r["min_snr_db"] == pytest.approx(10 * __import__("math").log10(r["min_snr"]))


def test_solve_select_and_failure_exit(tmp_path):
    code, text = run("solve", "--n", "5", "--m", "4", "--k", "2")
    assert code == 0
    r = rows_of(text)[0]
    assert r["K"] == "2" and r["converged"] in ("true", "false")
    assert int(r["t_repeat"]) >= 1
    code, text = run("solve", "--n", "5", "--m", "4", "--k", "9")
    assert code == 1
    assert rows_of(text)[0]["converged"] == "false"


def test_row_formats():
    code, text = run("sweep", "--n", "5", "--m", "4", "--k-list", "2,3", "--trials", "2",
                     "--workers", "1")
    assert code == 0
    rows = rows_of(text)
    assert [(r["trial"], r["K"]) for r in rows] == [("0", "2"), ("0", "3"), ("1", "2"),
                                                   ("1", "3")]
    for r in rows:
        assert len(r["min_snr_db"].split(".")[1]) == 6
        assert len(r["wall_ms"].split(".")[1]) == 3
        float(r["lambda_final"])


def test_oracle_cap_row_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"oracle_cap": 10}))
    out = tmp_path / "o.csv"
    code, _ = run("oracle", "--n", "6", "--m", "2", "--k-list", "1,3", "--config", str(cfg),
                  "--out", str(out))
    assert code == 0
    rows = rows_of(out.read_text())
    assert rows[0]["converged"] == "true" and rows[1]["converged"] == "false"
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["rows"][1]["error"].startswith("OracleCapExceeded")


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"max_bisection_steps": 3, "admm_rho": 0.5}))
    c = load_config(str(cfg), {"max_bisection_steps": 2, "lambda_ub": None})
    assert c.max_bisection_steps == 2 and c.admm_rho == 0.5 and c.lambda_ub == 1.0
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(UsageError):
        load_config(str(cfg), {})
    cfg.write_text(json.dumps({"admm_rho": -1}))
    with pytest.raises(UsageError):
        load_config(str(cfg), {})


def test_scenario_preset_sits_below_file_and_flags(tmp_path):
    base = {"max_prox_iters": 10, "max_bisection_steps": 5}
    assert load_config(None, {}, base).max_prox_iters == 10
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"max_prox_iters": 40}))
    c = load_config(str(cfg), {"max_bisection_steps": 7}, base)
    assert c.max_prox_iters == 40 and c.max_bisection_steps == 7
    assert load_config(None, {}).max_prox_iters == SolverConfig().max_prox_iters


def test_massive_bench_records_preset(tmp_path):
    out = tmp_path / "m.csv"
    code = main(["bench", "--scenario", "massive", "--trials", "1", "--n-list", "6",
                 "--m", "4", "--k-list", "2", "--out", str(out)], stdout=io.StringIO())
    assert code == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["config"]["max_prox_iters"] == 10
    assert meta["config"]["lambda_ub"] == 2.0


def test_parsers():
    assert parse_power("sum:10", 3) == SumPower(10.0)
    assert parse_power("per:0.5", 2) == PerAntenna((0.5, 0.5))
    assert parse_power("per:1,2", 2) == PerAntenna((1.0, 2.0))
    assert parse_int_list("2-4,7") == [2, 3, 4, 7]
    with pytest.raises(UsageError):
        parse_power("sum:", 2)


def test_batch_determinism(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"s{i}.csv"
        code, _ = run("bench", "--scenario", "traditional", "--n-list", "6", "--m", "5",
                      "--k-list", "2,3", "--trials", "2", "--workers", "2", "--out", str(p))
        assert code == 0
        outs.append(p.read_text())
    assert strip_wall(outs[0]) == strip_wall(outs[1])
    rows = rows_of(outs[0])
    assert {r["solver"] for r in rows} == {"admm", "spmp"}


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mcbeam", "gen", "--n", "2", "--m", "1"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["N"] == 2
