import json

import pytest

from mctou.cli import main
from mctou.files import load_params, params_from_dict, parse_contracts
from mctou.model import InvalidParameters, table1_params

TABLE1 = "configs/table1.json"


@pytest.fixture(autouse=True)
def _repo_root(monkeypatch, request):
    monkeypatch.chdir(request.config.rootpath)


def test_validate(capsys):
    assert main(["validate", "--params", TABLE1]) == 0
    assert "valid" in capsys.readouterr().out


def test_validate_rejects_bad_file(tmp_path, capsys):
    doc = table1_params().to_dict()
    doc["rho12"] = 1.0
    doc["extra"] = 3
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--params", str(path)]) == 1
    assert "unknown parameter key 'extra'" in capsys.readouterr().err


def test_param_file_roundtrip():
    assert load_params(TABLE1) == table1_params()
    assert load_params("table1") == table1_params()
    with pytest.raises(InvalidParameters, match="missing"):
        params_from_dict({"kappa": 1.0})


def test_parse_contracts():
    cs = parse_contracts("T1, t3,0.5")
    assert [c.maturity for c in cs] == [1 / 12, 3 / 12, 0.5]
    with pytest.raises(ValueError):
        parse_contracts("T1,,T2")
    with pytest.raises(ValueError):
        parse_contracts("T9")


def test_ce_single(capsys):
    code = main(["ce", "--params", TABLE1, "--contracts", "T1", "--gamma", "1", "--horizon", "0.08333"])
    out = capsys.readouterr().out
    assert code == 0
    scaled = float(out.split("excess_x1e-4=")[1].split()[0])
    assert scaled == pytest.approx(0.502, rel=0.01)


def test_ce_duplicate_contracts(capsys):
    assert main(["ce", "--params", TABLE1, "--contracts", "T1,T1"]) == 1
    assert "duplicate maturity" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["ce", "--nope"]) == 64
    assert main(["frobnicate"]) == 64


def test_numerical_failure_exit_code(capsys):
    assert main(["strategy", "--contracts", "0.1,0.100000001", "--horizon", "0.05"]) == 2


def test_strategy_csv(capsys):
    assert main(["strategy", "--contracts", "T1,T2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,pi_1,pi_2,lambda_sq,cond_number"
    assert len(lines) == 23


def test_curve_csv(capsys):
    assert main(["curve", "--contracts", "T1,T2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,maturity,a1,a2,a3,beta,price"
    # T1 rows up to its maturity (22), T2 rows on the whole 2-month grid (43).
    assert len(lines) == 1 + 22 + 43


def test_price_json(capsys):
    assert main(["price", "--contracts", "T1", "--format", "json", "--x", "1,0.5,0.5", "--t", "0.08333333333333333"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert float(doc[0]["price"]) == pytest.approx(2.718281828459045, rel=1e-15)


def test_simulate_writes_outputs_and_manifest(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--paths", "3", "--seed", "9", "--out", str(out)]) == 0
    header = (out / "simulate.csv").read_text().splitlines()[0]
    assert header == "path_id,t,x1,x2,x3,F1,F2,F3,pi1,pi2,pi3,wealth"
    sidecar = json.loads((out / "simulate.json").read_text())
    assert sidecar["seed"] == 9 and sidecar["grid"]["n_steps"] == 21
    manifest = json.loads((out / "manifest-simulate.json").read_text())
    assert manifest["params"]["kappa"] == 5.0 and "numpy" in manifest["versions"]
    assert set(manifest["outputs"]) == {"simulate.csv", "simulate.json"}
    assert not list(out.glob(".*.tmp"))


def test_simulate_byte_identical_across_runs_and_workers(tmp_path):
    for name, workers in (("a", "1"), ("b", "1"), ("c", "4")):
        assert main(["simulate", "--paths", "9000", "--seed", "5", "--workers", workers,
                     "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "simulate.csv").read_bytes()
    assert a == (tmp_path / "b" / "simulate.csv").read_bytes()
    assert a == (tmp_path / "c" / "simulate.csv").read_bytes()


def test_ce_table_outputs(tmp_path, capsys):
    assert main(["ce-table", "--out", str(tmp_path)]) == 0
    diff = (tmp_path / "ce_table_diff.csv").read_text().splitlines()
    assert len(diff) == 64 and "FAIL" not in "".join(diff)
    assert (tmp_path / "ce_table.csv").read_text().startswith("rho12,rho13,T1,T2,T3,")


def test_figures_unknown_tag():
    assert main(["figures", "--which", "fig7"]) == 64


def test_figures_and_verify_mc(tmp_path):
    assert main(["figures", "--which", "fig2,fig4", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig2.csv").exists() and (tmp_path / "fig4.csv").exists()
    assert main(["verify-mc", "--paths", "2000", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verify_mc.json").read_text())
    assert report["n_paths"] == 2000 and "closed_form" in report
