import csv
import json

import pytest

from spectralhmm.cli import main
from spectralhmm.systems import get_example


@pytest.fixture
def seq_file(tmp_path):
    p = tmp_path / "seq.json"
    assert main(["simulate", "--example", "low-a", "--length", "3000", "--seed", "4", "--out", str(p)]) == 0
    return p


def test_simulate_stdout_csv(capsys):
    assert main(["simulate", "--example", "med-b", "--length", "20", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.split()
    assert lines[0] == "symbol" and len(lines) == 21
    assert all(1 <= int(v) <= 10 for v in lines[1:])


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        main(["simulate", "--example", "low-b", "--length", "100", "--seed", "9", "--format", "csv", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_moments_from_sequence_and_model(tmp_path, seq_file, capsys):
    out = tmp_path / "m.json"
    assert main(["moments", "--sequence", str(seq_file), "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["n"] == 2998 and d["Y"] == 3
    assert main(["moments", "--example", "low-a"]) == 0
    assert json.loads(capsys.readouterr().out)["n"] == 0


def test_sl_from_exact_moments(tmp_path, capsys):
    m = tmp_path / "m.json"
    main(["moments", "--example", "low-a", "--out", str(m)])
    assert main(["sl", "--moments", str(m), "--example", "low-a", "--seed", "3"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["aligned"]["mse_O"] < 1e-12
    assert d["validity"]["stochastic_valid"] is True


def test_sl_csv(seq_file, capsys):
    assert main(["sl", "--sequence", str(seq_file), "--states", "3", "--format", "csv"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 9 + 9 + 3
    assert set(rows[0]) == {"matrix", "row", "col", "real", "imag"}


def test_sl_needs_states(seq_file, capsys):
    assert main(["sl", "--sequence", str(seq_file)]) == 2
    assert "--states" in capsys.readouterr().err


@pytest.mark.parametrize("init", ["random", "true"])
def test_em(seq_file, capsys, init):
    assert main(["em", "--sequence", str(seq_file), "--example", "low-a", "--model-init", init, "--max-iter", "20"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert 1 <= d["iterations"] <= 20
    assert len(d["log_likelihood_trace"]) == d["iterations"]


def test_em_init_file(tmp_path, seq_file, capsys):
    init = tmp_path / "init.json"
    init.write_text(json.dumps(get_example("low-b").model.to_dict()))
    assert main(["em", "--sequence", str(seq_file), "--states", "3", "--model-init", "file", "--init-file", str(init), "--max-iter", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["iterations"] <= 3


def test_cond_all(capsys):
    assert main(["cond", "--all"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 8 and rows[0]["example_id"] == "low-a"


def test_invalid_model_file_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"T": [[0.6, 0.5], [0.6, 0.5]], "O": [[1, 0], [0, 1]], "pi0": [0.5, 0.5]}))
    assert main(["cond", "--model", str(p)]) == 2
    report = json.loads(capsys.readouterr().err)["report"]
    assert report["violations"][0]["constraint"] == "column_sum"


def test_missing_file(capsys):
    assert main(["cond", "--model", "/nonexistent/model.json"]) == 2


def test_bench_and_summarize(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--examples", "low-a", "high-a", "--sample-sizes", "1000", "3000", "--repetitions", "2",
                 "--algorithms", "SL", "EM-random", "--em-max-iter", "5", "--quiet", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 2 * 2 * 2
    capsys.readouterr()

    prefix = tmp_path / "s"
    assert main(["summarize", "--input", str(out), "--out", str(prefix)]) == 0
    text = capsys.readouterr().out
    assert "Spearman" in text and "high-a" in text
    for part in ("mse", "invalid", "cond"):
        assert (tmp_path / f"s_{part}.csv").exists()
    with open(tmp_path / "s_mse.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2 * 2 * 2


def test_bench_bad_config(capsys):
    assert main(["bench", "--examples", "low-a", "--sample-sizes", "100", "--repetitions", "0", "--quiet"]) == 2
    assert main(["bench", "--examples", "no-such-example", "--sample-sizes", "100", "--quiet"]) == 2


def test_summarize_json(tmp_path, capsys):
    out = tmp_path / "b.csv"
    main(["bench", "--examples", "low-a", "--sample-sizes", "500", "--repetitions", "2", "--quiet", "--out", str(out)])
    capsys.readouterr()
    assert main(["summarize", "--input", str(out), "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["table_N"] == 500 and len(d["validity_table"]) == 1
