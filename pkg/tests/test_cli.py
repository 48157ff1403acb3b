import json
import math

import pytest

from hypmnnr.cli import main

K = 4 * math.pi / 3 + math.sqrt(3) / 2
P_DEG = math.pi / K


def rows(text):
    body = [l for l in text.splitlines() if l and not l.startswith("#")]
    head = body[0].split(",")
    return [dict(zip(head, l.split(","))) for l in body[1:]]


def test_pair_fraction_analytic(capsys):
    assert main(["pair-fraction", "--lambda", "1", "--marks", "degenerate:mu=0.5", "--control", "full",
                 "--mode", "analytic"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# hypmnnr ")
    r = rows(out)
    assert r[0]["quantity"] == "pair_fraction_analytic"
    assert float(r[0]["mean"]) == pytest.approx(P_DEG, abs=1e-8)


def test_pair_fraction_empty_control(capsys):
    assert main(["pair-fraction", "--control", "empty"]) == 0
    assert float(rows(capsys.readouterr().out)[0]["mean"]) == 0.0


def test_pair_fraction_both_has_agreement(capsys):
    assert main(["pair-fraction", "--mode", "both", "--reps", "100", "--window", "20x20"]) == 0
    r = rows(capsys.readouterr().out)
    assert [x["quantity"] for x in r] == ["pair_fraction_analytic", "pair_fraction_sim"]
    assert r[1]["agree"] == "yes"


@pytest.mark.parametrize("argv", [
    ["pair-fraction", "--marks", "beta:mean=0.5,var=0.4"],
    ["pair-fraction", "--control", "nonsense"],
    ["pair-fraction", "--mode", "fast"],
    ["interference", "--beta", "2"],
    ["sweep-variance", "--variances", ""],
    ["volume", "--s", "0", "--z", "0.5", "--ztilde", "0.5", "--marks", "degenerate:mu=0.5"],
    ["volume", "--s", "1"],
    ["cluster"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_sweep_single_variance(capsys):
    assert main(["sweep-variance", "--variances", "0.01", "--nodes", "8"]) == 0
    r = rows(capsys.readouterr().out)
    assert len(r) == 1 and float(r[0]["variance"]) == 0.01
    assert float(r[0]["analytic"]) == pytest.approx(0.6, abs=0.05)


def test_interference_example_and_conservation(capsys):
    assert main(["interference", "--beta", "2.5", "--excl-radius", "0.5,1,3"]) == 0
    r = rows(capsys.readouterr().out)
    assert [float(x["excl_radius"]) for x in r] == [0.5, 1.0, 3.0]
    one = r[1]
    assert float(one["singles_analytic"]) == pytest.approx((1 - P_DEG) * 4 * math.pi, rel=1e-8)
    assert float(one["pairs_analytic"]) == pytest.approx(P_DEG * 4 * math.pi, rel=1e-8)
    for x in r:
        assert float(x["sum_analytic"]) == pytest.approx(float(x["lambda_tail"]), rel=1e-8)
        assert float(x["singles_window"]) + float(x["pairs_window"]) == pytest.approx(
            float(x["lambda_tail_window"]), rel=1e-8)


def test_cluster_examples(tmp_path, capsys):
    pts = tmp_path / "pts.csv"
    pts.write_text("x,y,z\n0,0,1\n1,0,1\n2.5,0,1\n")
    out = tmp_path / "part.json"
    assert main(["cluster", "--input", str(pts), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["pairs"] == [[0, 1]] and data["singles"] == [2]
    assert "pair_fraction=0.666667" in capsys.readouterr().out
    two = tmp_path / "two.csv"
    two.write_text("x,y,z\n0,0,0.5\n3,4,2\n")
    assert main(["cluster", "--input", str(two)]) == 0
    assert json.loads(capsys.readouterr().out)["pairs"] == [[0, 1]]


def test_cluster_bad_row_names_line(tmp_path, capsys):
    pts = tmp_path / "pts.csv"
    pts.write_text("x,y,z\n0,0,1\n1,0,0\n")
    assert main(["cluster", "--input", str(pts)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_volume_degenerate(capsys):
    assert main(["volume", "--s", "1", "--z", "0.5", "--ztilde", "0.5", "--marks", "degenerate:mu=0.5"]) == 0
    line = capsys.readouterr().out.splitlines()[0]
    assert float(line.split()[0][2:]) == pytest.approx(K, rel=1e-12)


def test_volume_all_methods(capsys):
    assert main(["volume", "--s", "0.3", "--z", "0.8", "--ztilde", "1.3", "--marks", "uniform:lo=0.5,hi=2",
                 "--method", "all", "--mc-n", "200000"]) == 0
    out = capsys.readouterr().out
    last = dict(kv.split("=") for kv in out.splitlines()[-1].split())
    assert float(last["max_deviation"]) < 1e-6 and float(last["max_mc_z"]) < 3


def test_config_file_and_overrides(tmp_path, capsys):
    c = tmp_path / "c.json"
    c.write_text(json.dumps({"command": "pair-fraction", "control": "empty"}))
    assert main(["pair-fraction", "--config", str(c)]) == 0
    out = capsys.readouterr().out
    assert float(rows(out)[0]["mean"]) == 0.0 and '"control": "empty"' in out
    assert main(["pair-fraction", "--config", str(c), "--control", "full"]) == 0
    assert float(rows(capsys.readouterr().out)[0]["mean"]) == pytest.approx(P_DEG, abs=1e-8)
    c.write_text(json.dumps({"colour": "red"}))
    assert main(["pair-fraction", "--config", str(c)]) == 2
    c.write_text(json.dumps({"command": "volume"}))
    assert main(["pair-fraction", "--config", str(c)]) == 2


def test_output_file_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["pair-fraction", "--mode", "sim", "--reps", "20", "--window", "15x15", "--marks", "uniform:lo=0.5,hi=1"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b), "--workers", "2"]) == 0
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("# timestamp")]
    assert strip(a) == strip(b)
