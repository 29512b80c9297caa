import csv
import io

import pytest

from routecorr.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_routes_efficient(capsys):
    code, out, _ = run(capsys, "routes", "--network", "mesh2x2")
    assert code == 0
    assert len(rows(out)) == 7


def test_routes_sample_to_file(tmp_path, capsys):
    path = tmp_path / "r.csv"
    code, _, _ = run(capsys, "routes", "--network", "mesh2x2", "--mode", "sample", "--draws", "2000",
                     "--cv", "0.3", "--out", str(path))
    assert code == 0
    assert rows(path.read_text())[0] == ["route_index", "link_sequence", "impedance"]


def test_probs_models(capsys):
    for model in ("mnl", "lnl-const", "lnl-arith", "lnl-geom", "pcl", "conl"):
        code, out, _ = run(capsys, "probs", "--model", model, "--dmin", "0.3")
        assert code == 0
        table = rows(out)
        assert table[0] == ["route_index", "probability"]
        assert sum(float(r[1]) for r in table[1:]) == pytest.approx(1.0)


def test_probs_mnp(capsys):
    code, out, _ = run(capsys, "probs", "--model", "mnp", "--draws", "5000", "--seed", "1")
    assert code == 0
    assert rows(out)[0] == ["route_index", "probability", "std_error"]


def test_corr_spaces(capsys):
    code, out, _ = run(capsys, "corr", "--model", "mnl", "--space", "rcm")
    assert code == 0 and len(rows(out)) == 1 + 25
    code, out, _ = run(capsys, "corr", "--model", "mnp", "--space", "fcm")
    assert len(rows(out)) == 1 + 36
    code, out, _ = run(capsys, "corr", "--model", "lnl-const", "--dmin", "0.5", "--quad-nodes", "1024")
    assert code == 0
    code, out, _ = run(capsys, "corr", "--model", "conl", "--space", "rcm", "--rcm-ref", "0")
    assert code == 0


def test_conl_structure(capsys):
    code, out, _ = run(capsys, "conl-structure", "--network", "braess", "--weights", "25")
    assert code == 0
    table = rows(out)
    assert table[0] == ["component", "weight", "nest", "routes", "delta", "residual", "unclamped"]
    assert len(table) == 5


def test_bench_with_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"network = braess\nparams = h=0.1\nmodels = mnl,conl\ndmin = 0,1\ncv = 0.1\n"
                   f"draws = 2000\nseed = 5\nout = {tmp_path / 'out'}\n")
    code, out, _ = run(capsys, "bench", "--config", str(cfg), "--weights", "24,26")
    assert code == 0
    table = rows((tmp_path / "out" / "table.csv").read_text())
    assert len(table) == 1 + 2 + 4


@pytest.mark.parametrize("argv", [
    ["routes", "--network", "nowhere"],
    ["routes", "--network", "mesh2x2", "--od", "1-99"],
    ["probs", "--model", "pcl", "--cv", "-1"],
    ["bench", "--dmin", "2", "--draws", "10"],
    ["bench", "--models", "probit"],
    ["corr", "--model", "mnl", "--space", "rcm", "--rcm-ref", "9"],
    ["routes", "--network", "braess", "--params", "a=9"],
])
def test_validation_errors_exit_2(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run(capsys, "bench", "--config", str(cfg))[0] == 2


def test_argparse_errors_exit_2(capsys):
    assert run(capsys, "probs")[0] == 2
