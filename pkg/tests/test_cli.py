import csv
import json

import numpy as np
import pytest

from panicreg import cli


def write_csv(path, x, y, names=None):
    names = names or [f"x{j}" for j in range(x.shape[1])]
    with open(path, "w") as fh:
        fh.write(",".join(names + ["y"]) + "\n")
        for row, v in zip(x, y):
            fh.write(",".join(repr(float(t)) for t in row) + f",{float(v)!r}\n")
    return str(path)


@pytest.fixture
def linear_csv(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(150, 4))
    y = x @ np.array([1.0, -2.0, 0.0, 0.5]) + 0.5 * rng.normal(size=150)
    return write_csv(tmp_path / "d.csv", x, y)


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fit_exact_line(tmp_path, capsys):
    path = tmp_path / "two.csv"
    path.write_text("x,y\n1,2\n2,4\n")
    code, out, _ = run(["fit", "--data", path, "--lambda", 0], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["intercept"] == pytest.approx(0, abs=1e-6)
    assert res["slopes"][0] == pytest.approx(2, abs=1e-6)


def test_fit_inactive_radius(linear_csv, capsys):
    code, out, _ = run(["fit", "--data", linear_csv, "--radius", 100], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["active"] is False and res["lambda_star"] == 0


def test_fit_response_column_and_json_round_trip(tmp_path, capsys):
    path = tmp_path / "r.csv"
    path.write_text("target,x\n1.5,0.1\n2.5,0.9\n0.3,-1.2\n")
    out = tmp_path / "fit.json"
    code, _, _ = run(["fit", "--data", path, "--response", "target", "--lambda", 0.01,
                      "--out", out], capsys)
    assert code == 0
    from panicreg.glm import Dataset, LINEAR
    from panicreg.solver import fit_penalized
    direct = fit_penalized(LINEAR, Dataset(np.array([[0.1], [0.9], [-1.2]]),
                                           np.array([1.5, 2.5, 0.3])), lam=0.01)
    # JSON floats round-trip bit for bit
    assert json.loads(out.read_text())["slopes"][0] == direct.beta.slopes[0]


def test_malformed_csv(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n3,abc\n")
    code, _, err = run(["fit", "--data", path], capsys)
    assert code == 2
    assert "line 3" in err and "column 2" in err
    path.write_text("x,y\n1,2\n3\n")
    code, _, err = run(["fit", "--data", path], capsys)
    assert code == 2 and "line 3" in err


def test_missing_response_and_bad_family(tmp_path, capsys):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n")
    assert run(["fit", "--data", path], capsys)[0] == 2
    path.write_text("x,y\n1,2\n2,0\n")
    code, _, err = run(["fit", "--data", path, "--family", "logistic"], capsys)
    assert code == 2 and "invalid-input" in err


def test_numerical_error_exit_code(tmp_path, capsys):
    path = tmp_path / "sep.csv"
    path.write_text("x,y\n-2,0\n-1,0\n1,1\n2,1\n")
    code, _, err = run(["select", "--data", path, "--family", "logistic"], capsys)
    assert code == 3 and "unbounded-erm" in err


def test_select_noiseless_recovers_norm(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50_000, 3))
    beta = np.array([2.0, -3.0, 1.5])
    path = write_csv(tmp_path / "nf.csv", x, x @ beta)
    out = tmp_path / "sel.json"
    code, _, _ = run(["select", "--data", path, "--method", "panic", "--out", out], capsys)
    assert code == 0
    res = json.loads(out.read_text())
    step = res["table"][1]["radius"]
    assert abs(res["chosen_radius"] - np.abs(beta).sum()) <= step


def test_select_cv_deterministic(linear_csv, tmp_path, capsys):
    picks = []
    for i in range(2):
        out = tmp_path / f"cv{i}.json"
        code, _, _ = run(["select", "--data", linear_csv, "--method", "cv", "--folds", 5,
                          "--seed", 4, "--m", 20, "--out", out], capsys)
        assert code == 0
        picks.append(json.loads(out.read_text())["chosen_index"])
    assert picks[0] == picks[1]


def test_select_modified_bic_table(linear_csv, tmp_path, capsys):
    out = tmp_path / "bic.json"
    code, stdout, _ = run(["select", "--data", linear_csv, "--method", "modified-bic",
                           "--kappa", 1, "--epsilon", 1e-3, "--m", 25, "--out", out], capsys)
    assert code == 0 and "modified-bic" in stdout
    with open(tmp_path / "bic.table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 25
    assert "df_hat" in rows[0] and "df_tilde" in rows[0]
    dft = [int(r["df_tilde"]) for r in rows]
    assert dft == sorted(dft)


def test_select_continuous(linear_csv, capsys):
    code, out, _ = run(["select", "--data", linear_csv, "--method", "panic-continuous"], capsys)
    assert code == 0
    assert json.loads(out)["method"] == "panic-continuous"


def test_config_and_flags_compose(tmp_path):
    conf = tmp_path / "c.yaml"
    conf.write_text("kappa: 0.5\nm: 10\nsolver:\n  tol_kkt: 1.0e-8\n")
    args = cli.build_parser().parse_args(["select", "--config", str(conf), "--m", "12"])
    opts = cli.resolve(args)
    assert opts["kappa"] == 0.5 and opts["m"] == 12
    assert opts["method"] == "panic" and opts["folds"] == 5
    assert cli.solver_config(opts).tol_kkt == 1e-8
    # JSON is YAML too
    conf.write_text(json.dumps({"kappa-sweep": [1, 2]}))
    opts = cli.resolve(cli.build_parser().parse_args(["simulate", "--config", str(conf)]))
    assert opts["kappa_sweep"] == [1, 2]


def test_defaults_match_library():
    from panicreg.selection import DEFAULT_EPSILON, DEFAULT_FOLDS, DEFAULT_M
    from panicreg.solver import SolverConfig
    opts = cli.resolve(cli.build_parser().parse_args(["select"]))
    assert (opts["m"], opts["epsilon"], opts["folds"]) == (DEFAULT_M, DEFAULT_EPSILON, DEFAULT_FOLDS)
    assert cli.solver_config(opts) == SolverConfig()


def test_unknown_config_key(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text("kapa: 1\n")
    code, _, err = run(["simulate", "--config", conf], capsys)
    assert code == 2 and "kapa" in err
    conf.write_text("solver:\n  tolerance: 1\n")
    assert run(["fit", "--config", conf, "--data", "x.csv"], capsys)[0] == 2


def test_simulate_kappa_sweep_and_determinism(tmp_path, capsys):
    args = ["simulate", "--n", "100", "--sigma", "1", "--reps", 3, "--m", 10, "--seed", 7,
            "--kappa-sweep", "0.1,0.5,1,2", "--threads", 1]
    assert run(args + ["--out", tmp_path / "a"], capsys)[0] == 0
    assert run(args + ["--out", tmp_path / "b"], capsys)[0] == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.DictReader(a.decode().splitlines()))
    assert {r["kappa"] for r in rows if r["method"] == "panic"} == {"0.1", "0.5", "1.0", "2.0"}
    obj = json.loads((tmp_path / "a.json").read_text())
    assert len(obj["cells"]) == 6


def test_simulate_paper_tables(tmp_path, capsys):
    code, _, _ = run(["simulate", "--paper-tables", "--reps", 10, "--seed", 7, "--m", 15,
                      "--kappa", 1, "--out", tmp_path / "p"], capsys)
    assert code == 0
    cells = json.loads((tmp_path / "p.json").read_text())["cells"]
    designs = {(c["family"], c["n"], c["sigma"]) for c in cells}
    assert len([d for d in designs if d[0] == "linear"]) == 9
    assert len([d for d in designs if d[0] == "logistic"]) == 3
    assert all(c["reps"] + c["excluded"] == 10 for c in cells)


def test_simulate_failure_budget(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text("family: logistic\nn: [5]\nd: 20\ns: 1\nreps: 2\nm: 3\nmethods: [panic]\n")
    code, _, err = run(["simulate", "--config", conf, "--kappa", 1], capsys)
    assert code == 4 and "failure-budget-exceeded" in err
