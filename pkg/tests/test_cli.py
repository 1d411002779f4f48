import json
import subprocess
import sys

import pytest

from choquard.cli import main
from choquard.grid import RadialGrid


def write_config(path, **over):
    cfg = {
        "problem": {"N": 3, "alpha": 0.0, "mu": 1.0, "p": 2.0},
        "grid": {"r_max": 100.0, "n": 512},
        "solver": {"max_iter": 2000},
        "mode": "subcritical",
    }
    for k, v in over.items():
        cfg[k] = v
    path.write_text(json.dumps(cfg))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_classify(capsys):
    code, out, _ = run(["classify", "--N", "3", "--alpha", "0.5", "--mu", "1", "--p", "2"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["regularity_case"] == "C1"
    assert d["p_interval"] == [3.0, "inf"]
    assert d["existence_verdict"] == "Exists"
    assert d["critical_exponents"]["upper"] == pytest.approx(4.0)


def test_classify_invalid(capsys):
    code, _, err = run(["classify", "--N", "3", "--alpha", "0", "--mu", "4"], capsys)
    assert code == 2 and "0 < mu < N" in err


def test_solve_and_verify(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.json")
    prof, rep = str(tmp_path / "u.csv"), str(tmp_path / "r.json")
    code, _, err = run(["solve", cfg, "--profile", prof, "--report", rep], capsys)
    assert code == 0, err
    doc = json.loads(open(rep).read())
    assert doc["report"]["converged"] is True
    assert abs(doc["report"]["final"]["pohozaev_residual"]) < 1e-3
    assert doc["config"]["problem"] == {"N": 3, "alpha": 0.0, "mu": 1.0, "p": 2.0}
    lines = open(prof).read().splitlines()
    assert lines[0] == "r,u" and len(lines) == 513
    code, out, _ = run(["verify", prof, cfg], capsys)
    assert code == 0
    v = json.loads(out)
    assert v["residual"] == pytest.approx(doc["report"]["residual"], rel=1e-12)
    for key, val in doc["report"]["final"].items():
        if val is not None:
            assert v["energy"][key] == pytest.approx(val, rel=1e-12, abs=1e-300)
    assert v["ground_state_ratio"]["measured"] == pytest.approx(v["ground_state_ratio"]["implied"], rel=1e-3)


def test_verify_bubble_under_subcritical(tmp_path, capsys):
    from choquard.grid import RadialFunction, write_profile
    from choquard.hlslab import talenti_bubble

    cfg = write_config(tmp_path / "run.json")
    grid = RadialGrid.default(3, n=512)
    prof = tmp_path / "bubble.csv"
    write_profile(prof, RadialFunction(grid, talenti_bubble(3, 1.0, grid.nodes)))
    code, out, _ = run(["verify", str(prof), cfg], capsys)
    assert code == 0 and json.loads(out)["residual"] > 1e-2


def test_solve_is_byte_identical(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.json", mode="critical", init="random", solver={"seed": 4})
    outs = []
    for i in range(2):
        prof, rep = tmp_path / ("u%d.csv" % i), tmp_path / ("r%d.json" % i)
        assert run(["solve", cfg, "--profile", str(prof), "--report", str(rep)], capsys)[0] == 0
        outs.append((prof.read_bytes(), rep.read_bytes()))
    assert outs[0] == outs[1]


def test_extremal_forces_critical(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.json", problem={"N": 3, "alpha": 0.25, "mu": 1.0, "p": 2.0})
    rep = tmp_path / "r.json"
    code, _, _ = run(["extremal", cfg, "--profile", str(tmp_path / "u.csv"), "--report", str(rep)], capsys)
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["config"]["mode"] == "critical" and doc["config"]["problem"]["p"] is None
    assert doc["report"]["final"]["quotient"] > 0


def test_fixed_point_method(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.json", method="fixed_point")
    rep = tmp_path / "r.json"
    assert run(["solve", cfg, "--profile", str(tmp_path / "u.csv"), "--report", str(rep)], capsys)[0] == 0
    assert json.loads(rep.read_text())["report"]["method"] == "fixed_point"


def test_nonconvergence_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.json", solver={"max_iter": 2})
    code, _, _ = run(["solve", cfg, "--profile", str(tmp_path / "u.csv"),
                      "--report", str(tmp_path / "r.json")], capsys)
    assert code == 3


@pytest.mark.parametrize("problem,needle", [
    ({"N": 3, "alpha": 0.0, "mu": 1.0, "p": 5.0}, "Pohozaev"),
    ({"N": 3, "alpha": 0.0, "mu": 1.0, "p": 1.5}, "Pohozaev"),
    ({"N": 3, "alpha": 0.0, "mu": 3.5, "p": 2.0}, "0 < mu < N"),
    ({"N": 3, "alpha": 0.0, "mu": 1.0}, "needs problem.p"),
])
def test_invalid_configs(tmp_path, capsys, problem, needle):
    cfg = write_config(tmp_path / "run.json", problem=problem)
    code, _, err = run(["solve", cfg], capsys)
    assert code == 2 and needle in err


def test_unreadable_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["solve", str(bad)], capsys)[0] == 2
    cfg = write_config(tmp_path / "run.json", mode="sideways")
    assert run(["solve", cfg], capsys)[0] == 2
    cfg = write_config(tmp_path / "ok.json")
    prof = tmp_path / "u.csv"
    prof.write_text("radius,value\n")
    assert run(["verify", str(prof), cfg], capsys)[0] == 2


def test_hls_check_requires_seed(capsys):
    assert run(["hls-check", "--preset", "gaussian"], capsys)[0] == 2
    assert run(["hls-check", "--seed", "1", "--samples", "10"], capsys)[0] == 2


def test_hls_check_deterministic(capsys):
    argv = ["hls-check", "--preset", "gaussian", "--samples", "100000", "--seed", "3"]
    code, a, _ = run(argv + ["--workers", "1"], capsys)
    assert code == 0
    _, b, _ = run(argv + ["--workers", "4"], capsys)
    assert a == b
    d = json.loads(a)
    assert d["within_3_sigma"] is True


def test_hls_check_brezis_lieb(capsys):
    code, out, _ = run(["hls-check", "--preset", "brezis-lieb", "--samples", "20000", "--seed", "2",
                        "--shift", "10"], capsys)
    assert code == 0
    assert json.loads(out)["splits"][0]["shift"] == 10.0


def test_kernel_table(tmp_path, capsys):
    out = tmp_path / "k.csv"
    assert run(["kernel-table", "--N", "3", "--mu", "2", "--n", "4", "--out", str(out)], capsys)[0] == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "i,j,r_i,s_j,k" and len(rows) == 17
    assert all(float(r.split(",")[4]) > 0 for r in rows[1:])
    assert run(["kernel-table", "--N", "3", "--mu", "3"], capsys)[0] == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "choquard.cli", "classify", "--N", "3", "--alpha", "0",
                           "--mu", "1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["regularity_case"] == "C1"
