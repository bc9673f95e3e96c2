import io

import numpy as np
import pytest

from lcsvr.cli import main
from lcsvr.experiments import gen_simplex


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def write_train(path, X, y, header=None):
    p = X.shape[1]
    header = header or ["y"] + [f"x{i + 1}" for i in range(p)]
    rows = [",".join(header)] + [",".join(repr(float(v)) for v in (yi, *xi)) for yi, xi in zip(y, X)]
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture
def data(tmp_path):
    ts, _ = gen_simplex(40, 3, 0)
    return write_train(tmp_path / "data.csv", ts.X, ts.y), ts


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines())


def test_fit_happy_path(tmp_path, data):
    code, out, _ = run("fit", "--preset", "ssvr", "--train", data[0], "--C", 1, "--nu", 0.5,
                       "--tau", 1e-3, "--out", tmp_path / "model.txt")
    assert code == 0
    assert (tmp_path / "model.txt").exists()
    info = kv(out)
    assert info["termination"] == "Converged"
    assert {"iterations", "final_delta", "epsilon", "objective"} <= info.keys()


def test_fit_iteration_cap_exit_3(tmp_path, data):
    code, out, _ = run("fit", "--preset", "ssvr", "--train", data[0], "--tau", 1e-9,
                       "--max-iter", 2, "--out", tmp_path / "m.txt")
    assert code == 3 and kv(out)["iterations"] == "2"


def test_missing_column_names_it(tmp_path, data):
    ts = data[1]
    path = write_train(tmp_path / "bad.csv", ts.X, ts.y, header=["y", "x1", "x3", "x4"])
    code, _, err = run("fit", "--train", path, "--out", tmp_path / "m.txt")
    assert code == 1 and "x2" in err
    path = write_train(tmp_path / "noy.csv", ts.X, ts.y, header=["z", "x1", "x2", "x3"])
    code, _, err = run("fit", "--train", path, "--out", tmp_path / "m.txt")
    assert code == 1 and "y" in err


def test_missing_file_and_bad_number(tmp_path):
    assert run("fit", "--train", tmp_path / "nope.csv", "--out", tmp_path / "m.txt")[0] == 1
    (tmp_path / "t.csv").write_text("y,x1\n1.0,abc\n2.0,1.0\n")
    assert run("fit", "--train", tmp_path / "t.csv", "--out", tmp_path / "m.txt")[0] == 1


def test_duplicate_rows_exit_2_with_indices(tmp_path):
    X = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]])
    path = write_train(tmp_path / "dup.csv", X, np.array([1.0, 1.0, 0.0]))
    code, _, err = run("fit", "--train", path, "--out", tmp_path / "m.txt")
    assert code == 2 and "0" in err and "1" in err
    assert not (tmp_path / "m.txt").exists()


def test_bad_hyperparameters_exit_2(tmp_path, data):
    code, _, err = run("fit", "--train", data[0], "--nu", 1.5, "--out", tmp_path / "m.txt")
    assert code == 2 and "nu" in err


def test_validate(tmp_path, data):
    code, out, _ = run("validate", "--train", data[0], "--preset", "nnsvr")
    assert code == 0
    code, out, _ = run("validate", "--train", data[0], "--C", -1, "--nu", 0)
    assert code == 2 and "C" in out and "nu" in out


def test_custom_constraints(tmp_path, data):
    (tmp_path / "A.csv").write_text("-1,0,0\n0,-1,0\n0,0,-1\n")
    (tmp_path / "b.csv").write_text("0\n0\n0\n")
    code, _, _ = run("fit", "--preset", "custom", "--train", data[0], "--A", tmp_path / "A.csv",
                     "--b", tmp_path / "b.csv", "--out", tmp_path / "m.txt", "--tau", 1e-5)
    assert code == 0
    # no matrices: the unconstrained problem
    run("fit", "--preset", "custom", "--train", data[0], "--out", tmp_path / "m2.txt")
    run("fit", "--preset", "svr", "--train", data[0], "--out", tmp_path / "m4.txt")
    assert (tmp_path / "m2.txt").read_text().split("[beta]")[1] == (tmp_path / "m4.txt").read_text().split("[beta]")[1]
    assert run("fit", "--preset", "custom", "--train", data[0], "--A", tmp_path / "A.csv",
               "--out", tmp_path / "m5.txt")[0] == 2
    assert run("fit", "--preset", "nnsvr", "--train", data[0], "--A", tmp_path / "A.csv",
               "--b", tmp_path / "b.csv", "--out", tmp_path / "m6.txt")[0] == 2
    (tmp_path / "A2.csv").write_text("-1,0\n")
    code, _, _ = run("fit", "--preset", "custom", "--train", data[0], "--A", tmp_path / "A2.csv",
                     "--b", tmp_path / "b.csv", "--out", tmp_path / "m3.txt")
    assert code == 2


def test_predict_round_trip_within_tube(tmp_path, data):
    path, ts = data
    model = tmp_path / "m.txt"
    assert run("fit", "--preset", "ssvr", "--train", path, "--C", 10, "--tau", 1e-6, "--out", model)[0] == 0
    eps = float(model.read_text().split("[epsilon]\n")[1].splitlines()[0])
    code, out, _ = run("predict", "--model", model, "--data", path, "--out", tmp_path / "yhat.csv")
    assert code == 0 and kv(out)["rows"] == "40"
    lines = (tmp_path / "yhat.csv").read_text().splitlines()
    assert lines[0] == "yhat"
    yhat = np.array([float(v) for v in lines[1:]])
    assert np.all(np.abs(yhat - ts.y) <= eps + 1e-2)


def test_predict_header_only_and_mismatch(tmp_path, data):
    model = tmp_path / "m.txt"
    run("fit", "--train", data[0], "--out", model)
    (tmp_path / "empty.csv").write_text("x1,x2,x3\n")
    assert run("predict", "--model", model, "--data", tmp_path / "empty.csv", "--out", tmp_path / "o.csv")[0] == 0
    assert (tmp_path / "o.csv").read_text() == "yhat\n"
    (tmp_path / "two.csv").write_text("x1,x2\n1,2\n")
    assert run("predict", "--model", model, "--data", tmp_path / "two.csv", "--out", tmp_path / "o2.csv")[0] == 2
    assert not (tmp_path / "o2.csv").exists()
    (tmp_path / "junk.txt").write_text("hello\n")
    assert run("predict", "--model", tmp_path / "junk.txt", "--data", tmp_path / "two.csv",
               "--out", tmp_path / "o3.csv")[0] == 1


def test_experiment_shape(tmp_path):
    code, out, _ = run("experiment", "--scenario", "nonneg", "--n", 40, "--p", 5, "--snr", 10,
                       "--reps", 3, "--seed", 7, "--C-grid", "1,10", "--nu-grid", "0.5",
                       "--folds", 2, "--out-dir", tmp_path)
    assert code == 0
    lines = (tmp_path / "nonneg_results.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 * 3
    assert [line for line in out.splitlines() if line.startswith("estimator=")] == \
        ["estimator=svr", "estimator=p-svr", "estimator=nnsvr", "estimator=nnls"]


def test_experiment_rejects_bad_grid(tmp_path):
    code, _, _ = run("experiment", "--scenario", "simplex", "--nu-grid", "0.5,2", "--out-dir", tmp_path)
    assert code == 2
    assert list(tmp_path.iterdir()) == []
    assert run("experiment", "--scenario", "simplex", "--C-grid", "a,b", "--out-dir", tmp_path)[0] == 1
    assert run("experiment", "--scenario", "simplex", "--estimators", "nnls", "--out-dir", tmp_path)[0] == 2


def test_trajectory_files(tmp_path):
    code, out, _ = run("trajectory", "--seed", 1, "--noise", "none", "--n", 60, "--p", 6, "--out-dir", tmp_path)
    assert code == 0
    for kind in ("svr", "ssvr"):
        lines = (tmp_path / f"trajectory_{kind}.csv").read_text().splitlines()
        assert lines[0] == "iteration,objective,delta"
        its = [int(r.split(",")[0]) for r in lines[1:]]
        assert its == list(range(len(its)))


def test_env_seed_overrides_flag(tmp_path, monkeypatch):
    run("trajectory", "--seed", 5, "--n", 30, "--p", 4, "--out-dir", tmp_path / "a")
    monkeypatch.setenv("LCSVR_SEED", "5")
    run("trajectory", "--seed", 99, "--n", 30, "--p", 4, "--out-dir", tmp_path / "b")
    assert (tmp_path / "a" / "trajectory_svr.csv").read_bytes() == (tmp_path / "b" / "trajectory_svr.csv").read_bytes()
    monkeypatch.setenv("LCSVR_SEED", "x")
    assert run("trajectory", "--out-dir", tmp_path / "c")[0] == 1


def test_fit_is_byte_deterministic(tmp_path, data):
    for name in ("a.txt", "b.txt"):
        run("fit", "--preset", "nnsvr", "--train", data[0], "--out", tmp_path / name)
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_module_entry_point(tmp_path, data):
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "lcsvr", "validate", "--train", str(data[0])],
                       capture_output=True, text=True)
    assert r.returncode == 0
