import json

import pytest

from pnml_linreg import cli
from pnml_linreg.data import write_standin_csv


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def make_data_root(tmp_path):
    root = tmp_path / "data"
    root.mkdir()
    write_standin_csv("yacht_hydrodynamics", root / "yacht.csv")
    (root / "datasets.manifest").write_text(
        "yacht_hydrodynamics = yacht.csv, target\n"
    )
    return str(root)


SMALL_SYNTHETIC = """
kind = synthetic
out_dir = {out}
model_degrees = 10
eval_grid = 7
sigma_sq = 0.01
quad_initial_points = 513
"""


def test_config_requires_key_value_lines(tmp_path):
    path = write_config(tmp_path, "kind synthetic\n")
    with pytest.raises(cli.ConfigError, match=":1:"):
        cli.load_run_config(path)


def test_config_rejects_unknown_and_duplicate_keys(tmp_path):
    with pytest.raises(cli.ConfigError, match="unknown key"):
        cli.load_run_config(write_config(tmp_path, "kind = synthetic\nbogus = 1\n"))
    with pytest.raises(cli.ConfigError, match="duplicate"):
        cli.load_run_config(write_config(tmp_path, "kind = synthetic\nkind = threshold\n"))


def test_config_requires_dataset_for_double_descent(tmp_path):
    path = write_config(tmp_path, "kind = double-descent\nout_dir = o\n")
    with pytest.raises(cli.ConfigError, match="dataset"):
        cli.load_run_config(path)


def test_config_type_errors_carry_line_numbers(tmp_path):
    path = write_config(tmp_path, "kind = synthetic\nout_dir = o\neval_grid = many\n")
    with pytest.raises(cli.ConfigError, match=":3:"):
        cli.load_run_config(path)


def test_run_exits_2_on_invalid_config(tmp_path, capsys):
    path = write_config(tmp_path, "kind = double-descent\nout_dir = o\n")
    code = cli.main(["run", "--config", path])
    assert code == 2
    assert "dataset" in capsys.readouterr().err


def test_run_synthetic_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(tmp_path, SMALL_SYNTHETIC.format(out=out))
    assert cli.main(["run", "--config", path]) == 0
    grid = out / "regret_grid.csv"
    assert grid.exists()
    header = grid.read_text().splitlines()[0]
    assert header == "t,M,prediction,regret,bound,mn_norm"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kind"] == "synthetic"
    assert "regret_grid.csv" in manifest["outputs"]


def test_rerun_is_byte_identical(tmp_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    path = write_config(tmp_path, SMALL_SYNTHETIC.format(out=out1))
    assert cli.main(["run", "--config", path]) == 0
    assert cli.main(["run", "--config", path, "--out", str(out2)]) == 0
    assert (out1 / "regret_grid.csv").read_bytes() == (out2 / "regret_grid.csv").read_bytes()


def test_threshold_run_writes_curve(tmp_path):
    root = make_data_root(tmp_path)
    out = tmp_path / "out"
    path = write_config(
        tmp_path,
        f"kind = threshold\nout_dir = {out}\ndataset = yacht_hydrodynamics\nseeds = 0\n",
    )
    assert cli.main(["--data-root", root, "run", "--config", path]) == 0
    lines = (out / "threshold_curve.csv").read_text().splitlines()
    assert lines[0] == "threshold,cdf,pnml_logloss,mn_logloss"
    assert float(lines[-1].split(",")[1]) == pytest.approx(1.0)


def test_double_descent_run_writes_records(tmp_path):
    root = make_data_root(tmp_path)
    out = tmp_path / "out"
    path = write_config(
        tmp_path,
        f"kind = double-descent\nout_dir = {out}\ndataset = yacht_hydrodynamics\n"
        "seeds = 0, 1\nn_grid = 4, 8\nquad_initial_points = 513\n",
    )
    assert cli.main(["--data-root", root, "run", "--config", path, "--workers", "1"]) == 0
    lines = (out / "double_descent.csv").read_text().splitlines()
    assert lines[0] == "dataset,n_train,m_over_n,seed,pnml_logloss,mn_logloss,regret,bound"
    assert len(lines) == 5  # 2 n-values x 2 seeds
    agg = (out / "double_descent_aggregated.csv").read_text().splitlines()
    assert len(agg) == 3


def test_evaluate_one_reports_quantities(tmp_path, capsys):
    root = make_data_root(tmp_path)
    code = cli.main(
        ["--data-root", root, "evaluate-one", "--dataset", "yacht_hydrodynamics",
         "--row", "2", "--sigma-sq", "0.5"]
    )
    assert code == 0
    report = capsys.readouterr().out
    for field in ("mn_prediction", "normalization_factor", "regret_bound",
                  "x_orth_sq", "lambda_at_y_true"):
        assert field in report
    # self-consistency of the two code paths
    values = dict(line.split(": ") for line in report.strip().splitlines())
    assert float(values["regret"]) <= float(values["regret_bound"]) + 5e-3


def test_evaluate_one_row_out_of_range(tmp_path, capsys):
    root = make_data_root(tmp_path)
    code = cli.main(
        ["--data-root", root, "evaluate-one", "--dataset", "yacht_hydrodynamics",
         "--row", "100000"]
    )
    assert code == 2
    assert "row" in capsys.readouterr().err


def test_evaluate_one_unknown_dataset(tmp_path, capsys):
    root = make_data_root(tmp_path)
    code = cli.main(["--data-root", root, "evaluate-one", "--dataset", "nope", "--row", "0"])
    assert code == 2


def test_list_datasets(tmp_path, capsys):
    root = make_data_root(tmp_path)
    assert cli.main(["--data-root", root, "list-datasets"]) == 0
    out = capsys.readouterr().out
    assert "yacht_hydrodynamics" in out
    assert "308x6" in out
    assert "ok" in out


def test_data_root_env_var(tmp_path, capsys, monkeypatch):
    root = make_data_root(tmp_path)
    monkeypatch.setenv(cli.DATA_ROOT_ENV, root)
    assert cli.main(["list-datasets"]) == 0
    assert "yacht_hydrodynamics" in capsys.readouterr().out
