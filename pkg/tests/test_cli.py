import csv
from pathlib import Path

import numpy as np
import pytest

from salgp import ConfigError
from salgp.cli import (
    cmd_motivating,
    cmd_run,
    cmd_validate,
    main,
    parse_config,
    validation_sweep,
)

MINIMAL_CONFIG = """\
# minimal seasonal batch
[experiment]
testbed = seasonal
seeds = 0
acquisitions = timspe

[sal]
budget = 3
n_initial = 4
retrain_steps = 4
initial_train_steps = 30
eval_every = 1
grid_resolution = 11
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "experiment.cfg"
    path.write_text(MINIMAL_CONFIG)
    return path


class TestParseConfig:
    def test_minimal(self, config_file):
        values = parse_config(config_file)
        assert values["experiment"]["testbed"] == "seasonal"
        assert values["experiment"]["seeds"] == [0]
        assert values["sal"]["budget"] == 3
        assert values["sal"]["alpha"] == 0.977  # default

    def test_unknown_key_is_line_anchored(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[experiment]\ntestbed = seasonal\nbogus = 1\n")
        with pytest.raises(ConfigError, match="line 3"):
            parse_config(path)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[nonsense]\n")
        with pytest.raises(ConfigError, match="line 1"):
            parse_config(path)

    def test_missing_required(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[experiment]\ntestbed = seasonal\n")
        with pytest.raises(ConfigError, match="required"):
            parse_config(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(
            "[experiment]\ntestbed = seasonal\nseeds = x\nacquisitions = timspe\n[sal]\nbudget = 1\n"
        )
        with pytest.raises(ConfigError, match="line 3"):
            parse_config(path)

    def test_empty_seed_list_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(
            "[experiment]\ntestbed = seasonal\nseeds =\nacquisitions = timspe\n[sal]\nbudget = 1\n"
        )
        with pytest.raises(ConfigError, match="line 3"):
            parse_config(path)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[experiment]\ntestbed = seasonal\ntestbed = drift\n")
        with pytest.raises(ConfigError, match="line 3"):
            parse_config(path)


class TestCmdRun:
    def test_exit_codes_and_outputs(self, config_file, tmp_path):
        out = tmp_path / "results"
        assert cmd_run(str(config_file), str(out), jobs=1) == 0
        run_file = out / "seasonal_timspe_seed0.csv"
        summary = out / "summary.csv"
        assert run_file.exists() and summary.exists()
        with open(run_file) as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:4] == ["step", "time", "phase", "x0"]
        assert len(rows) == 1 + 4 + 3  # header + initial + budget
        with open(summary) as fh:
            srows = list(csv.DictReader(fh))
        assert len(srows) == 3  # eval_every=1, one rmse row per step
        assert srows[0]["acquisition"] == "timspe"

    def test_byte_identical_reruns(self, config_file, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert cmd_run(str(config_file), str(out1)) == 0
        assert cmd_run(str(config_file), str(out2)) == 0
        for name in ("seasonal_timspe_seed0.csv", "summary.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[experiment]\nwhat = no\n")
        assert cmd_run(str(bad), str(tmp_path / "out")) == 2
        assert "line 2" in capsys.readouterr().err

    def test_csv_roundtrip_precision(self, config_file, tmp_path):
        out = tmp_path / "results"
        cmd_run(str(config_file), str(out))
        with open(out / "seasonal_timspe_seed0.csv") as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            value = float(row["target"])
            assert repr(value) == row["target"]


class TestCmdValidate:
    def test_small_sweep_passes(self):
        worst_marginal, worst_acq = validation_sweep(40, seed=1)
        assert worst_marginal < 1e-6
        assert worst_acq < 1e-6

    def test_single_sample(self, capsys):
        assert cmd_validate(samples=1, seed=0) == 0

    def test_unsupported_kernel_rejected(self, capsys):
        assert cmd_validate(samples=1, seed=0, kernel="matern") == 2

    def test_bad_sample_count(self):
        assert cmd_validate(samples=0) == 2


class TestCmdMotivating:
    def test_minimizer_and_curve(self, tmp_path, capsys):
        out = tmp_path / "curve.csv"
        assert cmd_motivating(str(out)) == 0
        text = capsys.readouterr().out
        assert "PASS" in text
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2001
        by_x = {float(r["x"]): r["acquisition_value"] for r in rows}
        assert by_x[1.0] == ""  # degenerate point reported as absent
        assert by_x[0.0] != ""

    def test_symmetric_configuration(self, tmp_path):
        # with the datum at 0 the curve is symmetric about 0
        from salgp import DiagGaussian, GpModel, Imspe, SeArdKernel, build_workspace

        model = GpModel(SeArdKernel([1.0]), 0.0, [[0.0]], [0.0]).fit_cholesky()
        ws = build_workspace(model, Imspe(DiagGaussian([0.0], [1.0])))
        xs = np.linspace(0.1, 4.0, 40)
        left = ws.evaluate_many((-xs)[:, None])
        right = ws.evaluate_many(xs[:, None])
        assert np.nanmax(np.abs(left - right)) < 1e-10


class TestMain:
    def test_main_dispatch(self, config_file, tmp_path):
        assert main(["run", str(config_file), "--out", str(tmp_path / "o")]) == 0

    def test_main_validate(self):
        assert main(["validate", "--samples", "2", "--seed", "3"]) == 0
