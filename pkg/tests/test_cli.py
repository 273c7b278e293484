import numpy as np
import pytest

from pidal import cli, imagekit
from pidal.admm import DivergenceError


@pytest.fixture
def truth_csv(tmp_path, rng):
    truth = rng.uniform(2.0, 9.0, (16, 16))
    path = tmp_path / "truth.csv"
    imagekit.write_csv_matrix(path, truth)
    return path


def simulate_args(truth_csv, tmp_path, prefix="sim", **extra):
    args = ["simulate", "--input", str(truth_csv), "--max-intensity", "30",
            "--psf", "gaussian", "--psf-size", "3", "--psf-sigma", "0.7",
            "--seed", "5", "--output", str(tmp_path / prefix)]
    for key, value in extra.items():
        args += [f"--{key}", str(value)]
    return args


@pytest.fixture
def observation(truth_csv, tmp_path):
    assert cli.main(simulate_args(truth_csv, tmp_path)) == 0
    return tmp_path / "sim_counts.pgm"


def restore_args(observation, tmp_path, prefix="out", **extra):
    args = ["restore", "--method", "tv", "--input", str(observation),
            "--psf", "gaussian", "--psf-size", "3", "--psf-sigma", "0.7",
            "--tau", "0.05", "--mu", "0.1", "--tol", "0", "--max-iters", "30",
            "--output", str(tmp_path / prefix)]
    for key, value in extra.items():
        args += [f"--{key}", str(value)]
    return args


class TestSimulate:
    def test_writes_all_artifacts(self, truth_csv, tmp_path, capsys):
        assert cli.main(simulate_args(truth_csv, tmp_path)) == 0
        out = capsys.readouterr().out
        assert "seed 5" in out
        for suffix in ("_truth.csv", "_intensity.csv", "_counts.csv", "_counts.pgm"):
            assert (tmp_path / f"sim{suffix}").exists()
        counts = imagekit.read_pgm(tmp_path / "sim_counts.pgm")
        assert counts.shape == (16, 16)
        scaled = imagekit.read_csv_matrix(tmp_path / "sim_truth.csv")
        assert scaled.max() == 30.0

    def test_bundled_default_input(self, tmp_path, capsys):
        code = cli.main(["simulate", "--max-intensity", "10", "--seed", "0",
                         "--output", str(tmp_path / "cam")])
        assert code == 0
        assert "256x256" in capsys.readouterr().out

    def test_rerun_byte_identical(self, truth_csv, tmp_path):
        assert cli.main(simulate_args(truth_csv, tmp_path, prefix="a")) == 0
        assert cli.main(simulate_args(truth_csv, tmp_path, prefix="b")) == 0
        for suffix in ("_truth.csv", "_intensity.csv", "_counts.csv", "_counts.pgm"):
            first = (tmp_path / f"a{suffix}").read_bytes()
            second = (tmp_path / f"b{suffix}").read_bytes()
            assert first == second


def _split_trace(path):
    """Trace rows minus the wall-clock column."""
    lines = path.read_text().splitlines()
    return [line.rsplit(",", 1)[0] for line in lines]


class TestRestore:
    def test_runs_and_reports(self, observation, tmp_path, capsys):
        code = cli.main(restore_args(observation, tmp_path,
                                     truth=str(tmp_path / "sim_truth.csv")))
        assert code == 0
        out = capsys.readouterr().out
        assert "tv: 30 iterations (max_iters)" in out
        assert "ISNR" in out and "existence=" in out
        estimate = imagekit.read_csv_matrix(tmp_path / "out_estimate.csv")
        assert estimate.min() >= 0.0
        assert (tmp_path / "out_estimate.pgm").exists()
        assert (tmp_path / "out_trace.csv").exists()

    def test_rerun_byte_identical_numerics(self, observation, tmp_path):
        assert cli.main(restore_args(observation, tmp_path, prefix="r1")) == 0
        assert cli.main(restore_args(observation, tmp_path, prefix="r2")) == 0
        assert ((tmp_path / "r1_estimate.csv").read_bytes()
                == (tmp_path / "r2_estimate.csv").read_bytes())
        assert ((tmp_path / "r1_estimate.pgm").read_bytes()
                == (tmp_path / "r2_estimate.pgm").read_bytes())
        assert (_split_trace(tmp_path / "r1_trace.csv")
                == _split_trace(tmp_path / "r2_trace.csv"))

    def test_defaults_require_max_intensity(self, observation, tmp_path, capsys):
        code = cli.main(["restore", "--method", "tv", "--input", str(observation),
                         "--psf-size", "3", "--tau", "0.05",
                         "--output", str(tmp_path / "x")])
        assert code == 1
        assert "max_intensity" in capsys.readouterr().err

    def test_max_intensity_defaults_mu_and_tol(self, observation, tmp_path, capsys):
        code = cli.main(["restore", "--method", "tv", "--input", str(observation),
                         "--psf-size", "3", "--tau", "0.05", "--max-intensity", "30",
                         "--max-iters", "500", "--output", str(tmp_path / "d")])
        assert code == 0
        assert "(tol)" in capsys.readouterr().out


class TestEvaluate:
    def test_four_decimal_output(self, truth_csv, tmp_path, capsys):
        imagekit.write_csv_matrix(tmp_path / "est.csv",
                                  imagekit.read_csv_matrix(truth_csv) + 0.25)
        imagekit.write_csv_matrix(tmp_path / "obs.csv",
                                  imagekit.read_csv_matrix(truth_csv) + 1.0)
        code = cli.main(["evaluate", "--truth", str(truth_csv),
                         "--estimate", str(tmp_path / "est.csv"),
                         "--observation", str(tmp_path / "obs.csv")])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == f"ISNR {10.0 * np.log10(16.0):.4f} dB"
        assert out[1] == "MAE 0.2500"

    def test_mae_only_without_observation(self, truth_csv, tmp_path, capsys):
        code = cli.main(["evaluate", "--truth", str(truth_csv),
                         "--estimate", str(truth_csv)])
        assert code == 0
        assert capsys.readouterr().out == "MAE 0.0000\n"


class TestConfigFile:
    def test_flag_beats_config_beats_default(self, truth_csv, tmp_path, capsys):
        config = tmp_path / "opts.cfg"
        config.write_text("seed = 9\nmax-intensity = 30  # comment\npsf-size = 3\n")
        code = cli.main(["simulate", "--config", str(config),
                         "--input", str(truth_csv), "--seed", "4",
                         "--output", str(tmp_path / "c")])
        assert code == 0
        out = capsys.readouterr().out
        assert "seed 4" in out  # flag wins over config's 9
        scaled = imagekit.read_csv_matrix(tmp_path / "c_truth.csv")
        assert scaled.max() == 30.0  # config wins over the missing flag

    def test_unknown_key_rejected(self, truth_csv, tmp_path, capsys):
        config = tmp_path / "opts.cfg"
        config.write_text("not-a-key = 1\n")
        code = cli.main(["simulate", "--config", str(config),
                         "--input", str(truth_csv), "--max-intensity", "30",
                         "--output", str(tmp_path / "c")])
        assert code == 1
        assert "not-a-key" in capsys.readouterr().err

    def test_malformed_line_rejected(self, tmp_path, capsys):
        config = tmp_path / "opts.cfg"
        config.write_text("just words\n")
        code = cli.main(["simulate", "--config", str(config),
                         "--max-intensity", "30", "--output", str(tmp_path / "c")])
        assert code == 1
        assert "key = value" in capsys.readouterr().err

    def test_bad_value_type_rejected(self, tmp_path, capsys):
        config = tmp_path / "opts.cfg"
        config.write_text("seed = soon\n")
        code = cli.main(["simulate", "--config", str(config),
                         "--max-intensity", "30", "--output", str(tmp_path / "c")])
        assert code == 1
        assert "seed" in capsys.readouterr().err

    def test_missing_config_file_is_io_error(self, tmp_path, capsys):
        code = cli.main(["simulate", "--config", str(tmp_path / "nope.cfg"),
                         "--max-intensity", "30", "--output", str(tmp_path / "c")])
        assert code == 2

    def test_flag_style_boolean_in_config(self, observation, tmp_path):
        config = tmp_path / "opts.cfg"
        config.write_text("exclude-approx-band = true\nlevels = 2\n")
        args = restore_args(observation, tmp_path, prefix="fa")
        args[args.index("tv")] = "fa"
        code = cli.main(args + ["--config", str(config)])
        assert code == 0


class TestBench:
    def test_dfs_table_alias(self, tmp_path, capsys):
        code = cli.main(["bench", "--scenario", "dfs-table", "--methods", "tv",
                         "--peaks", "255", "--seeds", "1",
                         "--output", str(tmp_path / "b")])
        assert code == 0
        assert (tmp_path / "b_bench.csv").read_text().splitlines()[1].startswith("dfs,tv,255,")

    def test_unknown_scenario(self, tmp_path, capsys):
        code = cli.main(["bench", "--scenario", "mystery",
                         "--output", str(tmp_path / "b")])
        assert code == 1
        assert "mystery" in capsys.readouterr().err


class TestExitCodes:
    def test_no_command(self, capsys):
        assert cli.main([]) == 1
        assert "command" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert cli.main(["simulate", "--bogus", "1"]) == 1

    def test_missing_required(self, truth_csv, capsys):
        assert cli.main(["simulate", "--input", str(truth_csv)]) == 1
        assert "required" in capsys.readouterr().err

    def test_bad_method(self, observation, tmp_path, capsys):
        args = restore_args(observation, tmp_path)
        args[args.index("tv")] = "ridge"
        assert cli.main(args) == 1

    def test_missing_input_file(self, tmp_path, capsys):
        code = cli.main(["restore", "--method", "tv", "--input", str(tmp_path / "no.pgm"),
                         "--psf-size", "3", "--tau", "0.05", "--mu", "0.1", "--tol", "0",
                         "--output", str(tmp_path / "x")])
        assert code == 2

    def test_unwritable_output_prefix(self, truth_csv, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("file, not a directory")
        code = cli.main(["simulate", "--input", str(truth_csv),
                         "--max-intensity", "30",
                         "--output", str(blocker / "deep" / "x")])
        assert code == 2

    def test_divergence_maps_to_3(self, observation, tmp_path, capsys, monkeypatch):
        def explode(*args, **kwargs):
            raise DivergenceError("non-finite iterate at iteration 2")

        monkeypatch.setitem(cli.__dict__, "pidal_tv", explode)
        code = cli.main(restore_args(observation, tmp_path))
        assert code == 3
        assert "diverged" in capsys.readouterr().err
