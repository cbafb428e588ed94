import numpy as np
import pytest

from qbo.cli import main
from qbo.output import read_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestVariance:
    def test_equipartition_one_shot(self, capsys):
        code, out, _ = run(
            capsys, "variance", "--model", "classical", "--m", "10",
            "--gamma", "1", "--omega", "1", "--kbt", "0.1", "--t", "1e9",
        )
        assert code == 0
        assert out.strip() == "0.01"

    def test_grid_output_and_csv(self, capsys, tmp_path):
        path = tmp_path / "v.csv"
        code, out, _ = run(
            capsys, "variance", "--model", "exact", "--m", "1", "--gamma", "0.5",
            "--omega", "1", "--kbt", "1", "--init-varx", "0.5", "--init-varp", "0.5",
            "--t-grid", "0", "5", "6", "--out", str(path),
        )
        assert code == 0
        assert len(out.strip().splitlines()) == 6
        ds = read_csv(path)
        assert ds.columns == ("t", "var_x")
        assert ds.rows.shape == (6, 2)
        assert ds.rows[0, 1] == 0.5

    def test_free_model_needs_no_omega(self, capsys):
        code, out, _ = run(
            capsys, "variance", "--model", "free", "--m", "1", "--gamma", "1",
            "--kbt", "1", "--t", "2",
        )
        assert code == 0
        assert float(out.strip()) > 0.0

    def test_t_and_grid_mutually_exclusive(self, capsys):
        code, _, err = run(
            capsys, "variance", "--model", "classical", "--m", "1", "--gamma", "1",
            "--omega", "1", "--kbt", "1", "--t", "1", "--t-grid", "0", "1", "5",
        )
        assert code == 2
        assert "exactly one" in err

    def test_missing_flag_reported(self, capsys):
        code, _, err = run(
            capsys, "variance", "--model", "classical", "--m", "1",
            "--gamma", "1", "--kbt", "1", "--t", "1",
        )
        assert code == 2
        assert "--omega" in err

    def test_usage_error_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["variance", "--model", "bogus", "--t", "1"])
        assert exc.value.code == 2

    def test_negative_parameter_exit_2(self, capsys):
        code, _, err = run(
            capsys, "variance", "--model", "classical", "--m", "-1",
            "--gamma", "1", "--omega", "1", "--kbt", "1", "--t", "1",
        )
        assert code == 2
        assert "m" in err


class TestConfigFile:
    def test_file_values_used_flags_win(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "model = classical\nm = 10\ngamma = 1\nomega = 1\nkbt = 0.1\nt = 1e9\n"
        )
        code, out, _ = run(capsys, "variance", "--config", str(cfg))
        assert code == 0 and out.strip() == "0.01"
        # flag overrides the file value
        code, out, _ = run(capsys, "variance", "--config", str(cfg), "--kbt", "0.2")
        assert code == 0 and out.strip() == "0.02"

    def test_malformed_config_rejected(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("model classical\n")
        with pytest.raises(SystemExit) as exc:
            main(["variance", "--config", str(cfg)])
        assert exc.value.code == 2


class TestSweep:
    def test_figure1_csv_columns(self, capsys, tmp_path):
        path = tmp_path / "fig1_left.csv"
        code, _, _ = run(
            capsys, "sweep", "--figure", "1", "--panel", "left",
            "--points", "20", "--out", str(path),
        )
        assert code == 0
        ds = read_csv(path)
        assert ds.columns == ("kbt", "var_quantum", "var_classical")
        assert ds.rows.shape == (20, 3)
        assert ds.meta["panel"] == "left"
        raw = path.read_text()
        assert raw.startswith("# qbo-command: sweep")

    def test_custom_sweep(self, capsys):
        code, out, _ = run(
            capsys, "sweep", "--swept", "kbt", "--lo", "0.1", "--hi", "10",
            "--t", "1", "--fixed", "m=1,gamma=0.5,omega=1", "--points", "5",
            "--curves", "exact,classical",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "kbt,var_quantum,var_classical"
        assert len(lines) == 6

    def test_missing_panel_reported(self, capsys):
        code, _, err = run(capsys, "sweep", "--figure", "1")
        assert code == 2 and "--panel" in err

    def test_plot_emission(self, capsys, tmp_path):
        plot = tmp_path / "fig.svg"
        code, _, _ = run(
            capsys, "sweep", "--figure", "2", "--panel", "middle",
            "--points", "12", "--out", str(tmp_path / "d.csv"), "--plot", str(plot),
        )
        assert code == 0 and plot.stat().st_size > 0


class TestKurtosis:
    def test_short_run(self, capsys, tmp_path):
        path = tmp_path / "k.csv"
        code, out, _ = run(
            capsys, "kurtosis", "--model", "harmonic", "--t-end", "10",
            "--points", "11", "--out", str(path),
        )
        assert code == 0
        first = out.strip().splitlines()[0].split(",")
        assert float(first[0]) == 0.0 and float(first[1]) == 200.0
        ds = read_csv(path)
        assert ds.columns == ("t", "kappa", "var_x")
        assert float(ds.meta["init_x4"]) == 50.0

    def test_gaussian_override_stays_at_three(self, capsys):
        code, out, _ = run(
            capsys, "kurtosis", "--model", "harmonic", "--t-end", "10",
            "--points", "5", "--init-x4", "0.75", "--init-x3p", "0",
            "--init-x2p2", "-0.5", "--init-xp3", "0", "--init-p4", "0.75",
        )
        assert code == 0
        for line in out.strip().splitlines():
            assert abs(float(line.split(",")[1]) - 3.0) < 1e-6


class TestTable1:
    def test_table_matches_reference_within_tolerance(self, capsys, tmp_path):
        path = tmp_path / "table1.csv"
        code, out, _ = run(capsys, "table1", "--out", str(path))
        assert code == 0
        ds = read_csv(path)
        assert ds.rows.shape == (4, 6)
        got_h = ds.column("kappa_harmonic")
        ref_h = ds.column("ref_harmonic")
        assert np.all(np.abs(got_h - ref_h) / ref_h < 0.15)


class TestMonteCarlo:
    def test_small_ensemble(self, capsys, tmp_path):
        path = tmp_path / "mc.csv"
        code, out, _ = run(
            capsys, "montecarlo", "--m", "1", "--gamma", "0.5", "--omega", "1",
            "--kbt", "1", "--n-traj", "500", "--dt", "1e-3", "--t-end", "1",
            "--seed", "7", "--sample-times", "0.5,1", "--out", str(path),
        )
        assert code == 0
        ds = read_csv(path)
        assert ds.rows.shape == (2, 13)
        assert ds.meta["seed"] == "7"
        assert np.all(ds.column("var_x") > 0.0)

    def test_dt_guard_exit_2(self, capsys):
        code, _, err = run(
            capsys, "montecarlo", "--m", "1", "--gamma", "0.5", "--omega", "1",
            "--kbt", "1", "--n-traj", "10", "--dt", "0.5", "--t-end", "1",
        )
        assert code == 2 and "stability bound" in err


class TestValidate:
    def test_exit_codes(self, capsys, monkeypatch):
        from qbo import cli, validation

        fake_pass = [validation.CheckResult("a", True, "ok", 0.0)]
        monkeypatch.setattr(validation, "run_checks", lambda names=None: fake_pass)
        assert main(["validate"]) == 0
        capsys.readouterr()
        fake_fail = fake_pass + [validation.CheckResult("b", False, "bad", 0.0)]
        monkeypatch.setattr(validation, "run_checks", lambda names=None: fake_fail)
        assert main(["validate"]) == 1
        out = capsys.readouterr().out
        assert "FAIL b" in out and "1/2 checks passed" in out
