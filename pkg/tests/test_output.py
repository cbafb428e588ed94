import numpy as np
import pytest

from qbo.experiments import Dataset
from qbo.output import RunManifest, emit_csv, emit_plot, format_float, read_csv


@pytest.fixture
def dataset():
    rng = np.random.default_rng(5)
    rows = np.column_stack([
        np.logspace(-3, 3, 7),
        rng.uniform(0.1, 10.0, 7),
        rng.uniform(0.1, 10.0, 7),
    ])
    return Dataset(columns=("kbt", "var_quantum", "var_classical"),
                   rows=rows, meta={"panel": "left", "t": 10.0})


class TestManifest:
    def test_contains_resolved_configuration(self):
        man = RunManifest(command="sweep", config={"figure": 1, "t": 10.0},
                          seeds=(7,))
        lines = man.lines()
        assert lines[0] == "# qbo-command: sweep"
        assert any(line.startswith("# qbo-version:") for line in lines)
        assert "# seeds: 7" in lines
        assert "# config figure=1" in lines
        assert "# config t=10" in lines

    def test_timestamp_auto_filled(self):
        assert RunManifest(command="x").timestamp


class TestCsv:
    def test_round_trip_exact(self, tmp_path, dataset):
        path = tmp_path / "out.csv"
        emit_csv(dataset, path, RunManifest(command="sweep"))
        back = read_csv(path)
        assert back.columns == dataset.columns
        np.testing.assert_array_equal(back.rows, dataset.rows)

    def test_seventeen_digit_floats(self):
        v = 0.1 + 0.2
        assert float(format_float(v)) == v
        assert format_float(0.01) == "0.01"

    def test_byte_identical_modulo_timestamp(self, tmp_path, dataset):
        man1 = RunManifest(command="sweep", config={"figure": 1})
        man2 = RunManifest(command="sweep", config={"figure": 1})
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(dataset, p1, man1)
        emit_csv(dataset, p2, man2)
        strip = lambda p: [
            ln for ln in p.read_text().splitlines() if not ln.startswith("# timestamp")
        ]
        assert strip(p1) == strip(p2)

    def test_empty_dataset_header_only(self, tmp_path):
        ds = Dataset(columns=("a", "b"), rows=np.empty((0, 2)), meta={"k": "v"})
        path = tmp_path / "empty.csv"
        emit_csv(ds, path, RunManifest(command="x"))
        lines = path.read_text().splitlines()
        assert lines[-1] == "a,b"
        back = read_csv(path)
        assert back.rows.shape == (0, 2)


class TestPlots:
    def test_loglog_sweep_plot(self, tmp_path, dataset):
        path = tmp_path / "sweep.svg"
        emit_plot(dataset, path, axes="loglog")
        text = path.read_text()
        assert text.lstrip().startswith("<?xml") and "svg" in text[:200]

    def test_linear_kurtosis_plot_with_reference_line(self, tmp_path):
        rows = np.column_stack([np.linspace(0, 200, 50),
                                3 + np.exp(-np.linspace(0, 5, 50))])
        ds = Dataset(columns=("t", "kappa"), rows=rows, meta={"kind": "kurtosis"})
        path = tmp_path / "kurt.svg"
        emit_plot(ds, path, axes="linear")
        assert path.stat().st_size > 0

    def test_single_point_markers_only(self, tmp_path):
        ds = Dataset(columns=("t", "v"), rows=[[1.0, 2.0]])
        path = tmp_path / "point.svg"
        emit_plot(ds, path, axes="linear")
        assert path.stat().st_size > 0

    def test_rejects_bad_axes(self, tmp_path, dataset):
        with pytest.raises(ValueError, match="axes"):
            emit_plot(dataset, tmp_path / "x.svg", axes="polar")
