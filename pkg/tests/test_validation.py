import numpy as np

from qbo.validation import CHECK_NAMES, run_checks


class TestChecks:
    def test_fast_checks_pass(self):
        fast = ["symbolic-generator", "gaussian-x2p2", "classical-reduction",
                "wick-closure", "stationarity"]
        results = run_checks(fast)
        assert [r.name for r in results] == fast
        for r in results:
            assert r.passed, f"{r.name}: {r.detail}"
            assert r.seconds >= 0.0

    def test_algebra_oracle(self):
        passed, detail = CHECK_NAMES["algebra-oracle"]()
        assert passed, detail

    def test_semianalytic_agreement(self):
        passed, detail = CHECK_NAMES["semianalytic-agreement"]()
        assert passed, detail

    def test_crash_reported_as_failure(self, monkeypatch):
        import qbo.validation as v

        def boom():
            raise RuntimeError("kaput")

        monkeypatch.setitem(v.CHECK_NAMES, "symbolic-generator", boom)
        results = run_checks(["symbolic-generator"])
        assert not results[0].passed
        assert "kaput" in results[0].detail


def test_sweep_results_independent_of_thread_cap(monkeypatch):
    from qbo.experiments import run_figure1

    a = run_figure1("right", n_points=24)
    monkeypatch.setenv("QBO_THREADS", "1")
    b = run_figure1("right", n_points=24)
    assert np.array_equal(a.rows, b.rows)
