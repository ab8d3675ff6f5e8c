"""
Integration tests for the experiment harness
Small sizes only: the acceptance presets run through the CLI
"""
import json
import math
import sys
from pathlib import Path

import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from coevotree import harness
from coevotree.config import get_settings
from coevotree.errors import ParamOutOfRange
from coevotree.harness import (
    DEFAULT_TOLERANCES,
    RUNNERS,
    ExperimentKind,
    ExperimentSpec,
    preset_specs,
    run_experiment,
    write_reports,
)
from coevotree.streams import replica_seed


@pytest.fixture(scope="module")
def specs():
    """Scaled-down experiments"""
    return {
        "closed": ExperimentSpec(kind="ClosedFormConstants", pmf="geometric:0.3"),
        "oracle": ExperimentSpec(kind="PageRankOracle", pmf="geometric:0.5", replicas=30, seed=3,
                                 params={"max_n": 30}),
        "determinism": ExperimentSpec(kind="Determinism", pmf="geometric:0.3", sizes=[300], horizon=3.0),
        "profile": ExperimentSpec(kind="ProfileSeries", pmf="geometric:0.5", horizon=1.0, replicas=4000,
                                  seed=11, params={"k": 1}, tolerance=4.0),
        "condensation": ExperimentSpec(kind="RootCondensation", pmf="geometric:0.3", sizes=[5000],
                                       replicas=4, seed=5),
        "mean_degree": ExperimentSpec(kind="LimitMeanDegree", pmf="geometric:0.9", replicas=4000, seed=7,
                                      tolerance=0.08),
    }


class TestSpecs:
    """Experiment specifications and presets"""

    def test_every_kind_has_a_runner(self):
        assert set(RUNNERS) == set(ExperimentKind)
        assert set(DEFAULT_TOLERANCES) == set(ExperimentKind)

    def test_tolerance_override(self, specs):
        assert specs["closed"].effective_tolerance == 1e-9
        assert specs["profile"].effective_tolerance == 4.0

    def test_size_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec(kind="Height", pmf="det:0", sizes=[0])

    def test_presets(self):
        assert len(preset_specs("A1")) == 8
        assert len(preset_specs("a14")) == 3
        assert len(preset_specs("ALL")) == 26
        assert all(spec.seed == 99 for spec in preset_specs("A7", seed=99))
        with pytest.raises(ParamOutOfRange):
            preset_specs("A15")


class TestExactKinds:
    """Experiments with deterministic verdicts"""

    def test_closed_form(self, specs):
        report = run_experiment(specs["closed"])
        assert report.passed, report.details
        assert report.provenance == "closed-form"

    def test_closed_form_needs_family(self):
        with pytest.raises(ParamOutOfRange):
            run_experiment(ExperimentSpec(kind="ClosedFormConstants", pmf="pmf:0.5,0.2,0.3"))

    def test_pagerank_oracle(self, specs):
        report = run_experiment(specs["oracle"])
        assert report.passed, f"worst deviation {report.estimate}"
        assert len(report.replica_seeds) == 30

    def test_determinism(self, specs):
        report = run_experiment(specs["determinism"])
        assert report.passed, report.details
        assert report.estimate == 5.0

    def test_alpha_k_monotone(self):
        spec = ExperimentSpec(kind="AlphaK", pmf="geometric:0.5", params={"k_min": 5, "k_max": 40, "k_step": 5})
        report = run_experiment(spec)
        assert report.details["monotone"]
        assert report.estimate <= report.predicted + 1e-9
        assert report.tables["alpha_k"][0] == ["k", "alpha"]

    def test_alpha_k_preset(self):
        """Every k in 5..200 on geometric(0.3), approaching 1/R = 0.84 from below"""
        report = run_experiment(preset_specs("A2")[0])
        assert report.passed, report.details
        assert report.details["k_last"] == 200
        assert len(report.tables["alpha_k"]) == 197
        assert report.predicted == pytest.approx(0.84, abs=1e-9)
        assert 0.0 < report.predicted - report.estimate < 1e-3


class TestMonteCarloKinds:
    """Scaled-down ensemble experiments"""

    def test_profile_series(self, specs):
        report = run_experiment(specs["profile"])
        assert report.passed, f"z={report.details['z_score']}"
        assert abs(report.details["ode_value"] - report.predicted) < 1e-6

    def test_limit_mean_degree(self, specs):
        report = run_experiment(specs["mean_degree"])
        assert report.predicted == 1.0, "subcritical law: q* = 1"
        assert report.passed, f"mean root degree {report.estimate}"
        assert report.notes == []

    def test_limit_mean_degree_heavy_tail_note(self):
        spec = ExperimentSpec(kind="LimitMeanDegree", pmf="geometric:0.3", replicas=20, seed=8,
                              params={"size_cap": 200})
        report = run_experiment(spec)
        assert report.predicted == pytest.approx(3.0 / 7.0, abs=1e-9)
        assert report.details["regime"] == "NonFringe"
        assert any("tail index close to 1" in note for note in report.notes)

    def test_root_condensation_report(self, specs):
        report = run_experiment(specs["condensation"])
        assert report.predicted == pytest.approx(4.0 / 7.0, abs=1e-9)
        assert 0.0 < report.estimate < 1.0
        assert len(report.tables["root_share"]) == 5

    def test_replica_seeds(self, specs):
        report = run_experiment(specs["condensation"])
        assert report.replica_seeds == [replica_seed(5, r) for r in range(4)]
        assert report.failed_replicas == []

    def test_same_result_for_any_thread_count(self, specs, monkeypatch):
        spec = specs["profile"].model_copy(update={"replicas": 500})
        monkeypatch.setenv("COEVO_THREADS", "1")
        get_settings.cache_clear()
        single = run_experiment(spec).comparable()
        monkeypatch.setenv("COEVO_THREADS", "4")
        get_settings.cache_clear()
        multi = run_experiment(spec).comparable()
        get_settings.cache_clear()
        assert single == multi


class TestAsymptoticKinds:
    """Scaled-down runs of the slow experiments; wide bands so the verdict is stable"""

    def test_equivalence(self):
        spec = ExperimentSpec(kind="Equivalence", pmf="geometric:0.3", damping=0.7, sizes=[500],
                              replicas=20, seed=12)
        report = run_experiment(spec)
        assert report.details["dof"] >= 1
        assert 0.0 <= report.estimate <= 1.0
        assert report.passed == (report.estimate > report.tolerance)
        assert report.passed, f"p-value {report.estimate}"
        assert report.tables["degree_bins"][0] == ["bin", "pagerank", "exploration"]

    def test_moment_bound(self):
        spec = ExperimentSpec(kind="MomentBound", pmf="geometric:0.3", horizon=1.0, replicas=500, seed=13)
        report = run_experiment(spec)
        assert report.predicted == pytest.approx(0.5 * math.exp(0.84), rel=1e-9)
        assert report.provenance == "upper bound"
        assert report.passed, f"mean {report.estimate} above bound {report.predicted}"

    def test_height(self):
        spec = ExperimentSpec(kind="Height", pmf="det:0", sizes=[200, 2000], replicas=2, seed=14,
                              params={"band_lo": 0.0, "band_hi": 10.0, "trend_slack": 10.0})
        report = run_experiment(spec)
        assert report.predicted == pytest.approx(math.e, abs=1e-8)
        assert len(report.details["ratios"]) == 2
        assert len(report.tables["height"]) == 3
        assert report.passed
        assert len(report.replica_seeds) == 4

    def test_brw_speed(self):
        spec = ExperimentSpec(kind="BrwSpeed", pmf="geometric:0.5", horizon=4.0, replicas=5, seed=15,
                              tolerance=1.0)
        report = run_experiment(spec)
        assert abs(report.details["alpha_star_at_kappa0"]) < 1e-6, "kappa0 is the zero of alpha*"
        assert report.details["rate_at_minimizer"] > 0
        assert report.details["log_corrected_speed"] < report.predicted
        assert any("corrected reference" in note for note in report.notes)
        assert 0.0 <= report.estimate
        assert report.passed

    def test_degree_tail(self):
        spec = ExperimentSpec(kind="DegreeTail", pmf="affine:0.5", sizes=[20000], seed=16, tolerance=0.5)
        report = run_experiment(spec)
        assert report.predicted == pytest.approx(2.0, abs=1e-12)
        assert len(report.details["sweep"]) == 3
        assert report.tables["degree_ccdf"][0] == ["k", "count", "ccdf"]
        assert report.passed, f"Hill estimate {report.estimate}"

    def test_pagerank_tail(self):
        spec = ExperimentSpec(kind="PageRankTail", pmf="geometric:0.9", sizes=[20000], seed=17,
                              tolerance=-100.0)
        report = run_experiment(spec)
        assert report.predicted == pytest.approx(1.0 / 0.36 - 1.0 / 0.91125, abs=1e-9)
        assert set(report.details["exponents"]) == {"0.15", "0.9"}
        assert report.passed

    def test_fringe_convergence(self):
        spec = ExperimentSpec(kind="FringeConvergence", pmf="geometric:0.5", sizes=[3000], seed=18,
                              params={"samples": 2000, "max_size": 3}, tolerance=1.0)
        report = run_experiment(spec)
        assert report.details["singleton_exact"] == pytest.approx(1.0 / 1.5, abs=1e-12)
        assert len(report.tables["fringe"]) == 5
        assert report.replica_seeds[:2] == [replica_seed(18, 0), replica_seed(18, 1)]
        assert report.passed, f"singleton share {report.details['singleton_samples']}"

    def test_fixed_vertex_degree(self):
        spec = ExperimentSpec(kind="FixedVertexDegree", pmf="geometric:0.9", sizes=[5000], replicas=5,
                              seed=19, tolerance=10.0)
        report = run_experiment(spec)
        assert report.predicted == pytest.approx(0.36, abs=1e-9)
        assert 0.0 <= report.estimate <= 1.0
        assert report.passed

    def test_root_pagerank(self):
        spec = ExperimentSpec(kind="RootPageRank", pmf="geometric:0.3", sizes=[2000], replicas=3, seed=20,
                              damping=0.5, tolerance=0.1)
        report = run_experiment(spec)
        assert report.predicted == pytest.approx(1.0 / 7.0, abs=1e-9)
        assert report.passed, f"root PageRank share {report.estimate}"


class TestFailedReplicas:
    """A run in which every replica raises still yields a report"""

    @pytest.fixture
    def broken_growth(self, monkeypatch):
        def fail(config, rng):
            raise ParamOutOfRange("growth disabled")
        monkeypatch.setattr(harness, "grow_discrete", fail)

    def test_single_tree_kind(self, broken_growth):
        report = run_experiment(ExperimentSpec(kind="DegreeTail", pmf="affine:0.5", sizes=[100], seed=1))
        assert report.passed is False
        assert report.failed_replicas == [0]
        assert report.estimate is None
        assert "no replica produced a result" in report.notes

    def test_ensemble_kind(self, broken_growth):
        report = run_experiment(ExperimentSpec(kind="PageRankOracle", pmf="geometric:0.5", replicas=3, seed=1))
        assert report.passed is False
        assert report.failed_replicas == [0, 1, 2]

    def test_equivalence(self, broken_growth):
        report = run_experiment(ExperimentSpec(kind="Equivalence", pmf="geometric:0.3", damping=0.7,
                                               sizes=[50], replicas=2, seed=1))
        assert report.passed is False
        assert report.failed_replicas == [2, 3]


class TestOutput:
    """Report files"""

    def test_write_reports(self, specs, tmp_path):
        reports = [run_experiment(specs["closed"]), run_experiment(specs["condensation"])]
        out = tmp_path / "reports" / "report.json"
        write_reports(reports, out, tmp_path / "csv")
        payload = json.loads(out.read_text())
        assert [entry["kind"] for entry in payload] == ["ClosedFormConstants", "RootCondensation"]
        assert "wall_time" in payload[0]
        tables = list((tmp_path / "csv").glob("*.csv"))
        assert len(tables) == 1
        assert tables[0].read_text().splitlines()[0] == "replica,share"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
