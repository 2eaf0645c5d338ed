import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_psi.core import RobustParams, stat_bias_u
from robust_psi.environment import Offset
from robust_psi.evaluation import (
    EnvironmentSpec,
    ExperimentReport,
    RunRow,
    SuccessCriteria,
    SweepSpec,
    check_accuracy,
    check_coverage,
    derive_seed,
    good_event_holds,
    read_aggregate_csv,
    read_runs_csv,
    run_cell,
    run_experiment,
    strict_success,
)
from robust_psi.pareto import pareto_front
from robust_psi.rpsi import MedianSnapshot

ROWS = [(1, 2), (2, 1), (0, 0)]
PARAMS = RobustParams(0.0, 0.1, 0.1, 0.49, 0.1)


def small_spec(**kw):
    base = dict(
        params=PARAMS,
        environment=EnvironmentSpec(k=5, m=2),
        attack=Offset(),
        epsilons=(0.0, 0.2),
        replications=2,
        base_seed=3,
    )
    base.update(kw)
    return SweepSpec(**base)


class TestChecks:
    def test_subset_of_front_is_accurate(self):
        assert check_accuracy([0, 1], ROWS, 0.0, 0.0) == []

    def test_accuracy_example(self):
        assert check_accuracy([2], ROWS, 0.0, 0.5) == [2]

    def test_accuracy_boundary_inclusive(self):
        assert check_accuracy([2], ROWS, 0.0, 1.0) == []

    def test_coverage_superset(self):
        assert check_coverage([0, 1, 2], ROWS, 0.0) == []

    def test_coverage_missing(self):
        assert check_coverage([0, 2], ROWS, 0.0) == [1]
        assert check_coverage([], ROWS, 0.0) == [0, 1]

    def test_coverage_within_2d(self):
        d = 0.3
        m = [(1.0, 1.0), (1.0 + d, 1.0 - d)]
        assert pareto_front(m) == [0, 1]
        assert check_coverage([0], m, d) == []
        assert check_coverage([0], m, d / 4) == [1]

    def test_criteria(self):
        p = PARAMS.replace(epsilon=0.2)
        c = SuccessCriteria.from_params(p)
        assert c.accuracy_margin == 2 * p.bias + 0.1 and c.coverage_margin == 2 * p.bias

    @given(
        st.lists(st.lists(st.integers(0, 6), min_size=2, max_size=2), min_size=1, max_size=7),
        st.sets(st.integers(0, 6)),
        st.floats(0, 2),
        st.floats(0, 1),
    )
    def test_relaxed_contains_strict(self, rows, chosen, alpha, d):
        p = {i for i in chosen if i < len(rows)}
        if strict_success(p, rows, alpha):
            assert not check_accuracy(p, rows, d, alpha)
            assert not check_coverage(p, rows, d)

    def test_good_event(self):
        p = PARAMS.replace(epsilon=0.2)
        medians = np.array([[1.0, 2.0]])
        w = p.bias + stat_bias_u(p, 3)
        inside = MedianSnapshot(0, 3, np.array([1.0 + 0.99 * w, 2.0]), 0.0)
        outside = MedianSnapshot(0, 3, np.array([1.0, 2.0 - 1.01 * w]), 0.0)
        assert good_event_holds([inside], medians, p)
        assert not good_event_holds([inside, outside], medians, p)


class TestSeeds:
    def test_stable(self):
        assert derive_seed(0, "rpsi", 0.1, 3) == derive_seed(0, "rpsi", 0.1, 3)
        assert 0 <= derive_seed(1, 2) < 2**64

    def test_distinct(self):
        seeds = {derive_seed(0, alg, eps, r) for alg in ("rpsi", "baseline") for eps in (0.0, 0.1) for r in range(50)}
        assert len(seeds) == 200


class TestCsv:
    def test_run_roundtrip(self):
        rows = [
            RunRow("rpsi", 0.1, 2**63 + 5, True, 1234, (0, 3), 2, 2, 0, 0, "empty_S"),
            RunRow("baseline", 1 / 3, 7, False, 5, (), 0, 3, 1, 3, "cap"),
        ]
        text = ExperimentReport(runs=rows).runs_csv()
        assert text.splitlines()[0] == (
            "algorithm,epsilon,seed,success,samples,returned_arms,optimal_returned,"
            "optimal_total,accuracy_violations,uncovered_optimal,terminated_via"
        )
        assert read_runs_csv(text) == rows

    def test_aggregate_roundtrip(self, tmp_path):
        report = run_experiment(small_spec())
        path = tmp_path / "agg.csv"
        path.write_text(report.aggregate_csv())
        assert read_aggregate_csv(path) == report.aggregate()
        assert read_aggregate_csv(str(path))[0].runs == 2

    def test_bad_header(self):
        with pytest.raises(ValueError):
            read_runs_csv("a,b\n1,2\n")


class TestExperiment:
    def test_empty(self):
        report = run_experiment(small_spec(replications=0))
        assert report.runs == [] and report.aggregate() == []

    def test_bit_identical(self):
        a = run_experiment(small_spec())
        b = run_experiment(small_spec())
        assert a.runs_csv() == b.runs_csv() and a.aggregate_csv() == b.aggregate_csv()

    def test_parallel_matches_serial(self):
        a = run_experiment(small_spec())
        b = run_experiment(small_spec(), jobs=2)
        assert a.runs_csv() == b.runs_csv()

    def test_grid_order_and_counts(self):
        report = run_experiment(small_spec())
        agg = report.aggregate()
        assert [(r.algorithm, r.epsilon) for r in agg] == [
            ("rpsi", 0.0), ("rpsi", 0.2), ("baseline", 0.0), ("baseline", 0.2)
        ]
        assert all(r.runs == 2 for r in agg)
        assert report.cell("rpsi", 0.2).runs == 2 and report.cell("rpsi", 0.3) is None

    def test_rsr_one_implies_clean_runs(self):
        report = run_experiment(small_spec(replications=3))
        for cell in report.aggregate():
            if cell.rsr == 1.0:
                rows = [r for r in report.runs if (r.algorithm, r.epsilon) == (cell.algorithm, cell.epsilon)]
                assert cell.vc_mean == 0
                assert all(r.uncovered_optimal == 0 and r.accuracy_violations == 0 for r in rows)

    def test_instances_paired_across_cells(self):
        spec = small_spec()
        a = run_cell(spec, "rpsi", 0.0, 1)
        b = run_cell(spec, "baseline", 0.2, 1)
        assert a.optimal_total == b.optimal_total

    def test_error_cells_recorded(self, tmp_path):
        spec = small_spec(environment=EnvironmentSpec(kind="empirical", dataset_path=str(tmp_path / "missing.csv")))
        report = run_experiment(spec)
        assert len(report.errors) == len(report.runs) == 8
        assert all(r.terminated_via == "error" and not r.success for r in report.runs)
        agg = report.aggregate()[0]
        assert agg.rsr == 0.0 and math.isnan(agg.as_mean)

    def test_cap_counts_as_failure(self):
        report = run_experiment(small_spec(max_total_samples=50, algorithms=("rpsi",)))
        assert all(r.terminated_via == "cap" and not r.success for r in report.runs)

    def test_table(self):
        lines = run_experiment(small_spec(algorithms=("rpsi",))).table().splitlines()
        assert lines[0].split()[:3] == ["algorithm", "eps", "RSR"]
        assert len(lines) == 3

    def test_fixed_means(self):
        env = EnvironmentSpec(means=((0.0, 5.0), (5.0, 0.0), (0.0, 0.0)), sigma=0.1)
        report = run_experiment(small_spec(environment=env, algorithms=("rpsi",)))
        assert all(r.optimal_total == 2 and r.success for r in report.runs)
