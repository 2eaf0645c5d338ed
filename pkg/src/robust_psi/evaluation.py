"""Ground-truth success checks and epsilon sweeps.

A returned set P succeeds when every arm in it has suboptimality gap at
most 2D + alpha (accuracy) and every Pareto-optimal arm is within 2D of
some arm in P in every objective (coverage).  Both algorithms are judged
with the D of the run's robust parameters, so the mean-based baseline gets
the same relaxed criteria as R-PSI.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .baseline import BaselineConfig, run_mean_psi
from .core import RobustParams, stat_bias_u
from .environment import (
    Environment,
    GaussianArm,
    NoAdversary,
    load_empirical,
    random_gaussian_instance,
    true_medians,
)
from .pareto import as_median_matrix, pareto_front, subopt_gaps
from .rpsi import DEFAULT_SAMPLE_CAP, RpsiConfig, run

__all__ = [
    "ALGORITHMS",
    "AggregateRow",
    "EnvironmentSpec",
    "ExperimentReport",
    "RunRow",
    "SuccessCriteria",
    "SweepSpec",
    "check_accuracy",
    "check_coverage",
    "derive_seed",
    "evaluate",
    "good_event_holds",
    "read_aggregate_csv",
    "read_runs_csv",
    "run_cell",
    "run_experiment",
    "strict_success",
]

ALGORITHMS = ("rpsi", "baseline")

RUN_FIELDS = [
    "algorithm",
    "epsilon",
    "seed",
    "success",
    "samples",
    "returned_arms",
    "optimal_returned",
    "optimal_total",
    "accuracy_violations",
    "uncovered_optimal",
    "terminated_via",
]
AGGREGATE_FIELDS = ["algorithm", "epsilon", "rsr", "as_mean", "ro_mean", "vc_mean", "runs"]


@dataclass(frozen=True)
class SuccessCriteria:
    accuracy_margin: float
    coverage_margin: float

    @classmethod
    def from_params(cls, params: RobustParams) -> "SuccessCriteria":
        d = params.bias
        return cls(2 * d + params.alpha, 2 * d)


def check_accuracy(p: Iterable[int], medians, d_bias: float, alpha: float) -> list[int]:
    """Arms of P whose suboptimality gap exceeds 2D + alpha."""
    gaps = subopt_gaps(medians)
    limit = 2 * d_bias + alpha
    return sorted(int(i) for i in set(p) if gaps[i] > limit)


def check_coverage(p: Iterable[int], medians, d_bias: float) -> list[int]:
    """Pareto-optimal arms j with no i in P such that m_j - m_i <= 2D everywhere."""
    m = as_median_matrix(medians)
    chosen = sorted(set(p))
    uncovered = []
    for j in pareto_front(m):
        if not chosen or not np.any(np.all(m[j] - m[chosen] <= 2 * d_bias, axis=1)):
            uncovered.append(j)
    return uncovered


def strict_success(p: Iterable[int], medians, alpha: float) -> bool:
    """alpha-accuracy with every Pareto-optimal arm returned (zero coverage margin)."""
    p = set(p)
    return not check_accuracy(p, medians, 0.0, alpha) and set(pareto_front(medians)) <= p


def good_event_holds(estimates, medians, params: RobustParams) -> bool:
    """Every recorded empirical median lies within D + U_tau of the true median."""
    m = as_median_matrix(medians)
    d = params.bias
    for snap in estimates:
        width = d + stat_bias_u(params, snap.tau)
        if np.any(np.abs(snap.median - m[snap.arm]) > width):
            return False
    return True


# --- sweep ------------------------------------------------------------------


def derive_seed(*coords) -> int:
    """Stable 64-bit seed from cell coordinates."""
    text = "|".join(repr(c) for c in coords).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class EnvironmentSpec:
    """Recipe for the true reward models; the attack is applied per cell."""

    kind: str = "gaussian"
    k: int = 10
    m: int = 2
    mean_range: tuple = (0.0, 10.0)
    sigma: float = 0.1
    means: Optional[tuple] = None
    dataset_path: Optional[str] = None
    normalize: bool = False
    fixed_instance: bool = False

    def build(self, seed: int) -> Environment:
        if self.kind == "empirical":
            return load_empirical(self.dataset_path, normalize=self.normalize, seed=seed)
        if self.means is not None:
            return Environment(tuple(GaussianArm(row, self.sigma) for row in self.means), NoAdversary(), 0.0, seed)
        lo, hi = self.mean_range
        return random_gaussian_instance(self.k, self.m, lo, hi, self.sigma, seed)


@dataclass(frozen=True)
class SweepSpec:
    params: RobustParams
    environment: EnvironmentSpec
    attack: object = field(default_factory=NoAdversary)
    epsilons: tuple = (0.0,)
    replications: int = 10
    base_seed: int = 0
    algorithms: tuple = ALGORITHMS
    max_total_samples: Optional[int] = DEFAULT_SAMPLE_CAP


@dataclass
class RunRow:
    algorithm: str
    epsilon: float
    seed: int
    success: bool
    samples: int
    returned_arms: tuple
    optimal_returned: int
    optimal_total: int
    accuracy_violations: int
    uncovered_optimal: int
    terminated_via: str

    def as_csv(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "epsilon": repr(float(self.epsilon)),
            "seed": str(self.seed),
            "success": "1" if self.success else "0",
            "samples": str(self.samples),
            "returned_arms": ";".join(str(a) for a in self.returned_arms),
            "optimal_returned": str(self.optimal_returned),
            "optimal_total": str(self.optimal_total),
            "accuracy_violations": str(self.accuracy_violations),
            "uncovered_optimal": str(self.uncovered_optimal),
            "terminated_via": self.terminated_via,
        }

    @classmethod
    def from_csv(cls, rec: dict) -> "RunRow":
        arms = rec["returned_arms"]
        return cls(
            algorithm=rec["algorithm"],
            epsilon=float(rec["epsilon"]),
            seed=int(rec["seed"]),
            success=rec["success"] == "1",
            samples=int(rec["samples"]),
            returned_arms=tuple(int(a) for a in arms.split(";")) if arms else (),
            optimal_returned=int(rec["optimal_returned"]),
            optimal_total=int(rec["optimal_total"]),
            accuracy_violations=int(rec["accuracy_violations"]),
            uncovered_optimal=int(rec["uncovered_optimal"]),
            terminated_via=rec["terminated_via"],
        )


@dataclass
class AggregateRow:
    algorithm: str
    epsilon: float
    rsr: float
    as_mean: float
    ro_mean: float
    vc_mean: float
    runs: int

    def as_csv(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "epsilon": repr(float(self.epsilon)),
            "rsr": repr(float(self.rsr)),
            "as_mean": repr(float(self.as_mean)),
            "ro_mean": repr(float(self.ro_mean)),
            "vc_mean": repr(float(self.vc_mean)),
            "runs": str(self.runs),
        }

    @classmethod
    def from_csv(cls, rec: dict) -> "AggregateRow":
        return cls(
            rec["algorithm"],
            float(rec["epsilon"]),
            float(rec["rsr"]),
            float(rec["as_mean"]),
            float(rec["ro_mean"]),
            float(rec["vc_mean"]),
            int(rec["runs"]),
        )


@dataclass
class ExperimentReport:
    runs: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def aggregate(self) -> list[AggregateRow]:
        cells: dict = {}
        for row in self.runs:
            cells.setdefault((row.algorithm, row.epsilon), []).append(row)
        out = []
        for (alg, eps), rows in sorted(cells.items(), key=lambda kv: (_alg_order(kv[0][0]), kv[0][1])):
            done = [r for r in rows if r.terminated_via != "error"]
            out.append(
                AggregateRow(
                    algorithm=alg,
                    epsilon=eps,
                    rsr=sum(r.success for r in rows) / len(rows),
                    as_mean=_mean([r.samples for r in done]),
                    ro_mean=_mean([r.optimal_returned / r.optimal_total if r.optimal_total else 1.0 for r in done]),
                    vc_mean=_mean([r.accuracy_violations for r in done]),
                    runs=len(rows),
                )
            )
        return out

    def cell(self, algorithm: str, epsilon: float) -> Optional[AggregateRow]:
        for row in self.aggregate():
            if row.algorithm == algorithm and row.epsilon == epsilon:
                return row
        return None

    def runs_csv(self) -> str:
        return _to_csv(RUN_FIELDS, (r.as_csv() for r in self.runs))

    def aggregate_csv(self) -> str:
        return _to_csv(AGGREGATE_FIELDS, (r.as_csv() for r in self.aggregate()))

    def table(self) -> str:
        lines = [f"{'algorithm':<10}{'eps':>6}{'RSR':>7}{'AS':>12}{'RO':>7}{'VC':>7}{'runs':>6}"]
        for r in self.aggregate():
            lines.append(
                f"{r.algorithm:<10}{r.epsilon:>6.2f}{r.rsr:>7.2f}{r.as_mean:>12.1f}{r.ro_mean:>7.2f}{r.vc_mean:>7.2f}{r.runs:>6d}"
            )
        return "\n".join(lines)


def _alg_order(name: str) -> int:
    return ALGORITHMS.index(name) if name in ALGORITHMS else len(ALGORITHMS)


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else float("nan")


def _to_csv(fields: list, records: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    return buf.getvalue()


def read_runs_csv(text_or_path) -> list[RunRow]:
    return [RunRow.from_csv(rec) for rec in _read_csv(text_or_path, RUN_FIELDS)]


def read_aggregate_csv(text_or_path) -> list[AggregateRow]:
    return [AggregateRow.from_csv(rec) for rec in _read_csv(text_or_path, AGGREGATE_FIELDS)]


def _read_csv(text_or_path, fields: list) -> list[dict]:
    if isinstance(text_or_path, os.PathLike) or (isinstance(text_or_path, str) and "\n" not in text_or_path):
        with open(text_or_path, newline="") as fh:
            text = fh.read()
    else:
        text = text_or_path
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != fields:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}, expected {fields}")
    return list(reader)


def evaluate(algorithm: str, epsilon: float, seed: int, predicted, samples: int, terminated_via: str,
             env: Environment, params: RobustParams) -> RunRow:
    medians = true_medians(env)
    d = params.bias
    front = pareto_front(medians)
    violations = check_accuracy(predicted, medians, d, params.alpha)
    uncovered = check_coverage(predicted, medians, d)
    capped = terminated_via == "cap"
    return RunRow(
        algorithm=algorithm,
        epsilon=float(epsilon),
        seed=int(seed),
        success=not capped and not violations and not uncovered,
        samples=int(samples),
        returned_arms=tuple(sorted(predicted)),
        optimal_returned=len(set(predicted) & set(front)),
        optimal_total=len(front),
        accuracy_violations=len(violations),
        uncovered_optimal=len(uncovered),
        terminated_via=terminated_via,
    )


def run_cell(spec: SweepSpec, algorithm: str, epsilon: float, replication: int) -> RunRow:
    """One (algorithm, epsilon, replication) cell.

    The instance depends only on (base seed, replication), so every
    algorithm and epsilon sees the same true rewards for a replication.
    """
    inst_seed = derive_seed(spec.base_seed, "instance", 0 if spec.environment.fixed_instance else replication)
    pull_seed = derive_seed(spec.base_seed, algorithm, float(epsilon), replication)
    params = spec.params.replace(epsilon=float(epsilon))
    env = spec.environment.build(inst_seed).with_attack(spec.attack, float(epsilon))
    if algorithm == "rpsi":
        predicted, trace = run(RpsiConfig(params, spec.max_total_samples), env, pull_seed, record_estimates=False)
    elif algorithm == "baseline":
        cfg = BaselineConfig(params.alpha, params.delta, params.sigma, spec.max_total_samples)
        predicted, trace = run_mean_psi(cfg, env, pull_seed)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return evaluate(algorithm, epsilon, pull_seed, predicted, trace.total_samples, trace.terminated_via, env, params)


def _safe_cell(args) -> tuple:
    spec, alg, eps, rep = args
    try:
        return run_cell(spec, alg, eps, rep), None
    except Exception as exc:  # recorded per cell; the sweep carries on
        seed = derive_seed(spec.base_seed, alg, float(eps), rep)
        row = RunRow(alg, float(eps), seed, False, 0, (), 0, 0, 0, 0, "error")
        return row, f"{alg} eps={eps} rep={rep}: {type(exc).__name__}: {exc}"


def run_experiment(spec: SweepSpec, jobs: int = 1, progress: Optional[Callable[[RunRow], None]] = None) -> ExperimentReport:
    """Run every (algorithm, epsilon, replication) cell and collect the rows in grid order."""
    cells = [(spec, alg, eps, rep) for alg in spec.algorithms for eps in spec.epsilons for rep in range(spec.replications)]
    report = ExperimentReport()
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_safe_cell, cells))
    else:
        results = []
        for c in cells:
            results.append(_safe_cell(c))
            if progress:
                progress(results[-1][0])
    for row, err in results:
        report.runs.append(row)
        if err:
            report.errors.append(err)
    return report
