"""Robust Pareto set identification for multi-objective bandits with contaminated rewards."""

from .baseline import BaselineConfig, run_mean_psi
from .core import (
    AdmissibilityError,
    AdversaryClass,
    DomainError,
    EmpiricalCdf,
    RobustParams,
    bias_d,
    init_samples_n0,
    round_samples_n,
    stat_bias_u,
    subgaussian_r,
    tau_threshold,
    theoretical_sample_bound,
)
from .environment import (
    EmpiricalArm,
    Environment,
    GaussianArm,
    MaliciousCoupled,
    NoAdversary,
    Offset,
    PointMass,
    UniformOblivious,
    load_empirical,
    random_gaussian_instance,
    true_medians,
)
from .evaluation import EnvironmentSpec, SweepSpec, run_experiment
from .pareto import dominance_matrix, pareto_front, subopt_gaps
from .rpsi import RpsiConfig, run

__version__ = "0.1.0"
