"""Shared random parameter draws for the test modules."""

import numpy as np

from robust_psi.core import AdversaryClass, RobustParams

CLASSES = ("oblivious", "prescient", "malicious")


def draw_params(rng: np.random.Generator) -> tuple[RobustParams, int, int]:
    """One random admissible parameter set with arm and objective counts."""
    cls = CLASSES[rng.integers(3)]
    t_bar = float(rng.uniform(0.05, 0.49))
    limit = t_bar if cls == "malicious" else 2 * t_bar / (1 + 2 * t_bar)
    eps = 0.0 if rng.random() < 0.2 else float(rng.uniform(0.0, 0.95 * limit))
    sigma = float(rng.choice([0.05, 0.1, 0.2, 1.0]) * rng.uniform(0.5, 2.0))
    alpha = float(sigma * rng.uniform(0.1, 4.0))
    params = RobustParams(
        epsilon=eps,
        delta=float(rng.uniform(0.01, 0.5)),
        alpha=alpha,
        t_bar=t_bar,
        sigma=sigma,
        adversary_class=AdversaryClass(cls),
    )
    return params, int(rng.integers(1, 51)), int(rng.integers(1, 9))
