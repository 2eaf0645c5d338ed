"""Mean-based successive-elimination Pareto set identification.

The non-robust reference: identical decision rules to R-PSI but driven by
empirical means with an anytime subgaussian confidence radius, and no
allowance for contamination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DomainError
from .environment import Environment, pull_batch
from .rpsi import DEFAULT_SAMPLE_CAP, resolve_streams

__all__ = ["BaselineConfig", "BaselineTrace", "confidence_radius", "run_mean_psi"]


@dataclass(frozen=True)
class BaselineConfig:
    alpha: float
    delta: float
    sigma: float
    max_total_samples: Optional[int] = DEFAULT_SAMPLE_CAP

    def __post_init__(self):
        if self.alpha < 0:
            raise DomainError(f"alpha must be nonnegative, got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


def confidence_radius(sigma: float, n: int, k: int, m: int, delta: float) -> float:
    """sigma * sqrt(2 log(4 K M n^2 / delta) / n), valid for all n simultaneously."""
    return sigma * math.sqrt(2.0 * math.log(4.0 * k * m * n * n / delta) / n)


@dataclass
class BaselineTrace:
    rounds: int = 0
    total_samples: int = 0
    predicted: list = field(default_factory=list)
    eliminated: list = field(default_factory=list)
    active_history: list = field(default_factory=list)
    terminated_via: str = "empty_S"
    # per-arm pull counts and empirical means when each arm left the active set
    counts: np.ndarray = None
    means: np.ndarray = None


def run_mean_psi(config: BaselineConfig, env: Environment, rng=None):
    """Round-robin sampling of active arms with elimination and acceptance by means.

    Each round pulls every active arm once.  An active arm is discarded when
    another active arm beats it with both radii applied, and accepted when no
    active arm can beat it by alpha and it cannot beat any active arm by
    alpha.  Once 2 * radius <= alpha / 2 the survivors are accepted.
    """
    streams = resolve_streams(env, rng)
    k, m = env.n_arms, env.n_objectives
    a = config.alpha
    active = list(range(k))
    sums = np.zeros((k, m))
    counts = np.zeros(k, dtype=np.int64)
    trace = BaselineTrace()
    cap = config.max_total_samples
    n = 0
    while active:
        if cap is not None and trace.total_samples + len(active) > cap:
            trace.terminated_via = "cap"
            break
        n += 1
        for arm in active:
            sums[arm] += pull_batch(env, arm, 1, streams).observed[0]
            counts[arm] += 1
        trace.total_samples += len(active)
        trace.rounds = n
        radius = confidence_radius(config.sigma, n, k, m, config.delta)
        s = np.asarray(active)
        means = sums[s] / n

        beaten = np.all((means + radius)[:, None, :] <= (means - radius)[None, :, :], axis=2)
        np.fill_diagonal(beaten, False)
        keep = ~beaten.any(axis=1)
        trace.eliminated.extend(int(x) for x in s[~keep])
        s, means = s[keep], means[keep]

        blocks = np.all((means - radius + a)[:, None, :] <= (means + radius)[None, :, :], axis=2)
        np.fill_diagonal(blocks, False)
        accept = ~blocks.any(axis=1) & ~blocks.any(axis=0)
        trace.predicted.extend(int(x) for x in s[accept])
        active = [int(x) for x in s[~accept]]
        trace.active_history.append(tuple(active))

        if active and 2.0 * radius <= a / 2.0:
            trace.predicted.extend(active)
            active = []
            trace.terminated_via = "radius"
    trace.counts = counts
    trace.means = sums / np.maximum(counts, 1)[:, None]
    return list(trace.predicted), trace
