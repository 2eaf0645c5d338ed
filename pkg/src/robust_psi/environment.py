"""Contaminated multi-objective bandit simulator.

Each pull draws a true reward vector Y, a contamination indicator B per
objective and an adversarial replacement Z, and reports
``(1 - B) * Y + B * Z``.  Randomness comes from :class:`ArmStreams`, which
gives every arm its own independent generators, so the samples an arm
produces never depend on how pulls of different arms are interleaved.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr

from .core import DomainError, EmpiricalCdf, median_of_interest
from .pareto import pareto_front

__all__ = [
    "ArmStreams",
    "EmpiricalArm",
    "Environment",
    "GaussianArm",
    "IngestionError",
    "MaliciousCoupled",
    "NoAdversary",
    "Offset",
    "PointMass",
    "PullBatch",
    "PullRecord",
    "UniformOblivious",
    "load_empirical",
    "pull",
    "pull_batch",
    "random_gaussian_instance",
    "read_dataset",
    "true_medians",
]


class IngestionError(ValueError):
    """A dataset file could not be turned into an environment."""


# --- arm models -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianArm:
    means: np.ndarray
    sigma: float

    def __post_init__(self):
        means = np.array(self.means, dtype=float).ravel()
        if means.size < 1 or not np.all(np.isfinite(means)):
            raise DomainError("Gaussian arm needs at least one finite mean")
        if not self.sigma > 0:
            raise DomainError(f"Gaussian arm sigma must be positive, got {self.sigma}")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_objectives(self) -> int:
        return self.means.size

    def medians(self) -> np.ndarray:
        return self.means.copy()

    def sample(self, gen: np.random.Generator, n: int) -> tuple[np.ndarray, None]:
        return self.means + self.sigma * gen.standard_normal((n, self.n_objectives)), None

    def threshold_position(self, y: np.ndarray, drawn, jitter: np.ndarray) -> np.ndarray:
        # continuous law: the probability integral transform is already uniform
        return ndtr((y - self.means) / self.sigma)


@dataclass(frozen=True, eq=False)
class EmpiricalArm:
    """Uniform draw from a finite list of objective vectors."""

    points: np.ndarray
    _ranks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise DomainError("empirical arm needs a nonempty list of objective vectors")
        if not np.all(np.isfinite(pts)):
            raise DomainError("empirical arm points must be finite")
        pts.setflags(write=False)
        ranks = np.empty(pts.shape, dtype=np.int64)
        for d in range(pts.shape[1]):
            ranks[np.argsort(pts[:, d], kind="stable"), d] = np.arange(pts.shape[0])
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_ranks", ranks)

    @property
    def n_objectives(self) -> int:
        return self.points.shape[1]

    def medians(self) -> np.ndarray:
        return np.array([median_of_interest(EmpiricalCdf(self.points[:, d])) for d in range(self.n_objectives)])

    def sample(self, gen: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        idx = gen.integers(0, self.points.shape[0], size=n)
        return self.points[idx], idx

    def threshold_position(self, y: np.ndarray, drawn: np.ndarray, jitter: np.ndarray) -> np.ndarray:
        # randomised rank of the drawn point, uniform on [0, 1) per objective
        idx = drawn
        cols = np.arange(self.n_objectives)
        return (self._ranks[idx[:, None], cols[None, :]] + jitter) / self.points.shape[0]


ArmModel = Union[GaussianArm, EmpiricalArm]


# --- adversaries ------------------------------------------------------------


@dataclass(frozen=True)
class NoAdversary:
    """Contamination draws from the true law, so observations are untouched."""

    kind = "none"
    coupled = False

    def replacement(self, y, optimal, gen):
        return y


@dataclass(frozen=True)
class PointMass:
    """Replace the sample by a constant that depends on the arm's optimality."""

    value_optimal: float = -1.0
    value_suboptimal: float = 1.0
    kind = "point_mass"
    coupled = False

    def replacement(self, y, optimal, gen):
        return np.full_like(y, self.value_optimal if optimal else self.value_suboptimal)


@dataclass(frozen=True)
class Offset:
    """Prescient attack Z = Y + c, pushing optimal arms down and the rest up by default."""

    offset_optimal: float = -1.0
    offset_suboptimal: float = 1.0
    kind = "offset"
    coupled = False

    def replacement(self, y, optimal, gen):
        return y + (self.offset_optimal if optimal else self.offset_suboptimal)


@dataclass(frozen=True)
class UniformOblivious:
    low: float = 0.0
    high: float = 1.0
    kind = "uniform"
    coupled = False

    def __post_init__(self):
        if not self.low < self.high:
            raise DomainError(f"uniform contamination needs low < high, got [{self.low}, {self.high}]")

    def replacement(self, y, optimal, gen):
        return gen.uniform(self.low, self.high, size=y.shape)


@dataclass(frozen=True)
class MaliciousCoupled:
    """Contaminate only outcomes above the arm's ``threshold_quantile``, then add ``shift``.

    The indicator is coupled to Y: a sample is hit iff its quantile position
    exceeds the threshold and an independent coin with bias
    epsilon / (1 - threshold_quantile) lands heads, which keeps the marginal
    contamination rate at exactly epsilon.
    """

    threshold_quantile: float = 0.5
    shift: float = -1.0
    kind = "malicious"
    coupled = True

    def __post_init__(self):
        if not 0.0 <= self.threshold_quantile < 1.0:
            raise DomainError(f"threshold_quantile must lie in [0, 1), got {self.threshold_quantile}")

    def within_budget(self, epsilon: float) -> bool:
        # epsilon + q <= 1 rather than epsilon <= 1 - q, which rounds badly for q = 0.8
        return epsilon + self.threshold_quantile <= 1.0

    def replacement(self, y, optimal, gen):
        return y + self.shift


AdversaryStrategy = Union[NoAdversary, PointMass, Offset, UniformOblivious, MaliciousCoupled]

STRATEGIES = {
    "none": NoAdversary,
    "point_mass": PointMass,
    "offset": Offset,
    "uniform": UniformOblivious,
    "malicious": MaliciousCoupled,
}


# --- environment ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Environment:
    arms: tuple
    adversary: AdversaryStrategy = field(default_factory=NoAdversary)
    epsilon: float = 0.0
    seed: int = 0
    labels: tuple | None = None
    optimal: frozenset = field(init=False)

    def __post_init__(self):
        arms = tuple(self.arms)
        if not arms:
            raise DomainError("environment needs at least one arm")
        m = arms[0].n_objectives
        if any(a.n_objectives != m for a in arms):
            raise DomainError("all arms must share the same number of objectives")
        if not 0.0 <= self.epsilon < 0.5:
            raise DomainError(f"contamination probability must lie in [0, 1/2), got {self.epsilon}")
        if isinstance(self.adversary, MaliciousCoupled) and not self.adversary.within_budget(self.epsilon):
            raise DomainError(
                "malicious budget: epsilon must not exceed 1 - threshold_quantile "
                f"({self.epsilon} > {1.0 - self.adversary.threshold_quantile})"
            )
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "seed", int(self.seed))
        # the attacker knows which arms are Pareto optimal
        object.__setattr__(self, "optimal", frozenset(pareto_front(true_medians(self))))

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def n_objectives(self) -> int:
        return self.arms[0].n_objectives

    def with_attack(self, adversary: AdversaryStrategy, epsilon: float) -> "Environment":
        return dataclasses.replace(self, adversary=adversary, epsilon=epsilon)

    def streams(self, seed: int | None = None) -> "ArmStreams":
        return ArmStreams(self.seed if seed is None else seed, self.n_arms)


def true_medians(env: Environment) -> np.ndarray:
    """K x M matrix of medians of interest of the uncontaminated reward laws."""
    return np.vstack([arm.medians() for arm in env.arms])


class ArmStreams:
    """Per-arm random generators derived from one seed.

    Each arm owns four generators (reward, indicator, replacement, jitter),
    so a batch of n pulls equals n single pulls and the arms do not interact.
    Not thread safe; give each run its own instance.
    """

    _CHANNELS = ("reward", "mask", "contamination", "jitter")

    def __init__(self, seed: int | np.random.SeedSequence, n_arms: int):
        root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
        self._per_arm = [
            dict(zip(self._CHANNELS, (np.random.default_rng(s) for s in child.spawn(len(self._CHANNELS)))))
            for child in root.spawn(n_arms)
        ]

    def __getitem__(self, arm: int) -> dict:
        return self._per_arm[arm]

    def __len__(self) -> int:
        return len(self._per_arm)


@dataclass(frozen=True, eq=False)
class PullRecord:
    arm: int
    observed: np.ndarray
    contaminated_mask: np.ndarray
    true_sample: np.ndarray


@dataclass(frozen=True, eq=False)
class PullBatch:
    arm: int
    observed: np.ndarray
    contaminated_mask: np.ndarray
    true_sample: np.ndarray

    def __len__(self) -> int:
        return self.observed.shape[0]

    def records(self) -> list[PullRecord]:
        return [
            PullRecord(self.arm, self.observed[r], self.contaminated_mask[r], self.true_sample[r])
            for r in range(len(self))
        ]


def contamination_mask(adversary, epsilon: float, coin: np.ndarray, position: np.ndarray | None) -> np.ndarray:
    """Indicator B from uniform ``coin`` draws; coupled strategies also use ``position``."""
    if not adversary.coupled:
        # independent of Y by construction: only the coin is read
        return coin < epsilon
    q = adversary.threshold_quantile
    rate = min(1.0, epsilon / (1.0 - q))
    return (position > q) & (coin < rate)


def pull_batch(env: Environment, arm: int, n: int, streams: ArmStreams) -> PullBatch:
    """Draw ``n`` i.i.d. contaminated pulls of ``arm``."""
    if not 0 <= arm < env.n_arms:
        raise DomainError(f"arm index {arm} out of range for K={env.n_arms}")
    if n < 0:
        raise DomainError(f"batch size must be nonnegative, got {n}")
    gens = streams[arm]
    model = env.arms[arm]
    m = env.n_objectives
    y, drawn = model.sample(gens["reward"], n)
    coin = gens["mask"].random((n, m))
    adversary = env.adversary
    position = None
    if adversary.coupled:
        position = model.threshold_position(y, drawn, gens["jitter"].random((n, m)))
    mask = contamination_mask(adversary, env.epsilon, coin, position)
    # Z is drawn for every entry so the replacement stream advances the same way
    # whether the pulls come in one batch or one at a time
    z = adversary.replacement(y, arm in env.optimal, gens["contamination"])
    observed = np.where(mask, z, y)
    return PullBatch(arm, observed, mask, y)


def pull(env: Environment, arm: int, streams: ArmStreams) -> PullRecord:
    return pull_batch(env, arm, 1, streams).records()[0]


def random_gaussian_instance(
    k: int,
    m: int,
    mean_low: float = 0.0,
    mean_high: float = 10.0,
    sigma: float = 0.1,
    seed: int = 0,
    adversary: AdversaryStrategy | None = None,
    epsilon: float = 0.0,
) -> Environment:
    """K Gaussian arms with i.i.d. uniform means on [mean_low, mean_high]."""
    if k < 1 or m < 1:
        raise DomainError(f"need K >= 1 and M >= 1, got K={k}, M={m}")
    if not mean_low < mean_high:
        raise DomainError(f"mean range must satisfy low < high, got [{mean_low}, {mean_high}]")
    rng = np.random.default_rng(seed)
    means = rng.uniform(mean_low, mean_high, size=(k, m))
    arms = tuple(GaussianArm(row, sigma) for row in means)
    return Environment(arms, adversary or NoAdversary(), epsilon, seed)


def read_dataset(path: str | os.PathLike, delimiter: str = ",") -> tuple[list[str], list[np.ndarray]]:
    """Parse ``arm,obj_1,...,obj_M`` rows into arm labels and per-arm point arrays.

    Labels are numbered in order of first appearance.
    """
    labels: list[str] = []
    rows: dict[str, list[list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "arm":
            raise IngestionError(f"{path}:1: header must be 'arm,obj_1,...,obj_M', got {header}")
        m = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != m + 1:
                raise IngestionError(f"{path}:{lineno}: expected {m + 1} fields, got {len(row)}")
            label = row[0].strip()
            if not label:
                raise IngestionError(f"{path}:{lineno}: empty arm identifier")
            try:
                values = [float(c) for c in row[1:]]
            except ValueError:
                raise IngestionError(f"{path}:{lineno}: non-numeric objective value in {row[1:]}") from None
            if not all(math.isfinite(v) for v in values):
                raise IngestionError(f"{path}:{lineno}: objective values must be finite")
            if label not in rows:
                labels.append(label)
                rows[label] = []
            rows[label].append(values)
    if not labels:
        raise IngestionError(f"{path}: no data rows")
    return labels, [np.array(rows[lab]) for lab in labels]


def load_empirical(
    path: str | os.PathLike,
    normalize: bool = False,
    adversary: AdversaryStrategy | None = None,
    epsilon: float = 0.0,
    seed: int = 0,
    delimiter: str = ",",
    arm_labels: Sequence[str] | None = None,
) -> Environment:
    """Build an environment with one empirical arm per distinct identifier.

    ``normalize`` rescales every objective column to [0, 1] over the whole
    file.  ``arm_labels`` lists identifiers that must be present; naming an
    arm with no rows is an error.
    """
    labels, points = read_dataset(path, delimiter)
    if arm_labels is not None:
        missing = [lab for lab in arm_labels if lab not in labels]
        if missing:
            raise IngestionError(f"{path}: arms with no data rows: {missing}")
    if normalize:
        stacked = np.vstack(points)
        lo, hi = stacked.min(axis=0), stacked.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        points = [(p - lo) / span for p in points]
    arms = tuple(EmpiricalArm(p) for p in points)
    return Environment(arms, adversary or NoAdversary(), epsilon, seed, labels=tuple(labels))
