"""Robust Pareto set identification (R-PSI).

The undecided set S starts with every arm.  After an initial batch of n0
pulls per arm, each loop samples the undecided arm with the largest
statistical bias U, eliminates arms that are surely dominated, and moves
arms that are surely accurate into the predicted set P.  Median estimates
are confidence intervals of half-width D + U around the empirical median.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DomainError, RobustParams, init_samples_n0, round_samples_n, stat_bias_u
from .environment import ArmStreams, Environment, pull_batch

__all__ = [
    "DEFAULT_SAMPLE_CAP",
    "LoopSnapshot",
    "MedianSnapshot",
    "RpsiConfig",
    "RpsiState",
    "RunTrace",
    "StateError",
    "eliminate",
    "identify",
    "initialize",
    "resolve_streams",
    "run",
    "sampling_step",
    "select_arm",
]

DEFAULT_SAMPLE_CAP = 10**8


class StateError(RuntimeError):
    """Operation not valid in the current algorithm state."""


class SampleCapReached(Exception):
    pass


@dataclass(frozen=True)
class RpsiConfig:
    params: RobustParams
    max_total_samples: Optional[int] = DEFAULT_SAMPLE_CAP

    def __post_init__(self):
        if not isinstance(self.params, RobustParams):
            raise DomainError("RpsiConfig.params must be a RobustParams instance")
        if self.max_total_samples is not None and self.max_total_samples < 1:
            raise DomainError(f"max_total_samples must be positive, got {self.max_total_samples}")


@dataclass(frozen=True)
class MedianSnapshot:
    """Empirical median of one arm right after its round ``tau`` batch."""

    arm: int
    tau: int
    median: np.ndarray
    bias: float


@dataclass(frozen=True)
class LoopSnapshot:
    t: int
    selected: Optional[int]
    batch: int
    eliminated: tuple
    o1: tuple
    o2: tuple
    undecided: tuple
    predicted: tuple
    rounds: tuple
    early_return: bool


@dataclass
class RunTrace:
    n0: int
    n_arms: int
    loops: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    predicted: list = field(default_factory=list)
    eliminated: list = field(default_factory=list)
    total_samples: int = 0
    terminated_via: str = "empty_S"

    @property
    def batch_samples(self) -> int:
        return sum(loop.batch for loop in self.loops)


class _SampleStore:
    """Growable per-arm buffer of observed vectors."""

    def __init__(self, m: int):
        self._buf = np.empty((64, m))
        self.n = 0

    def extend(self, rows: np.ndarray) -> None:
        need = self.n + rows.shape[0]
        if need > self._buf.shape[0]:
            cap = max(need, 2 * self._buf.shape[0])
            grown = np.empty((cap, self._buf.shape[1]))
            grown[: self.n] = self._buf[: self.n]
            self._buf = grown
        self._buf[self.n : need] = rows
        self.n = need

    @property
    def values(self) -> np.ndarray:
        return self._buf[: self.n]

    def median(self) -> np.ndarray:
        return np.median(self.values, axis=0)


@dataclass
class RpsiState:
    config: RpsiConfig
    n_arms: int
    n_objectives: int
    d_bias: float
    undecided: list
    predicted: list
    rounds: np.ndarray
    store: list
    emp_median: np.ndarray
    bias: np.ndarray
    t: int = 0
    total_samples: int = 0
    trace: RunTrace = None

    @property
    def params(self) -> RobustParams:
        return self.config.params

    def _draw(self, env: Environment, streams: ArmStreams, arm: int, n: int) -> None:
        cap = self.config.max_total_samples
        if cap is not None and self.total_samples + n > cap:
            raise SampleCapReached
        batch = pull_batch(env, arm, n, streams)
        # only the contaminated observations are visible to the learner
        self.store[arm].extend(batch.observed)
        self.total_samples += n
        self.emp_median[arm] = self.store[arm].median()
        self.bias[arm] = stat_bias_u(self.params, int(self.rounds[arm]))
        self.trace.estimates.append(
            MedianSnapshot(arm, int(self.rounds[arm]), self.emp_median[arm].copy(), float(self.bias[arm]))
        )


def resolve_streams(env: Environment, rng) -> ArmStreams:
    if isinstance(rng, ArmStreams):
        return rng
    return env.streams(rng)


def initialize(config: RpsiConfig, env: Environment, rng=None) -> RpsiState:
    """Pull every arm n0 times and set all rounds to 1."""
    k, m = env.n_arms, env.n_objectives
    streams = resolve_streams(env, rng)
    n0 = init_samples_n0(config.params, k, m)
    state = RpsiState(
        config=config,
        n_arms=k,
        n_objectives=m,
        d_bias=config.params.bias,
        undecided=list(range(k)),
        predicted=[],
        rounds=np.ones(k, dtype=np.int64),
        store=[_SampleStore(m) for _ in range(k)],
        emp_median=np.zeros((k, m)),
        bias=np.full(k, np.inf),
        trace=RunTrace(n0=n0, n_arms=k),
    )
    for arm in range(k):
        state._draw(env, streams, arm, n0)
    return state


def select_arm(state: RpsiState) -> int:
    """Undecided arm with the largest U; ties go to the lowest index."""
    if not state.undecided:
        raise StateError("no undecided arms left to sample")
    s = np.asarray(state.undecided)
    return int(s[np.argmax(state.bias[s])])


def sampling_step(state: RpsiState, env: Environment, rng, arm: Optional[int] = None) -> int:
    """Advance the chosen arm one round and draw its batch; returns the batch size."""
    streams = resolve_streams(env, rng)
    arm = select_arm(state) if arm is None else arm
    tau = int(state.rounds[arm]) + 1
    n = round_samples_n(state.params, tau, state.n_arms, state.n_objectives)
    cap = state.config.max_total_samples
    if cap is not None and state.total_samples + n > cap:
        raise SampleCapReached
    state.rounds[arm] = tau
    state._draw(env, streams, arm, n)
    return n


def _bounds(state: RpsiState, s: np.ndarray):
    med = state.emp_median[s]
    u = state.bias[s][:, None]
    return med, u


def eliminate(state: RpsiState, d_bias: Optional[float] = None) -> list:
    """Drop arms whose upper confidence corner lies below another arm's lower corner.

    Every removal is decided against the same snapshot of S.
    """
    d = state.d_bias if d_bias is None else d_bias
    if len(state.undecided) < 2:
        return []
    s = np.asarray(state.undecided)
    med, u = _bounds(state, s)
    upper = med + d + u
    lower = med - d - u
    dominated = np.all(upper[:, None, :] <= lower[None, :, :], axis=2)
    np.fill_diagonal(dominated, False)
    removed = [int(a) for a in s[dominated.any(axis=1)]]
    if removed:
        gone = set(removed)
        state.undecided = [a for a in state.undecided if a not in gone]
    return removed


def identify(state: RpsiState, alpha: Optional[float] = None) -> tuple[list, list, bool]:
    """Move surely-accurate arms to P; returns (O1, O2, early_return).

    O1 holds arms that no other undecided arm can beat by alpha.  While some
    U exceeds alpha/4 only the subset O2 that cannot itself beat another
    undecided arm by alpha is committed; otherwise all of O1 is committed and
    the run ends.
    """
    a = state.params.alpha if alpha is None else alpha
    s = np.asarray(state.undecided)
    if s.size == 0:
        return [], [], False
    med, u = _bounds(state, s)
    # blocks[i, j]: m_i - U_i + alpha <= m_j + U_j in every objective
    blocks = np.all((med - u + a)[:, None, :] <= (med + u)[None, :, :], axis=2)
    np.fill_diagonal(blocks, False)
    in_o1 = ~blocks.any(axis=1)
    o1 = [int(x) for x in s[in_o1]]
    if np.any(state.bias[s] > a / 4.0):
        in_o2 = in_o1 & ~blocks.any(axis=0)
        o2 = [int(x) for x in s[in_o2]]
        moved = set(o2)
        state.undecided = [x for x in state.undecided if x not in moved]
        state.predicted.extend(o2)
        return o1, o2, False
    state.predicted.extend(o1)
    moved = set(o1)
    state.undecided = [x for x in state.undecided if x not in moved]
    return o1, [], True


def run(config: RpsiConfig, env: Environment, rng=None, *, record_estimates: bool = True):
    """Execute R-PSI to completion; returns (predicted arms, trace)."""
    streams = resolve_streams(env, rng)
    try:
        state = initialize(config, env, streams)
    except SampleCapReached:
        trace = RunTrace(n0=init_samples_n0(config.params, env.n_arms, env.n_objectives), n_arms=env.n_arms)
        trace.terminated_via = "cap"
        return [], trace
    trace = state.trace
    while state.undecided:
        selected, batch = None, 0
        if state.t > 0:
            selected = select_arm(state)
            try:
                batch = sampling_step(state, env, streams, selected)
            except SampleCapReached:
                trace.terminated_via = "cap"
                break
        removed = eliminate(state)
        trace.eliminated.extend(removed)
        o1, o2, early = identify(state)
        trace.loops.append(
            LoopSnapshot(
                t=state.t,
                selected=selected,
                batch=batch,
                eliminated=tuple(removed),
                o1=tuple(o1),
                o2=tuple(o2),
                undecided=tuple(state.undecided),
                predicted=tuple(state.predicted),
                rounds=tuple(int(r) for r in state.rounds),
                early_return=early,
            )
        )
        if early:
            trace.terminated_via = "early_return"
            break
        state.t += 1
    trace.predicted = list(state.predicted)
    trace.total_samples = state.total_samples
    if not record_estimates:
        trace.estimates = []
    return list(state.predicted), trace
