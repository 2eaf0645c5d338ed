"""Scalar kernel: quantiles, the subgaussian deviation bound and the R-PSI constants.

Every closed-form quantity used by the algorithm and by its sample
complexity bound lives here.  Real-valued outputs are evaluated in float64
with cancellation-free formulas; integer sample budgets are evaluated with
mpmath at 40 significant digits before the ceiling is taken, so that the
schedule is identical on every platform.
"""

from __future__ import annotations

import enum
import functools
import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import mpmath
import numpy as np

__all__ = [
    "AdmissibilityError",
    "AdversaryClass",
    "DomainError",
    "EmpiricalCdf",
    "RobustParams",
    "SampleBound",
    "asymptotic_complexity",
    "beta",
    "bias_d",
    "cumulative_samples",
    "delta_tilde",
    "empirical_median",
    "h_epsilon",
    "init_samples_n0",
    "median_of_interest",
    "round_samples_n",
    "stat_bias_u",
    "subgaussian_r",
    "tau_threshold",
    "theoretical_sample_bound",
]

_BUDGET_DPS = 40


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


class AdmissibilityError(DomainError):
    """The contamination level is too large for the chosen quantile range."""


class AdversaryClass(str, enum.Enum):
    OBLIVIOUS = "oblivious"
    PRESCIENT = "prescient"
    MALICIOUS = "malicious"

    @classmethod
    def parse(cls, value: "str | AdversaryClass") -> "AdversaryClass":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(c.value for c in cls)
            raise DomainError(f"unknown adversary class {value!r} (expected one of {names})") from None


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 <= epsilon < 0.5:
        raise DomainError(f"epsilon must lie in [0, 1/2) (contamination probability model constraint), got {epsilon}")


def subgaussian_r(sigma: float, t: float) -> float:
    """Quantile deviation bound R(t) shared by all sigma-subgaussian laws.

    R(t) = sigma * sqrt(2) * (sqrt(log(1 / (1/2 - t))) + sqrt(log 2)),
    defined for 0 <= t < 1/2 and strictly increasing in t.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if not 0.0 <= t < 0.5:
        raise DomainError(f"t must lie in [0, 1/2), got {t}")
    return sigma * math.sqrt(2.0) * (math.sqrt(-math.log(0.5 - t)) + math.sqrt(math.log(2.0)))


def _r_difference(sigma: float, upper: float, lower: float) -> float:
    # R(upper) - R(lower) without the cancellation of subtracting two R values
    la = -math.log(0.5 - upper)
    lb = -math.log(0.5 - lower)
    dl = math.log1p((upper - lower) / (0.5 - upper))
    return sigma * math.sqrt(2.0) * dl / (math.sqrt(la) + math.sqrt(lb))


def h_epsilon(adversary_class: AdversaryClass, epsilon: float) -> float:
    """Effective quantile shift caused by contamination at rate ``epsilon``."""
    _check_epsilon(epsilon)
    if AdversaryClass.parse(adversary_class) is AdversaryClass.MALICIOUS:
        return float(epsilon)
    return epsilon / (2.0 * (1.0 - epsilon))


def beta(t_bar: float, epsilon: float, adversary_class: AdversaryClass) -> float:
    if not 0.0 < t_bar < 0.5:
        raise DomainError(f"t_bar must lie in (0, 1/2), got {t_bar}")
    cls = AdversaryClass.parse(adversary_class)
    h = h_epsilon(cls, epsilon)
    if h >= t_bar:
        if cls is AdversaryClass.MALICIOUS:
            rule = f"epsilon < t_bar = {t_bar:.6g} for a malicious adversary"
        else:
            rule = f"epsilon < 2*t_bar/(1 + 2*t_bar) = {2 * t_bar / (1 + 2 * t_bar):.6g} for a {cls.value} adversary"
        raise AdmissibilityError(f"epsilon={epsilon} is inadmissible: need {rule}")
    return (t_bar - h) ** -2


def delta_tilde(delta: float, adversary_class: AdversaryClass) -> float:
    if AdversaryClass.parse(adversary_class) is AdversaryClass.MALICIOUS:
        return delta / 3.0
    return delta / 2.0


@dataclass(frozen=True)
class RobustParams:
    """Scalar inputs of R-PSI, validated on construction.

    ``epsilon`` is the contamination probability, ``delta`` the confidence,
    ``alpha`` the accuracy slack and ``t_bar`` the quantile range over which
    the deviation bound R is trusted.  ``sigma`` is the subgaussian scale.
    """

    epsilon: float
    delta: float
    alpha: float
    t_bar: float
    sigma: float
    adversary_class: AdversaryClass = AdversaryClass.PRESCIENT

    def __post_init__(self) -> None:
        object.__setattr__(self, "adversary_class", AdversaryClass.parse(self.adversary_class))
        for name in ("epsilon", "delta", "alpha", "t_bar", "sigma"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        _check_epsilon(self.epsilon)
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.alpha < 0:
            raise DomainError(f"alpha must be nonnegative, got {self.alpha}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        # raises AdmissibilityError when h_eps >= t_bar
        beta(self.t_bar, self.epsilon, self.adversary_class)

    @property
    def h_eps(self) -> float:
        return h_epsilon(self.adversary_class, self.epsilon)

    @property
    def beta(self) -> float:
        return beta(self.t_bar, self.epsilon, self.adversary_class)

    @property
    def delta_tilde(self) -> float:
        return delta_tilde(self.delta, self.adversary_class)

    @property
    def bias(self) -> float:
        return bias_d(self)

    def replace(self, **changes) -> "RobustParams":
        fields = {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "alpha": self.alpha,
            "t_bar": self.t_bar,
            "sigma": self.sigma,
            "adversary_class": self.adversary_class,
        }
        fields.update(changes)
        return RobustParams(**fields)


def bias_d(params: RobustParams) -> float:
    """Unavoidable bias D = R(h_eps); exactly zero in the adversary-free case."""
    if params.epsilon == 0.0:
        return 0.0
    return subgaussian_r(params.sigma, params.h_eps)


def stat_bias_u(params: RobustParams, tau: int) -> float:
    """Statistical bias U_tau = R(h_eps + 1/sqrt(beta*tau)) - R(h_eps).

    Returns ``inf`` when the shifted quantile leaves the domain of R.
    """
    if tau < 1:
        raise DomainError(f"tau must be a positive integer, got {tau}")
    h = params.h_eps
    upper = h + 1.0 / math.sqrt(params.beta * tau)
    if upper >= 0.5:
        return math.inf
    return _r_difference(params.sigma, upper, h)


def _check_counts(k: int, m: int) -> None:
    if k < 1 or m < 1:
        raise DomainError(f"arm count and objective count must be >= 1, got K={k}, M={m}")


def _mp_ceil(x: mpmath.mpf) -> int:
    return int(mpmath.ceil(x))


@functools.lru_cache(maxsize=None)
def init_samples_n0(params: RobustParams, k: int, m: int) -> int:
    """Initial per-arm sample count ceil(2*beta*log(pi^2*M*K / (6*delta~)))."""
    _check_counts(k, m)
    with mpmath.workdps(_BUDGET_DPS):
        b = 1 / (mpmath.mpf(params.t_bar) - _mp_h(params)) ** 2
        dt = _mp_delta_tilde(params)
        return _mp_ceil(2 * b * mpmath.log(mpmath.pi**2 * m * k / (6 * dt)))


@functools.lru_cache(maxsize=None)
def round_samples_n(params: RobustParams, tau: int, k: int, m: int) -> int:
    """Batch size drawn when an arm enters sampling round ``tau`` (tau >= 2)."""
    if tau < 2:
        raise DomainError(f"round sample size is defined for tau >= 2, got {tau}")
    _check_counts(k, m)
    with mpmath.workdps(_BUDGET_DPS):
        b = 1 / (mpmath.mpf(params.t_bar) - _mp_h(params)) ** 2
        dt = _mp_delta_tilde(params)
        t = mpmath.mpf(tau)
        inner = 4 * t * b * mpmath.log(t / (t - 1)) + 2 * b * mpmath.log((t - 1) ** 2 * m * k * mpmath.pi**2 / (6 * dt))
        return 1 + _mp_ceil(inner)


def cumulative_samples(params: RobustParams, tau: int, k: int, m: int) -> int:
    """Total pulls of one arm after ``tau`` sampling rounds."""
    if tau < 1:
        raise DomainError(f"tau must be a positive integer, got {tau}")
    return init_samples_n0(params, k, m) + sum(round_samples_n(params, s, k, m) for s in range(2, tau + 1))


def _mp_h(params: RobustParams) -> mpmath.mpf:
    eps = mpmath.mpf(params.epsilon)
    if params.adversary_class is AdversaryClass.MALICIOUS:
        return eps
    return eps / (2 * (1 - eps))


def _mp_delta_tilde(params: RobustParams) -> mpmath.mpf:
    d = mpmath.mpf(params.delta)
    return d / 3 if params.adversary_class is AdversaryClass.MALICIOUS else d / 2


def tau_threshold(params: RobustParams, a: float) -> int:
    """Smallest round index tau >= 1 with U_tau <= a/4.

    U is strictly decreasing in tau, so a galloping search followed by
    bisection returns exactly what a forward scan would.
    """
    if not a > 0:
        raise DomainError(f"threshold must be positive, got {a}")
    target = a / 4.0

    def ok(tau: int) -> bool:
        return stat_bias_u(params, tau) <= target

    if ok(1):
        return 1
    lo, hi = 1, 2
    while not ok(hi):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


class SampleBound(NamedTuple):
    gap_dependent: int
    gap_free: int


def _per_arm_budget(b: mpmath.mpf, tau: int, log_const: mpmath.mpf) -> mpmath.mpf:
    return 2 * tau * (b * (2 * mpmath.log(tau) + log_const) + 1)


def theoretical_sample_bound(params: RobustParams, gaps: Sequence[float], k: int, m: int) -> SampleBound:
    """High-probability sample complexity bounds (gap-dependent, gap-free).

    ``gaps`` holds one suboptimality gap per arm.  Arms whose gap exceeds
    4D + alpha are charged at the round where U drops below (gap - 4D)/4;
    every other arm is charged at the alpha round.  Both real-valued bounds
    are rounded up to integers.
    """
    _check_counts(k, m)
    if len(gaps) != k:
        raise DomainError(f"expected {k} gaps, got {len(gaps)}")
    if any(g < 0 for g in gaps):
        raise DomainError("suboptimality gaps must be nonnegative")
    d = bias_d(params)
    tau_alpha = tau_threshold(params, params.alpha)
    with mpmath.workdps(_BUDGET_DPS):
        b = 1 / (mpmath.mpf(params.t_bar) - _mp_h(params)) ** 2
        log_const = mpmath.log(m * k * mpmath.pi**2 / (6 * _mp_delta_tilde(params)))
        alpha_term = _per_arm_budget(b, tau_alpha, log_const)
        dependent = mpmath.mpf(0)
        for gap in gaps:
            if gap > 4 * d + params.alpha:
                dependent += _per_arm_budget(b, tau_threshold(params, gap - 4 * d), log_const)
            else:
                dependent += alpha_term
        free = k * tau_alpha * (2 * b * (2 * mpmath.log(tau_alpha) + log_const) + 2)
        return SampleBound(_mp_ceil(dependent), _mp_ceil(free))


def asymptotic_complexity(params: RobustParams, k: int, m: int) -> float:
    """Leading-order subgaussian rate K / ((1/2 - h)^2 alpha^2) * log(M K / (alpha delta~)).

    Constant factors are dropped; only useful for comparing configurations.
    """
    _check_counts(k, m)
    if not params.alpha > 0:
        raise DomainError("the asymptotic rate needs alpha > 0")
    a = params.alpha
    return k / ((0.5 - params.h_eps) ** 2 * a**2) * math.log(m * k / (a * params.delta_tilde))


def empirical_median(samples: Sequence[float] | np.ndarray) -> float:
    """Middle order statistic, or the mean of the two middle ones for even n."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise DomainError("empirical median of an empty sample")
    return float(np.median(arr))


def _as_fraction(p: float | Fraction) -> Fraction:
    if isinstance(p, Fraction):
        return p
    # decimal repr keeps 0.1 * 30 == 3 exactly
    return Fraction(repr(float(p)))


class EmpiricalCdf:
    """Right-continuous step cdf of a finite multiset; quantiles by index arithmetic."""

    def __init__(self, points: Sequence[float] | np.ndarray):
        support = np.sort(np.asarray(points, dtype=float).ravel())
        if support.size == 0:
            raise DomainError("empirical cdf needs at least one point")
        if not np.all(np.isfinite(support)):
            raise DomainError("empirical cdf support must be finite")
        self.support = support
        self.support.setflags(write=False)

    def __len__(self) -> int:
        return self.support.size

    def __call__(self, x: float) -> float:
        return np.searchsorted(self.support, x, side="right") / self.support.size

    def quantile_left(self, p: float | Fraction) -> float:
        """inf{x : F(x) >= p}; p = 0 maps to the smallest point."""
        q = _as_fraction(p)
        if not 0 <= q <= 1:
            raise DomainError(f"p must lie in [0, 1], got {p}")
        n = self.support.size
        k = max(1, math.ceil(q * n))
        return float(self.support[k - 1])

    def quantile_right(self, p: float | Fraction) -> float:
        """inf{x : F(x) > p}."""
        q = _as_fraction(p)
        if not 0 <= q < 1:
            raise DomainError(f"p must lie in [0, 1), got {p}")
        n = self.support.size
        k = math.floor(q * n) + 1
        return float(self.support[k - 1])


@functools.singledispatch
def median_of_interest(dist) -> float:
    """Midpoint of the left and right 1/2-quantiles of a distribution."""
    raise TypeError(f"no median of interest for {type(dist).__name__}")


@median_of_interest.register
def _(dist: EmpiricalCdf) -> float:
    half = Fraction(1, 2)
    return (dist.quantile_right(half) + dist.quantile_left(half)) / 2.0


@median_of_interest.register
def _(dist: statistics.NormalDist) -> float:
    return dist.mean
