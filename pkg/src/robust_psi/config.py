"""TOML run configuration: parsing, validation and rendering.

Sections: ``[params]``, ``[environment]``, ``[attack]``, ``[sweep]`` and
``[limits]``.  Unknown sections or keys are rejected, and every value is
checked before any sampling starts.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import AdversaryClass, DomainError, RobustParams
from .environment import STRATEGIES, Environment, MaliciousCoupled
from .evaluation import ALGORITHMS, EnvironmentSpec, SweepSpec
from .rpsi import DEFAULT_SAMPLE_CAP

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "render_config"]


class ConfigError(ValueError):
    """A configuration value violates a documented constraint."""


_SCHEMA = {
    "params": {"epsilon", "delta", "alpha", "t_bar", "sigma", "adversary_class"},
    "environment": {"kind", "K", "M", "mean_range", "sigma", "means", "instance_seed", "dataset_path", "normalize"},
    "attack": {"strategy", "value_optimal", "value_suboptimal", "offset_optimal", "offset_suboptimal",
               "low", "high", "threshold_quantile", "shift"},
    "sweep": {"epsilons", "replications", "base_seed", "algorithms"},
    "limits": {"max_total_samples"},
}

_STRATEGY_KEYS = {
    "none": set(),
    "point_mass": {"value_optimal", "value_suboptimal"},
    "offset": {"offset_optimal", "offset_suboptimal"},
    "uniform": {"low", "high"},
    "malicious": {"threshold_quantile", "shift"},
}


@dataclass(frozen=True)
class RunConfig:
    params: RobustParams
    environment: EnvironmentSpec
    attack: Any
    instance_seed: int = 0
    epsilons: tuple = ()
    replications: int = 10
    base_seed: int = 0
    algorithms: tuple = ALGORITHMS
    max_total_samples: Optional[int] = DEFAULT_SAMPLE_CAP

    def build_environment(self) -> Environment:
        env = self.environment.build(self.instance_seed)
        return env.with_attack(self.attack, self.params.epsilon)

    def sweep_spec(self, algorithms: Optional[tuple] = None) -> SweepSpec:
        if not self.epsilons:
            raise ConfigError("[sweep].epsilons: must list at least one contamination probability")
        return SweepSpec(
            params=self.params,
            environment=self.environment,
            attack=self.attack,
            epsilons=self.epsilons,
            replications=self.replications,
            base_seed=self.base_seed,
            algorithms=tuple(algorithms or self.algorithms),
            max_total_samples=self.max_total_samples,
        )


def _real(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}].{key}: expected a number, got {value!r}")
    return float(value)


def _int(section: str, key: str, value, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{section}].{key}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"[{section}].{key}: must be >= {minimum}, got {value}")
    return value


def parse_config(doc: dict, base_dir: Optional[Path] = None) -> RunConfig:
    """Validate a parsed TOML document into a :class:`RunConfig`."""
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"[{section}].{key}: unknown key")

    p = doc.get("params")
    if p is None:
        raise ConfigError("missing [params] section")
    for key in ("delta", "alpha", "t_bar", "sigma"):
        if key not in p:
            raise ConfigError(f"[params].{key}: required")
    values = {key: _real("params", key, p[key]) for key in ("delta", "alpha", "t_bar", "sigma")}
    values["epsilon"] = _real("params", "epsilon", p.get("epsilon", 0.0))
    try:
        values["adversary_class"] = AdversaryClass.parse(p.get("adversary_class", "prescient"))
        params = RobustParams(**values)
    except DomainError as exc:
        raise ConfigError(f"[params]: {exc}") from None

    env_doc = doc.get("environment", {})
    kind = env_doc.get("kind", "gaussian")
    instance_seed = _int("environment", "instance_seed", env_doc.get("instance_seed", 0))
    if kind == "gaussian":
        k = _int("environment", "K", env_doc.get("K", 10), 1)
        m = _int("environment", "M", env_doc.get("M", 2), 1)
        rng = env_doc.get("mean_range", [0.0, 10.0])
        if not isinstance(rng, list) or len(rng) != 2:
            raise ConfigError("[environment].mean_range: expected [low, high]")
        lo, hi = (_real("environment", "mean_range", v) for v in rng)
        if not lo < hi:
            raise ConfigError(f"[environment].mean_range: need low < high, got [{lo}, {hi}]")
        sigma = _real("environment", "sigma", env_doc.get("sigma", params.sigma))
        if not sigma > 0:
            raise ConfigError(f"[environment].sigma: must be positive, got {sigma}")
        means = env_doc.get("means")
        if means is not None:
            if not isinstance(means, list) or not means or not all(isinstance(r, list) for r in means):
                raise ConfigError("[environment].means: expected a list of per-arm lists")
            rows = tuple(tuple(_real("environment", "means", v) for v in r) for r in means)
            if len({len(r) for r in rows}) != 1 or len(rows[0]) == 0:
                raise ConfigError("[environment].means: every arm needs the same nonzero number of objectives")
            k, m = len(rows), len(rows[0])
        else:
            rows = None
        env_spec = EnvironmentSpec("gaussian", k, m, (lo, hi), sigma, rows)
    elif kind == "empirical":
        path = env_doc.get("dataset_path")
        if not isinstance(path, str) or not path:
            raise ConfigError("[environment].dataset_path: required for kind = 'empirical'")
        resolved = Path(path)
        if not resolved.is_absolute() and base_dir is not None:
            resolved = base_dir / resolved
        if not resolved.is_file():
            raise ConfigError(f"[environment].dataset_path: no such file {str(resolved)!r}")
        normalize = env_doc.get("normalize", False)
        if not isinstance(normalize, bool):
            raise ConfigError("[environment].normalize: expected true or false")
        env_spec = EnvironmentSpec("empirical", dataset_path=str(resolved), normalize=normalize)
    else:
        raise ConfigError(f"[environment].kind: expected 'gaussian' or 'empirical', got {kind!r}")

    attack_doc = dict(doc.get("attack", {"strategy": "none"}))
    strategy = attack_doc.pop("strategy", "none")
    if strategy not in STRATEGIES:
        raise ConfigError(f"[attack].strategy: expected one of {sorted(STRATEGIES)}, got {strategy!r}")
    extra = set(attack_doc) - _STRATEGY_KEYS[strategy]
    if extra:
        raise ConfigError(f"[attack].{sorted(extra)[0]}: not a field of strategy {strategy!r}")
    try:
        attack = STRATEGIES[strategy](**{k: _real("attack", k, v) for k, v in attack_doc.items()})
    except DomainError as exc:
        raise ConfigError(f"[attack]: {exc}") from None

    sweep = doc.get("sweep", {})
    epsilons = sweep.get("epsilons")
    if epsilons is not None:
        if not isinstance(epsilons, list) or not epsilons:
            raise ConfigError("[sweep].epsilons: must list at least one contamination probability")
        epsilons = tuple(_real("sweep", "epsilons", e) for e in epsilons)
        for e in epsilons:
            try:
                params.replace(epsilon=e)
            except DomainError as exc:
                raise ConfigError(f"[sweep].epsilons: {exc}") from None
            if isinstance(attack, MaliciousCoupled) and not attack.within_budget(e):
                raise ConfigError(f"[sweep].epsilons: {e} exceeds the malicious budget 1 - threshold_quantile")
    algorithms = tuple(sweep.get("algorithms", ALGORITHMS))
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise ConfigError(f"[sweep].algorithms: unknown algorithm {alg!r} (expected {list(ALGORITHMS)})")
    replications = _int("sweep", "replications", sweep.get("replications", 10))
    base_seed = _int("sweep", "base_seed", sweep.get("base_seed", 0))

    limits = doc.get("limits", {})
    cap = limits.get("max_total_samples", DEFAULT_SAMPLE_CAP)
    cap = _int("limits", "max_total_samples", cap, 1)

    if isinstance(attack, MaliciousCoupled) and not attack.within_budget(params.epsilon):
        raise ConfigError("[params].epsilon: exceeds the malicious budget 1 - threshold_quantile")

    return RunConfig(
        params=params,
        environment=env_spec,
        attack=attack,
        instance_seed=instance_seed,
        epsilons=epsilons or (),
        replications=replications,
        base_seed=base_seed,
        algorithms=algorithms,
        max_total_samples=cap,
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    return parse_config(doc, path.parent)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, str)):
        return repr(v) if isinstance(v, int) else '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot render {type(v).__name__} as TOML")


def render_config(doc: dict) -> str:
    """Render a two-level document of scalars and lists as TOML."""
    out = []
    for section, body in doc.items():
        out.append(f"[{section}]")
        for key, value in body.items():
            out.append(f"{key} = {_toml_value(value)}")
        out.append("")
    return "\n".join(out)
