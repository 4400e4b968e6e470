"""Run configuration: every tunable with its default, loaded from JSON.

Resolution order is defaults, then the config file (``--config`` or the path in
``MNEMO_CONFIG``), then command-line overrides. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

from .embeddings import make_provider
from .errors import ConfigError
from .memory import RetrievalStrategy
from .optimizer import ClipSchedule
from .rewards import RewardWeights

ENV_VAR = "MNEMO_CONFIG"


@dataclass(frozen=True)
class Config:
    # embeddings
    dimension: int = 256
    provider: str = "hashing"
    endpoint: Optional[str] = None
    timeout: float = 10.0
    # memory
    horizon: int = 5
    top_k: int = 3
    lam: float = 0.5
    strategy: str = "top_k"
    # rewards
    w_f: float = 0.1
    w_a: float = 0.9
    w_t: float = 0.5
    w_p: float = 0.5
    tau_iou: float = 0.5
    math_tol: float = 1e-6
    # optimizer
    eps_low: float = 0.2
    eps_init: float = 0.4
    eps_end: float = 0.2
    beta: float = 0.04
    total_steps: int = 100
    # data pipeline
    quota_ground: int = 0
    quota_evolve: int = 0
    min_steps: int = 2
    seed: int = 0
    # simulator
    failure_cap: int = 3
    jitter: float = 0.05

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(self.dimension >= 1, "dimension must be >= 1")
        need(self.provider in ("hashing", "remote"), f"unknown provider {self.provider!r}")
        need(self.provider != "remote" or bool(self.endpoint), "remote provider needs an endpoint")
        need(self.timeout > 0, "timeout must be positive")
        need(self.horizon >= 1, "horizon must be >= 1")
        need(self.top_k >= 1, "top_k must be >= 1")
        need(0.0 <= self.lam <= 1.0, "lam must lie in [0, 1]")
        need(self.strategy in {s.value for s in RetrievalStrategy}, f"unknown strategy {self.strategy!r}")
        need(self.quota_ground >= 0 and self.quota_evolve >= 0, "quotas must be non-negative")
        need(self.min_steps >= 0, "min_steps must be non-negative")
        need(self.failure_cap >= 1, "failure_cap must be >= 1")
        need(0.0 <= self.jitter <= 0.05, "jitter must lie in [0, 0.05]")
        need(self.beta >= 0 and math.isfinite(self.beta), "beta must be a finite non-negative number")
        try:
            self.weights()
            self.schedule()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def weights(self) -> RewardWeights:
        return RewardWeights(self.w_f, self.w_a, self.w_t, self.w_p, self.tau_iou, self.math_tol)

    def schedule(self) -> ClipSchedule:
        return ClipSchedule(self.eps_low, self.eps_init, self.eps_end, self.total_steps)

    def retrieval_strategy(self) -> RetrievalStrategy:
        return RetrievalStrategy(self.strategy)

    def make_provider(self):
        return make_provider(self.provider, self.dimension, self.endpoint, self.timeout)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def replace(self, **overrides: Any) -> "Config":
        return from_mapping({**self.to_dict(), **overrides})


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def _coerce(name: str, value: Any) -> Any:
    default = _FIELDS[name].default
    if value is None:
        if name == "endpoint":
            return None
        raise ConfigError(f"{name} cannot be null")
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{name}: booleans are not accepted")
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a string, got {value!r}")
    return value


def from_mapping(data: Mapping[str, Any]) -> Config:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return Config(**{k: _coerce(k, v) for k, v in data.items()})


def load_config(path: Optional[str | os.PathLike] = None, overrides: Optional[Mapping[str, Any]] = None) -> Config:
    """Defaults, then the JSON file at ``path`` (or ``$MNEMO_CONFIG``), then ``overrides``."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return from_mapping(data)
