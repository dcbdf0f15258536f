"""Flat ``key = value`` experiment configuration."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DomainError

EXPECT_PREFIX = "expect_"


@dataclass(frozen=True)
class ExperimentConfig:
    p: float = 1.0
    N: int = 3
    L: float = 30.0
    M: int = 600
    dt: float = 0.005
    t_end: float = 60.0
    epsilon: float = 0.05
    delta_rule: str = "eps_3_2"  # or "explicit"
    delta: float = 0.0  # used when delta_rule = explicit
    direction: tuple = ()  # kernel-mode coefficients; empty means the last mode
    mode: str = "position"  # position kicks U, momentum kicks W
    seed_phase: float = 0.0
    output_dir: str = "out"
    stride: int = 10
    eps_list: tuple = ()
    delta_scale: float = 0.5
    reduced_dt: float = 1e-3
    gamma0: tuple = ()
    beta0: tuple = ()
    stop_factor: float = 2.0
    expectations: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise DomainError(f"star graph needs N >= 3 edges, got N = {self.N}")
        if not self.p > 0:
            raise DomainError(f"p must be positive, got {self.p}")
        if not 0 < self.epsilon <= 0.2:
            raise DomainError(f"epsilon must lie in (0, 0.2], got {self.epsilon}")
        if self.delta_rule not in ("eps_3_2", "explicit"):
            raise DomainError(f"delta_rule must be eps_3_2 or explicit, got {self.delta_rule!r}")
        if self.mode not in ("position", "momentum"):
            raise DomainError(f"mode must be position or momentum, got {self.mode!r}")
        if self.direction and len(self.direction) != self.N - 1:
            raise DomainError(f"direction needs N - 1 = {self.N - 1} entries")
        if self.stride < 1 or self.M < 16:
            raise DomainError("stride must be >= 1 and M >= 16")

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def delta_value(self) -> float:
        return self.epsilon**1.5 if self.delta_rule == "eps_3_2" else self.delta

    def with_values(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def echo(self) -> dict:
        out = dataclasses.asdict(self)
        out["direction"] = list(self.direction)
        out["eps_list"] = list(self.eps_list)
        out["gamma0"] = list(self.gamma0)
        out["beta0"] = list(self.beta0)
        return out


def _parse_vector(text: str) -> tuple:
    text = text.strip().strip("[]()")
    if not text:
        return ()
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_VECTOR_KEYS = {"direction", "eps_list", "gamma0", "beta0"}


def parse_text(text: str) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise DomainError(f"line {lineno}: empty key")
        pairs[key] = value
    return pairs


def coerce(pairs: dict[str, str]) -> ExperimentConfig:
    kw: dict = {}
    expectations: dict[str, str] = {}
    for key, value in pairs.items():
        if key.startswith(EXPECT_PREFIX):
            expectations[key[len(EXPECT_PREFIX):]] = value
            continue
        if key not in _FIELDS or key == "expectations":
            raise DomainError(f"unknown config key {key!r}")
        if key in _VECTOR_KEYS:
            kw[key] = _parse_vector(value)
        elif key in ("N", "M", "stride"):
            kw[key] = int(float(value))
        elif key in ("delta_rule", "mode", "output_dir"):
            kw[key] = value
        else:
            kw[key] = float(value)
    return ExperimentConfig(**kw, expectations=expectations)


def load_config(path: str | Path | None = None, overrides=()) -> ExperimentConfig:
    pairs = parse_text(Path(path).read_text()) if path else {}
    for item in overrides:
        if "=" not in item:
            raise DomainError(f"override must look like key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v.strip()
    return coerce(pairs)


def expectation_range(text: str) -> tuple[float, float]:
    """``lo,hi`` or ``value+-tol``."""
    if "+-" in text:
        centre, tol = (float(s) for s in text.split("+-"))
        return centre - tol, centre + tol
    lo, hi = _parse_vector(text)
    return lo, hi


__all__ = ["ExperimentConfig", "coerce", "expectation_range", "load_config", "parse_text"]
