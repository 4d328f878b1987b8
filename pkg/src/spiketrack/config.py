"""Run configuration: ``key = value`` files with ``#`` comments, overridden by CLI flags.

Randomness: every seeded quantity (toy weights, synthetic sequences) draws
from ``numpy.random.default_rng(seed)``, i.e. PCG64, so reruns with the same
seed are bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .engine import SimConfig
from .errors import UsageError
from .schedules import make_schedule
from .similarity import HseConfig
from .tracking import TrackerConfig


@dataclass(frozen=True)
class RunConfig:
    T: int = 20
    tau: int = 1
    schedule: str = "two_status"
    K: int = 8
    p: int = 5
    alpha: float = math.inf
    beta: float = 0.5
    potentiation_first: bool = True
    burst_base: float = 1.0
    burst_floor: float = 0.125
    mode: str = "HSE"
    temporal_weight: str = "literal"
    bias: float = 0.0
    percentile: float = 99.9
    final_layer_lambda: str = "recorded"
    seed: int = 0
    exemplar_size: int = 16
    search_size: int = 32
    count_correlation: bool = True

    def schedule_obj(self, name: str | None = None):
        return make_schedule(
            name or self.schedule,
            K=self.K,
            p=self.p,
            alpha=self.alpha,
            beta=self.beta,
            potentiation_first=self.potentiation_first,
            burst_base=self.burst_base,
            burst_floor=self.burst_floor,
        )

    def sim(self, schedule: str | None = None, T: int | None = None) -> SimConfig:
        return SimConfig(T=T or self.T, schedule=self.schedule_obj(schedule), seed=self.seed)

    def hse(self, T: int | None = None) -> HseConfig:
        return HseConfig(T=T or self.T, tau=self.tau, bias=self.bias, mode=self.mode, temporal_weight=self.temporal_weight)

    def tracker(self, backend: str, schedule: str | None = None, T: int | None = None) -> TrackerConfig:
        return TrackerConfig(
            backend=backend,
            exemplar_size=self.exemplar_size,
            search_size=self.search_size,
            bias=self.bias,
            hse=self.hse(T),
            sim=self.sim(schedule, T),
            count_correlation=self.count_correlation,
        )


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)  # accepts "inf"
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}: line {n}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise UsageError(f"{source}: line {n}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then non-None ``overrides``."""
    values = parse_config_text(Path(path).read_text(), str(path)) if path else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _TYPES:
            raise UsageError(f"unknown config key {key!r}")
        values[key] = _coerce(key, str(value)) if isinstance(value, str) and _TYPES[key] != "str" else value
    cfg = replace(RunConfig(), **values)
    cfg.schedule_obj()  # validate schedule name and parameters early
    cfg.hse()
    return cfg
