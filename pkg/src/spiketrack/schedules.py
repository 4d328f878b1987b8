"""Firing-threshold schedules V_th(t), t = 1, 2, ..."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import UsageError, ValidationError


@dataclass(frozen=True)
class Constant:
    v: float = 1.0
    name = "constant"

    def __post_init__(self):
        if not self.v > 0 or math.isinf(self.v):
            raise ValidationError(f"constant threshold must be finite and > 0, got {self.v}")


@dataclass(frozen=True)
class Phase:
    """Weighted-spike phase coding: V_th(t) = 2^-(1 + (t-1) mod K)."""

    K: int = 8
    name = "phase"

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValidationError(f"phase period K must be an integer >= 1, got {self.K}")


@dataclass(frozen=True)
class Burst:
    """Per-neuron threshold that halves after every spike (down to ``halving_floor``)
    and returns to ``base`` after a silent step."""

    base: float = 1.0
    halving_floor: float = 0.125
    name = "burst"

    def __post_init__(self):
        if not (0 < self.halving_floor <= self.base) or math.isinf(self.base):
            raise ValidationError(f"burst needs 0 < halving_floor <= base < inf, got {self.halving_floor}, {self.base}")


@dataclass(frozen=True)
class TwoStatus:
    """Alternating potentiation (threshold ``beta``) and depression (threshold
    ``alpha``, +inf by default) phases of ``p`` steps each."""

    p: int = 5
    alpha: float = math.inf
    beta: float = 0.5
    potentiation_first: bool = True
    name = "two_status"

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValidationError(f"two-status period p must be an integer >= 1, got {self.p}")
        if not self.beta > 0 or math.isinf(self.beta):
            raise ValidationError(f"beta must be finite and > 0, got {self.beta}")
        if not self.alpha > self.beta:
            raise ValidationError(f"alpha must exceed beta, got alpha={self.alpha}, beta={self.beta}")

    def depressed(self, t: int) -> bool:
        block = ((t - 1) // self.p) % 2
        return block == (1 if self.potentiation_first else 0)


ThresholdSchedule = Union[Constant, Phase, Burst, TwoStatus]

SCHEDULE_NAMES = ("constant", "phase", "burst", "two_status")


def threshold_at(schedule: ThresholdSchedule, t: int) -> float:
    """Threshold at 1-based step ``t``.

    Burst thresholds depend on each neuron's history; this returns the
    threshold of a neuron that has not just spiked (``base``).
    """
    if t < 1:
        raise UsageError(f"time steps start at 1, got t={t}")
    if isinstance(schedule, Constant):
        return float(schedule.v)
    if isinstance(schedule, Phase):
        return 2.0 ** -(1 + (t - 1) % schedule.K)
    if isinstance(schedule, TwoStatus):
        return float(schedule.alpha) if schedule.depressed(t) else float(schedule.beta)
    if isinstance(schedule, Burst):
        return float(schedule.base)
    raise UsageError(f"unknown schedule {schedule!r}")


def threshold_series(schedule: ThresholdSchedule, T: int) -> np.ndarray:
    return np.array([threshold_at(schedule, t) for t in range(1, T + 1)])


def make_schedule(name: str, **params) -> ThresholdSchedule:
    """Build a schedule by name, ignoring parameters that belong to other variants."""
    if name == "constant":
        return Constant(float(params.get("v", 1.0)))
    if name == "phase":
        return Phase(int(params.get("K", 8)))
    if name == "burst":
        return Burst(float(params.get("burst_base", 1.0)), float(params.get("burst_floor", 0.125)))
    if name == "two_status":
        return TwoStatus(
            int(params.get("p", 5)),
            float(params.get("alpha", math.inf)),
            float(params.get("beta", 0.5)),
            bool(params.get("potentiation_first", True)),
        )
    raise UsageError(f"unknown schedule {name!r}; valid names: {', '.join(SCHEDULE_NAMES)}")
