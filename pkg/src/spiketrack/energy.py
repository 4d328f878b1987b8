"""Neuromorphic energy estimates from synaptic-operation counts.

The per-frame op count is taken as a sustained op rate and divided by the
chip efficiency (4e11 synaptic ops per second per Watt). Wall time is steps
times a 1 ms global tick. Energy is power times wall time.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .engine import OpCounter
from .errors import UsageError, ValidationError


@dataclass(frozen=True)
class Baseline:
    name: str
    flops: float | None
    watts: float
    ms: float
    joules: float


# Published per-frame figures; carried verbatim, never recomputed.
PUBLISHED_BASELINES = (
    Baseline("SiamFC", 5.44e9, 250.0, 11.63, 2.91),
    Baseline("SiamRPN++", 1.42e10, 250.0, 28.57, 7.14),
    Baseline("DSTfc", None, 250.0, 4.35, 1.10),
    Baseline("ECO", None, 120.0, 452.49, 54.3),
)


@dataclass(frozen=True)
class EnergyModel:
    sops_per_watt: float = 4.0e11
    timestep_seconds: float = 1e-3
    baselines: tuple = field(default=PUBLISHED_BASELINES)

    def __post_init__(self):
        if not (self.sops_per_watt > 0 and self.timestep_seconds > 0):
            raise ValidationError("energy model constants must be positive")


@dataclass(frozen=True)
class EnergyReport:
    total_sops: int
    run_steps: int
    power_watts: float
    wall_ms: float
    energy_joules: float

    def to_dict(self) -> dict:
        return asdict(self)


def estimate(counter, steps: int, model: EnergyModel = EnergyModel()) -> EnergyReport:
    """``counter`` is an OpCounter or a plain op count for one frame."""
    if steps < 1:
        raise UsageError(f"steps must be >= 1, got {steps}")
    total = counter.total if isinstance(counter, OpCounter) else counter
    if total < 0:
        raise UsageError("op count cannot be negative")
    power = total / model.sops_per_watt
    wall_ms = steps * model.timestep_seconds * 1000.0
    return EnergyReport(total, int(steps), power, wall_ms, power * wall_ms / 1000.0)


def _fmt(v) -> str:
    if v is None:
        return "--"
    if isinstance(v, float) and (abs(v) >= 1e4 or (v != 0 and abs(v) < 1e-2)):
        return f"{v:.2E}"
    return f"{v:g}"


def report(snn: EnergyReport | None, baselines=PUBLISHED_BASELINES, name: str = "SNN (this run)") -> str:
    """Aligned plain-text comparison table."""
    rows = [("Method", "FLOPs/SOPS", "Power (W)", "Time (ms)", "Energy (J)")]
    for b in baselines:
        rows.append((b.name, _fmt(b.flops), _fmt(b.watts), _fmt(b.ms), _fmt(b.joules)))
    if snn is not None:
        rows.append((name, _fmt(float(snn.total_sops)), _fmt(snn.power_watts), _fmt(snn.wall_ms), _fmt(snn.energy_joules)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def report_json(snn: EnergyReport | None, baselines=PUBLISHED_BASELINES) -> str:
    doc = {
        "baselines": [asdict(b) for b in baselines],
        "snn": snn.to_dict() if snn is not None else None,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
