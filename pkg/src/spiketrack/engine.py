"""Time-stepped integrate-and-fire simulation with reset by subtraction.

Every spiking layer integrates ``z(t) = sum_j w_ij * m_j(t) + b_i`` where
``m_j(t)`` is the magnitude (the presynaptic threshold at emission time) of
the spike from neuron ``j`` at step ``t``, or zero. A neuron fires when its
potential reaches the current threshold, emits one spike of that magnitude
and subtracts it. The first layer receives the analog input as a constant
current every step.

``run_network`` evaluates one layer over all ``T`` steps before moving on.
Layers have no feedback, so this gives the same trains as stepping every
layer per time step (``step_layer``), which the tests check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conversion import SnnModel, SpikeMaxPool, SpikingConv
from .errors import DimensionError, UsageError
from .schedules import Burst, Constant, ThresholdSchedule, TwoStatus, threshold_at, threshold_series
from .tensor import ConvSpec, as_tensor3, conv2d, conv2d_batch, maxpool2d, pool_output_shape


@dataclass(eq=False)
class SpikeTensor:
    """Spike magnitudes over time, shape ``(T, C, H, W)``; zero means no spike."""

    magnitudes: np.ndarray

    def __post_init__(self):
        self.magnitudes = np.asarray(self.magnitudes, dtype=np.float64)
        if self.magnitudes.ndim != 4:
            raise DimensionError(f"spike tensor must be (T, C, H, W), got {self.magnitudes.shape}")
        if np.any(self.magnitudes < 0):
            raise UsageError("spike magnitudes must be >= 0")

    @property
    def T(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.magnitudes.shape[1:]

    def counts(self) -> np.ndarray:
        return (self.magnitudes > 0).sum(axis=0)

    def potential(self) -> np.ndarray:
        """Sum of magnitudes over time per neuron."""
        return self.magnitudes.sum(axis=0)

    def n_spikes(self) -> int:
        return int(np.count_nonzero(self.magnitudes))

    def events(self):
        """Yield ``(t, channel, y, x, magnitude)`` with 1-based ``t``, in time-major order."""
        for t, c, y, x in np.argwhere(self.magnitudes > 0):
            yield int(t) + 1, int(c), int(y), int(x), float(self.magnitudes[t, c, y, x])

    @classmethod
    def from_events(cls, events, T: int, shape) -> "SpikeTensor":
        mags = np.zeros((T,) + tuple(shape))
        for t, c, y, x, m in events:
            if not 1 <= t <= T:
                raise UsageError(f"spike at t={t} outside 1..{T}")
            mags[t - 1, c, y, x] = m
        return cls(mags)

    def __eq__(self, other):
        return isinstance(other, SpikeTensor) and np.array_equal(self.magnitudes, other.magnitudes)


@dataclass
class MembraneState:
    v_mem: np.ndarray
    threshold: np.ndarray | None = None  # per-neuron, burst schedules only

    @classmethod
    def zeros(cls, shape, schedule: ThresholdSchedule | None = None) -> "MembraneState":
        thr = np.full(shape, float(schedule.base)) if isinstance(schedule, Burst) else None
        return cls(np.zeros(shape), thr)


@dataclass
class OpCounter:
    """Synaptic operations keyed by layer label; insertion order is network order."""

    per_layer: dict = field(default_factory=dict)

    def add(self, label: str, n: int):
        if n < 0:
            raise UsageError("op counts cannot decrease")
        self.per_layer[label] = self.per_layer.get(label, 0) + int(n)

    @property
    def total(self) -> int:
        return sum(self.per_layer.values())

    def merge(self, other: "OpCounter"):
        for k, v in other.per_layer.items():
            self.add(k, v)


@dataclass
class SimConfig:
    T: int = 20
    schedule: ThresholdSchedule = field(default_factory=TwoStatus)
    layer_schedules: dict = field(default_factory=dict)  # layer index -> schedule
    input_coding: str = "real_current"
    seed: int = 0

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise UsageError(f"T must be an integer >= 1, got {self.T}")
        if self.input_coding != "real_current":
            raise UsageError(f"unsupported input coding {self.input_coding!r}")

    def schedule_for(self, layer_index: int) -> ThresholdSchedule:
        return self.layer_schedules.get(layer_index, self.schedule)


@dataclass
class SimResult:
    trains: list  # SpikeTensor per layer
    ops: OpCounter
    potentials: list  # final membrane potential per spiking conv layer (None for pools)

    @property
    def output(self) -> SpikeTensor:
        return self.trains[-1]


def layer_label(index: int, layer) -> str:
    return f"{index}:{layer.kind}"


def fanout_map(spec: ConvSpec, in_shape) -> np.ndarray:
    """Number of postsynaptic connections of each input neuron under ``spec``."""
    o, ho, wo = spec.output_shape(in_shape)
    _, h, w = in_shape
    _, _, kh, kw = spec.kernel.shape
    s = spec.stride

    def cover(n, k, n_out):
        c = np.zeros(n, dtype=np.int64)
        for i in range(n_out):
            c[i * s : i * s + k] += 1
        return c

    fan = np.outer(cover(h, kh, ho), cover(w, kw, wo)) * o
    return np.broadcast_to(fan, tuple(in_shape)).astype(np.int64)


def _fire(v: np.ndarray, th):
    """Spike where ``v >= th``; returns (v after reset, magnitudes)."""
    if np.isscalar(th) and math.isinf(th):
        # Infinite threshold: nothing fires and nothing is subtracted.
        return v, np.zeros_like(v)
    mag = np.where(v >= th, th, 0.0)
    return v - mag, mag


def _advance_burst(thr: np.ndarray, mag: np.ndarray, schedule: Burst) -> np.ndarray:
    return np.where(mag > 0, np.maximum(thr / 2.0, schedule.halving_floor), schedule.base)


def step_layer(
    state: MembraneState,
    weights: ConvSpec,
    in_spikes_at_t,
    schedule: ThresholdSchedule,
    t: int,
    counter: OpCounter | None = None,
    label: str = "layer",
):
    """Advance one spiking conv layer by one step; returns ``(out_spikes, new_state)``.

    ``in_spikes_at_t`` holds presynaptic spike magnitudes (or the analog input
    for the first layer).
    """
    if t < 1:
        raise UsageError(f"time steps start at 1, got t={t}")
    x = as_tensor3(in_spikes_at_t, "input spikes")
    z = conv2d(x, weights)
    if z.shape != state.v_mem.shape:
        raise DimensionError(f"layer output {z.shape} does not match membrane state {state.v_mem.shape}")
    if isinstance(schedule, Burst):
        thr = state.threshold if state.threshold is not None else np.full(z.shape, schedule.base)
        v, mag = _fire(state.v_mem + z, thr)
        new_state = MembraneState(v, _advance_burst(thr, mag, schedule))
    else:
        v, mag = _fire(state.v_mem + z, threshold_at(schedule, t))
        new_state = MembraneState(v)
    if counter is not None:
        counter.add(label, int(((x != 0) * fanout_map(weights, x.shape)).sum()) + z.size)
    return mag, new_state


def _gate(values: np.ndarray, spikes: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Per window, the spike of the entry with the largest ``values``; the first
    (lowest linear index) wins ties. Works on any leading axes."""
    ho = (values.shape[-2] - window) // stride + 1
    wo = (values.shape[-1] - window) // stride + 1
    best = sel = None
    for dy in range(window):
        for dx in range(window):
            idx = (..., slice(dy, dy + stride * (ho - 1) + 1, stride), slice(dx, dx + stride * (wo - 1) + 1, stride))
            v, spk = values[idx], spikes[idx]
            if best is None:
                best, sel = v.copy(), spk.copy()
                continue
            better = v > best
            best = np.where(better, v, best)
            sel = np.where(better, spk, sel)
    return sel


def spike_maxpool(in_spikes_at_t, rate_estimates, window: int, stride: int) -> np.ndarray:
    """Forward, per pooling window, the spike of the neuron with the highest
    running rate estimate (ties go to the lowest linear index)."""
    spikes = as_tensor3(in_spikes_at_t, "input spikes")
    rates = np.asarray(rate_estimates, dtype=np.float64)
    if rates.shape != spikes.shape:
        raise DimensionError(f"rate estimates {rates.shape} do not match spikes {spikes.shape}")
    pool_output_shape(spikes.shape, window, stride)
    return _gate(rates, spikes, window, stride)


def _integrate(z: np.ndarray, schedule: ThresholdSchedule, constant_input: bool, T: int):
    """Run IF dynamics given per-step input currents ``z`` (shape (T, ...) or a
    single current reused every step when ``constant_input``)."""
    shape = z.shape if constant_input else z.shape[1:]
    out = np.zeros((T,) + shape)
    v = np.zeros(shape)
    if isinstance(schedule, Burst):
        thr = np.full(shape, float(schedule.base))
        for t in range(T):
            v, mag = _fire(v + (z if constant_input else z[t]), thr)
            thr = _advance_burst(thr, mag, schedule)
            out[t] = mag
        return out, v
    ths = threshold_series(schedule, T)
    for t in range(T):
        v, out[t] = _fire(v + (z if constant_input else z[t]), float(ths[t]))
    return out, v


def _pool_train(spikes: np.ndarray, window: int, stride: int) -> np.ndarray:
    # Running rate = cumulative count / t; every neuron shares the same t, so
    # comparing cumulative counts picks the same winner.
    counts = np.cumsum(spikes > 0, axis=0)
    return _gate(counts, spikes, window, stride)


def run_network(model: SnnModel, x, cfg: SimConfig, counter: OpCounter | None = None) -> SimResult:
    """Simulate ``model`` on analog input ``x`` (values in [0, 1]) for ``cfg.T`` steps."""
    x = as_tensor3(x, "input")
    if np.any(x < 0) or np.any(x > 1):
        raise UsageError("network input must lie in [0, 1]")
    if x.shape[0] != model.input_shape[0]:
        raise DimensionError(f"input shape {x.shape} does not match model input channels {model.input_shape[0]}")
    model.shapes(x.shape)
    T = cfg.T
    counter = OpCounter() if counter is None else counter
    trains, potentials = [], []
    prev = None  # (T, C, H, W) spike magnitudes; None while still analog
    analog = x
    for i, layer in enumerate(model.layers):
        label = layer_label(i, layer)
        if isinstance(layer, SpikingConv):
            spec = layer.spec
            if prev is None:
                fan = fanout_map(spec, analog.shape)
                z = conv2d(analog, spec)
                ops = T * int(((analog != 0) * fan).sum())
                out, v = _integrate(z, cfg.schedule_for(i), True, T)
            else:
                fan = fanout_map(spec, prev.shape[1:])
                z = conv2d_batch(prev, spec)
                ops = int(((prev > 0).sum(axis=0) * fan).sum())
                out, v = _integrate(z, cfg.schedule_for(i), False, T)
            counter.add(label, ops + T * int(np.prod(out.shape[1:])))
            potentials.append(v)
        elif isinstance(layer, SpikeMaxPool):
            if prev is None:
                analog = maxpool2d(analog, layer.window, layer.stride)
                trains.append(SpikeTensor(np.zeros((T,) + analog.shape)))
                potentials.append(None)
                counter.add(label, 0)
                continue
            out = _pool_train(prev, layer.window, layer.stride)
            potentials.append(None)
            counter.add(label, 0)
        else:
            raise UsageError(f"unknown spiking layer {type(layer).__name__}")
        trains.append(SpikeTensor(out))
        prev = out
    return SimResult(trains, counter, potentials)


def firing_rate(train: SpikeTensor) -> np.ndarray:
    """Spike count per neuron divided by T (magnitudes ignored)."""
    return train.counts() / train.T


__all__ = [
    "Constant",
    "MembraneState",
    "OpCounter",
    "SimConfig",
    "SimResult",
    "SpikeTensor",
    "fanout_map",
    "firing_rate",
    "run_network",
    "spike_maxpool",
    "step_layer",
]
