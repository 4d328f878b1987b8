"""Desk-scale Siamese tracking over synthetic sequences.

The exemplar is cropped once from frame 1 at the ground-truth box; every
later frame is searched in a window centred on the previous estimate. The
response argmax gives the displacement; box size is held fixed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .ann import AnnModel, Conv, MaxPool, features
from .conversion import SnnModel, SpikeMaxPool, SpikingConv
from .engine import OpCounter, SimConfig, run_network
from .errors import UsageError, ValidationError
from .similarity import HseConfig, argmax2d, correlation_ops, response
from .tensor import xcorr_valid


@dataclass(frozen=True)
class SequenceParams:
    frame_size: tuple = (64, 64)  # (height, width)
    n_frames: int = 16
    object_size: tuple = (8, 8)  # (height, width)
    start: tuple | None = None  # top-left (y, x) of the object in frame 1; centred if None
    velocity: tuple = (0.0, 0.0)  # (vx, vy) pixels per frame
    noise: float = 0.0
    channels: int = 1
    background: float = 0.1
    seed: int = 0


@dataclass
class SyntheticSequence:
    frames: list
    boxes: np.ndarray  # (n_frames, 4): cx, cy, w, h
    params: SequenceParams | None = None

    def __len__(self):
        return len(self.frames)


def generate_sequence(params: SequenceParams = SequenceParams()) -> SyntheticSequence:
    """Textured rectangle translating over a flat background; deterministic in ``seed``."""
    H, W = params.frame_size
    oh, ow = params.object_size
    if params.n_frames < 1 or params.channels < 1:
        raise ValidationError("need n_frames >= 1 and channels >= 1")
    if oh < 1 or ow < 1 or oh > H or ow > W:
        raise ValidationError(f"object {params.object_size} does not fit in frame {params.frame_size}")
    rng = np.random.default_rng(params.seed)
    texture = rng.uniform(0.3, 1.0, size=(params.channels, oh, ow))
    y0, x0 = params.start if params.start is not None else ((H - oh) // 2, (W - ow) // 2)
    vx, vy = params.velocity
    frames, boxes = [], []
    for k in range(params.n_frames):
        top = int(np.floor(y0 + k * vy + 0.5))
        left = int(np.floor(x0 + k * vx + 0.5))
        if top < 0 or left < 0 or top + oh > H or left + ow > W:
            raise ValidationError(
                f"object leaves the frame at frame {k + 1} (top-left {top},{left}, frame {params.frame_size})"
            )
        frame = np.full((params.channels, H, W), float(params.background))
        frame[:, top : top + oh, left : left + ow] = texture
        if params.noise > 0:
            frame = np.clip(frame + rng.uniform(-params.noise, params.noise, size=frame.shape), 0.0, 1.0)
        frames.append(frame)
        boxes.append((left + ow / 2.0, top + oh / 2.0, float(ow), float(oh)))
    return SyntheticSequence(frames, np.array(boxes), params)


def suite_params(seed: int, **overrides) -> SequenceParams:
    """Seeded noiseless sequence with integer velocity of speed <= 2 px/frame."""
    velocities = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1), (2, 0), (0, -2)]
    rng = np.random.default_rng(10_000 + seed)
    vx, vy = velocities[int(rng.integers(len(velocities)))]
    base = dict(frame_size=(64, 64), n_frames=12, object_size=(8, 8), velocity=(float(vx), float(vy)), seed=seed)
    base.update(overrides)
    p = SequenceParams(**base)
    H, W = p.frame_size
    oh, ow = p.object_size
    span_x, span_y = abs(vx) * (p.n_frames - 1), abs(vy) * (p.n_frames - 1)
    x_lo, x_hi = 8 + (span_x if vx < 0 else 0), W - ow - 8 - (span_x if vx > 0 else 0)
    y_lo, y_hi = 8 + (span_y if vy < 0 else 0), H - oh - 8 - (span_y if vy > 0 else 0)
    start = (int(rng.integers(y_lo, y_hi + 1)), int(rng.integers(x_lo, x_hi + 1)))
    return SequenceParams(**{**base, "start": start})


def crop(frame: np.ndarray, center, size: int):
    """Square crop centred on ``(cx, cy)``; outside pixels are zero.

    Returns ``(patch, (top, left), clipped)``.
    """
    cx, cy = center
    top = int(math.floor(cy - size / 2.0 + 0.5))
    left = int(math.floor(cx - size / 2.0 + 0.5))
    C, H, W = frame.shape
    patch = np.zeros((C, size, size))
    y0, y1 = max(top, 0), min(top + size, H)
    x0, x1 = max(left, 0), min(left + size, W)
    clipped = (y0, y1, x0, x1) != (top, top + size, left, left + size)
    if y1 > y0 and x1 > x0:
        patch[:, y0 - top : y1 - top, x0 - left : x1 - left] = frame[:, y0:y1, x0:x1]
    return patch, (top, left), clipped


def iou(a, b) -> float:
    """IoU of two (cx, cy, w, h) boxes."""
    ax0, ay0, ax1, ay1 = a[0] - a[2] / 2, a[1] - a[3] / 2, a[0] + a[2] / 2, a[1] + a[3] / 2
    bx0, by0, bx1, by1 = b[0] - b[2] / 2, b[1] - b[3] / 2, b[0] + b[2] / 2, b[1] + b[3] / 2
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    return float(inter / union) if union > 0 else 0.0


@dataclass
class TrackMetrics:
    center_errors: list
    ious: list
    mean_center_error: float
    mean_iou: float
    success_rate: float  # fraction of frames with IoU > 0.5
    clipped_frames: int = 0

    @classmethod
    def from_boxes(cls, predicted, truth, clipped_frames: int = 0) -> "TrackMetrics":
        errs = [float(math.hypot(p[0] - g[0], p[1] - g[1])) for p, g in zip(predicted, truth)]
        ious = [iou(p, g) for p, g in zip(predicted, truth)]
        n = max(len(errs), 1)
        return cls(
            errs,
            ious,
            sum(errs) / n,
            sum(ious) / n,
            sum(v > 0.5 for v in ious) / n,
            clipped_frames,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrackerConfig:
    backend: str = "ann"
    exemplar_size: int = 16
    search_size: int = 32
    bias: float = 0.0  # ANN backend response bias
    hse: HseConfig = field(default_factory=HseConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    count_correlation: bool = True
    keep_responses: bool = True

    def __post_init__(self):
        if self.backend not in ("ann", "snn"):
            raise UsageError(f"backend must be 'ann' or 'snn', got {self.backend!r}")
        if self.exemplar_size < 1 or self.search_size < self.exemplar_size:
            raise UsageError("need 1 <= exemplar_size <= search_size")
        if self.backend == "snn" and self.hse.T != self.sim.T:
            raise UsageError(f"similarity T={self.hse.T} differs from simulation T={self.sim.T}")


@dataclass
class TrackerState:
    """Fixed exemplar (features or spike train) plus the running centre."""

    config: TrackerConfig
    model: object
    exemplar: object
    exemplar_offset: tuple  # target centre minus exemplar crop top-left, (dx, dy)
    center: tuple
    exemplar_ops: int = 0


@dataclass
class TrackResult:
    centers: list  # predicted (cx, cy) per frame, frame 1 = ground truth
    search_centers: list  # centre each search window was cropped at (frames 2..N)
    metrics: TrackMetrics
    responses: list = field(default_factory=list)
    ops_per_frame: list = field(default_factory=list)
    exemplar_ops: int = 0

    def to_dict(self) -> dict:
        return {
            "centers": [list(c) for c in self.centers],
            "metrics": self.metrics.to_dict(),
            "ops_per_frame": list(self.ops_per_frame),
            "exemplar_ops": self.exemplar_ops,
        }


def total_stride(model) -> int:
    s = 1
    for layer in model.layers:
        if isinstance(layer, (Conv, SpikingConv)):
            s *= layer.spec.stride
        elif isinstance(layer, (MaxPool, SpikeMaxPool)):
            s *= layer.stride
    return s


def _check_backend(model, cfg: TrackerConfig):
    if cfg.backend == "ann" and not isinstance(model, AnnModel):
        raise UsageError("ann backend needs an ANN model")
    if cfg.backend == "snn" and not isinstance(model, SnnModel):
        raise UsageError("snn backend needs a converted SNN model")


def init_tracker(model, frame: np.ndarray, box, cfg: TrackerConfig) -> TrackerState:
    _check_backend(model, cfg)
    cx, cy = float(box[0]), float(box[1])
    patch, (top, left), _ = crop(frame, (cx, cy), cfg.exemplar_size)
    ops = 0
    if cfg.backend == "ann":
        exemplar = features(model, patch)
    else:
        sim = run_network(model, patch, cfg.sim)
        exemplar = sim.output
        ops = sim.ops.total
    return TrackerState(cfg, model, exemplar, (cx - left, cy - top), (cx, cy), ops)


def search_response(state: TrackerState, frame: np.ndarray, center):
    """Response map for a search window centred on ``center``.

    Returns ``(values, (top, left), clipped, ops)``.
    """
    cfg = state.config
    patch, origin, clipped = crop(frame, center, cfg.search_size)
    if cfg.backend == "ann":
        return xcorr_valid(state.exemplar, features(state.model, patch)) + cfg.bias, origin, clipped, 0
    counter = OpCounter()
    x_train = run_network(state.model, patch, cfg.sim, counter).output
    if cfg.count_correlation:
        counter.add("correlation", correlation_ops(state.exemplar, x_train, cfg.hse))
    return response(state.exemplar, x_train, cfg.hse).values, origin, clipped, counter.total


def peak_to_center(state: TrackerState, values: np.ndarray, origin) -> tuple:
    r, c = argmax2d(values)
    s = total_stride(state.model)
    top, left = origin
    return (left + c * s + state.exemplar_offset[0], top + r * s + state.exemplar_offset[1])


def track(seq: SyntheticSequence, model, cfg: TrackerConfig) -> TrackResult:
    state = init_tracker(model, seq.frames[0], seq.boxes[0], cfg)
    w, h = float(seq.boxes[0][2]), float(seq.boxes[0][3])
    centers = [state.center]
    search_centers, responses, ops = [], [], []
    clipped_frames = 0
    for frame in seq.frames[1:]:
        values, origin, clipped, n_ops = search_response(state, frame, state.center)
        search_centers.append(state.center)
        clipped_frames += int(clipped)
        state.center = peak_to_center(state, values, origin)
        centers.append(state.center)
        ops.append(n_ops)
        if cfg.keep_responses:
            responses.append(values)
    predicted = [(cx, cy, w, h) for cx, cy in centers[1:]]
    metrics = TrackMetrics.from_boxes(predicted, [tuple(b) for b in seq.boxes[1:]], clipped_frames)
    return TrackResult(centers, search_centers, metrics, responses, ops, state.exemplar_ops)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else 0.0


def response_agreement(seq: SyntheticSequence, reference: TrackResult, model, cfg: TrackerConfig) -> dict:
    """Evaluate ``model`` on the reference tracker's search windows and compare
    response maps frame by frame (peak equality and Pearson correlation)."""
    if len(reference.responses) != len(seq) - 1:
        raise UsageError("reference result must keep its responses")
    state = init_tracker(model, seq.frames[0], seq.boxes[0], cfg)
    agree, corr = [], []
    for frame, center, ref in zip(seq.frames[1:], reference.search_centers, reference.responses):
        values, _, _, _ = search_response(state, frame, center)
        agree.append(argmax2d(values) == argmax2d(ref))
        corr.append(pearson(values, ref))
    n = max(len(agree), 1)
    return {
        "peak_agreement": [bool(a) for a in agree],
        "pearson": corr,
        "agreement_rate": sum(agree) / n,
        "mean_pearson": sum(corr) / n,
    }


def compare_backends(
    seq: SyntheticSequence, ann_model, ann_cfg: TrackerConfig, snn_model, snn_cfg: TrackerConfig
) -> dict:
    """Track with both backends and compare; response maps are compared on the
    ANN tracker's search windows so the two maps see the same pixels."""
    ann = track(seq, ann_model, ann_cfg)
    other = track(seq, snn_model, snn_cfg)
    agreement = response_agreement(seq, ann, snn_model, snn_cfg)
    return {
        "ann": ann.metrics.to_dict(),
        "snn": other.metrics.to_dict(),
        "center_error_gap": other.metrics.mean_center_error - ann.metrics.mean_center_error,
        "iou_gap": ann.metrics.mean_iou - other.metrics.mean_iou,
        **agreement,
    }
