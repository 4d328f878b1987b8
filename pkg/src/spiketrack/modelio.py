"""File formats: model JSON, tensor/frame text dumps, sequence directories,
spike-train records and response-map CSV grids."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .ann import ActivationStats, AnnModel, BatchNorm, Conv, MaxPool, ReLU
from .conversion import SnnModel, SpikeMaxPool, SpikingConv
from .engine import SpikeTensor
from .errors import DimensionError, ModelFormatError, ValidationError
from .tensor import ConvSpec
from .tracking import SyntheticSequence

FORMAT_VERSION = 1


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _conv_doc(kind: str, spec: ConvSpec) -> dict:
    return {
        "kind": kind,
        "shape": list(spec.kernel.shape),
        "stride": spec.stride,
        "weights": _floats(spec.kernel),
        "bias": _floats(spec.bias),
    }


def model_to_dict(model) -> dict:
    layers = []
    for layer in model.layers:
        if isinstance(layer, (Conv, SpikingConv)):
            layers.append(_conv_doc(layer.kind, layer.spec))
        elif isinstance(layer, BatchNorm):
            layers.append({
                "kind": "BatchNorm",
                "bn": {
                    "gamma": _floats(layer.gamma),
                    "beta": _floats(layer.beta),
                    "mean": _floats(layer.mean),
                    "var": _floats(layer.var),
                    "eps": layer.eps,
                },
            })
        elif isinstance(layer, ReLU):
            layers.append({"kind": "ReLU"})
        elif isinstance(layer, (MaxPool, SpikeMaxPool)):
            layers.append({"kind": layer.kind, "shape": [layer.window, layer.window], "stride": layer.stride})
    doc = {"format_version": FORMAT_VERSION, "input_shape": list(model.input_shape), "layers": layers}
    if isinstance(model, SnnModel):
        stats = model.source_lambdas
        doc["lambdas"] = list(stats.lambda_per_layer) if stats else [l.lambda_cur for l in model.conv_layers()]
        doc["percentile"] = stats.percentile if stats else None
    return doc


class _Field:
    """Accessor that names the offending field in every error."""

    def __init__(self, doc, path: str):
        self.doc, self.path = doc, path

    def get(self, key, kind=None):
        if not isinstance(self.doc, dict) or key not in self.doc:
            raise ModelFormatError(f"{self.path}: missing field '{key}'")
        value = self.doc[key]
        wrong_type = kind is not None and not isinstance(value, kind)
        if wrong_type or isinstance(value, bool):
            raise ModelFormatError(f"{self.path}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
        return value

    def numbers(self, key, n=None) -> np.ndarray:
        value = self.get(key, list)
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ModelFormatError(f"{self.path}.{key}: expected a list of numbers")
        if n is not None and len(value) != n:
            raise ModelFormatError(f"{self.path}.{key}: expected {n} values, got {len(value)}")
        return np.array(value, dtype=np.float64)

    def ints(self, key, n=None) -> list:
        value = self.get(key, list)
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in value) or (n is not None and len(value) != n):
            raise ModelFormatError(f"{self.path}.{key}: expected {n or 'a list of'} integers, got {value!r}")
        return value


def _parse_conv(f: _Field) -> ConvSpec:
    shape = f.ints("shape", 4)
    n = int(np.prod(shape))
    weights = f.numbers("weights", n).reshape(shape)
    bias = f.numbers("bias", shape[0])
    stride = f.get("stride", int)
    return ConvSpec(weights, bias, stride)


def _parse_pool(f: _Field) -> tuple[int, int]:
    shape = f.ints("shape", 2)
    if shape[0] != shape[1]:
        raise ModelFormatError(f"{f.path}.shape: only square pooling windows are supported, got {shape}")
    return shape[0], f.get("stride", int)


def model_from_dict(doc):
    root = _Field(doc, "model")
    version = root.get("format_version", int)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"model.format_version: unsupported version {version}")
    input_shape = tuple(root.ints("input_shape", 3))
    raw_layers = root.get("layers", list)
    layers, kinds = [], set()
    for i, raw in enumerate(raw_layers):
        f = _Field(raw, f"layers[{i}]")
        kind = f.get("kind", str)
        kinds.add(kind)
        if kind in ("Conv", "SpikingConv"):
            spec = _parse_conv(f)
            layers.append(Conv(spec) if kind == "Conv" else SpikingConv(spec))
        elif kind == "BatchNorm":
            bn = _Field(f.get("bn", dict), f"layers[{i}].bn")
            gamma = bn.numbers("gamma")
            n = len(gamma)
            layers.append(BatchNorm(gamma, bn.numbers("beta", n), bn.numbers("mean", n), bn.numbers("var", n), float(bn.get("eps", (int, float)))))
        elif kind == "ReLU":
            layers.append(ReLU())
        elif kind in ("MaxPool", "SpikeMaxPool"):
            window, stride = _parse_pool(f)
            layers.append(MaxPool(window, stride) if kind == "MaxPool" else SpikeMaxPool(window, stride))
        else:
            raise ModelFormatError(f"layers[{i}].kind: unknown layer kind {kind!r}")
    spiking = kinds & {"SpikingConv", "SpikeMaxPool"}
    if spiking and kinds - {"SpikingConv", "SpikeMaxPool"}:
        raise ModelFormatError("model.layers: mixes spiking and non-spiking layer kinds")
    try:
        if not spiking:
            return AnnModel(layers, input_shape)
        lambdas = root.numbers("lambdas", sum(isinstance(l, SpikingConv) for l in layers))
        percentile = doc.get("percentile")
        stats = ActivationStats(tuple(lambdas), 99.9 if percentile is None else float(percentile))
        prev, k = 1.0, 0
        for layer in layers:
            if isinstance(layer, SpikingConv):
                layer.lambda_prev, layer.lambda_cur = prev, float(lambdas[k])
                prev = float(lambdas[k])
                k += 1
        return SnnModel(layers, input_shape, stats)
    except (DimensionError, ValidationError) as exc:
        raise ModelFormatError(f"model: {exc}") from None


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return model_from_dict(doc)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


# Tensors are text files: a "# shape C H W" header then C*H rows of W values.

def save_tensor(arr, path):
    arr = np.asarray(arr, dtype=np.float64)
    c, h, w = arr.shape
    np.savetxt(path, arr.reshape(c * h, w), fmt="%.17g", delimiter=",", header=f"shape {c} {h} {w}")


def load_tensor(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
    if len(header) != 4 or header[0] != "shape":
        raise ModelFormatError(f"{path}: line 1: expected '# shape C H W' header")
    try:
        c, h, w = (int(v) for v in header[1:])
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
        return data.reshape(c, h, w)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


def load_tensor_dir(directory) -> list[np.ndarray]:
    files = sorted(Path(directory).glob("*.csv"))
    return [load_tensor(p) for p in files]


def save_sequence(seq: SyntheticSequence, directory):
    d = Path(directory)
    (d / "frames").mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(seq.frames, start=1):
        save_tensor(frame, d / "frames" / f"{k:04d}.csv")
    with open(d / "groundtruth.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "cx", "cy", "w", "h"])
        for k, box in enumerate(seq.boxes, start=1):
            w.writerow([k] + [repr(float(v)) for v in box])


def load_sequence(directory) -> SyntheticSequence:
    d = Path(directory)
    frames = load_tensor_dir(d / "frames")
    gt = d / "groundtruth.csv"
    if not frames or not gt.exists():
        raise ModelFormatError(f"{d}: expected frames/*.csv and groundtruth.csv")
    with open(gt, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        boxes = np.array([[float(r[k]) for k in ("cx", "cy", "w", "h")] for r in rows])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{gt}: bad ground-truth row ({exc})") from None
    if len(boxes) != len(frames):
        raise ModelFormatError(f"{d}: {len(frames)} frames but {len(boxes)} ground-truth rows")
    return SyntheticSequence(frames, boxes)


def spike_records(trains, layers=None):
    """``t,layer,channel,y,x,magnitude`` lines for the given per-layer trains."""
    for li, train in enumerate(trains):
        if layers is not None and li not in layers:
            continue
        for t, c, y, x, m in train.events():
            yield f"{t},{li},{c},{y},{x},{m!r}"


def write_spikes(trains, path, layers=None, append: bool = False):
    with open(path, "a" if append else "w") as fh:
        for line in spike_records(trains, layers):
            fh.write(line + "\n")


def read_spikes(path, T: int, shapes: dict) -> dict:
    """Parse a spike dump back into ``{layer: SpikeTensor}``; ``shapes`` maps layer to (C, H, W)."""
    events = {li: [] for li in shapes}
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            parts = line.strip().split(",")
            if len(parts) != 6:
                raise ModelFormatError(f"{path}: line {n}: expected 6 fields")
            t, li, c, y, x = (int(v) for v in parts[:5])
            events.setdefault(li, []).append((t, c, y, x, float(parts[5])))
    return {li: SpikeTensor.from_events(ev, T, shapes[li]) for li, ev in events.items() if li in shapes}


def write_response(values: np.ndarray, path):
    np.savetxt(path, np.asarray(values), fmt="%.17g", delimiter=",")


def read_response(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
