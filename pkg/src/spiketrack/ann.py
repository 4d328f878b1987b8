"""Floating-point reference network and activation-percentile calibration."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DimensionError, UsageError, ValidationError
from .tensor import ConvSpec, as_tensor3, conv2d, maxpool2d, pool_output_shape, xcorr_valid

LAMBDA_FLOOR = 1e-6


@dataclass(eq=False)
class Conv:
    spec: ConvSpec
    kind = "Conv"

    def __eq__(self, other):
        return isinstance(other, Conv) and self.spec == other.spec


@dataclass(eq=False)
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = 1e-5
    kind = "BatchNorm"

    def __post_init__(self):
        for name in ("gamma", "beta", "mean", "var"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(-1))
        n = self.gamma.shape[0]
        if any(getattr(self, k).shape != (n,) for k in ("beta", "mean", "var")):
            raise DimensionError("BatchNorm parameter vectors must all have the same length")
        if np.any(self.var <= 0):
            raise ValidationError(f"BatchNorm variance must be > 0 per channel, got {self.var.tolist()}")
        self.eps = float(self.eps)

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    def scale(self) -> np.ndarray:
        return self.gamma / np.sqrt(self.var + self.eps)

    def __eq__(self, other):
        return isinstance(other, BatchNorm) and self.eps == other.eps and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("gamma", "beta", "mean", "var")
        )


@dataclass
class ReLU:
    kind = "ReLU"


@dataclass
class MaxPool:
    window: int
    stride: int
    kind = "MaxPool"


LayerDesc = Union[Conv, BatchNorm, ReLU, MaxPool]


def _shape_chain(layers, input_shape) -> list[tuple[int, int, int]]:
    shapes = [tuple(int(d) for d in input_shape)]
    for i, layer in enumerate(layers):
        cur = shapes[-1]
        try:
            if isinstance(layer, Conv):
                nxt = layer.spec.output_shape(cur)
            elif isinstance(layer, BatchNorm):
                if layer.channels != cur[0]:
                    raise DimensionError(f"BatchNorm has {layer.channels} channels, input has {cur[0]}")
                nxt = cur
            elif isinstance(layer, ReLU):
                nxt = cur
            elif isinstance(layer, MaxPool):
                nxt = pool_output_shape(cur, layer.window, layer.stride)
            else:
                raise ValidationError(f"unknown layer type {type(layer).__name__}")
        except DimensionError as exc:
            raise DimensionError(f"layer {i} ({layer.kind}): {exc}") from None
        shapes.append(nxt)
    return shapes


@dataclass
class AnnModel:
    """Ordered layer list. Each Conv may be followed by a BatchNorm and must be
    followed by a ReLU, except the last Conv, which may stay linear."""

    layers: list
    input_shape: tuple

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise DimensionError(f"input_shape must be (c, h, w) with dims >= 1, got {self.input_shape}")
        _shape_chain(self.layers, self.input_shape)
        self._check_ordering()

    def _check_ordering(self):
        convs = self.conv_indices()
        for i, layer in enumerate(self.layers):
            prev = self.layers[i - 1] if i else None
            if isinstance(layer, BatchNorm) and not isinstance(prev, Conv):
                raise ValidationError(f"layer {i}: BatchNorm must directly follow a Conv")
            if isinstance(layer, ReLU) and not isinstance(prev, (Conv, BatchNorm)):
                raise ValidationError(f"layer {i}: ReLU must follow a Conv or BatchNorm")
        for ci in convs[:-1]:
            if not isinstance(self.layers[self.stage_end(ci)], ReLU):
                raise ValidationError(f"layer {ci}: only the final Conv may omit its ReLU")

    def shapes(self) -> list[tuple[int, int, int]]:
        """Input shape followed by the output shape of each layer."""
        return _shape_chain(self.layers, self.input_shape)

    def output_shape(self, input_shape) -> tuple[int, int, int]:
        return _shape_chain(self.layers, input_shape)[-1]

    def conv_indices(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if isinstance(layer, Conv)]

    def stage_end(self, conv_index: int) -> int:
        """Index of the last layer of the Conv [BatchNorm] [ReLU] stage starting at ``conv_index``."""
        j = conv_index
        if j + 1 < len(self.layers) and isinstance(self.layers[j + 1], BatchNorm):
            j += 1
        if j + 1 < len(self.layers) and isinstance(self.layers[j + 1], ReLU):
            j += 1
        return j


@dataclass
class ActivationStats:
    """One λ per Conv stage, in network order."""

    lambda_per_layer: tuple
    percentile: float = 99.9
    labels: tuple = field(default=(), compare=False)

    def __post_init__(self):
        self.lambda_per_layer = tuple(float(v) for v in self.lambda_per_layer)
        if any(not v > 0 for v in self.lambda_per_layer):
            raise ValidationError(f"every lambda must be > 0, got {self.lambda_per_layer}")
        if not 0 < self.percentile <= 100:
            raise ValidationError(f"percentile must be in (0, 100], got {self.percentile}")

    def __len__(self):
        return len(self.lambda_per_layer)


def forward_ann(model: AnnModel, x) -> list[np.ndarray]:
    """Evaluate the network; returns the output of every layer, feature map last."""
    x = as_tensor3(x, "input")
    # Convolutions are fully valid-mode, so any spatial size that survives the chain is accepted.
    if x.shape[0] != model.input_shape[0]:
        raise DimensionError(f"input shape {x.shape} does not match model input channels {model.input_shape[0]}")
    model.output_shape(x.shape)
    outputs = []
    for layer in model.layers:
        if isinstance(layer, Conv):
            x = conv2d(x, layer.spec)
        elif isinstance(layer, BatchNorm):
            x = (x - layer.mean[:, None, None]) * layer.scale()[:, None, None] + layer.beta[:, None, None]
        elif isinstance(layer, ReLU):
            x = np.maximum(x, 0.0)
        elif isinstance(layer, MaxPool):
            x = maxpool2d(x, layer.window, layer.stride)
        outputs.append(x)
    return outputs


def features(model: AnnModel, x) -> np.ndarray:
    return forward_ann(model, x)[-1]


def percentile_linear(values: np.ndarray, q: float) -> float:
    """Percentile with linear interpolation between order statistics."""
    return float(np.percentile(np.asarray(values, dtype=np.float64).ravel(), q, method="linear"))


def record_lambdas(
    model: AnnModel,
    calibration_set,
    percentile: float = 99.9,
    final_layer_lambda: str = "recorded",
    floor: float = LAMBDA_FLOOR,
) -> ActivationStats:
    """Record one λ per Conv stage from the pooled activations of ``calibration_set``.

    ``final_layer_lambda="1.0"`` pins the last stage's λ instead of recording it.
    """
    calibration_set = list(calibration_set)
    if not calibration_set:
        raise UsageError("calibration set is empty")
    if not 0 < percentile <= 100:
        raise UsageError(f"percentile must be in (0, 100], got {percentile}")
    if final_layer_lambda not in ("recorded", "1.0"):
        raise UsageError(f"final_layer_lambda must be 'recorded' or '1.0', got {final_layer_lambda!r}")
    convs = model.conv_indices()
    ends = [model.stage_end(ci) for ci in convs]
    pooled = [[] for _ in ends]
    for x in calibration_set:
        outs = forward_ann(model, x)
        for k, j in enumerate(ends):
            pooled[k].append(outs[j].ravel())
    lambdas = []
    for k, chunks in enumerate(pooled):
        if k == len(pooled) - 1 and final_layer_lambda == "1.0":
            lambdas.append(1.0)
            continue
        lam = percentile_linear(np.concatenate(chunks), percentile)
        lambdas.append(max(lam, floor))
    labels = tuple(f"layer{ci}" for ci in convs)
    return ActivationStats(tuple(lambdas), float(percentile), labels)


def ann_response(model: AnnModel, exemplar, search, bias: float = 0.0) -> np.ndarray:
    return xcorr_valid(features(model, exemplar), features(model, search)) + bias
