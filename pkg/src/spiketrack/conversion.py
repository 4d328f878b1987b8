"""ANN -> spiking conversion: batch-norm folding and λ-ratio weight normalization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ann import ActivationStats, AnnModel, BatchNorm, Conv, MaxPool, ReLU
from .errors import DimensionError, ValidationError
from .tensor import ConvSpec, as_tensor3, conv2d, maxpool2d, pool_output_shape


@dataclass(eq=False)
class SpikingConv:
    spec: ConvSpec
    lambda_prev: float = 1.0
    lambda_cur: float = 1.0
    kind = "SpikingConv"

    def __eq__(self, other):
        return (
            isinstance(other, SpikingConv)
            and self.spec == other.spec
            and self.lambda_prev == other.lambda_prev
            and self.lambda_cur == other.lambda_cur
        )


@dataclass
class SpikeMaxPool:
    window: int
    stride: int
    kind = "SpikeMaxPool"


@dataclass
class SnnModel:
    layers: list
    input_shape: tuple
    source_lambdas: ActivationStats | None = None

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        for i, layer in enumerate(self.layers):
            if isinstance(layer, SpikingConv) and not np.all(np.isfinite(layer.spec.kernel)):
                raise ValidationError(f"layer {i}: non-finite weights")
        self.shapes()

    def shapes(self, input_shape=None) -> list[tuple[int, int, int]]:
        shapes = [tuple(input_shape or self.input_shape)]
        for i, layer in enumerate(self.layers):
            try:
                if isinstance(layer, SpikingConv):
                    shapes.append(layer.spec.output_shape(shapes[-1]))
                elif isinstance(layer, SpikeMaxPool):
                    shapes.append(pool_output_shape(shapes[-1], layer.window, layer.stride))
                else:
                    raise ValidationError(f"layer {i}: unknown spiking layer {type(layer).__name__}")
            except DimensionError as exc:
                raise DimensionError(f"layer {i} ({layer.kind}): {exc}") from None
        return shapes

    def conv_layers(self) -> list[SpikingConv]:
        return [layer for layer in self.layers if isinstance(layer, SpikingConv)]


def fold_batchnorm(conv: ConvSpec, bn: BatchNorm) -> ConvSpec:
    """Fold an inference-mode BatchNorm into the preceding convolution."""
    if np.any(bn.var <= 0):
        raise ValidationError("BatchNorm variance must be > 0 per channel")
    if bn.channels != conv.out_channels:
        raise DimensionError(f"BatchNorm has {bn.channels} channels, conv has {conv.out_channels} outputs")
    scale = bn.scale()
    kernel = conv.kernel * scale[:, None, None, None]
    bias = (conv.bias - bn.mean) * scale + bn.beta
    return ConvSpec(kernel, bias, conv.stride)


def normalize_layer(w, b, lambda_prev: float, lambda_cur: float):
    """Rescale weights by λ_prev/λ_cur and biases by 1/λ_cur."""
    if not (lambda_prev > 0 and lambda_cur > 0):
        raise ValidationError(f"lambdas must be > 0, got lambda_prev={lambda_prev}, lambda_cur={lambda_cur}")
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return w * (lambda_prev / lambda_cur), b / lambda_cur


def convert(model: AnnModel, stats: ActivationStats) -> SnnModel:
    convs = model.conv_indices()
    if len(stats.lambda_per_layer) < len(convs):
        missing = convs[len(stats.lambda_per_layer)]
        raise ValidationError(
            f"no lambda for Conv layer {missing}: stats cover {len(stats.lambda_per_layer)} of {len(convs)} conv stages"
        )
    layers = []
    lam_prev = 1.0  # inputs are presumed scaled to [0, 1]
    k = 0
    for i, layer in enumerate(model.layers):
        if isinstance(layer, Conv):
            spec = layer.spec
            nxt = model.layers[i + 1] if i + 1 < len(model.layers) else None
            if isinstance(nxt, BatchNorm):
                spec = fold_batchnorm(spec, nxt)
            lam = stats.lambda_per_layer[k]
            w, b = normalize_layer(spec.kernel, spec.bias, lam_prev, lam)
            layers.append(SpikingConv(ConvSpec(w, b, spec.stride), lam_prev, lam))
            lam_prev = lam
            k += 1
        elif isinstance(layer, MaxPool):
            layers.append(SpikeMaxPool(layer.window, layer.stride))
        # BatchNorm is folded above; ReLU is realized by the IF dynamics.
    return SnnModel(layers, model.input_shape, stats)


def normalized_forward(model: SnnModel, x, rectify: bool = True) -> list[np.ndarray]:
    """Float evaluation of the normalized weights (ReLU after every conv when
    ``rectify``). Its outputs are the rates the spiking layers approximate."""
    x = as_tensor3(x, "input")
    outs = []
    for layer in model.layers:
        if isinstance(layer, SpikingConv):
            x = conv2d(x, layer.spec)
            if rectify:
                x = np.maximum(x, 0.0)
        else:
            x = maxpool2d(x, layer.window, layer.stride)
        outs.append(x)
    return outs


def as_rectified_ann(model: SnnModel) -> AnnModel:
    """Float network with the normalized weights and a ReLU after every conv.

    Its features are what the spiking layers' rates approximate, so it serves
    as the oracle when only the converted model is at hand.
    """
    layers = []
    for layer in model.layers:
        if isinstance(layer, SpikingConv):
            layers += [Conv(layer.spec), ReLU()]
        else:
            layers.append(MaxPool(layer.window, layer.stride))
    return AnnModel(layers, model.input_shape)
