"""Dense [C, H, W] float64 kernels: valid convolution, max-pooling, cross-correlation.

Tensors are plain ``numpy.ndarray`` objects; ``as_tensor3`` is the single
validation point. Batched variants take a leading axis (time, usually) and
are used by the spiking engine to evaluate all time steps of a layer at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = [
    "ConvSpec",
    "as_tensor3",
    "conv2d",
    "conv2d_batch",
    "maxpool2d",
    "pool_output_shape",
    "xcorr_valid",
]


def as_tensor3(x, name: str = "tensor") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"{name}: expected a [C, H, W] tensor, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise DimensionError(f"{name}: all dimensions must be >= 1, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ConvSpec:
    """Kernel ``(out_ch, in_ch, kh, kw)``, per-output-channel bias, integer stride."""

    kernel: np.ndarray
    bias: np.ndarray
    stride: int = 1

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=np.float64)
        if kernel.ndim != 4 or min(kernel.shape) < 1:
            raise DimensionError(f"kernel must be (out_ch, in_ch, kh, kw) with dims >= 1, got {kernel.shape}")
        bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if bias.shape != (kernel.shape[0],):
            raise DimensionError(f"bias length {bias.shape[0]} does not match out_ch {kernel.shape[0]}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise DimensionError(f"stride must be an integer >= 1, got {self.stride}")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "stride", int(self.stride))

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    def output_shape(self, in_shape) -> tuple[int, int, int]:
        c, h, w = in_shape
        _, ci, kh, kw = self.kernel.shape
        if c != ci:
            raise DimensionError(
                f"input shape {tuple(in_shape)} has {c} channels, kernel {self.kernel.shape} expects {ci}"
            )
        if h < kh or w < kw:
            raise DimensionError(f"input shape {tuple(in_shape)} smaller than kernel {self.kernel.shape}")
        return (self.out_channels, (h - kh) // self.stride + 1, (w - kw) // self.stride + 1)

    def __eq__(self, other):
        if not isinstance(other, ConvSpec):
            return NotImplemented
        return (
            self.stride == other.stride
            and np.array_equal(self.kernel, other.kernel)
            and np.array_equal(self.bias, other.bias)
        )


_IM2COL_BUDGET = 1 << 23  # max elements in one im2col temporary


def conv2d_batch(inputs: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Valid convolution of a stack ``(N, C, H, W)``; returns ``(N, out_ch, Ho, Wo)``.

    Chunked along N so the im2col temporary stays bounded.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 4:
        raise DimensionError(f"expected (N, C, H, W) stack, got shape {inputs.shape}")
    o, ho, wo = spec.output_shape(inputs.shape[1:])
    n, c = inputs.shape[:2]
    s = spec.stride
    _, _, kh, kw = spec.kernel.shape
    windows = np.lib.stride_tricks.sliding_window_view(inputs, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]
    out = np.empty((n, o, ho, wo))
    step = max(1, _IM2COL_BUDGET // (ho * wo * c * kh * kw))
    for i in range(0, n, step):
        out[i : i + step] = np.einsum("nchwij,ocij->nohw", windows[i : i + step], spec.kernel, optimize=True)
    out += spec.bias[None, :, None, None]
    return out


def conv2d(x, spec: ConvSpec) -> np.ndarray:
    x = as_tensor3(x, "conv2d input")
    return conv2d_batch(x[None], spec)[0]


def pool_output_shape(in_shape, window: int, stride: int) -> tuple[int, int, int]:
    c, h, w = in_shape
    if window < 1 or stride < 1:
        raise DimensionError(f"pool window and stride must be >= 1, got {window}, {stride}")
    if window > h or window > w:
        raise DimensionError(f"pool window {window} larger than input shape {tuple(in_shape)}")
    return (c, (h - window) // stride + 1, (w - window) // stride + 1)


def _pool_windows(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    # x: (..., H, W) -> (..., Ho, Wo, window*window), window entries row-major
    view = np.lib.stride_tricks.sliding_window_view(x, (window, window), axis=(-2, -1))
    view = view[..., ::stride, ::stride, :, :]
    return view.reshape(view.shape[:-2] + (window * window,))


def maxpool2d(x, window: int, stride: int | None = None) -> np.ndarray:
    x = as_tensor3(x, "maxpool2d input")
    stride = window if stride is None else stride
    pool_output_shape(x.shape, window, stride)
    return _pool_windows(x, window, stride).max(axis=-1)


def xcorr_valid(exemplar, search) -> np.ndarray:
    """Sliding inner product of ``exemplar`` over every valid position of ``search``.

    Both are ``[C, H, W]``; the result is a 2-D map of shape
    ``(Hs - He + 1, Ws - We + 1)``. Channels may stand for (time, channel)
    pairs flattened together, which is how the temporal estimators use it.
    """
    exemplar = as_tensor3(exemplar, "exemplar")
    search = as_tensor3(search, "search")
    ce, he, we = exemplar.shape
    cs, hs, ws = search.shape
    if ce != cs:
        raise DimensionError(f"channel mismatch: exemplar {exemplar.shape} vs search {search.shape}")
    if he > hs or we > ws:
        raise DimensionError(f"exemplar {exemplar.shape} larger than search {search.shape}")
    ho, wo = hs - he + 1, ws - we + 1
    # Per-tap correlation planes in one product, then shift-and-add over taps.
    planes = (exemplar.reshape(ce, he * we).T @ search.reshape(cs, hs * ws)).reshape(he, we, hs, ws)
    out = np.zeros((ho, wo))
    for dy in range(he):
        for dx in range(we):
            out += planes[dy, dx, dy : dy + ho, dx : dx + wo]
    return out
