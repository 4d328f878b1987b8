"""Seeded toy backbones and calibration data for desk-scale experiments."""
from __future__ import annotations

import numpy as np

from .ann import AnnModel, BatchNorm, Conv, MaxPool, ReLU
from .tensor import ConvSpec
from .tracking import crop, generate_sequence, suite_params


def _conv(rng, out_ch, in_ch, k=3, bias_scale=0.05):
    w = rng.normal(0.0, np.sqrt(2.0 / (in_ch * k * k)), size=(out_ch, in_ch, k, k))
    b = rng.uniform(-bias_scale, bias_scale, size=out_ch)
    return ConvSpec(w, b, 1)


def toy_branch(seed: int = 0, in_channels: int = 1, widths=(4, 8, 8), input_hw=(16, 16)) -> AnnModel:
    """Conv-BN-ReLU-MaxPool(2, stride 1)-Conv-ReLU-Conv-ReLU, all 3x3 valid.

    Total stride is 1, so a 16x16 exemplar against a 32x32 search window
    yields a 17x17 response covering displacements of +-8 px.
    """
    rng = np.random.default_rng(seed)
    c1, c2, c3 = widths
    bn = BatchNorm(
        gamma=rng.uniform(0.8, 1.2, c1),
        beta=rng.uniform(0.0, 0.1, c1),
        mean=rng.uniform(-0.1, 0.1, c1),
        var=rng.uniform(0.5, 1.5, c1),
        eps=1e-5,
    )
    layers = [
        Conv(_conv(rng, c1, in_channels)),
        bn,
        ReLU(),
        MaxPool(2, 1),
        Conv(_conv(rng, c2, c1)),
        ReLU(),
        Conv(_conv(rng, c3, c2)),
        ReLU(),
    ]
    return AnnModel(layers, (in_channels, *input_hw))


def calibration_crops(n: int = 8, size: int = 32, seed: int = 0, channels: int = 1) -> list[np.ndarray]:
    """Search-sized crops around the target from seeded synthetic sequences."""
    crops = []
    for k in range(n):
        seq = generate_sequence(suite_params(seed + 100 + k, channels=channels))
        f = k % len(seq)
        cx, cy = seq.boxes[f][:2]
        crops.append(crop(seq.frames[f], (cx, cy), size)[0])
    return crops
