import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spiketrack.ann import ActivationStats, AnnModel, BatchNorm, Conv, ReLU, forward_ann
from spiketrack.conversion import (
    SpikeMaxPool,
    SpikingConv,
    as_rectified_ann,
    convert,
    fold_batchnorm,
    normalize_layer,
    normalized_forward,
)
from spiketrack.errors import ValidationError
from spiketrack.tensor import ConvSpec, conv2d


def random_bn(rng, n):
    return BatchNorm(rng.uniform(0.5, 2, n), rng.normal(size=n), rng.normal(size=n), rng.uniform(0.1, 3, n), 1e-5)


def test_folding_matches_bn_after_conv_on_100_inputs(rng):
    spec = ConvSpec(rng.normal(size=(4, 2, 3, 3)), rng.normal(size=4))
    bn = random_bn(rng, 4)
    folded = fold_batchnorm(spec, bn)
    for _ in range(100):
        x = rng.normal(size=(2, 7, 6))
        z = conv2d(x, spec)
        ref = (z - bn.mean[:, None, None]) * bn.scale()[:, None, None] + bn.beta[:, None, None]
        got = conv2d(x, folded)
        assert np.all(np.abs(got - ref) <= 1e-9 * (1 + np.abs(ref)))


def test_fold_rejects_channel_mismatch(rng):
    spec = ConvSpec(rng.normal(size=(4, 2, 3, 3)), np.zeros(4))
    with pytest.raises(Exception, match="channels"):
        fold_batchnorm(spec, random_bn(rng, 3))


def test_normalize_layer_examples():
    w, b = normalize_layer(np.array([2.0]), np.array([1.0]), 1.0, 2.0)
    assert w.tolist() == [1.0] and b.tolist() == [0.5]
    w, b = normalize_layer(np.array([3.0]), np.array([0.0]), 2.0, 2.0)
    assert w.tolist() == [3.0]
    with pytest.raises(ValidationError):
        normalize_layer(np.ones(1), np.ones(1), 0.0, 1.0)


def test_convert_structure(toy_ann, toy_stats, toy_snn):
    kinds = [layer.kind for layer in toy_snn.layers]
    assert kinds == ["SpikingConv", "SpikeMaxPool", "SpikingConv", "SpikingConv"]
    lams = [(l.lambda_prev, l.lambda_cur) for l in toy_snn.conv_layers()]
    l1, l2, l3 = toy_stats.lambda_per_layer
    assert lams == [(1.0, l1), (l1, l2), (l2, l3)]


def test_shape_chain_preserved(toy_ann, toy_snn):
    snn_shapes = toy_snn.shapes()
    ann_shapes = toy_ann.shapes()
    assert snn_shapes[0] == ann_shapes[0] and snn_shapes[-1] == ann_shapes[-1]
    assert toy_snn.shapes((1, 32, 32))[-1] == toy_ann.output_shape((1, 32, 32))


def test_convert_needs_a_lambda_per_conv(toy_ann):
    with pytest.raises(ValidationError, match="no lambda"):
        convert(toy_ann, ActivationStats((1.0, 1.0)))


@given(seed=st.integers(0, 2**31))
def test_scale_chain_telescopes(seed):
    rng = np.random.default_rng(seed)
    layers = [
        Conv(ConvSpec(rng.normal(size=(3, 1, 3, 3)), rng.normal(size=3))),
        random_bn(rng, 3),
        ReLU(),
        Conv(ConvSpec(rng.normal(size=(2, 3, 3, 3)), rng.normal(size=2))),
        ReLU(),
        Conv(ConvSpec(rng.normal(size=(2, 2, 2, 2)), rng.normal(size=2))),
    ]
    ann = AnnModel(layers, (1, 9, 9))
    lams = tuple(rng.uniform(0.2, 5.0, 3))
    snn = convert(ann, ActivationStats(lams))
    x = rng.uniform(size=(1, 9, 9))
    ref = forward_ann(ann, x)[-1]
    got = normalized_forward(snn, x, rectify=False)
    # Intermediate stages are rectified in the ANN, so compare stage by stage.
    hidden = normalized_forward(snn, x, rectify=True)
    np.testing.assert_allclose(hidden[0] * lams[0], forward_ann(ann, x)[2], rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(hidden[1] * lams[1], forward_ann(ann, x)[4], rtol=1e-9, atol=1e-12)
    final = conv2d(hidden[1], snn.layers[-1].spec)
    np.testing.assert_allclose(final * lams[2], ref, rtol=1e-9, atol=1e-12)
    assert got[-1].shape == ref.shape


def test_rectified_ann_oracle_matches_normalized_forward(toy_snn, rng):
    oracle = as_rectified_ann(toy_snn)
    x = rng.uniform(size=(1, 16, 16))
    np.testing.assert_allclose(forward_ann(oracle, x)[-1], normalized_forward(toy_snn, x)[-1], atol=1e-12)


def test_spiking_layers_compare_by_value(toy_snn):
    layer = toy_snn.layers[0]
    twin = SpikingConv(ConvSpec(layer.spec.kernel.copy(), layer.spec.bias.copy()), layer.lambda_prev, layer.lambda_cur)
    assert twin == layer
    assert SpikeMaxPool(2, 1) == toy_snn.layers[1]
