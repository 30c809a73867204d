import numpy as np
import pytest

from aadnet.exceptions import ConfigError, FormatError, ParameterError, ShapeError
from aadnet.model import (
    ModelConfig,
    ablation_config,
    backward,
    count_parameters,
    forward,
    init_model,
    load_model,
    param_shapes,
    predict,
)
from aadnet.model.checkpoint import decode_model, encode_model
from aadnet.model.network import labels_from_proba
from aadnet.nn import TRAIN


def shape_walk(T, C=32, K=32, L=64, D=2, Ls=16, hidden=64, bn=(True, True, True)):
    """Closed-form parameter count written out layer by layer."""
    M = K * D
    flat = M * ((T // 4) // 8)
    n = K * L + M * C + M * Ls + M * M + flat * hidden + hidden + hidden * 2 + 2
    n += 2 * K * bn[0] + 2 * M * bn[1] + 4 * M * bn[2]
    return n


@pytest.mark.parametrize("T,width", [(50, 64), (250, 448), (500, 960)])
def test_flatten_width_and_logits(T, width, rng):
    cfg = ModelConfig(window_samples=T)
    assert cfg.flatten_width == width
    params = init_model(cfg, 0)
    assert param_shapes(cfg)["w_fc1"] == (64, width)
    logits, _ = forward(params, rng.standard_normal((2, 1, 32, T)))
    assert logits.shape == (2, 2)
    assert count_parameters(cfg) == shape_walk(T)


def test_parameter_count_at_half_second():
    assert count_parameters(ModelConfig()) == 38530 == shape_walk(250)


@pytest.mark.parametrize("variant", ["M1", "M2", "M3"])
def test_ablation_parameter_counts(variant):
    cfg = ablation_config(ModelConfig(), variant)
    assert count_parameters(cfg) == shape_walk(250, bn=cfg.bn_flags)


def test_ablation_flags():
    base = ModelConfig()
    assert ablation_config(base, "M1").bn_flags == (False, True, True)
    assert ablation_config(base, "M2").bn_flags == (True, False, True)
    assert ablation_config(base, "M3").bn_flags == (True, True, False)
    with pytest.raises(ParameterError):
        ablation_config(base, "M4")


def test_init_is_deterministic():
    a, b = init_model(ModelConfig(), 11), init_model(ModelConfig(), 11)
    for k in a.weights:
        np.testing.assert_array_equal(a.weights[k], b.weights[k])


def test_infer_deterministic_and_zero_propagation(rng):
    params = init_model(ModelConfig(window_samples=50), 3)
    x = rng.standard_normal((3, 1, 32, 50))
    np.testing.assert_array_equal(forward(params, x)[0], forward(params, x)[0])
    params.weights["b_fc2"][:] = [0.3, -0.2]
    logits, _ = forward(params, np.zeros((2, 1, 32, 50)))
    np.testing.assert_allclose(logits, np.tile([0.3, -0.2], (2, 1)), atol=1e-15)


def test_backward_linearity(rng):
    cfg = ModelConfig(n_channels=4, window_samples=40)
    params = init_model(cfg, 2)
    x = rng.standard_normal((3, 1, 4, 40))
    logits, cache = forward(params, x, TRAIN, np.random.default_rng(0), update_running=False)
    zero = backward(params, cache, np.zeros_like(logits))
    assert all(np.all(g == 0) for g in zero.values())
    d = rng.standard_normal(logits.shape)
    g1 = backward(params, cache, d)
    g2 = backward(params, cache, 2 * d)
    for k in g1:
        np.testing.assert_allclose(g2[k], 2 * g1[k], rtol=1e-12, atol=1e-300)


def test_predict_threshold_rules():
    assert labels_from_proba(np.array([np.exp(-1) / (np.exp(2) + np.exp(-1))]))[0] == 0  # logits [2, -1]
    assert labels_from_proba(np.array([0.5]))[0] == 1
    assert np.all(labels_from_proba(np.random.default_rng(0).random(20), threshold=0.0) == 1)


def test_predict_on_network(rng):
    params = init_model(ModelConfig(window_samples=50), 3)
    y = predict(params, rng.standard_normal((4, 1, 32, 50)))
    assert y.shape == (4,) and set(y.tolist()) <= {0, 1}


def test_input_shape_checked():
    params = init_model(ModelConfig(window_samples=50), 0)
    with pytest.raises(ShapeError):
        forward(params, np.zeros((2, 1, 31, 50)))


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(window_samples=20)  # pools to zero
    with pytest.raises(ConfigError):
        ModelConfig(max_norm=1.0)


@pytest.mark.parametrize("overrides", [{}, {"bn3": False}, {"bn1": False, "bn3_both": False}])
def test_checkpoint_round_trip(tmp_path, overrides, rng):
    cfg = ModelConfig(window_samples=50, **overrides)
    params = init_model(cfg, 5)
    for k in params.buffers:
        params.buffers[k] = rng.standard_normal(params.buffers[k].shape)
    path = tmp_path / "m.aadm"
    from aadnet.model import save_model

    save_model(params, path)
    back = load_model(path)
    assert back.config == cfg
    for src, dst in ((params.weights, back.weights), (params.buffers, back.buffers)):
        assert src.keys() == dst.keys()
        for k in src:
            assert src[k].tobytes() == dst[k].tobytes()


def test_checkpoint_rejects_corruption():
    buf = encode_model(init_model(ModelConfig(window_samples=50), 0))
    with pytest.raises(FormatError):
        decode_model(b"XXXX" + buf[4:])
    with pytest.raises(FormatError):
        decode_model(buf[:-3])
    with pytest.raises(FormatError):
        decode_model(buf + b"\0")
