import numpy as np
import pytest

from scopeq import (
    AdamConfig,
    AugmentConfig,
    ContrastiveConfig,
    DegenerateInputError,
    DivergenceError,
    FrameTensor,
    ShapeMismatchError,
    embed_batch,
    encoder_forward,
    encoder_init,
    encoder_input_jacobian,
    train_encoder,
)
from scopeq.encoder import _list_to_params, _params_to_list, batch_loss_and_grads


def _tiny_params(seed=0):
    return encoder_init(
        6, hidden_dims=(5,), embed_dim=4, proj_hidden_dim=4, proj_dim=3, seed=seed
    )


def _frames(rng, n, dim=6):
    # Two well-separated groups so contrastive training has structure to find.
    half = n // 2
    a = rng.normal(loc=3.0, size=(half, dim))
    b = rng.normal(loc=-3.0, size=(n - half, dim))
    return [FrameTensor(row) for row in np.concatenate([a, b])]


def test_init_is_seed_deterministic_with_zero_bias():
    p1, p2 = _tiny_params(seed=9), _tiny_params(seed=9)
    for l1, l2 in zip(p1.encoder_layers, p2.encoder_layers):
        np.testing.assert_array_equal(l1.weights, l2.weights)
        assert np.all(l1.bias == 0.0)
    assert not np.array_equal(
        _tiny_params(seed=1).encoder_layers[0].weights,
        _tiny_params(seed=2).encoder_layers[0].weights,
    )


def test_final_layers_are_linear():
    p = _tiny_params()
    assert p.encoder_layers[-1].activation == "identity"
    assert p.projection_layers[-1].activation == "identity"
    assert p.encoder_layers[0].activation == "tanh"
    assert p.input_dim == 6


def test_forward_accepts_tensor_and_raw_vector(rng):
    p = _tiny_params()
    x = rng.normal(size=6)
    out_raw = encoder_forward(p, x)
    out_tensor = encoder_forward(p, FrameTensor(x))
    assert out_raw.shape == (4,)
    np.testing.assert_array_equal(out_raw, out_tensor)


def test_forward_rejects_wrong_input_length(rng):
    with pytest.raises(ShapeMismatchError, match="expects 6"):
        encoder_forward(_tiny_params(), rng.normal(size=7))


def test_batch_embedding_matches_per_frame(rng):
    p = _tiny_params()
    frames = [rng.normal(size=6) for _ in range(5)]
    batch = embed_batch(p, frames)
    single = np.stack([encoder_forward(p, f) for f in frames])
    np.testing.assert_allclose(batch, single, rtol=1e-12, atol=0)


def test_input_jacobian_matches_central_differences(rng):
    p = _tiny_params(seed=3)
    x = rng.normal(size=6)
    jac = encoder_input_jacobian(p, x)
    assert jac.shape == (4, 6)
    h = 1e-6
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        col = (encoder_forward(p, x + e) - encoder_forward(p, x - e)) / (2 * h)
        np.testing.assert_allclose(jac[:, j], col, rtol=1e-5, atol=1e-8)


def test_parameter_gradients_match_central_differences(rng):
    p = _tiny_params(seed=5)
    x1 = rng.normal(size=(4, 6))
    x2 = x1 + 0.1 * rng.normal(size=(4, 6))
    _, grads = batch_loss_and_grads(p, x1, x2, tau=0.5)

    flat = _params_to_list(p)
    assert len(grads) == len(flat)
    h = 1e-6
    for which in range(len(flat)):
        g_fd = np.zeros_like(flat[which])
        for i in range(flat[which].size):
            def loss_at(delta):
                bumped = [a.copy() for a in flat]
                bumped[which].flat[i] += delta
                return batch_loss_and_grads(
                    _list_to_params(bumped, p), x1, x2, 0.5
                )[0]

            g_fd.flat[i] = (loss_at(h) - loss_at(-h)) / (2 * h)
        np.testing.assert_allclose(grads[which], g_fd, rtol=1e-5, atol=1e-7)


def test_training_lowers_the_loss(rng):
    cfg = ContrastiveConfig(
        temperature=0.5,
        batch_size=8,
        epochs=30,
        adam=AdamConfig(learning_rate=1e-2),
        augmentation=AugmentConfig(),
        seed=11,
    )
    _, trace = train_encoder(_frames(rng, 32), cfg)
    assert len(trace) == 30
    assert trace[-1] < trace[0]


def test_zero_learning_rate_freezes_the_trace(rng):
    cfg = ContrastiveConfig(
        batch_size=8,
        epochs=5,
        adam=AdamConfig(learning_rate=0.0),
        seed=2,
    )
    _, trace = train_encoder(_frames(rng, 16), cfg)
    assert all(v == trace[0] for v in trace)


def test_same_seed_reproduces_run_bit_for_bit(rng):
    frames = _frames(rng, 20)
    cfg = ContrastiveConfig(batch_size=8, epochs=4, seed=13)
    p1, t1 = train_encoder(frames, cfg)
    p2, t2 = train_encoder(frames, cfg)
    assert t1 == t2
    for a, b in zip(_params_to_list(p1), _params_to_list(p2)):
        np.testing.assert_array_equal(a, b)


def test_different_seed_changes_the_run(rng):
    frames = _frames(rng, 20)
    t1 = train_encoder(frames, ContrastiveConfig(batch_size=8, epochs=3, seed=1))[1]
    t2 = train_encoder(frames, ContrastiveConfig(batch_size=8, epochs=3, seed=2))[1]
    assert t1 != t2


def test_warm_start_keeps_architecture(rng):
    frames = _frames(rng, 16)
    cfg = ContrastiveConfig(batch_size=8, epochs=2, seed=4)
    first, _ = train_encoder(frames, cfg)
    second, _ = train_encoder(frames, cfg, params=first)
    assert second.embed_dim == first.embed_dim
    assert [l.weights.shape for l in second.encoder_layers] == [
        l.weights.shape for l in first.encoder_layers
    ]


def test_too_few_frames_rejected(rng):
    cfg = ContrastiveConfig(batch_size=8, epochs=1)
    with pytest.raises(DegenerateInputError, match="at least 16"):
        train_encoder(_frames(rng, 15), cfg)


def test_exploding_step_reports_divergence(rng):
    cfg = ContrastiveConfig(
        batch_size=8,
        epochs=3,
        adam=AdamConfig(learning_rate=1e308),
        seed=0,
    )
    with np.errstate(all="ignore"), pytest.raises(DivergenceError, match="epoch"):
        train_encoder(_frames(rng, 16), cfg)
