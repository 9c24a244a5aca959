import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scopeq import AdamConfig, adam_init, adam_step

from oracles import adam_scalar_sequence


def test_matches_scalar_reference_trajectory():
    grads = [0.3, -1.2, 0.05, 0.9, -0.4, 0.0, 2.0, -0.7, 0.1, 0.6]
    cfg = AdamConfig(learning_rate=0.01)
    state = adam_init([np.array([1.5])])
    got = []
    for g in grads:
        state = adam_step(state, [np.array([g])], cfg)
        got.append(float(state.params[0][0]))
    want = adam_scalar_sequence(1.5, grads, lr=0.01)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)


def test_first_step_magnitude_is_learning_rate():
    # With zeroed moments, bias correction makes |dx| = lr * |g| / (|g| + eps).
    cfg = AdamConfig(learning_rate=0.25)
    state = adam_init([np.array([0.0, 0.0])])
    state = adam_step(state, [np.array([3.0, -0.001])], cfg)
    dx = state.params[0]
    assert dx[0] == pytest.approx(-0.25, rel=1e-6)
    assert dx[1] == pytest.approx(0.25, rel=1e-4)


def test_updates_every_array_and_keeps_shapes():
    cfg = AdamConfig()
    params = [np.ones((3, 2)), np.zeros(4)]
    state = adam_init(params)
    grads = [np.full((3, 2), 0.5), np.arange(4.0)]
    out = adam_step(state, grads, cfg)
    assert [p.shape for p in out.params] == [(3, 2), (4,)]
    assert out.t == 1
    assert np.all(out.params[0] < 1.0)
    # Zero gradient leaves the first coordinate of the second array alone.
    assert out.params[1][0] == 0.0
    assert np.all(out.params[1][1:] < 0.0)


def test_functional_update_leaves_input_state_untouched():
    cfg = AdamConfig()
    state = adam_init([np.array([2.0])])
    before = state.params[0].copy()
    adam_step(state, [np.array([1.0])], cfg)
    np.testing.assert_array_equal(state.params[0], before)
    assert state.t == 0


def test_gradient_count_mismatch_rejected():
    state = adam_init([np.zeros(2), np.zeros(2)])
    with pytest.raises(ValueError, match="1 grads for 2 params"):
        adam_step(state, [np.zeros(2)], AdamConfig())


@given(
    magnitude=st.floats(min_value=1e-6, max_value=10),
    negative=st.booleans(),
    steps=st.integers(min_value=1, max_value=20),
)
def test_descends_on_constant_gradient(magnitude, negative, steps):
    # A constant nonzero gradient must move the parameter strictly against it.
    g = -magnitude if negative else magnitude
    cfg = AdamConfig(learning_rate=0.1)
    state = adam_init([np.array([0.0])])
    for _ in range(steps):
        state = adam_step(state, [np.array([g])], cfg)
    moved = float(state.params[0][0])
    assert moved * g < 0.0
