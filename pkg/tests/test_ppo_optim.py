import numpy as np
import pytest

from src.ppo.networks import DimensionError
from src.ppo.optim import adam_step, init_adam


def test_zero_gradient_leaves_params():
    params = {"w": np.array([[1.0, -2.0]]), "b": np.array([0.5])}
    new, state = adam_step(params, {k: np.zeros_like(v) for k, v in params.items()}, init_adam(params), 1e-3)
    for name in params:
        np.testing.assert_array_equal(new[name], params[name])
    assert state.step == 1


def test_first_step_moves_by_lr_times_sign():
    params = {"w": np.zeros((3, 2))}
    g = np.array([[0.3, -7.0], [1e-3, -2.5], [40.0, 0.02]])
    new, _ = adam_step(params, {"w": g}, init_adam(params), 0.01)
    np.testing.assert_allclose(new["w"], -0.01 * np.sign(g), rtol=1e-4)


def test_three_step_trace_with_unit_gradient():
    params = {"x": np.array([1.0])}
    state = init_adam(params)
    lr = 0.1
    for _ in range(3):
        params, state = adam_step(params, {"x": np.array([1.0])}, state, lr)
    # m_t = 1 - 0.9^t and v_t = 1 - 0.999^t, so every bias-corrected step is lr / (1 + eps)
    assert state.m["x"][0] == pytest.approx(0.271)
    assert state.v["x"][0] == pytest.approx(0.002997001)
    assert params["x"][0] == pytest.approx(1.0 - 3 * lr / (1 + 1e-8), rel=1e-12)


def test_update_is_elementwise():
    rng = np.random.default_rng(0)
    params = {"a": rng.standard_normal(4), "b": rng.standard_normal(3)}
    g_a = rng.standard_normal(4)
    state = init_adam(params)
    first, _ = adam_step(params, {"a": g_a, "b": rng.standard_normal(3)}, state, 0.01)
    second, _ = adam_step(params, {"a": g_a, "b": rng.standard_normal(3)}, state, 0.01)
    np.testing.assert_array_equal(first["a"], second["a"])


def test_inputs_are_not_modified():
    params = {"w": np.ones(2)}
    state = init_adam(params)
    adam_step(params, {"w": np.ones(2)}, state, 0.1)
    np.testing.assert_array_equal(params["w"], np.ones(2))
    assert state.step == 0
    np.testing.assert_array_equal(state.m["w"], np.zeros(2))


def test_shape_mismatch():
    params = {"w": np.ones(2)}
    with pytest.raises(DimensionError):
        adam_step(params, {"w": np.ones(3)}, init_adam(params), 0.1)
    with pytest.raises(DimensionError):
        adam_step(params, {}, init_adam(params), 0.1)
