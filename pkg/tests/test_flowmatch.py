import numpy as np
import pytest
from hypothesis import given, strategies as st

from latentwave.flowmatch import (FlowConfig, FlowDraws, clean_to_velocity, euler_sample, fm_loss, sample_path,
                                  target_velocity)
from latentwave.tensorcore import Tensor

TIMES = [0.0, 0.25, 0.5, 0.9, 0.99]


@pytest.mark.parametrize("t", TIMES)
def test_clean_prediction_identity(t, rng):
    z0, z1 = rng.standard_normal((2, 4, 1, 3, 2, 2))
    zt = sample_path(z0, z1, t)
    np.testing.assert_allclose(clean_to_velocity(z1, zt, t), z1 - z0, atol=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_identity_with_per_row_times(seed):
    r = np.random.default_rng(seed)
    z0, z1 = r.standard_normal((2, 5, 3))
    t = r.uniform(0, 0.99, 5)
    v = clean_to_velocity(z1, sample_path(z0, z1, t), t)
    assert np.max(np.abs(v - target_velocity(z0, z1))) < 1e-10


def test_clip_at_t_one(rng):
    z = rng.standard_normal(3)
    v = clean_to_velocity(z + 1.0, z, 1.0, 1e-3)
    np.testing.assert_allclose(v, 1e3)


def test_tensor_inputs(rng):
    z0, z1 = rng.standard_normal((2, 2, 3))
    zt = sample_path(z0, z1, 0.3)
    v = clean_to_velocity(Tensor(z1), zt, 0.3)
    assert isinstance(v, Tensor)
    np.testing.assert_allclose(v.data, z1 - z0, atol=1e-12)


def test_path_endpoints_and_errors(rng):
    z0, z1 = rng.standard_normal((2, 3))
    np.testing.assert_array_equal(sample_path(z0, z1, 0.0), z0)
    np.testing.assert_array_equal(sample_path(z0, z1, 1.0), z1)
    with pytest.raises(ValueError):
        sample_path(z0, z1, 1.5)
    with pytest.raises(ValueError):
        sample_path(z0, z1[:2], 0.5)


def test_oracle_loss_is_zero(rng):
    z1 = rng.standard_normal((6, 1, 2, 2))
    draws = FlowDraws.draw(np.random.default_rng(0), z1.shape)
    loss = fm_loss(z1, np.zeros((6, 3)), lambda zt, t, c: Tensor(z1), draws)
    assert loss.item() < 1e-20


@pytest.mark.parametrize("steps", [1, 7, 50])
def test_euler_with_constant_predictor_reaches_target(steps, rng):
    a = rng.standard_normal((3, 4))
    z = euler_sample(lambda zt, t, c: Tensor(np.broadcast_to(a, zt.shape)), np.zeros((3, 1)), (3, 4),
                     FlowConfig(steps), rng=np.random.default_rng(1))
    np.testing.assert_allclose(z, a, atol=1e-12)


def test_euler_with_oracle_transports_exactly(rng):
    z0, z1 = rng.standard_normal((2, 5, 2))
    z = euler_sample(lambda zt, t, c: Tensor(z1), np.zeros((5, 1)), (5, 2), FlowConfig(50), z0=z0)
    np.testing.assert_allclose(z, z1, atol=1e-12)


def test_euler_is_reproducible():
    f = lambda zt, t, c: zt * 0.5
    a = euler_sample(f, np.zeros((2, 1)), (2, 3), FlowConfig(10), rng=np.random.default_rng(3))
    b = euler_sample(f, np.zeros((2, 1)), (2, 3), FlowConfig(10), rng=np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        euler_sample(f, np.zeros((2, 1)), (2, 3), FlowConfig(10))


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(steps=0)
    with pytest.raises(ValueError):
        FlowConfig(t_clip=0.7)


def test_zero_velocity_loss_matches_monte_carlo():
    # predicting z_t means zero velocity, so the loss is E|z1 - z0|^2 per element
    r = np.random.default_rng(11)
    z1 = r.standard_normal((10000, 3)) * np.array([1.0, 2.0, 0.5])
    draws = FlowDraws.draw(np.random.default_rng(12), z1.shape)
    loss = fm_loss(z1, np.zeros((len(z1), 1)), lambda zt, t, c: zt, draws).item()
    expected = np.mean(1.0 + np.array([1.0, 4.0, 0.25]))
    assert loss == pytest.approx(expected, rel=0.03)


def test_loss_gradient_with_frozen_draws(rng):
    from latentwave.tensorcore import ops
    from latentwave.tensorcore.gradcheck import check_gradients
    W = Tensor(0.3 * rng.standard_normal((4, 4)), True)
    b = Tensor(0.1 * rng.standard_normal(4), True)
    z1 = rng.standard_normal((6, 4))
    cond = rng.standard_normal((6, 2))
    draws = FlowDraws.draw(np.random.default_rng(2), z1.shape)
    predict = lambda zt, t, c: ops.tanh(ops.einsum("bi,ij->bj", zt, W) + b) + zt
    assert check_gradients(lambda: fm_loss(z1, cond, predict, draws), [W, b]) < 1e-4


def test_single_step_is_one_velocity_evaluation(rng):
    z0 = rng.standard_normal((2, 3))
    f = lambda zt, t, c: zt * 0.5 + 1.0
    z = euler_sample(f, np.zeros((2, 1)), (2, 3), FlowConfig(1), z0=z0)
    np.testing.assert_allclose(z, z0 + clean_to_velocity(z0 * 0.5 + 1.0, z0, 0.0), atol=1e-15)
