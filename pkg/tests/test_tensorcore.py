import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from latentwave.tensorcore import AdamW, Tape, Tensor, box_muller, cosine_lr, make_rng, ops
from latentwave.tensorcore import fft as F
from latentwave.tensorcore.gradcheck import check_gradients, numerical_gradient
from latentwave.tensorcore.optim import OptimizerState, adamw_step
from latentwave.tensorcore.serialize import load_tensor, read_tensor, save_tensor, write_tensor

TOL = 1e-4


def leaf(rng, *shape, positive=False):
    x = rng.standard_normal(shape)
    if positive:
        x = np.abs(x) + 0.5
    return Tensor(x, requires_grad=True)


# --- gradients of primitives -------------------------------------------------

UNARY = {
    "exp": (ops.exp, False),
    "log": (ops.log, True),
    "sqrt": (ops.sqrt, True),
    "sin": (ops.sin, False),
    "cos": (ops.cos, False),
    "tanh": (ops.tanh, False),
    "gelu": (ops.gelu, False),
    "power": (lambda a: ops.power(a, 3.0), False),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name, rng):
    fn, positive = UNARY[name]
    x = leaf(rng, 3, 4, positive=positive)
    w = rng.standard_normal((3, 4))
    assert check_gradients(lambda: ops.tsum(fn(x) * w), [x]) < TOL


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
def test_binary_gradients_with_broadcast(op, rng):
    a = leaf(rng, 3, 4)
    b = leaf(rng, 1, 4, positive=True)
    fn = getattr(ops, op)
    w = rng.standard_normal((3, 4))
    assert check_gradients(lambda: ops.tsum(fn(a, b) * w), [a, b]) < TOL


def test_reductions_and_shape_ops(rng):
    x = leaf(rng, 2, 3, 4)
    w = rng.standard_normal((3, 2))

    def f():
        y = ops.transpose(ops.reshape(x, (6, 4)), (1, 0))
        s = ops.mean(y, axis=0, keepdims=True)[:, :3] + ops.reshape(ops.tsum(x, axis=(0, 2)), (1, 3))
        return ops.tsum(s * w[:, 0])

    assert check_gradients(f, [x]) < TOL


def test_concat_broadcast_einsum(rng):
    a, b = leaf(rng, 2, 3), leaf(rng, 1, 3)
    m = leaf(rng, 3, 5)

    def f():
        c = ops.concat([a, ops.broadcast_to(b, (2, 3))], axis=0)
        return ops.tsum(ops.einsum("ij,jk->ik", c, m) ** 2)

    assert check_gradients(f, [a, b, m]) < TOL


def test_complex_fft_chain(rng):
    x = leaf(rng, 4, 6)

    def f():
        X = ops.fft(x, [0, 1])
        Y = ops.ifft(X * (1.0 + 0.5j), [1])
        return ops.tsum(ops.abs2(Y)) + ops.tsum(ops.real(X) * ops.imag(X))

    assert check_gradients(f, [x]) < TOL


def test_non_scalar_loss_rejected(rng):
    x = leaf(rng, 3)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(ValueError):
        tape.gradient(y, [x])


def test_unused_leaf_gets_zero(rng):
    x, z = leaf(rng, 3), leaf(rng, 2)
    with Tape() as tape:
        y = ops.tsum(x * x)
    gx, gz = tape.gradient(y, [x, z])
    np.testing.assert_allclose(gx, 2 * x.data)
    assert not gz.any()


def test_no_recording_without_tape(rng):
    x = leaf(rng, 3)
    y = x * 2.0
    assert not y.requires_grad


def test_numerical_gradient_restores_parameter(rng):
    x = leaf(rng, 5)
    before = x.data.copy()
    numerical_gradient(lambda: ops.tsum(x ** 2), x)
    np.testing.assert_array_equal(x.data, before)


# --- FFT ---------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 7, 8, 12, 16, 24, 31])
def test_fft_matches_direct_dft(n, rng):
    x = rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))
    np.testing.assert_allclose(F.fft_along(x, [-1]), F.dft_direct(x), atol=1e-10 * n)


@given(st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_fft_roundtrip_and_parseval(n, seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((2, n)) + 1j * r.standard_normal((2, n))
    X = F.fft_along(x, [-1])
    assert np.max(np.abs(F.ifft_along(X, [-1]) - x)) < 1e-10
    lhs = np.sum(np.abs(x) ** 2)
    assert abs(lhs - np.sum(np.abs(X) ** 2) / n) < 1e-10 * max(1.0, lhs)


def test_multiaxis_fft_matches_numpy(rng):
    x = rng.standard_normal((4, 6, 5))
    np.testing.assert_allclose(F.fft_along(x, [0, 2]), np.fft.fftn(x, axes=(0, 2)), atol=1e-10)


def test_fft_rejects_bad_axes(rng):
    with pytest.raises(IndexError):
        F.fft_along(rng.standard_normal(4), [3])


def test_rfft_freqs():
    np.testing.assert_allclose(F.rfft_freqs(8, 0.25), np.fft.rfftfreq(8, 0.25))


# --- optimizer -----------------------------------------------------------------

def test_cosine_schedule_endpoints():
    assert cosine_lr(0, 10, 1e-3) == pytest.approx(1e-3)
    assert cosine_lr(10, 10, 1e-3, 1e-5) == pytest.approx(1e-5)
    assert cosine_lr(5, 10, 2.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cosine_lr(11, 10, 1.0)


def test_adamw_first_step_is_signed_lr():
    # with bias correction the first update is lr * g / (|g| + eps)
    p = np.array([1.0, -2.0, 0.5])
    g = np.array([0.3, -4.0, 0.0])
    state = OptimizerState.for_params([p])
    adamw_step(state, [p], [g], 0.1)
    np.testing.assert_allclose(p, [0.9, -1.9, 0.5], atol=1e-7)


def test_adamw_decoupled_decay():
    p = np.array([2.0])
    state = OptimizerState.for_params([p], weight_decay=0.5)
    adamw_step(state, [p], [np.zeros(1)], 0.1)
    np.testing.assert_allclose(p, [2.0 * (1 - 0.05)])


def test_adamw_minimizes_quadratic():
    x = Tensor(np.array([3.0, -2.0]), True)
    opt = AdamW([x], lr=0.1)
    for k in range(300):
        with Tape() as tape:
            loss = ops.tsum((x - 1.0) ** 2)
        opt.step(tape.gradient(loss, [x]), cosine_lr(k, 300, 0.1))
    np.testing.assert_allclose(x.data, [1.0, 1.0], atol=1e-3)


# --- rng and serialization -------------------------------------------------------

def test_streams_are_reproducible_and_distinct():
    a = make_rng(7, 1).random(4)
    np.testing.assert_array_equal(a, make_rng(7, 1).random(4))
    assert not np.allclose(a, make_rng(7, 2).random(4))


def test_box_muller_moments():
    z = box_muller(make_rng(0), (200001,))
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1.0) < 0.01
    assert box_muller(make_rng(0), (3, 5)).shape == (3, 5)


@given(st.lists(st.integers(1, 4), min_size=0, max_size=3))
def test_tensor_serialization_roundtrip(shape):
    x = np.arange(math.prod(shape), dtype=np.float64).reshape(shape) * 0.5  # exact in f32
    buf = io.BytesIO()
    write_tensor(buf, x)
    buf.seek(0)
    np.testing.assert_array_equal(read_tensor(buf), x)


def test_save_load_tensor(tmp_path, rng):
    x = rng.standard_normal((2, 3))
    save_tensor(tmp_path / "x.bin", x)
    # payloads are single precision
    np.testing.assert_allclose(load_tensor(tmp_path / "x.bin"), x, rtol=1e-7)
