import numpy as np
import pytest

from framewatch.errors import ContractViolationError, TrainingError
from framewatch.nn import (Activation, AdamState, DenseLayer, adam_step,
                           dense_backward, dense_forward, finite_diff_grad,
                           init_dense)
from framewatch.rng import RngStream

from _helpers import max_rel_err, pack, unpack


def test_dense_forward_identity():
    layer = DenseLayer(np.eye(3), np.zeros(3), Activation.IDENTITY)
    assert np.array_equal(dense_forward(layer, np.array([1.0, 2.0, 3.0])),
                          np.array([1.0, 2.0, 3.0]))


def test_dense_forward_affine_scalar():
    layer = DenseLayer(np.array([[2.0]]), np.array([1.0]), Activation.IDENTITY)
    assert dense_forward(layer, np.array([3.0]))[0] == 7.0


def test_dense_forward_matches_loop_oracle():
    rng = RngStream(17)
    layer = init_dense(rng, 4, 3, Activation.TANH)
    x = rng.gaussian(4)
    got = dense_forward(layer, x)
    for i in range(3):
        acc = layer.bias[i]
        for j in range(4):
            acc += layer.weights[i, j] * x[j]
        assert got[i] == pytest.approx(np.tanh(acc), abs=1e-15)


def test_dense_forward_shape_mismatch():
    layer = DenseLayer(np.eye(3), np.zeros(3))
    with pytest.raises(ContractViolationError):
        dense_forward(layer, np.zeros(4))


def test_dense_backward_linear_outer_product():
    rng = RngStream(2)
    layer = init_dense(rng, 5, 3, Activation.IDENTITY)
    x = rng.gaussian(5)
    g = rng.gaussian(3)
    _, gw, gb = dense_backward(layer, x, g)
    assert np.allclose(gw, np.outer(g, x))
    assert np.allclose(gb, g)


def test_dense_backward_zero_grad():
    layer = init_dense(RngStream(4), 4, 4, Activation.LEAKY_RELU)
    gin, gw, gb = dense_backward(layer, np.ones(4), np.zeros(4))
    assert not gin.any() and not gw.any() and not gb.any()


@pytest.mark.parametrize("act", list(Activation))
def test_dense_backward_matches_finite_diff(act):
    # loss = sum of outputs; grads over weights, bias and input
    rng = RngStream(hash(act.value) & 0xFFFF)
    layer = init_dense(rng, 4, 3, act)
    x = rng.gaussian(4)

    gin, gw, gb = dense_backward(layer, x, np.ones(3))

    shapes = [layer.weights.shape, layer.bias.shape, x.shape]
    theta = pack([layer.weights, layer.bias, x])

    def f(v):
        w, b, xi = unpack(v, shapes)
        return float(dense_forward(DenseLayer(w, b, act), xi).sum())

    fd = finite_diff_grad(f, theta, 1e-5)
    assert max_rel_err(pack([gw, gb, gin]), fd) < 1e-4


def test_gradient_check_many_random_layers():
    # spec invariant: >= 100 random (layer, input) draws
    rng = RngStream(99)
    acts = list(Activation)
    for i in range(100):
        in_dim = 2 + int(rng.integers(0, 4, 1)[0])
        out_dim = 2 + int(rng.integers(0, 4, 1)[0])
        act = acts[i % len(acts)]
        layer = init_dense(rng, in_dim, out_dim, act)
        x = rng.gaussian(in_dim)
        g = rng.gaussian(out_dim)
        gin, gw, gb = dense_backward(layer, x, g)
        shapes = [layer.weights.shape, layer.bias.shape, x.shape]

        def f(v):
            w, b, xi = unpack(v, shapes)
            return float(dense_forward(DenseLayer(w, b, act), xi) @ g)

        fd = finite_diff_grad(f, pack([layer.weights, layer.bias, x]), 1e-5)
        assert max_rel_err(pack([gw, gb, gin]), fd) < 1e-4


# ---------------------------------------------------------------------------
# Adam

def test_adam_zero_gradient_is_identity():
    params = [np.array([1.0, -2.0]), np.array([[3.0]])]
    state = AdamState.zeros_like(params)
    for _ in range(5):
        new_params, state = adam_step(params, [np.zeros(2), np.zeros((1, 1))],
                                      state)
        assert all(np.array_equal(a, b) for a, b in zip(params, new_params))
        params = new_params


def test_adam_first_step_hand_oracle():
    # m_hat = g, v_hat = g^2, delta = lr * g / (|g| + eps)
    g = 0.25
    lr = 0.01
    eps = 1e-8
    (new,), _ = adam_step([np.array([1.0])], [np.array([g])],
                          AdamState.zeros_like([np.array([1.0])]),
                          lr=lr, epsilon=eps)
    expected = 1.0 - lr * g / (abs(g) + eps)
    assert new[0] == pytest.approx(expected, abs=1e-15)


def test_adam_constant_gradient_monotone():
    params = [np.array([5.0])]
    state = AdamState.zeros_like(params)
    values = [5.0]
    for _ in range(100):
        params, state = adam_step(params, [np.array([1.0])], state, lr=0.01)
        values.append(float(params[0][0]))
    assert all(b < a for a, b in zip(values, values[1:]))
    assert state.step_count == 100


def test_adam_nonfinite_gradient_reports_step():
    params = [np.array([1.0])]
    state = AdamState.zeros_like(params)
    params, state = adam_step(params, [np.array([1.0])], state)
    with pytest.raises(TrainingError, match="step 2"):
        adam_step(params, [np.array([np.nan])], state)


def test_adam_rejects_bad_betas():
    params = [np.array([1.0])]
    with pytest.raises(ContractViolationError):
        adam_step(params, [np.array([0.0])], AdamState.zeros_like(params),
                  beta1=1.0)


# ---------------------------------------------------------------------------
# finite differences

def test_finite_diff_square():
    grad = finite_diff_grad(lambda x: float(x[0] * x[0]), np.array([3.0]), 1e-5)
    assert grad[0] == pytest.approx(6.0, abs=1e-6)


def test_finite_diff_constant():
    grad = finite_diff_grad(lambda x: 1.5, np.arange(4.0), 1e-5)
    assert not grad.any()


def test_finite_diff_nonfinite_names_component():
    def f(x):
        return float("nan") if x[1] > 0.5 else 0.0

    with pytest.raises(ContractViolationError, match="component 1"):
        finite_diff_grad(f, np.array([0.0, 0.5]), 1e-2)
