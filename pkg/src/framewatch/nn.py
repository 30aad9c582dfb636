"""Dense linear-algebra kernels with hand-derived gradients.

Everything is float64 and pure: forward passes never mutate layers, and
the Adam update returns fresh arrays.  Gradients are derived per layer
type rather than traced, which keeps them checkable against central
finite differences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolationError, TrainingError
from .rng import RngStream

LEAKY_SLOPE = 0.01


class Activation(enum.Enum):
    LEAKY_RELU = "leaky_relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


def _apply_activation(act: Activation, z: np.ndarray) -> np.ndarray:
    if act is Activation.LEAKY_RELU:
        return np.where(z >= 0.0, z, LEAKY_SLOPE * z)
    if act is Activation.TANH:
        return np.tanh(z)
    if act is Activation.SIGMOID:
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _activation_grad(act: Activation, z: np.ndarray) -> np.ndarray:
    """d activation / d pre-activation, evaluated at pre-activation z."""
    if act is Activation.LEAKY_RELU:
        return np.where(z >= 0.0, 1.0, LEAKY_SLOPE)
    if act is Activation.TANH:
        t = np.tanh(z)
        return 1.0 - t * t
    if act is Activation.SIGMOID:
        s = 1.0 / (1.0 + np.exp(-z))
        return s * (1.0 - s)
    return np.ones_like(z)


@dataclass
class DenseLayer:
    """Fully connected layer: activation(weights @ x + bias)."""

    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray     # (out_dim,)
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ContractViolationError("DenseLayer: weights must be 2-D, bias 1-D")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ContractViolationError(
                f"DenseLayer: bias length {self.bias.shape[0]} does not match "
                f"out_dim {self.weights.shape[0]}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ContractViolationError("DenseLayer: parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


def init_dense(rng: RngStream, in_dim: int, out_dim: int,
               activation: Activation) -> DenseLayer:
    """Fan-based uniform(-a, a) weight init with a = sqrt(6/(in+out)); zero bias."""
    a = math.sqrt(6.0 / (in_dim + out_dim))
    w = rng.uniform_range(-a, a, out_dim * in_dim).reshape(out_dim, in_dim)
    return DenseLayer(w, np.zeros(out_dim), activation)


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """activation(W x + b) for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.in_dim,):
        raise ContractViolationError(
            f"dense_forward: input shape {x.shape}, expected ({layer.in_dim},)")
    return _apply_activation(layer.activation, layer.weights @ x + layer.bias)


def dense_forward_batch(layer: DenseLayer, xs: np.ndarray) -> np.ndarray:
    """Row-wise forward for a (n, in_dim) batch."""
    if xs.ndim != 2 or xs.shape[1] != layer.in_dim:
        raise ContractViolationError(
            f"dense_forward_batch: input shape {xs.shape}, expected (n, {layer.in_dim})")
    return _apply_activation(layer.activation, xs @ layer.weights.T + layer.bias)


def dense_backward(layer: DenseLayer, cached_input: np.ndarray,
                   grad_output: np.ndarray):
    """Gradients of a scalar loss through the layer.

    Returns (grad_input, grad_weights, grad_bias) for the forward pass
    that consumed cached_input.
    """
    cached_input = np.asarray(cached_input, dtype=np.float64)
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if cached_input.shape != (layer.in_dim,):
        raise ContractViolationError(
            f"dense_backward: cached_input shape {cached_input.shape}, "
            f"expected ({layer.in_dim},)")
    if grad_output.shape != (layer.out_dim,):
        raise ContractViolationError(
            f"dense_backward: grad_output shape {grad_output.shape}, "
            f"expected ({layer.out_dim},)")
    z = layer.weights @ cached_input + layer.bias
    gz = grad_output * _activation_grad(layer.activation, z)
    grad_input = layer.weights.T @ gz
    grad_weights = np.outer(gz, cached_input)
    return grad_input, grad_weights, gz.copy()


def dense_backward_batch(layer: DenseLayer, cached_inputs: np.ndarray,
                         grad_outputs: np.ndarray):
    """Batch version of dense_backward; gradients are summed over rows."""
    z = cached_inputs @ layer.weights.T + layer.bias
    gz = grad_outputs * _activation_grad(layer.activation, z)
    grad_inputs = gz @ layer.weights
    grad_weights = gz.T @ cached_inputs
    grad_bias = gz.sum(axis=0)
    return grad_inputs, grad_weights, grad_bias


# ---------------------------------------------------------------------------
# Multi-layer perceptron built from DenseLayers.

@dataclass
class Mlp:
    layers: list[DenseLayer] = field(default_factory=list)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def forward(self, xs: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            xs = dense_forward_batch(layer, xs)
        return xs

    def forward_cached(self, xs: np.ndarray):
        """Forward pass keeping each layer's input for the backward pass."""
        cache = []
        for layer in self.layers:
            cache.append(xs)
            xs = dense_forward_batch(layer, xs)
        return xs, cache

    def backward(self, cache: list[np.ndarray], grad_out: np.ndarray):
        """Returns (grad_input, param_grads) with param_grads ordered as params()."""
        grads: list[np.ndarray] = []
        for layer, cached in zip(reversed(self.layers), reversed(cache)):
            grad_out, gw, gb = dense_backward_batch(layer, cached, grad_out)
            grads.append(gb)
            grads.append(gw)
        grads.reverse()
        return grad_out, grads

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != 2 * len(self.layers):
            raise ContractViolationError("set_params: wrong parameter count")
        for i, layer in enumerate(self.layers):
            layer.weights = np.asarray(params[2 * i], dtype=np.float64)
            layer.bias = np.asarray(params[2 * i + 1], dtype=np.float64)


def init_mlp(rng: RngStream, dims: Sequence[int],
             activations: Sequence[Activation]) -> Mlp:
    if len(activations) != len(dims) - 1:
        raise ContractViolationError("init_mlp: need one activation per layer")
    layers = [init_dense(rng, dims[i], dims[i + 1], activations[i])
              for i in range(len(dims) - 1)]
    return Mlp(layers)


# ---------------------------------------------------------------------------
# Adam optimizer (functional, over lists of parameter arrays).

@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params], 0)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ContractViolationError("adam_step: betas must lie in [0, 1)")
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ContractViolationError("adam_step: params/grads/state length mismatch")
    t = state.step_count + 1
    new_params, new_m, new_v = [], [], []
    for i, (p, g) in enumerate(zip(params, grads)):
        if not np.isfinite(g).all():
            raise TrainingError(f"adam_step: non-finite gradient at step {t}, "
                                f"parameter {i}")
        m = beta1 * state.first_moment[i] + (1.0 - beta1) * g
        v = beta2 * state.second_moment[i] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t)


# ---------------------------------------------------------------------------
# Finite-difference gradient estimation (the oracle for every hand-derived
# gradient in this package).

def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
                     eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function."""
    if eps <= 0.0:
        raise ContractViolationError("finite_diff_grad: eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += eps
        xm.flat[i] -= eps
        fp = f(xp)
        fm = f(xm)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ContractViolationError(
                f"finite_diff_grad: non-finite evaluation at component {i}")
        grad.flat[i] = (fp - fm) / (2.0 * eps)
    return grad
