"""Feed-forward regressor over flat parameter vectors.

Flattening order is fixed for the whole run: layers in order, each layer's
weight matrix of shape ``(fan_out, fan_in)`` in row-major order followed by
its ``fan_out`` biases. The last layer always has a single output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import WindowedDataset
from .params import DimensionError, EmptyInputError, ParamVector


class DivergenceError(ArithmeticError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite parameters after epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


_ACTIVATIONS = {
    "tanh": (np.tanh, lambda a, h: 1.0 - h * h),
    "sigmoid": (lambda a: 0.5 * (1.0 + np.tanh(0.5 * a)), lambda a, h: h * (1.0 - h)),
    "relu": (lambda a: np.maximum(a, 0.0), lambda a, h: (a > 0).astype(np.float64)),
    "identity": (lambda a: a, lambda a, h: np.ones_like(a)),
}


@dataclass(frozen=True)
class ModelArch:
    input_dim: int
    hidden_dims: tuple[int, ...] = (8,)
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("layer widths must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        widths = [self.input_dim, *self.hidden_dims, 1]
        return [(widths[k + 1], widths[k]) for k in range(len(widths) - 1)]

    @property
    def num_params(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 64
    local_epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.local_epochs < 1:
            raise ValueError("learning_rate >= 0, batch_size >= 1, local_epochs >= 1 required")


def unflatten(arch: ModelArch, params: ParamVector) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into ``(W, b)`` views per layer."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.num_params,):
        raise DimensionError(f"expected {arch.num_params} parameters, got {params.shape}")
    layers, pos = [], 0
    for fan_out, fan_in in arch.layer_shapes:
        w = params[pos : pos + fan_out * fan_in].reshape(fan_out, fan_in)
        pos += fan_out * fan_in
        b = params[pos : pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def init_model(arch: ModelArch, seed: int) -> ParamVector:
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_out, fan_in in arch.layer_shapes:
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_out * fan_in))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def _forward(arch: ModelArch, layers, x: np.ndarray):
    act, _ = _ACTIVATIONS[arch.activation]
    pre, post = [], [x]
    h = x
    for k, (w, b) in enumerate(layers):
        a = h @ w.T + b
        pre.append(a)
        h = act(a) if k < len(layers) - 1 else a
        post.append(h)
    return pre, post


def predict_batch(arch: ModelArch, params: ParamVector, inputs: np.ndarray) -> np.ndarray:
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[1] != arch.input_dim:
        raise DimensionError(f"input width {inputs.shape[1]} != {arch.input_dim}")
    with np.errstate(over="ignore", invalid="ignore"):
        _, post = _forward(arch, unflatten(arch, params), inputs)
    return post[-1][:, 0]


def predict(arch: ModelArch, params: ParamVector, x) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return float(predict_batch(arch, params, x[None, :])[0])


def quadratic_loss(pred: float, target: float) -> float:
    return (pred - target) ** 2


def loss_and_grad(
    arch: ModelArch, params: ParamVector, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, ParamVector]:
    """Mean quadratic loss over the batch and its gradient by backpropagation."""
    layers = unflatten(arch, params)
    _, dact = _ACTIVATIONS[arch.activation]
    pre, post = _forward(arch, layers, inputs)
    resid = post[-1][:, 0] - targets
    n = targets.size
    loss = float(np.mean(resid**2))
    delta = (2.0 / n) * resid[:, None]  # dL/d(output pre-activation)
    grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        grads[k] = (delta.T @ post[k], delta.sum(axis=0))
        if k > 0:
            delta = (delta @ w) * dact(pre[k - 1], post[k])
    flat = np.concatenate([np.concatenate([gw.reshape(-1), gb]) for gw, gb in grads])
    return loss, flat


def local_train(
    arch: ModelArch, params: ParamVector, data: WindowedDataset, cfg: TrainConfig
) -> ParamVector:
    """Mini-batch SGD on the quadratic loss; returns a new parameter vector."""
    if len(data) == 0:
        raise EmptyInputError("empty training split")
    theta = np.array(params, dtype=np.float64)
    if cfg.learning_rate == 0:
        return theta
    rng = np.random.default_rng(cfg.seed)
    z = len(data)
    for epoch in range(cfg.local_epochs):
        order = rng.permutation(z)
        for batch, start in enumerate(range(0, z, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                _, grad = loss_and_grad(arch, theta, data.inputs[idx], data.targets[idx])
                theta -= cfg.learning_rate * grad
            if not np.all(np.isfinite(theta)):
                raise DivergenceError(epoch, batch)
    return theta


def evaluate(arch: ModelArch, params: ParamVector, data) -> tuple[float, float]:
    """``(MAE, MSE)`` on one dataset or a sequence of datasets pooled together."""
    sets = [data] if isinstance(data, WindowedDataset) else list(data)
    inputs = [d.inputs for d in sets if len(d)]
    if not inputs:
        raise EmptyInputError("empty evaluation set")
    x = np.concatenate(inputs)
    y = np.concatenate([d.targets for d in sets if len(d)])
    with np.errstate(over="ignore", invalid="ignore"):
        err = predict_batch(arch, params, x) - y
        mae = float(np.mean(np.abs(err)))
        mse = float(np.mean(err * err))
    if np.isnan(mae):
        mae = float("inf")
    if np.isnan(mse):
        mse = float("inf")
    return mae, mse
