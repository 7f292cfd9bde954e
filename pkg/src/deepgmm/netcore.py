"""Small dense networks with hand-rolled reverse-mode gradients.

The model family is fixed: fully connected layers with leaky-ReLU hidden
activations and a single affine output unit. Parameters live in one flat
vector with a frozen layout -- for each layer in input-to-output order,
the (fan_in x fan_out) weight matrix in row-major order, then the bias
vector -- so optimizer state and saved checkpoints stay portable across
runs. Gradients are exact backprop for this family, checked against
central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["MlpSpec", "MlpParams", "init_mlp", "forward", "grad_params"]


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a scalar-output MLP.

    ``hidden_sizes`` may be empty, in which case the network is a pure
    affine map. ``leaky_slope`` must be strictly inside (0, 1) so the
    activation gradient never vanishes on negative preactivations.
    """

    input_dim: int
    hidden_sizes: tuple[int, ...] = ()
    leaky_slope: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden sizes must be positive, got {self.hidden_sizes}")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValueError(f"leaky_slope must lie in (0, 1), got {self.leaky_slope}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, 1)

    @property
    def n_params(self) -> int:
        dims = self.layer_dims
        return sum((dims[i] + 1) * dims[i + 1] for i in range(len(dims) - 1))


@dataclass
class MlpParams:
    """An MlpSpec together with its flat parameter vector."""

    spec: MlpSpec
    theta: np.ndarray

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.spec.n_params,):
            raise ValueError(
                f"theta has shape {self.theta.shape}, spec requires ({self.spec.n_params},)"
            )
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta contains non-finite entries")

    def with_theta(self, theta: np.ndarray) -> "MlpParams":
        return MlpParams(self.spec, theta)


def _layers(spec: MlpSpec, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """(W, b) views per layer into the flat vector; no copies."""
    dims = spec.layer_dims
    out, off = [], 0
    for i in range(len(dims) - 1):
        fi, fo = dims[i], dims[i + 1]
        w = flat[off : off + fi * fo].reshape(fi, fo)
        off += fi * fo
        b = flat[off : off + fo]
        off += fo
        out.append((w, b))
    return out


def init_mlp(spec: MlpSpec) -> MlpParams:
    """Seeded fan-in uniform init: W ~ U(+-sqrt(6/fan_in)), biases zero.

    The scale keeps early outputs small so downstream quadratic penalties
    do not dominate the first optimization steps. Identical seeds give
    bit-identical parameter vectors.
    """
    rng = np.random.default_rng(spec.seed)
    theta = np.zeros(spec.n_params)
    for w, b in _layers(spec, theta):
        lim = np.sqrt(6.0 / w.shape[0])
        w[:] = rng.uniform(-lim, lim, size=w.shape)
        # biases stay zero
    return MlpParams(spec, theta)


def _check_inputs(spec: MlpSpec, inputs: np.ndarray) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"expected inputs of shape (n, {spec.input_dim}), got {x.shape}")
    return x


def forward(params: MlpParams, inputs: np.ndarray) -> np.ndarray:
    """Row-wise network output as an n-vector.

    Hidden layers apply leaky ReLU elementwise; the output layer is affine.
    """
    spec = params.spec
    x = _check_inputs(spec, inputs)
    layers = _layers(spec, params.theta)
    h = x
    for w, b in layers[:-1]:
        a = h @ w + b
        h = np.where(a >= 0.0, a, spec.leaky_slope * a)
    w, b = layers[-1]
    return (h @ w + b)[:, 0]


def grad_params(params: MlpParams, inputs: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
    """Gradient of sum_i cotangent_i * forward(params, inputs)_i w.r.t. theta.

    Exact reverse-mode accumulation, returned in the flat theta layout.
    The leaky-ReLU derivative at exactly zero is taken as 1.
    """
    spec = params.spec
    x = _check_inputs(spec, inputs)
    c = np.asarray(cotangent, dtype=np.float64)
    if c.shape != (x.shape[0],):
        raise ValueError(f"cotangent has shape {c.shape}, expected ({x.shape[0]},)")

    layers = _layers(spec, params.theta)
    # forward pass, caching activations and hidden preactivations
    hs = [x]
    pre = []
    h = x
    for w, b in layers[:-1]:
        a = h @ w + b
        pre.append(a)
        h = np.where(a >= 0.0, a, spec.leaky_slope * a)
        hs.append(h)

    grad = np.zeros_like(params.theta)
    gviews = _layers(spec, grad)

    delta = c[:, None]  # d(objective)/d(layer output)
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        gw, gb = gviews[li]
        gw += hs[li].T @ delta
        gb += delta.sum(axis=0)
        if li > 0:
            dh = delta @ w.T
            a = pre[li - 1]
            delta = dh * np.where(a >= 0.0, 1.0, spec.leaky_slope)
    return grad
