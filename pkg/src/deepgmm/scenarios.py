"""Synthetic benchmark scenarios: data generation, standardization, scoring.

The low-dimensional generator draws Z uniform on [-3,3]^2, a shared
confounder e ~ N(0,1), and small disturbances gamma, delta ~ N(0, 0.1)
(variance 0.1), then sets X = Z_1 + e + gamma and Y = g0(X) + e + delta.
Only the first instrument coordinate is relevant; e correlates X with the
outcome residual, so direct regression is biased.

All randomness flows through numpy's PCG64 generator (normals via the
ziggurat sampler behind Generator.standard_normal), with per-split
sub-seeds derived through SeedSequence.spawn, so identical configs give
bit-identical datasets on one platform.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = [
    "Dataset",
    "ScenarioConfig",
    "TrueResponse",
    "YTransform",
    "G0_NAMES",
    "true_g0",
    "generate_lowdim",
    "standardize_y",
    "mse",
    "generate_highdim_embedding",
    "export_csv",
]

G0_NAMES = ("sin", "step", "abs", "linear")


def true_g0(name: str, x: np.ndarray) -> np.ndarray:
    """Elementwise true response. step is the indicator of x >= 0 (closed at zero)."""
    x = np.asarray(x, dtype=np.float64)
    if name == "sin":
        return np.sin(x)
    if name == "step":
        return (x >= 0.0).astype(np.float64)
    if name == "abs":
        return np.abs(x)
    if name == "linear":
        return x.copy()
    raise ValueError(f"unknown response name {name!r}; expected one of {G0_NAMES}")


@dataclass(frozen=True)
class TrueResponse:
    """Named true response, reported in (possibly standardized) outcome units."""

    name: str
    shift: float = 0.0
    scale: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise ValueError(f"true response is defined on scalar treatments, got shape {x.shape}")
            x = x[:, 0]
        return (true_g0(self.name, x) - self.shift) / self.scale


@dataclass(frozen=True)
class Dataset:
    """Paired samples (X, Z, Y), optionally carrying the true response."""

    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    g0: TrueResponse | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", np.atleast_2d(np.asarray(self.x, dtype=np.float64)))
        object.__setattr__(self, "z", np.atleast_2d(np.asarray(self.z, dtype=np.float64)))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))
        if self.x.shape[0] != self.z.shape[0] or self.x.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"row counts disagree: x {self.x.shape}, z {self.z.shape}, y {self.y.shape}"
            )
        if self.y.ndim != 1:
            raise ValueError(f"y must be a vector, got shape {self.y.shape}")
        for name, arr in (("x", self.x), ("z", self.z), ("y", self.y)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.x[idx], self.z[idx], self.y[idx], self.g0)


@dataclass(frozen=True)
class ScenarioConfig:
    g0_name: str
    n: int = 2000
    seed: int = 0
    noise_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.g0_name not in G0_NAMES:
            raise ValueError(f"g0_name must be one of {G0_NAMES}, got {self.g0_name!r}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be non-negative, got {self.noise_scale}")


def _draw_split(name: str, child_seed: np.random.SeedSequence, cfg: ScenarioConfig) -> Dataset:
    rng = np.random.default_rng(child_seed)
    n, s = cfg.n, cfg.noise_scale
    # draw order is fixed: z, e, gamma, delta
    z = rng.uniform(-3.0, 3.0, size=(n, 2))
    e = s * rng.standard_normal(n)
    gamma = s * np.sqrt(0.1) * rng.standard_normal(n)
    delta = s * np.sqrt(0.1) * rng.standard_normal(n)
    x = z[:, 0] + e + gamma
    y = true_g0(cfg.g0_name, x) + e + delta
    return Dataset(x[:, None], z, y, TrueResponse(cfg.g0_name))


def generate_lowdim(cfg: ScenarioConfig) -> tuple[Dataset, Dataset, Dataset]:
    """Three independent draws (train, val, test) from disjoint sub-seeds."""
    children = np.random.SeedSequence(cfg.seed).spawn(3)
    return tuple(
        _draw_split(split, child, cfg)
        for split, child in zip(("train", "val", "test"), children)
    )


@dataclass(frozen=True)
class YTransform:
    """Shift/scale fitted on training outcomes; invertible for reporting."""

    shift: float
    scale: float

    def apply(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.shift) / self.scale

    def invert(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=np.float64) * self.scale + self.shift


def standardize_y(
    train: Dataset, val: Dataset, test: Dataset
) -> tuple[tuple[Dataset, Dataset, Dataset], YTransform]:
    """Remove the train-split mean of Y and scale to unit (population) variance.

    Statistics come from the train split only and are applied to all three
    splits; the attached true response is rescaled the same way so scoring
    stays in standardized outcome units.
    """
    mu = float(np.mean(train.y))
    sd = float(np.std(train.y))  # population variance, ddof=0
    if sd == 0.0:
        raise ValueError("train outcomes have zero variance; cannot standardize")
    tf = YTransform(mu, sd)

    def conv(d: Dataset) -> Dataset:
        g0 = None
        if d.g0 is not None:
            g0 = TrueResponse(d.g0.name, shift=d.g0.shift + mu * d.g0.scale, scale=d.g0.scale * sd)
        return Dataset(d.x, d.z, tf.apply(d.y), g0)

    return (conv(train), conv(val), conv(test)), tf


def mse(g_hat: Callable[[np.ndarray], np.ndarray] | np.ndarray, test: Dataset) -> float:
    """Mean squared error of a fitted response against the true one.

    ``g_hat`` is either a function of the treatment matrix or a
    precomputed evaluation vector aligned with the test rows. Both sides
    are in the dataset's (standardized) outcome units.
    """
    if test.g0 is None:
        raise ValueError("test dataset carries no true response; cannot score")
    truth = test.g0(test.x)
    pred = g_hat(test.x) if callable(g_hat) else np.asarray(g_hat, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match test rows {truth.shape}")
    return float(np.mean((pred - truth) ** 2))


def _digit_code(x: np.ndarray) -> np.ndarray:
    """round(min(max(1.5x + 5, 0), 9)): maps reals to an integer in 0..9."""
    return np.round(np.minimum(np.maximum(1.5 * x + 5.0, 0.0), 9.0))


def generate_highdim_embedding(
    base: Dataset, dim: int, seed: int, noise_seed: int = 0
) -> Dataset:
    """Replace Z with a seeded random affine embedding of its coded first coordinate.

    The code pi(z1) = round(min(max(1.5 z1 + 5, 0), 9)) coarsens the
    relevant instrument to ten levels; the embedding sends it to
    w*pi(z1) + b + noise in ``dim`` dimensions. The map (w, b) depends
    only on ``seed`` so multiple splits share one embedding; per-split
    noise is drawn from (seed, noise_seed).
    """
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    map_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    w = map_rng.standard_normal(dim) / np.sqrt(dim)
    b = map_rng.standard_normal(dim)
    noise_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, noise_seed)))
    code = _digit_code(base.z[:, 0])
    z_new = code[:, None] * w[None, :] + b[None, :] + 0.1 * noise_rng.standard_normal((base.n, dim))
    return Dataset(base.x, z_new, base.y, base.g0)


def export_csv(dataset: Dataset, path: str) -> None:
    """Write the dataset as CSV with columns z_1..z_d, x_1..x_d, y."""
    d_z, d_x = dataset.z.shape[1], dataset.x.shape[1]
    header = [f"z_{j+1}" for j in range(d_z)] + [f"x_{j+1}" for j in range(d_x)] + ["y"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(v) for v in dataset.z[i]] + [repr(v) for v in dataset.x[i]]
            row.append(repr(dataset.y[i]))
            writer.writerow(row)
