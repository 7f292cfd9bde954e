"""Flat-vector first-order optimizers: SGD, Adam, and optimistic Adam.

OAdam keeps ordinary Adam moment estimates but applies a lookahead
update: twice the current bias-corrected direction minus the direction
applied at the previous step (zero on the first step). The lookahead is
what stabilizes smooth two-player games where plain simultaneous descent
spirals.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["OptimState", "NonFiniteGradient", "sgd", "adam", "oadam", "step"]

_KINDS = ("sgd", "adam", "oadam")


class NonFiniteGradient(RuntimeError):
    """Raised when a gradient contains NaN/inf; signals a diverged run."""

    def __init__(self, step_index: int):
        super().__init__(f"non-finite gradient at optimizer step {step_index}")
        self.step_index = step_index


@dataclass
class OptimState:
    kind: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    prev_update: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name, b in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {b}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


def sgd(lr: float) -> OptimState:
    return OptimState("sgd", lr)


def adam(lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> OptimState:
    return OptimState("adam", lr, beta1, beta2, eps)


def oadam(lr: float, beta1: float = 0.5, beta2: float = 0.9, eps: float = 1e-8) -> OptimState:
    # low beta1 is the usual choice for adversarial objectives
    return OptimState("oadam", lr, beta1, beta2, eps)


def step(
    state: OptimState,
    params: np.ndarray,
    grad: np.ndarray,
    direction: str = "minimize",
) -> tuple[np.ndarray, OptimState]:
    """One optimizer step; returns (new params, new state).

    ``direction="maximize"`` negates the gradient before the update, so a
    maximize step with gradient g matches a minimize step with -g
    state-for-state.
    """
    if direction not in ("minimize", "maximize"):
        raise ValueError(f"direction must be 'minimize' or 'maximize', got {direction!r}")
    params = np.asarray(params, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != params.shape:
        raise ValueError(f"grad shape {g.shape} does not match params shape {params.shape}")
    t = state.step_count + 1
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient(t)
    if direction == "maximize":
        g = -g

    if state.kind == "sgd":
        return params - state.lr * g, replace(state, step_count=t)

    m = (np.zeros_like(params) if state.m is None else state.m) * state.beta1 + (1 - state.beta1) * g
    v = (np.zeros_like(params) if state.v is None else state.v) * state.beta2 + (1 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    if state.kind == "adam":
        return params - update, replace(state, step_count=t, m=m, v=v)

    prev = np.zeros_like(params) if state.prev_update is None else state.prev_update
    new_params = params - (2.0 * update - prev)
    return new_params, replace(state, step_count=t, m=m, v=v, prev_update=update)
