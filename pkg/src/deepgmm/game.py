"""The smooth zero-sum moment game between a response net and a critic net.

The payoff is

    U(theta, tau) = mean_i f(Z_i; tau) * (Y_i - g(X_i; theta))
                  - (1/4) * mean_i f(Z_i; tau)^2 * (Y_i - g(X_i; theta_tilde))^2

where theta_tilde is a lagged copy of theta treated as a constant: the
penalty term has zero partial derivative in theta. Training plays the
game with optimistic Adam, alternating a theta (minimize) step and a tau
(maximize) step, refreshing theta_tilde to the pre-step theta at every
optimizer step. Periodic checkpoints store the critic and response nets
evaluated on validation data; those evaluation vectors (not the weights)
are what the validation surrogate needs for early stopping and model
selection.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import optim
from .netcore import MlpParams, MlpSpec, forward, grad_params, init_mlp
from .scenarios import Dataset

__all__ = [
    "GameConfig",
    "GameState",
    "CheckpointEntry",
    "CheckpointPool",
    "TrainingDiverged",
    "payoff_u",
    "grads",
    "train",
    "psi_hat",
    "early_stop_select",
    "save_pool",
    "load_pool",
]

ZERO_RUN_ID = "__zero__"
POOL_FORMAT_VERSION = "1"


class TrainingDiverged(RuntimeError):
    """A game run produced a non-finite payoff or gradient."""

    def __init__(self, run_id: str, epoch: int, detail: str):
        super().__init__(f"run {run_id!r} diverged at epoch {epoch}: {detail}")
        self.run_id = run_id
        self.epoch = epoch


@dataclass(frozen=True)
class GameConfig:
    """Hyperparameters of one game run. The critic learning rate is lambda_f * lr_g."""

    g_spec: MlpSpec
    f_spec: MlpSpec
    lr_g: float
    lambda_f: float = 5.0
    epochs: int = 300
    batch_size: int | str = "full"
    k_eval: int = 20
    ridge: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr_g <= 0 or self.lambda_f <= 0:
            raise ValueError("lr_g and lambda_f must be positive")
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if isinstance(self.batch_size, str):
            if self.batch_size != "full":
                raise ValueError(f"batch_size must be a positive integer or 'full', got {self.batch_size!r}")
        elif self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if not 1 <= self.k_eval <= self.epochs:
            raise ValueError(f"k_eval must lie in [1, epochs], got {self.k_eval}")
        if self.ridge < 0:
            raise ValueError(f"ridge must be non-negative, got {self.ridge}")

    @property
    def lr_f(self) -> float:
        return self.lambda_f * self.lr_g

    def label(self) -> str:
        """Canonical id; also the documented lexicographic tie-break key."""
        g = "x".join(map(str, self.g_spec.hidden_sizes)) or "affine"
        f = "x".join(map(str, self.f_spec.hidden_sizes)) or "affine"
        return (
            f"lr_g={self.lr_g:.6g},lambda_f={self.lambda_f:.6g},g={g},f={f},"
            f"epochs={self.epochs},batch={self.batch_size},k_eval={self.k_eval}"
        )


@dataclass
class GameState:
    """Current position of both players plus per-player optimizer state."""

    theta: MlpParams
    tau: MlpParams
    theta_tilde: MlpParams
    opt_g: optim.OptimState
    opt_f: optim.OptimState
    epoch: int = 0


@dataclass
class CheckpointEntry:
    """One saved checkpoint: validation evaluation vectors, optionally the weights."""

    run_id: str
    epoch: int
    f_on_val: np.ndarray
    g_on_val: np.ndarray
    theta: MlpParams | None = None


@dataclass
class CheckpointPool:
    """Recorded evaluation vectors across checkpoints and runs.

    Entry 0 is always the zero critic, which bounds the validation
    surrogate below by zero and keeps it well-defined before any real
    checkpoint exists. Persisted copies drop the optional weights.
    """

    n_val: int
    entries: list[CheckpointEntry] = field(default_factory=list)

    @classmethod
    def empty(cls, n_val: int) -> "CheckpointPool":
        zero = np.zeros(n_val)
        return cls(n_val, [CheckpointEntry(ZERO_RUN_ID, -1, zero, zero.copy())])

    def append(self, entry: CheckpointEntry) -> None:
        if entry.f_on_val.shape != (self.n_val,) or entry.g_on_val.shape != (self.n_val,):
            raise ValueError("checkpoint vectors must have length n_val")
        self.entries.append(entry)

    @classmethod
    def merge(cls, pools: list["CheckpointPool"]) -> "CheckpointPool":
        if not pools:
            raise ValueError("cannot merge an empty pool list")
        n_val = pools[0].n_val
        merged = cls.empty(n_val)
        for pool in pools:
            if pool.n_val != n_val:
                raise ValueError("pools disagree on n_val")
            for entry in pool.entries:
                if entry.run_id != ZERO_RUN_ID:
                    merged.append(entry)
        return merged

    def critic_matrix(self) -> np.ndarray:
        return np.stack([e.f_on_val for e in self.entries])

    def run_entries(self, run_id: str) -> list[CheckpointEntry]:
        return [e for e in self.entries if e.run_id == run_id]

    def find(self, run_id: str, epoch: int) -> CheckpointEntry:
        for e in self.entries:
            if e.run_id == run_id and e.epoch == epoch:
                return e
        raise KeyError(f"no checkpoint for run {run_id!r} at epoch {epoch}")


def _residuals(params: MlpParams, data: Dataset) -> np.ndarray:
    return data.y - forward(params, data.x)


def payoff_u(theta: MlpParams, tau: MlpParams, theta_tilde: MlpParams, data: Dataset) -> float:
    """The two-term game payoff on the given sample."""
    f_vals = forward(tau, data.z)
    r_theta = _residuals(theta, data)
    r_tilde = _residuals(theta_tilde, data)
    return float(np.mean(f_vals * r_theta) - 0.25 * np.mean(f_vals**2 * r_tilde**2))


def grads(
    theta: MlpParams, tau: MlpParams, theta_tilde: MlpParams, batch: Dataset
) -> tuple[np.ndarray, np.ndarray]:
    """Both players' gradients of payoff_u at the given point.

    theta_tilde is a constant: the penalty term contributes nothing to the
    theta gradient. The tau gradient covers both terms.
    """
    if batch.n == 0:
        raise ValueError("batch is empty")
    n = batch.n
    f_vals = forward(tau, batch.z)
    r_theta = _residuals(theta, batch)
    r_tilde = _residuals(theta_tilde, batch)
    for name, arr in (("critic values", f_vals), ("residuals", r_theta), ("lagged residuals", r_tilde)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite {name} in game gradients")
    grad_theta = grad_params(theta, batch.x, -f_vals / n)
    grad_tau = grad_params(tau, batch.z, r_theta / n - f_vals * r_tilde**2 / (2.0 * n))
    return grad_theta, grad_tau


def _grad_theta_at(theta: MlpParams, tau: MlpParams, batch: Dataset) -> np.ndarray:
    f_vals = forward(tau, batch.z)
    return grad_params(theta, batch.x, -f_vals / batch.n)


def _grad_tau_at(
    theta: MlpParams, tau: MlpParams, theta_tilde: MlpParams, batch: Dataset
) -> np.ndarray:
    n = batch.n
    f_vals = forward(tau, batch.z)
    r_theta = _residuals(theta, batch)
    r_tilde = _residuals(theta_tilde, batch)
    return grad_params(tau, batch.z, r_theta / n - f_vals * r_tilde**2 / (2.0 * n))


def _batch_indices(n: int, batch_size: int | str, rng: np.random.Generator) -> list[np.ndarray]:
    if batch_size == "full":
        return [np.arange(n)]
    perm = rng.permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def train(
    data_train: Dataset,
    data_val: Dataset,
    config: GameConfig,
    run_id: str | None = None,
    step_callback=None,
) -> tuple[CheckpointPool, list[float]]:
    """Play the game; returns (checkpoint pool, per-epoch payoff history).

    Per optimizer step: theta_tilde is refreshed to the current theta, the
    response player takes an OAdam minimize step on its gradient, then the
    critic takes an OAdam maximize step on its gradient evaluated at the
    updated theta (alternating updates). Every k_eval epochs the nets are
    evaluated on the validation split and appended to the pool together
    with the response weights. Raises TrainingDiverged on a non-finite
    payoff or gradient; deterministic given the config (shuffling, used
    only when minibatched, is seeded from config.seed).
    """
    if run_id is None:
        run_id = f"seed{config.seed}:{config.label()}"
    if not isinstance(config.batch_size, str) and config.batch_size > data_train.n:
        raise ValueError(f"batch_size {config.batch_size} exceeds n={data_train.n}")

    theta = init_mlp(config.g_spec)
    tau = init_mlp(config.f_spec)
    state = GameState(
        theta=theta,
        tau=tau,
        theta_tilde=theta.with_theta(theta.theta.copy()),
        opt_g=optim.oadam(config.lr_g),
        opt_f=optim.oadam(config.lr_f),
    )
    shuffle_rng = np.random.default_rng(config.seed)
    pool = CheckpointPool.empty(data_val.n)
    history: list[float] = []

    step_index = 0
    for epoch in range(1, config.epochs + 1):
        for idx in _batch_indices(data_train.n, config.batch_size, shuffle_rng):
            batch = data_train.take(idx) if idx.shape[0] != data_train.n else data_train
            step_index += 1
            with np.errstate(over="ignore", invalid="ignore"):
                try:
                    state.theta_tilde = state.theta
                    g_theta = _grad_theta_at(state.theta, state.tau, batch)
                    new_theta, state.opt_g = optim.step(state.opt_g, state.theta.theta, g_theta, "minimize")
                    state.theta = state.theta.with_theta(new_theta)
                    g_tau = _grad_tau_at(state.theta, state.tau, state.theta_tilde, batch)
                    new_tau, state.opt_f = optim.step(state.opt_f, state.tau.theta, g_tau, "maximize")
                    state.tau = state.tau.with_theta(new_tau)
                except (optim.NonFiniteGradient, ValueError) as exc:
                    raise TrainingDiverged(run_id, epoch, f"step {step_index}: {exc}") from exc
            if step_callback is not None:
                step_callback(step_index, state)
        state.epoch = epoch
        with np.errstate(over="ignore", invalid="ignore"):
            payoff = payoff_u(state.theta, state.tau, state.theta_tilde, data_train)
        if not np.isfinite(payoff):
            raise TrainingDiverged(run_id, epoch, f"payoff {payoff!r}")
        history.append(payoff)
        if epoch % config.k_eval == 0:
            pool.append(
                CheckpointEntry(
                    run_id=run_id,
                    epoch=epoch,
                    f_on_val=forward(state.tau, data_val.z),
                    g_on_val=forward(state.theta, data_val.x),
                    theta=state.theta.with_theta(state.theta.theta.copy()),
                )
            )
    return pool, history


def psi_hat(g_on_val: np.ndarray, pool: CheckpointPool, data_val: Dataset) -> float:
    """Validation surrogate: max over pooled critics of psi - C/4 at theta_tilde = theta.

    Residuals are computed on the validation split. The zero critic in the
    pool makes the value non-negative.
    """
    g_on_val = np.asarray(g_on_val, dtype=np.float64)
    if g_on_val.shape != (data_val.n,) or pool.n_val != data_val.n:
        raise ValueError(
            f"evaluation vector of length {g_on_val.shape} does not match validation size {data_val.n}"
        )
    r = data_val.y - g_on_val
    f = pool.critic_matrix()
    scores = f @ r / data_val.n - 0.25 * (f**2 @ r**2) / data_val.n
    return float(np.max(scores))


def early_stop_select(
    pool: CheckpointPool, run_id: str, data_val: Dataset
) -> tuple[int, np.ndarray]:
    """The run's checkpoint minimizing the validation surrogate; ties go to the later epoch."""
    entries = pool.run_entries(run_id)
    if not entries:
        raise ValueError(f"run {run_id!r} has no checkpoints")
    best_epoch, best_g, best_score = None, None, np.inf
    for entry in sorted(entries, key=lambda e: e.epoch):
        score = psi_hat(entry.g_on_val, pool, data_val)
        if score <= best_score:
            best_epoch, best_g, best_score = entry.epoch, entry.g_on_val, score
    return best_epoch, best_g


def save_pool(pool: CheckpointPool, path: str) -> None:
    """Persist as CSV: a version line, then run_id, epoch, f values, g values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["#pool-format", POOL_FORMAT_VERSION, pool.n_val])
        writer.writerow(
            ["run_id", "epoch"]
            + [f"f_{i}" for i in range(pool.n_val)]
            + [f"g_{i}" for i in range(pool.n_val)]
        )
        for e in pool.entries:
            writer.writerow([e.run_id, e.epoch] + [repr(v) for v in e.f_on_val] + [repr(v) for v in e.g_on_val])


def load_pool(path: str) -> CheckpointPool:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        version_row = next(reader)
        if version_row[:2] != ["#pool-format", POOL_FORMAT_VERSION]:
            raise ValueError(f"unrecognized pool format header: {version_row}")
        n_val = int(version_row[2])
        next(reader)  # column header
        entries = []
        for row in reader:
            run_id, epoch = row[0], int(row[1])
            vals = np.asarray([float(v) for v in row[2:]], dtype=np.float64)
            entries.append(CheckpointEntry(run_id, epoch, vals[:n_val], vals[n_val:]))
    if not entries or entries[0].run_id != ZERO_RUN_ID:
        raise ValueError("pool file is missing the leading zero-critic entry")
    return CheckpointPool(n_val, entries)
