"""Instrumental-variable regression via a smooth zero-sum moment game.

The estimator pits a response network against an adversarial critic that
searches for violated instrument moment conditions, with an
inverse-covariance-style quadratic penalty keeping the critic honest.
Classical baselines (direct regression, two-stage least squares,
polynomial 2SLS, iterated optimally-weighted GMM over an RBF moment
basis) and a deterministic benchmark harness round out the package.
"""

from .game import (
    CheckpointEntry,
    CheckpointPool,
    GameConfig,
    GameState,
    TrainingDiverged,
    early_stop_select,
    payoff_u,
    psi_hat,
    train,
)
from .netcore import MlpParams, MlpSpec, forward, grad_params, init_mlp
from .scenarios import (
    Dataset,
    ScenarioConfig,
    TrueResponse,
    YTransform,
    generate_highdim_embedding,
    generate_lowdim,
    mse,
    standardize_y,
    true_g0,
)

__version__ = "0.1.0"
