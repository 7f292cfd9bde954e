"""Empirical moment algebra for instrument-based estimation.

Provides the sample moment functional psi_n, the residual-weighted
bilinear form C, the inverse-covariance-weighted quadratic objective, its
closed-form supremum over the span of a finite moment basis, and the
supremum over all empirical-unit-norm instruments (which collapses to the
mean squared residual when the instrument rows are distinct).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "MomentBasis",
    "DegenerateMomentCovariance",
    "psi_n",
    "c_form",
    "cov_matrix",
    "owgmm_objective",
    "span_sup",
    "unit_ball_sup",
    "unit_ball_maximizer",
]

COND_LIMIT = 1e12


class DegenerateMomentCovariance(RuntimeError):
    """Moment covariance too ill-conditioned to weight; carries the estimate."""

    def __init__(self, condition: float):
        super().__init__(
            f"moment covariance condition estimate {condition:.3e} exceeds {COND_LIMIT:.0e}; "
            "increase the ridge or drop redundant moments"
        )
        self.condition = condition


@dataclass
class MomentBasis:
    """A finite instrument set evaluated on the sample: column j = f_j(Z_1..Z_n)."""

    values: np.ndarray
    labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise ValueError(f"basis values must be an n x m matrix with m >= 1, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("basis values contain non-finite entries")
        if not self.labels:
            self.labels = [f"f_{j}" for j in range(self.values.shape[1])]
        if len(self.labels) != self.values.shape[1]:
            raise ValueError("labels length does not match number of basis columns")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


def _check_same_length(a: np.ndarray, b: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"{what}: expected equal-length vectors, got {a.shape} and {b.shape}")
    return a, b


def psi_n(f_values: np.ndarray, r: np.ndarray) -> float:
    """Empirical moment: mean of f(Z_i) * r_i."""
    f_values, r = _check_same_length(f_values, r, "psi_n")
    return float(np.mean(f_values * r))


def c_form(f_values: np.ndarray, h_values: np.ndarray, r_tilde: np.ndarray) -> float:
    """Residual-weighted bilinear form: mean of f * h * r_tilde^2. Symmetric in f, h."""
    f_values, h_values = _check_same_length(f_values, h_values, "c_form")
    _, r_tilde = _check_same_length(f_values, r_tilde, "c_form")
    return float(np.mean(f_values * h_values * r_tilde**2))


def cov_matrix(basis: MomentBasis, r_tilde: np.ndarray) -> np.ndarray:
    """m x m matrix of c_form over basis columns; symmetric PSD."""
    r_tilde = np.asarray(r_tilde, dtype=np.float64)
    if r_tilde.shape != (basis.n,):
        raise ValueError(f"residuals have shape {r_tilde.shape}, basis rows are {basis.n}")
    w = basis.values * r_tilde[:, None]
    c = w.T @ w / basis.n
    return 0.5 * (c + c.T)


def _weighted_solve(
    basis: MomentBasis, r_theta: np.ndarray, r_tilde: np.ndarray, ridge: float
) -> tuple[float, np.ndarray]:
    """Shared SPD solve behind owgmm_objective and span_sup.

    Returns (psi' A^-1 psi, A^-1 psi) for A = C + ridge*I, via Cholesky.
    Rejects with the condition estimate when A is numerically singular;
    no pseudoinverse fallback.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be non-negative, got {ridge}")
    r_theta = np.asarray(r_theta, dtype=np.float64)
    if r_theta.shape != (basis.n,):
        raise ValueError(f"residuals have shape {r_theta.shape}, basis rows are {basis.n}")
    psi = basis.values.T @ r_theta / basis.n
    a = cov_matrix(basis, r_tilde) + ridge * np.eye(basis.m)
    eigs = np.linalg.eigvalsh(a)
    if eigs[0] <= 0.0:
        raise DegenerateMomentCovariance(np.inf)
    condition = eigs[-1] / eigs[0]
    if condition > COND_LIMIT:
        raise DegenerateMomentCovariance(float(condition))
    solved = cho_solve(cho_factor(a, lower=True), psi)
    return float(psi @ solved), solved


def owgmm_objective(
    basis: MomentBasis, r_theta: np.ndarray, r_tilde: np.ndarray, ridge: float = 0.0
) -> float:
    """Inverse-covariance-weighted quadratic form psi' (C + ridge*I)^-1 psi."""
    value, _ = _weighted_solve(basis, r_theta, r_tilde, ridge)
    return value


def span_sup(
    basis: MomentBasis, r_theta: np.ndarray, r_tilde: np.ndarray, ridge: float = 0.0
) -> tuple[float, np.ndarray]:
    """Closed-form sup over span(basis) of psi_n(f) - C(f, f)/4.

    Returns (value, v_star) with v_star the maximizing coefficient vector
    2 (C + ridge*I)^-1 psi. The value coincides bit-for-bit with
    owgmm_objective because both share one factorization.
    """
    value, solved = _weighted_solve(basis, r_theta, r_tilde, ridge)
    return value, 2.0 * solved


def unit_ball_sup(r: np.ndarray, z: np.ndarray) -> float:
    """Sup of psi_n(f)^2 over instruments with empirical norm E_n[f^2] = 1.

    Equals the mean squared residual by Cauchy-Schwarz; requires pairwise
    distinct instrument rows so that any critic value vector is realizable
    as a function of Z.
    """
    r = np.asarray(r, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != r.shape[0]:
        raise ValueError(f"z must be an (n, d) matrix aligned with residuals, got {z.shape}")
    if np.unique(z, axis=0).shape[0] != z.shape[0]:
        raise ValueError(
            "unit_ball_sup requires pairwise distinct instrument rows; duplicates make "
            "the closed form invalid (nonzero conditional variance under the empirical measure)"
        )
    return float(np.mean(r**2))


def unit_ball_maximizer(r: np.ndarray) -> np.ndarray:
    """The attaining critic values: proportional to the residuals, unit empirical norm.

    Zero residuals give the zero vector (every critic then scores zero).
    """
    r = np.asarray(r, dtype=np.float64)
    ms = float(np.mean(r**2))
    if ms == 0.0:
        return np.zeros_like(r)
    return r / np.sqrt(ms)
