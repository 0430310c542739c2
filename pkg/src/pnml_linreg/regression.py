"""Minimum-norm and ridge regression models with recursive single-sample
updates.

The central objects are an immutable design (training matrix plus cached
factorizations), the minimum-norm least-squares fit derived from it, and the
rank-one recursions that extend either fit by one (x, y) pair without
refitting from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    ORTH_CLAMP_TOL,
    InputError,
    PseudoInverse,
    SvdFactors,
    pseudo_inverse,
    svd_decompose,
)


class DegenerateDirectionError(ValueError):
    """The test direction lies inside the training row space; the rank-one
    recursion does not apply and callers must fall back to a batch solve."""


@dataclass(frozen=True)
class DesignMatrix:
    """Training pair (X, Y) with cached SVD and pseudo-inverse of X."""

    X: np.ndarray
    Y: np.ndarray
    svd: SvdFactors
    pinv: PseudoInverse

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class MNModel:
    """Minimum-norm least-squares solution and its cached quadratic forms.

    ``theta_quad`` is theta^T X^+ X^{+T} theta, the norm-sensitivity term
    that the analytic regret bound depends on.
    """

    theta_mn: np.ndarray
    norm_sq: float
    theta_quad: float
    design: DesignMatrix


@dataclass(frozen=True)
class GenieFit:
    """Constrained least-squares fit for one candidate test label.

    ``density`` is the Gaussian likelihood the fit assigns to that label;
    ``norm_gap`` is ||theta_hat|| - ||theta_mn|| at the returned lambda.
    """

    lambda_y: float
    theta_hat: np.ndarray
    density: float
    norm_gap: float


def build_design(x: np.ndarray, y: np.ndarray, rank_tol: float = 1e-12) -> DesignMatrix:
    """Validate and factorize a training pair."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim != 2:
        raise InputError(f"design matrix must be 2-d, got shape {x.shape}")
    if x.shape[0] != y.shape[0]:
        raise InputError(f"row count {x.shape[0]} does not match label count {y.shape[0]}")
    if not np.isfinite(y).all():
        raise InputError("labels contain non-finite entries")
    svd = svd_decompose(x, rank_tol)
    return DesignMatrix(X=x, Y=y, svd=svd, pinv=pseudo_inverse(svd))


def mn_solve(design: DesignMatrix) -> MNModel:
    """Minimum-norm least-squares fit theta = X^+ Y."""
    theta = design.pinv.matrix @ design.Y
    quad_vec = design.pinv.matrix.T @ theta
    return MNModel(
        theta_mn=theta,
        norm_sq=float(theta @ theta),
        theta_quad=float(quad_vec @ quad_vec),
        design=design,
    )


def _orth_component(design: DesignMatrix, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Component of x orthogonal to the row space, with clamped squared norm."""
    x = np.asarray(x, dtype=float)
    u = design.svd.left_vectors
    resid = x - u @ (u.T @ x)
    r2 = float(resid @ resid)
    if r2 <= ORTH_CLAMP_TOL * float(x @ x):
        return resid, 0.0
    return resid, r2


def mn_update(model: MNModel, x: np.ndarray, y: float) -> MNModel:
    """Extend the minimum-norm fit by one sample through the rank-one
    pseudo-inverse recursion theta' = theta + c^+ (y - x^T theta).

    Only valid when x has a nonzero orthogonal component; otherwise a batch
    refit is required.
    """
    x = np.asarray(x, dtype=float)
    x_orth, r2 = _orth_component(model.design, x)
    if r2 == 0.0:
        raise DegenerateDirectionError(
            "test direction lies in the training row space; use a batch solve"
        )
    residual = y - float(x @ model.theta_mn)
    theta_new = model.theta_mn + (x_orth / r2) * residual

    stacked = build_design(
        np.vstack([model.design.X, x[None, :]]),
        np.append(model.design.Y, y),
    )
    quad_vec = stacked.pinv.matrix.T @ theta_new
    return MNModel(
        theta_mn=theta_new,
        norm_sq=float(theta_new @ theta_new),
        theta_quad=float(quad_vec @ quad_vec),
        design=stacked,
    )


def mn_norm_after_update(model: MNModel, x: np.ndarray, y: float) -> float:
    """Squared norm of the minimum-norm fit after appending (x, y):
    ||theta||^2 + (y - x^T theta)^2 / ||x_orth||^2.

    When x lies in the row space the norm is unchanged for a consistent
    label and infinite otherwise (returned as ``math.inf``).
    """
    x = np.asarray(x, dtype=float)
    _, r2 = _orth_component(model.design, x)
    residual = y - float(x @ model.theta_mn)
    if r2 == 0.0:
        if residual == 0.0:
            return model.norm_sq
        return math.inf
    return model.norm_sq + residual * residual / r2


def ridge_genie_fit(
    design: DesignMatrix,
    theta_ridge: np.ndarray,
    x: np.ndarray,
    y: float,
    lam: float,
    sigma_sq: float = 1.0,
) -> GenieFit:
    """Ridge fit on the design extended by (x, y), via the recursive
    least-squares update around the train-only ridge solution ``theta_ridge``.

    The stored density is the Gaussian likelihood of the label under the
    returned fit, exp(-r^2 / 2 sigma^2) / sqrt(2 pi sigma^2) with
    r = (y - x^T theta_ridge) / (1 + x^T P x).
    """
    if lam <= 0.0:
        raise ValueError(f"ridge genie requires lam > 0, got {lam}")
    x = np.asarray(x, dtype=float)
    theta_ridge = np.asarray(theta_ridge, dtype=float)

    s = design.svd.singular_values
    u = design.svd.left_vectors
    b = u.T @ x
    x_orth = x - u @ b
    # P x with P = (X^T X + lam I)^{-1}, split along the spectrum.
    p_x = u @ (b / (s**2 + lam)) + x_orth / lam
    x_p_x = float(x @ p_x)
    gain = (y - float(x @ theta_ridge)) / (1.0 + x_p_x)
    theta_hat = theta_ridge + gain * p_x

    density = math.exp(-gain * gain / (2.0 * sigma_sq)) / math.sqrt(2.0 * math.pi * sigma_sq)
    theta_mn = design.pinv.matrix @ design.Y
    norm_gap = float(np.linalg.norm(theta_hat)) - float(np.linalg.norm(theta_mn))
    return GenieFit(lambda_y=lam, theta_hat=theta_hat, density=density, norm_gap=norm_gap)
