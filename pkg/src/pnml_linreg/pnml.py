"""Predictive normalized maximum likelihood (pNML) for linear regression
under a minimum-norm constraint.

For a training design and a test vector x this module computes:

* the closed-form normalization factor K0 = 1 + x^T X^+ X^{+T} x that applies
  whenever x lies inside the training row space,
* the empirical normalization factor K for the over-parameterized case, by
  solving for the per-label regularization level lambda_y that pins the
  constrained genie fit to the minimum-norm sphere and integrating the genie
  likelihood over all candidate labels,
* the analytic regret upper bound
  log[(1 + x^T X^+ X^{+T} x)(1 + 2 ||x_orth||^2)
      + 3 ((1 / pi sigma^2) ||x_orth||^2 theta^T X^+ X^{+T} theta)^(1/3)],
* the lower bound on lambda_y and the Gaussian upper bound on the genie
  likelihood from which that regret bound is assembled.

The per-label solve runs vectorized over whole label grids: every quantity is
expressed in the cached spectral basis of the training matrix, so one norm
evaluation costs O(rank) per label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ORTH_CLAMP_TOL
from .regression import DegenerateDirectionError, DesignMatrix, GenieFit, MNModel

LAMBDA_BRACKET_LO = 1e-12
MAX_BRACKET_DOUBLINGS = 200
BISECT_ITERATIONS = 100


class ConvergenceError(RuntimeError):
    """The lambda_y bracket search failed; carries the final norm gap."""

    def __init__(self, message: str, norm_gap: float):
        super().__init__(message)
        self.norm_gap = norm_gap


class EvaluationError(RuntimeError):
    """Label-grid quadrature failed to converge after maximal widening."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Policy for the label-grid quadrature of the normalization factor.

    The grid starts at ``initial_points`` samples over +/- ``initial_width_sigmas``
    genie standard deviations (sigma * K0) around the minimum-norm prediction
    and doubles in width (and point count, capped) until the outermost panel
    contributions fall below ``tail_fraction`` of the running integral and two
    consecutive estimates agree to ``rel_tol``.
    """

    initial_width_sigmas: float = 10.0
    initial_points: int = 2049
    max_points: int = 2**17 + 1
    tail_fraction: float = 1e-6
    rel_tol: float = 1e-4
    max_widenings: int = 40


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclass(frozen=True)
class PnmlEvaluation:
    """Per-test-sample pNML result."""

    k_factor: float
    regret: float
    regret_bound: float
    k0: float
    x_orth_sq: float
    x_quad: float
    mn_prediction: float
    density_grid: np.ndarray  # shape (n, 2): label, normalized density
    sigma_sq: float


@dataclass(frozen=True)
class TestPointContext:
    """Spectral coordinates of one (design, test vector) pair.

    Every genie/ridge quantity reduces to arithmetic on these arrays:
    ``s`` singular values, ``a`` label coordinates V^T Y, ``b`` test
    coordinates U^T x, plus the orthogonal remainder of x.
    """

    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    x_orth: np.ndarray
    x_orth_sq: float
    mn_prediction: float
    mn_norm_sq: float
    x_quad: float
    theta_quad: float

    @property
    def k0(self) -> float:
        return 1.0 + self.x_quad


def test_point_context(design: DesignMatrix, x: np.ndarray) -> TestPointContext:
    """Project a test vector onto the cached training spectrum."""
    x = np.asarray(x, dtype=float)
    s = design.svd.singular_values
    u = design.svd.left_vectors
    a = design.svd.right_vectors.T @ design.Y
    b = u.T @ x
    x_orth = x - u @ b
    r2 = float(x_orth @ x_orth)
    if r2 <= ORTH_CLAMP_TOL * float(x @ x):
        r2 = 0.0
    mn_coef = a / s if s.size else a
    return TestPointContext(
        s=s,
        a=a,
        b=b,
        x_orth=x_orth,
        x_orth_sq=r2,
        mn_prediction=float(b @ mn_coef),
        mn_norm_sq=float(mn_coef @ mn_coef),
        x_quad=float(np.sum(b**2 / s**2)) if s.size else 0.0,
        theta_quad=float(np.sum(a**2 / s**4)) if s.size else 0.0,
    )


def _stacked_ridge(ctx: TestPointContext, lam: np.ndarray, y: np.ndarray):
    """Norm^2 and test residual of the ridge fit on the design stacked with
    (x, y), for vectors of (lam, y) pairs. O(len(lam) * rank)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    den = ctx.s[None, :] ** 2 + lam[:, None]
    coef = ctx.s * ctx.a / den  # spectral coordinates of theta_ridge
    pred = coef @ ctx.b
    x_p_x = (ctx.b**2 / den).sum(axis=1) + ctx.x_orth_sq / lam
    gain = (y - pred) / (1.0 + x_p_x)
    hat = coef + gain[:, None] * ctx.b / den
    norm_sq = (hat * hat).sum(axis=1) + gain**2 * ctx.x_orth_sq / lam**2
    return norm_sq, gain


def _solve_lambda(ctx: TestPointContext, y: np.ndarray):
    """lambda_y and genie residual for each label in ``y``.

    Brackets [LAMBDA_BRACKET_LO, hi] with doubling of hi until the norm gap
    changes sign, then bisects on log lambda. Labels whose stacked norm
    already meets the constraint at the lower bracket get lambda_y = 0 and a
    zero residual (the perfect-fit limit).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    target = ctx.mn_norm_sq
    if target == 0.0:
        # degenerate hypothesis set {0}: the genie predicts zero everywhere
        return np.full(y.shape, math.inf), y - ctx.mn_prediction

    lo = np.full(y.shape, LAMBDA_BRACKET_LO)
    norm_lo, _ = _stacked_ridge(ctx, lo, y)
    free = norm_lo <= target  # constraint already satisfied: lambda -> 0

    hi = np.ones(y.shape)
    for _ in range(MAX_BRACKET_DOUBLINGS):
        norm_hi, _ = _stacked_ridge(ctx, hi, y)
        over = (norm_hi > target) & ~free
        if not over.any():
            break
        hi[over] *= 2.0
    else:
        worst = int(np.argmax(norm_hi - target))
        gap = math.sqrt(float(norm_hi[worst])) - math.sqrt(target)
        raise ConvergenceError(
            f"lambda bracket expansion failed after {MAX_BRACKET_DOUBLINGS} doublings",
            norm_gap=gap,
        )

    for _ in range(BISECT_ITERATIONS):
        mid = np.sqrt(lo * hi)
        norm_mid, _ = _stacked_ridge(ctx, mid, y)
        above = norm_mid > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)

    lam = np.sqrt(lo * hi)
    _, resid = _stacked_ridge(ctx, lam, y)
    lam = np.where(free, 0.0, lam)
    resid = np.where(free, 0.0, resid)
    return lam, resid


def _gaussian(resid: np.ndarray, sigma_sq: float) -> np.ndarray:
    return np.exp(-np.square(resid) / (2.0 * sigma_sq)) / math.sqrt(2.0 * math.pi * sigma_sq)


def under_param_regret(design: DesignMatrix, x: np.ndarray) -> tuple[float, float]:
    """Closed-form normalization factor and regret for a test vector inside
    the training row space: K0 = 1 + x^T X^+ X^{+T} x, regret = log K0.

    For x with an orthogonal component the sum is restricted to the rank-r
    subspace, i.e. the value is the projected K0.
    """
    ctx = test_point_context(design, x)
    k0 = ctx.k0
    return k0, math.log(k0)


def solve_lambda_for_label(
    design: DesignMatrix,
    mn: MNModel,
    x: np.ndarray,
    y: float,
    tol: float = 1e-8,
    sigma_sq: float = 1.0,
) -> GenieFit:
    """Regularization level lambda_y at which the genie fit for label ``y``
    lands exactly on the minimum-norm sphere, plus the fit itself.

    Requires a nonzero orthogonal component; the label equal to the
    minimum-norm prediction yields lambda_y = 0 and the maximal density.
    """
    ctx = test_point_context(design, x)
    if ctx.x_orth_sq == 0.0:
        raise DegenerateDirectionError(
            "test vector lies in the training row space; use the closed form"
        )
    lam_arr, resid_arr = _solve_lambda(ctx, np.array([float(y)]))
    lam, resid = float(lam_arr[0]), float(resid_arr[0])

    if lam == 0.0:
        theta_hat = mn.theta_mn.copy()
    else:
        den = ctx.s**2 + lam
        u = design.svd.left_vectors
        theta_ridge = u @ (ctx.s * ctx.a / den)
        p_x = u @ (ctx.b / den) + ctx.x_orth / lam
        gain = (y - float(x @ theta_ridge)) / (1.0 + float(np.asarray(x, dtype=float) @ p_x))
        theta_hat = theta_ridge + gain * p_x

    norm_gap = float(np.linalg.norm(theta_hat)) - math.sqrt(mn.norm_sq)
    if abs(norm_gap) > tol * (1.0 + math.sqrt(mn.norm_sq)):
        raise ConvergenceError(
            f"norm constraint not met to tolerance {tol}", norm_gap=norm_gap
        )
    density = float(_gaussian(np.array([resid]), sigma_sq)[0])
    return GenieFit(lambda_y=lam, theta_hat=theta_hat, density=density, norm_gap=norm_gap)


def lambda_lower_bound(mn: MNModel, x: np.ndarray, y: float) -> float:
    """Analytic lower bound on lambda_y from the first-order expansion of the
    stacked ridge norm around lambda = 0.

    The stacked norm ||theta_hat(lambda)||^2 is convex in lambda, so it lies
    above its tangent at 0: taking theta* as the stacked minimum-norm fit and
    G* the stacked X^+ X^{+T}, the constraint ||theta_hat|| = ||theta_MN||
    forces lambda >= (residual^2 / ||x_orth||^2) / (2 theta*^T G* theta*).
    The tangent slope theta*^T G* theta* is evaluated exactly through the
    rank-one pseudo-inverse update.
    """
    ctx = test_point_context(mn.design, x)
    if ctx.x_orth_sq == 0.0:
        raise DegenerateDirectionError(
            "lambda lower bound undefined for x in the training row space"
        )
    resid = float(y) - ctx.mn_prediction
    d2 = resid * resid / ctx.x_orth_sq
    cross = float(np.sum(ctx.a * ctx.b / ctx.s**3))
    slope = (
        ctx.theta_quad
        - 2.0 * resid * cross / ctx.x_orth_sq
        + (d2 / ctx.x_orth_sq) * (ctx.x_quad + 1.0)
    )
    if slope <= 0.0:
        return 0.0
    return 0.5 * d2 / slope


def genie_density_upper_bound(
    k0: float, x_orth_sq: float, lam: float, residual: float, sigma_sq: float
) -> float:
    """Gaussian upper bound on the constrained genie likelihood: a normal
    density of the given residual with standard deviation inflated by
    K0 (1 + ||x_orth||^2 / (K0 lambda))."""
    if lam <= 0.0:
        raise ValueError(f"genie bound requires lam > 0, got {lam}")
    if k0 < 1.0:
        raise ValueError(f"k0 must be >= 1, got {k0}")
    inflation = k0 * (1.0 + x_orth_sq / (k0 * lam))
    return math.exp(
        -(residual**2) / (2.0 * sigma_sq * inflation**2)
    ) / math.sqrt(2.0 * math.pi * sigma_sq)


def regret_upper_bound(mn: MNModel, x: np.ndarray, sigma_sq: float) -> float:
    """Analytic upper bound on the pNML regret for the norm-constrained
    hypothesis set; collapses to the closed-form regret when x has no
    orthogonal component."""
    if sigma_sq <= 0.0:
        raise ValueError(f"sigma_sq must be positive, got {sigma_sq}")
    ctx = test_point_context(mn.design, x)
    cube = ctx.x_orth_sq * ctx.theta_quad / (math.pi * sigma_sq)
    return math.log(ctx.k0 * (1.0 + 2.0 * ctx.x_orth_sq) + 3.0 * np.cbrt(cube))


def genie_density_on_grid(
    ctx: TestPointContext, labels: np.ndarray, sigma_sq: float
) -> np.ndarray:
    """Unnormalized genie density at each label, solving lambda_y per label."""
    _, resid = _solve_lambda(ctx, labels)
    return _gaussian(resid, sigma_sq)


def _closed_form_evaluation(
    ctx: TestPointContext, sigma_sq: float, bound: float, cfg: QuadratureConfig
) -> PnmlEvaluation:
    k0 = ctx.k0
    width = cfg.initial_width_sigmas * math.sqrt(sigma_sq) * k0
    labels = np.linspace(ctx.mn_prediction - width, ctx.mn_prediction + width, cfg.initial_points)
    scaled = sigma_sq * k0 * k0
    density = np.exp(-np.square(labels - ctx.mn_prediction) / (2.0 * scaled)) / math.sqrt(
        2.0 * math.pi * scaled
    )
    return PnmlEvaluation(
        k_factor=k0,
        regret=math.log(k0),
        regret_bound=bound,
        k0=k0,
        x_orth_sq=0.0,
        x_quad=ctx.x_quad,
        mn_prediction=ctx.mn_prediction,
        density_grid=np.column_stack([labels, density]),
        sigma_sq=sigma_sq,
    )


def integrate_density(
    density_fn, center: float, sigma_scale: float, cfg: QuadratureConfig
) -> tuple[float, np.ndarray, np.ndarray]:
    """Adaptive trapezoid quadrature of a label density around ``center``.

    ``density_fn`` maps a label grid to density values; ``sigma_scale`` sets
    the initial half-width (cfg.initial_width_sigmas * sigma_scale). Returns
    (integral, labels, densities) of the final grid.
    """
    width = cfg.initial_width_sigmas * sigma_scale
    points = cfg.initial_points
    previous = None
    for _ in range(cfg.max_widenings):
        labels = np.linspace(center - width, center + width, points)
        density = density_fn(labels)
        total = float(np.trapezoid(density, labels))
        dx = labels[1] - labels[0]
        edge = 0.5 * dx * max(density[0] + density[1], density[-1] + density[-2])
        tails_ok = edge < cfg.tail_fraction * total
        stable = previous is not None and abs(total - previous) < cfg.rel_tol * total
        if tails_ok and stable:
            return total, labels, density
        previous = total
        width *= 2.0
        points = min(2 * points - 1, cfg.max_points)
    raise EvaluationError(
        f"label quadrature did not converge after {cfg.max_widenings} widenings"
    )


def pnml_evaluate(
    design: DesignMatrix,
    mn: MNModel,
    x: np.ndarray,
    sigma_sq: float,
    quad_cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> PnmlEvaluation:
    """Full pNML evaluation of one test vector.

    Uses the closed-form normalization factor when x lies in the training
    row space and label-grid quadrature of the constrained genie density
    otherwise. The stored density grid is normalized to integrate to one.
    """
    if sigma_sq <= 0.0:
        raise ValueError(f"sigma_sq must be positive, got {sigma_sq}")
    ctx = test_point_context(design, x)
    bound = regret_upper_bound(mn, x, sigma_sq)
    if ctx.x_orth_sq == 0.0:
        return _closed_form_evaluation(ctx, sigma_sq, bound, quad_cfg)

    k, labels, density = integrate_density(
        lambda ys: genie_density_on_grid(ctx, ys, sigma_sq),
        ctx.mn_prediction,
        math.sqrt(sigma_sq) * ctx.k0,
        quad_cfg,
    )
    return PnmlEvaluation(
        k_factor=k,
        regret=math.log(k),
        regret_bound=bound,
        k0=ctx.k0,
        x_orth_sq=ctx.x_orth_sq,
        x_quad=ctx.x_quad,
        mn_prediction=ctx.mn_prediction,
        density_grid=np.column_stack([labels, density / k]),
        sigma_sq=sigma_sq,
    )


@dataclass
class SigmaScan:
    """pNML quantities for one (test vector, label) pair across a sigma grid.

    The per-label regularization path does not depend on sigma, so the genie
    residual curve is solved once and the normalization integral is re-weighted
    for every sigma. ``logloss[i]`` is -log q_pNML(y|x) at ``sigmas[i]``.
    """

    sigmas: np.ndarray
    logloss: np.ndarray
    regret: np.ndarray
    mn_prediction: float


def pnml_sigma_scan(
    design: DesignMatrix,
    mn: MNModel,
    x: np.ndarray,
    y: float,
    sigmas: np.ndarray,
    quad_cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> SigmaScan:
    """Evaluate the pNML logloss of label ``y`` for every sigma in ``sigmas``
    while solving the regularization path only once."""
    sigmas = np.asarray(sigmas, dtype=float)
    ctx = test_point_context(design, x)

    if ctx.x_orth_sq == 0.0:
        k0 = ctx.k0
        resid = float(y) - ctx.mn_prediction
        logloss = 0.5 * np.log(2.0 * math.pi * sigmas * k0 * k0) + resid**2 / (
            2.0 * sigmas * k0 * k0
        )
        return SigmaScan(
            sigmas=sigmas,
            logloss=logloss,
            regret=np.full(sigmas.shape, math.log(k0)),
            mn_prediction=ctx.mn_prediction,
        )

    sigma_max = float(sigmas.max())
    _, resid_true = _solve_lambda(ctx, np.array([float(y)]))
    resid_true = float(resid_true[0])

    width = quad_cfg.initial_width_sigmas * math.sqrt(sigma_max) * ctx.k0
    points = quad_cfg.initial_points
    for _ in range(quad_cfg.max_widenings):
        labels = np.linspace(ctx.mn_prediction - width, ctx.mn_prediction + width, points)
        _, resid = _solve_lambda(ctx, labels)
        sq = np.square(resid)
        # K for every sigma from the shared residual curve.
        dens = np.exp(-sq[None, :] / (2.0 * sigmas[:, None]))
        k = np.trapezoid(dens, labels, axis=1) / np.sqrt(2.0 * math.pi * sigmas)
        dx = labels[1] - labels[0]
        edge = 0.5 * dx * np.maximum(
            dens[:, 0] + dens[:, 1], dens[:, -1] + dens[:, -2]
        ) / np.sqrt(2.0 * math.pi * sigmas)
        if (edge < quad_cfg.tail_fraction * k).all():
            regret = np.log(k)
            logloss = (
                0.5 * np.log(2.0 * math.pi * sigmas)
                + resid_true**2 / (2.0 * sigmas)
                + regret
            )
            return SigmaScan(
                sigmas=sigmas,
                logloss=logloss,
                regret=regret,
                mn_prediction=ctx.mn_prediction,
            )
        width *= 2.0
        points = min(2 * points - 1, quad_cfg.max_points)
    raise EvaluationError("sigma scan quadrature did not converge")
