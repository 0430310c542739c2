"""Experiment protocols: the cosine-feature synthetic study, regret-threshold
confidence evaluation, and the double-descent sweep over training set size.

All protocols share the same primitives: fit the minimum-norm learner on a
(standardized) training partition, select the noise level on validation, and
evaluate pNML regret / logloss per test sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import pnml
from .data import RawDataset, SplitSpec, StandardizedView, split
from .regression import DesignMatrix, MNModel, build_design, mn_solve

# Pinned synthetic training set. Abscissae avoid reflection pairs
# (t_i + t_j = 1 makes cosine feature rows collide) so the design keeps
# full row rank; labels were drawn once from a seeded standard normal and
# are frozen here.
DEFAULT_TRAIN_T = (0.03, 0.11, 0.23, 0.31, 0.42, 0.57, 0.68, 0.85)
DEFAULT_TRAIN_Y = (2.0405, -2.5556, 0.4185, -0.5683, -0.4533, -0.2161, -2.0199, -0.2315)
DEFAULT_MODEL_DEGREES = (10, 20, 50)
DEFAULT_SYNTHETIC_SIGMA_SQ = 1e-2

# Noise-level candidates for validation selection, on standardized targets.
DEFAULT_SIGMA_GRID = tuple(np.logspace(-4, 2, 30))


class SelectionError(RuntimeError):
    """No candidate noise level produced a finite validation logloss."""


@dataclass(frozen=True)
class SyntheticConfig:
    train_points: tuple[tuple[float, float], ...] = tuple(
        zip(DEFAULT_TRAIN_T, DEFAULT_TRAIN_Y)
    )
    model_degrees: tuple[int, ...] = DEFAULT_MODEL_DEGREES
    eval_grid: int = 101
    sigma_sq: float = DEFAULT_SYNTHETIC_SIGMA_SQ

    def __post_init__(self):
        if any(not 0.0 <= t <= 1.0 for t, _ in self.train_points):
            raise ValueError("train abscissae must lie in [0, 1]")
        if self.eval_grid < 2:
            raise ValueError("eval_grid needs at least 2 points")
        if self.sigma_sq <= 0.0:
            raise ValueError("sigma_sq must be positive")


@dataclass(frozen=True)
class SyntheticPoint:
    m_degree: int
    t: float
    prediction: float  # pNML mean prediction
    mn_prediction: float
    regret: float
    regret_bound: float
    mn_norm_sq: float


@dataclass(frozen=True)
class ExperimentRecord:
    dataset: str
    m_over_n: float
    n_train: int
    seed: int
    test_logloss_pnml: float
    test_logloss_mn: float
    mean_regret: float
    mean_regret_bound: float
    sigma_sq_selected: float


@dataclass(frozen=True)
class ThresholdCurve:
    thresholds: np.ndarray
    pnml_logloss_at: np.ndarray
    mn_logloss_at: np.ndarray
    cdf_at: np.ndarray
    # Per-sample pools behind the curve, one entry per (split, test sample).
    sample_regret: np.ndarray
    sample_pnml_logloss: np.ndarray
    sample_mn_logloss: np.ndarray
    sample_seed: np.ndarray


def cosine_features(t: float, m_degree: int) -> np.ndarray:
    """Feature vector with component m equal to cos(pi m t + pi m / 2)."""
    if m_degree < 1:
        raise ValueError("need at least one feature")
    m = np.arange(m_degree)
    return np.cos(np.pi * m * t + 0.5 * np.pi * m)


def cosine_design(ts: np.ndarray, m_degree: int) -> np.ndarray:
    return np.vstack([cosine_features(float(t), m_degree) for t in ts])


def run_synthetic(
    cfg: SyntheticConfig,
    quad_cfg: pnml.QuadratureConfig = pnml.DEFAULT_QUADRATURE,
    allow_under_parameterized: bool = False,
) -> list[SyntheticPoint]:
    """Evaluate the pNML learner over a t-grid for each model degree."""
    ts = np.array([t for t, _ in cfg.train_points])
    ys = np.array([y for _, y in cfg.train_points])
    if not allow_under_parameterized:
        small = [m for m in cfg.model_degrees if m <= len(ts)]
        if small:
            raise ValueError(
                f"model degrees {small} are not over-parameterized for "
                f"{len(ts)} training points"
            )

    grid = np.linspace(0.0, 1.0, cfg.eval_grid)
    out: list[SyntheticPoint] = []
    for m_degree in cfg.model_degrees:
        design = build_design(cosine_design(ts, m_degree), ys)
        mn = mn_solve(design)
        for t in grid:
            x = cosine_features(float(t), m_degree)
            ev = pnml.pnml_evaluate(design, mn, x, cfg.sigma_sq, quad_cfg)
            labels, dens = ev.density_grid[:, 0], ev.density_grid[:, 1]
            mean_pred = float(np.trapezoid(labels * dens, labels))
            out.append(
                SyntheticPoint(
                    m_degree=m_degree,
                    t=float(t),
                    prediction=mean_pred,
                    mn_prediction=ev.mn_prediction,
                    regret=ev.regret,
                    regret_bound=ev.regret_bound,
                    mn_norm_sq=mn.norm_sq,
                )
            )
    return out


def _mn_logloss(residuals: np.ndarray, sigma_sq: float) -> np.ndarray:
    return 0.5 * math.log(2.0 * math.pi * sigma_sq) + np.square(residuals) / (2.0 * sigma_sq)


def select_sigma_sq(
    view: StandardizedView,
    candidate_grid,
    learner: str,
    quad_cfg: pnml.QuadratureConfig = pnml.DEFAULT_QUADRATURE,
) -> float:
    """Grid value minimizing mean validation logloss for the given learner
    ('pnml' or 'mn'); ties break toward the larger value."""
    sigmas = np.asarray(sorted(candidate_grid), dtype=float)
    if sigmas.size == 0:
        raise ValueError("empty candidate grid")
    if view.x_validation.shape[0] == 0:
        raise ValueError("empty validation partition")
    if learner not in ("pnml", "mn"):
        raise ValueError(f"unknown learner {learner!r}")

    design = build_design(view.x_train, view.y_train)
    mn = mn_solve(design)

    if learner == "mn":
        residuals = view.y_validation - view.x_validation @ mn.theta_mn
        losses = np.array([float(np.mean(_mn_logloss(residuals, s))) for s in sigmas])
    else:
        per_sample = [
            pnml.pnml_sigma_scan(design, mn, x, float(y), sigmas, quad_cfg).logloss
            for x, y in zip(view.x_validation, view.y_validation)
        ]
        losses = np.mean(np.vstack(per_sample), axis=0)

    finite = np.isfinite(losses)
    if not finite.any():
        raise SelectionError("no candidate sigma_sq yielded a finite validation logloss")
    losses = np.where(finite, losses, np.inf)
    best = np.flatnonzero(losses == losses.min())[-1]  # prefer the larger sigma
    return float(sigmas[best])


def _interp_density(ev: pnml.PnmlEvaluation, y: float) -> float:
    labels, dens = ev.density_grid[:, 0], ev.density_grid[:, 1]
    value = float(np.interp(y, labels, dens, left=0.0, right=0.0))
    return max(value, 1e-300)


def run_threshold_eval(
    raw: RawDataset,
    split_specs: list[SplitSpec],
    sigma_grid=DEFAULT_SIGMA_GRID,
    quad_cfg: pnml.QuadratureConfig = pnml.DEFAULT_QUADRATURE,
) -> ThresholdCurve:
    """Regret-thresholded test performance, pooled over the given splits.

    For each split the noise level of each learner is selected on its
    validation partition; every test sample contributes its regret, its pNML
    logloss (density grid interpolated at the true label), and its
    minimum-norm Gaussian logloss.
    """
    regrets, pnml_losses, mn_losses, seeds = [], [], [], []
    for spec in split_specs:
        view = split(raw, spec)
        design = build_design(view.x_train, view.y_train)
        mn = mn_solve(design)
        sigma_pnml = select_sigma_sq(view, sigma_grid, "pnml", quad_cfg)
        sigma_mn = select_sigma_sq(view, sigma_grid, "mn", quad_cfg)
        mn_resid = view.y_test - view.x_test @ mn.theta_mn
        mn_loss = _mn_logloss(mn_resid, sigma_mn)
        for i, (x, y) in enumerate(zip(view.x_test, view.y_test)):
            ev = pnml.pnml_evaluate(design, mn, x, sigma_pnml, quad_cfg)
            regrets.append(ev.regret)
            pnml_losses.append(-math.log(_interp_density(ev, float(y))))
            mn_losses.append(float(mn_loss[i]))
            seeds.append(spec.seed)

    regret_arr = np.array(regrets)
    pnml_arr = np.array(pnml_losses)
    mn_arr = np.array(mn_losses)
    order = np.argsort(regret_arr, kind="stable")

    thresholds = np.unique(regret_arr)
    n = regret_arr.size
    cdf, p_at, m_at = [], [], []
    sorted_p = pnml_arr[order]
    sorted_m = mn_arr[order]
    sorted_r = regret_arr[order]
    cum_p = np.cumsum(sorted_p)
    cum_m = np.cumsum(sorted_m)
    for thr in thresholds:
        k = int(np.searchsorted(sorted_r, thr, side="right"))
        cdf.append(k / n)
        p_at.append(cum_p[k - 1] / k)
        m_at.append(cum_m[k - 1] / k)

    return ThresholdCurve(
        thresholds=thresholds,
        pnml_logloss_at=np.array(p_at),
        mn_logloss_at=np.array(m_at),
        cdf_at=np.array(cdf),
        sample_regret=regret_arr,
        sample_pnml_logloss=pnml_arr,
        sample_mn_logloss=mn_arr,
        sample_seed=np.array(seeds),
    )


def double_descent_point(
    raw: RawDataset,
    n_train: int,
    seed: int,
    sigma_grid=DEFAULT_SIGMA_GRID,
    base_spec: SplitSpec | None = None,
    quad_cfg: pnml.QuadratureConfig = pnml.DEFAULT_QUADRATURE,
) -> ExperimentRecord:
    """One sweep point: fit on ``n_train`` rows of the seeded split and
    evaluate pNML and minimum-norm test performance."""
    if n_train < 1:
        raise ValueError(f"n_train must be >= 1, got {n_train}")
    spec = base_spec or SplitSpec(seed=seed)
    view = split(raw, replace(spec, seed=seed, trainset_cap=n_train))

    design = build_design(view.x_train, view.y_train)
    mn = mn_solve(design)
    sigma_pnml = select_sigma_sq(view, sigma_grid, "pnml", quad_cfg)
    sigma_mn = select_sigma_sq(view, sigma_grid, "mn", quad_cfg)

    sigma_arr = np.array([sigma_pnml])
    pnml_losses, regrets, bounds = [], [], []
    for x, y in zip(view.x_test, view.y_test):
        scan = pnml.pnml_sigma_scan(design, mn, x, float(y), sigma_arr, quad_cfg)
        pnml_losses.append(float(scan.logloss[0]))
        regrets.append(float(scan.regret[0]))
        bounds.append(pnml.regret_upper_bound(mn, x, sigma_pnml))
    mn_resid = view.y_test - view.x_test @ mn.theta_mn

    m_features = raw.features.shape[1]
    return ExperimentRecord(
        dataset=raw.name,
        m_over_n=m_features / n_train,
        n_train=n_train,
        seed=seed,
        test_logloss_pnml=float(np.mean(pnml_losses)),
        test_logloss_mn=float(np.mean(_mn_logloss(mn_resid, sigma_mn))),
        mean_regret=float(np.mean(regrets)),
        mean_regret_bound=float(np.mean(bounds)),
        sigma_sq_selected=sigma_pnml,
    )


def run_double_descent(
    raw: RawDataset,
    n_grid: list[int],
    seeds: list[int],
    sigma_grid=DEFAULT_SIGMA_GRID,
    quad_cfg: pnml.QuadratureConfig = pnml.DEFAULT_QUADRATURE,
) -> list[ExperimentRecord]:
    """Sweep training set size across seeds; records are sorted by
    (n_train, seed) so aggregation is order-independent."""
    if any(n < 1 for n in n_grid):
        raise ValueError("n_grid entries must be >= 1")
    records = [
        double_descent_point(raw, n, seed, sigma_grid, quad_cfg=quad_cfg)
        for n in n_grid
        for seed in seeds
    ]
    records.sort(key=lambda r: (r.n_train, r.seed))
    return records


def default_n_grid(m_features: int, pool_size: int, points: int = 12) -> list[int]:
    """Geometric grid spanning the under- and over-parameterized regimes."""
    lo = max(2, m_features // 8)
    hi = min(8 * m_features, pool_size)
    grid = np.unique(np.geomspace(lo, hi, points).round().astype(int))
    if m_features not in grid and lo <= m_features <= hi:
        grid = np.unique(np.append(grid, m_features))
    return [int(v) for v in grid]


@dataclass(frozen=True)
class AggregatePoint:
    dataset: str
    n_train: int
    m_over_n: float
    pnml_logloss_mean: float
    pnml_logloss_ci95: float
    mn_logloss_mean: float
    mn_logloss_ci95: float
    regret_mean: float
    regret_ci95: float
    bound_mean: float
    bound_ci95: float


def aggregate_records(records: list[ExperimentRecord]) -> list[AggregatePoint]:
    """Mean and normal-approximation 95% confidence half-widths across seeds."""

    def ci(values: np.ndarray) -> float:
        if values.size <= 1:
            return 0.0
        return 1.96 * float(values.std(ddof=1)) / math.sqrt(values.size)

    out = []
    for n in sorted({r.n_train for r in records}):
        group = [r for r in records if r.n_train == n]
        p = np.array([r.test_logloss_pnml for r in group])
        m = np.array([r.test_logloss_mn for r in group])
        g = np.array([r.mean_regret for r in group])
        b = np.array([r.mean_regret_bound for r in group])
        out.append(
            AggregatePoint(
                dataset=group[0].dataset,
                n_train=n,
                m_over_n=group[0].m_over_n,
                pnml_logloss_mean=float(p.mean()),
                pnml_logloss_ci95=ci(p),
                mn_logloss_mean=float(m.mean()),
                mn_logloss_ci95=ci(m),
                regret_mean=float(g.mean()),
                regret_ci95=ci(g),
                bound_mean=float(b.mean()),
                bound_ci95=ci(b),
            )
        )
    return out
