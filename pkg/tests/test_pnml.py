import math

import numpy as np
import pytest

from pnml_linreg.pnml import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    genie_density_upper_bound,
    integrate_density,
    lambda_lower_bound,
    pnml_evaluate,
    pnml_sigma_scan,
    regret_upper_bound,
    solve_lambda_for_label,
    under_param_regret,
)
from pnml_linreg.pnml import test_point_context as point_context
from pnml_linreg.regression import DegenerateDirectionError, build_design, mn_solve

from oracles import constrained_ridge_lambda_scan

FAST_QUAD = QuadratureConfig(initial_points=513)


def over_param(rng, n=5, m=12):
    design = build_design(rng.normal(size=(n, m)), rng.normal(size=n))
    return design, mn_solve(design)


def test_identity_design_closed_form():
    # two copies of identity(2), test along the first axis: K0 = 1 + 1/2
    x_mat = np.vstack([np.eye(2), np.eye(2)])
    design = build_design(x_mat, np.array([1.0, 0.0, 1.0, 0.0]))
    k0, regret = under_param_regret(design, np.array([1.0, 0.0]))
    assert k0 == pytest.approx(1.5)
    assert regret == pytest.approx(math.log(1.5))


def test_single_stack_identity_example():
    design = build_design(np.eye(2), np.array([0.3, -0.4]))
    k0, regret = under_param_regret(design, np.array([1.0, 0.0]))
    assert k0 == pytest.approx(2.0)
    assert regret == pytest.approx(math.log(2.0))


def test_lambda_solver_against_dense_scan_oracle():
    rng = np.random.default_rng(23)
    design, mn = over_param(rng)
    x = rng.normal(size=12)
    for y_offset in (0.7, -2.0, 5.0):
        y = mn.theta_mn @ x + y_offset
        fit = solve_lambda_for_label(design, mn, x, float(y))
        lam_oracle, theta_oracle = constrained_ridge_lambda_scan(
            design.X, design.Y, x, float(y), mn.norm_sq, points=4001
        )
        # dense scan resolves lambda to its grid spacing only
        assert fit.lambda_y == pytest.approx(lam_oracle, rel=2e-2)
        assert float(theta_oracle @ theta_oracle) == pytest.approx(mn.norm_sq, rel=5e-3)
        assert abs(fit.norm_gap) <= 1e-8 * (1.0 + math.sqrt(mn.norm_sq))


def test_lambda_grows_with_label_distance():
    rng = np.random.default_rng(31)
    design, mn = over_param(rng)
    x = rng.normal(size=12)
    m_pred = float(x @ mn.theta_mn)
    lams = [
        solve_lambda_for_label(design, mn, x, m_pred + d).lambda_y
        for d in (0.5, 1.0, 2.0, 4.0, 8.0)
    ]
    assert all(l2 > l1 for l1, l2 in zip(lams, lams[1:]))


def test_label_at_mn_prediction_is_free():
    rng = np.random.default_rng(37)
    design, mn = over_param(rng)
    x = rng.normal(size=12)
    fit = solve_lambda_for_label(design, mn, x, float(x @ mn.theta_mn))
    assert fit.lambda_y == 0.0
    assert fit.density == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))


def test_lambda_solver_rejects_rowspace_direction():
    rng = np.random.default_rng(41)
    design, mn = over_param(rng)
    x = design.X.T @ rng.normal(size=5)
    with pytest.raises(DegenerateDirectionError):
        solve_lambda_for_label(design, mn, x, 0.0)


def test_lambda_lower_bound_holds():
    rng = np.random.default_rng(43)
    for _ in range(10):
        design, mn = over_param(rng)
        x = rng.normal(size=12)
        y = float(x @ mn.theta_mn + rng.normal() * 3.0)
        if y == float(x @ mn.theta_mn):
            continue
        fit = solve_lambda_for_label(design, mn, x, y)
        assert lambda_lower_bound(mn, x, y) <= fit.lambda_y * (1.0 + 1e-9)


def test_genie_density_upper_bound_dominates():
    rng = np.random.default_rng(47)
    design, mn = over_param(rng)
    x = rng.normal(size=12)
    ctx = point_context(design, x)
    from pnml_linreg.linalg import ridge_solve

    for d in (0.3, 1.0, 4.0):
        y = ctx.mn_prediction + d
        fit = solve_lambda_for_label(design, mn, x, y)
        # the bound inflates the residual of the train-only ridge fit at lambda_y
        theta_ridge = ridge_solve(design.X, design.Y, fit.lambda_y)
        resid = y - float(x @ theta_ridge)
        cap = genie_density_upper_bound(ctx.k0, ctx.x_orth_sq, fit.lambda_y, resid, 1.0)
        # float-level slack from the bisection tolerance on lambda
        assert fit.density <= cap * (1.0 + 1e-9)


def test_integrate_density_recovers_gaussian_mass():
    cfg = QuadratureConfig(initial_points=1025)
    total, labels, density = integrate_density(
        lambda ys: np.exp(-((ys - 3.0) ** 2) / 2.0) / math.sqrt(2.0 * math.pi),
        center=3.0,
        sigma_scale=1.0,
        cfg=cfg,
    )
    assert total == pytest.approx(1.0, abs=1e-6)
    assert labels[0] < 3.0 < labels[-1]


def test_pnml_evaluate_properties():
    rng = np.random.default_rng(53)
    design, mn = over_param(rng)
    x = rng.normal(size=12)
    ev = pnml_evaluate(design, mn, x, sigma_sq=0.5, quad_cfg=FAST_QUAD)
    labels, dens = ev.density_grid[:, 0], ev.density_grid[:, 1]
    assert ev.k_factor >= 1.0 - 1e-9
    assert ev.regret >= -1e-12
    assert ev.regret <= ev.regret_bound + 5e-3
    assert np.trapezoid(dens, labels) == pytest.approx(1.0, abs=2e-3)
    # mode sits at the minimum-norm prediction
    assert labels[int(np.argmax(dens))] == pytest.approx(ev.mn_prediction, abs=labels[1] - labels[0])


def test_closed_form_branch_is_gaussian():
    rng = np.random.default_rng(59)
    x_mat = rng.normal(size=(30, 6))
    design = build_design(x_mat, rng.normal(size=30))
    mn = mn_solve(design)
    x = rng.normal(size=6)
    ev = pnml_evaluate(design, mn, x, sigma_sq=2.0, quad_cfg=FAST_QUAD)
    assert ev.x_orth_sq == 0.0
    assert ev.k_factor == pytest.approx(ev.k0, rel=1e-12)
    labels, dens = ev.density_grid[:, 0], ev.density_grid[:, 1]
    var = 2.0 * ev.k0**2
    expected = np.exp(-((labels - ev.mn_prediction) ** 2) / (2 * var)) / math.sqrt(
        2 * math.pi * var
    )
    assert np.allclose(dens, expected, atol=1e-12)


def test_regret_upper_bound_reduces_to_closed_form():
    rng = np.random.default_rng(61)
    x_mat = rng.normal(size=(30, 6))
    design = build_design(x_mat, rng.normal(size=30))
    mn = mn_solve(design)
    x = rng.normal(size=6)
    k0, regret = under_param_regret(design, x)
    assert regret_upper_bound(mn, x, 1.0) == pytest.approx(regret, rel=1e-12)


def test_sigma_scan_matches_single_evaluations():
    rng = np.random.default_rng(67)
    design, mn = over_param(rng)
    x = rng.normal(size=12)
    y = float(x @ mn.theta_mn) + 1.3
    sigmas = np.array([0.05, 0.5, 5.0])
    scan = pnml_sigma_scan(design, mn, x, y, sigmas, FAST_QUAD)
    for i, s in enumerate(sigmas):
        ev = pnml_evaluate(design, mn, x, float(s), FAST_QUAD)
        assert scan.regret[i] == pytest.approx(ev.regret, rel=1e-3)
        fit = solve_lambda_for_label(design, mn, x, y, sigma_sq=float(s))
        direct = -math.log(fit.density / ev.k_factor)
        assert scan.logloss[i] == pytest.approx(direct, rel=1e-3)


def test_pnml_evaluate_rejects_bad_sigma():
    rng = np.random.default_rng(71)
    design, mn = over_param(rng)
    with pytest.raises(ValueError):
        pnml_evaluate(design, mn, rng.normal(size=12), sigma_sq=0.0)
