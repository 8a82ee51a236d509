import numpy as np
import pytest
from hypothesis import given, strategies as st

from mrkit.algebraic import (GmresConfig, HelmholtzPreconditioner, NewtonConfig, SolverNonconvergence,
                             StageResidualProblem, StageSolver, gmres_solve, jacobian_vector,
                             newton_solve)
from mrkit.core import ContractError, EvalCounters
from mrkit.models import BrusselatorPdeConfig, jv_diffusion, rhs_diffusion


def _spd(n, seed):
    r = np.random.default_rng(seed)
    Q = r.standard_normal((n, n))
    return np.eye(n) * n + Q @ Q.T / n


@given(st.integers(2, 30), st.integers(0, 1000))
def test_gmres_meets_target_or_flags(n, seed):
    A = _spd(n, seed)
    b = np.random.default_rng(seed + 1).standard_normal(n)
    cfg = GmresConfig(1e-8)
    try:
        res = gmres_solve(lambda v: A @ v, b, cfg=cfg)
    except SolverNonconvergence as err:
        assert err.iterations == cfg.max_iters
        return
    true = np.linalg.norm(b - A @ res.x) / np.sqrt(n)
    assert res.residual <= cfg.safety * cfg.tolerance
    assert true <= 10 * cfg.safety * cfg.tolerance


def test_gmres_flags_iteration_cap():
    n = 60
    A = np.diag(np.linspace(1, 1e4, n))
    with pytest.raises(SolverNonconvergence) as err:
        gmres_solve(lambda v: A @ v, np.ones(n), cfg=GmresConfig(1e-14, max_iters=5))
    assert err.value.iterations == 5 and err.value.residual > 0


def test_gmres_zero_rhs_and_identity_preconditioner():
    A = _spd(8, 3)
    assert gmres_solve(lambda v: A @ v, np.zeros(8)).iterations == 0
    cnt = EvalCounters()
    Ainv = np.linalg.inv(A)
    res = gmres_solve(lambda v: A @ v, np.ones(8), precond=lambda r: Ainv @ r, counters=cnt)
    assert res.iterations == 1 and cnt.n_precond_solves == 1 and cnt.n_linear_iters == 1


def test_newton_linear_problem_one_iteration():
    L = np.array([[-3.0, 1.0], [0.5, -2.0]])
    prob = StageResidualProblem(0.2, 0.0, np.array([1.0, 2.0]), lambda t, y: L @ y,
                                lambda t, y, v: L @ v)
    cnt = EvalCounters()
    out = newton_solve(prob, np.zeros(2), NewtonConfig(1e-10), GmresConfig(1e-10), counters=cnt)
    assert out.iterations == 1 and cnt.n_nonlinear_iters == 1
    np.testing.assert_allclose(out.y, np.linalg.solve(np.eye(2) - 0.2 * L, [1.0, 2.0]), rtol=1e-10)


def test_newton_nonlinear_converges_and_caps():
    f = lambda t, y: -y**3
    prob = StageResidualProblem(0.5, 0.0, np.array([1.0]), f)
    out = newton_solve(prob, np.array([1.0]), NewtonConfig(1e-12), GmresConfig(1e-12))
    assert abs(out.y[0] + 0.5 * out.y[0] ** 3 - 1.0) < 1e-12
    with pytest.raises(SolverNonconvergence):
        newton_solve(prob, np.array([1.0]), NewtonConfig(1e-14, max_iters=1), GmresConfig(1e-14))


def test_stage_solver_counts_solves():
    L = -np.eye(3)
    prob = StageResidualProblem(0.1, 0.0, np.ones(3), lambda t, y: L @ y)
    cnt = EvalCounters()
    StageSolver().solve(prob, np.ones(3), cnt)
    assert cnt.n_implicit_solves == 1


def test_fd_jv_matches_analytic_diffusion():
    cfg = BrusselatorPdeConfig(n_cells=32, rho_D=1e3)
    r = np.random.default_rng(0)
    Y = 1 + 0.1 * r.standard_normal(cfg.dimension)
    v = r.standard_normal(cfg.dimension)
    f = lambda t, y: rhs_diffusion(cfg, t, y)
    fd = jacobian_vector(StageResidualProblem(0.01, 0.0, Y, f), Y, v)
    exact = v - 0.01 * jv_diffusion(cfg, 0.0, Y, v)
    assert np.linalg.norm(fd - exact) / np.linalg.norm(exact) <= 1e-6


def test_config_validation():
    with pytest.raises(ContractError):
        NewtonConfig(tolerance=0.0)
    with pytest.raises(ContractError):
        GmresConfig(safety=2.0)


@pytest.mark.parametrize("dims", [1, 2])
def test_helmholtz_beta_zero_is_diagonal(dims):
    grid = BrusselatorPdeConfig(n_cells=16, dims=dims)
    pc = HelmholtzPreconditioner(2.0, 0.0, grid)
    r = np.arange(grid.dimension, dtype=float)
    np.testing.assert_array_equal(pc(r), r / 2.0)


def test_helmholtz_singular_rejected():
    with pytest.raises(ContractError):
        HelmholtzPreconditioner(0.0, 0.0, BrusselatorPdeConfig(n_cells=16))


@given(st.floats(1e-4, 1e2), st.integers(8, 64))
def test_helmholtz_1d_exact(beta, n):
    grid = BrusselatorPdeConfig(n_cells=n)
    pc = HelmholtzPreconditioner(1.0, beta, grid)
    r = np.random.default_rng(n).standard_normal(grid.dimension)
    z = pc(r)
    assert np.max(np.abs(pc.operator(z) - r)) <= 1e-10 * (1 + beta * n * n) * np.max(np.abs(r))


def test_helmholtz_1d_matches_diffusion_operator():
    cfg = BrusselatorPdeConfig(n_cells=32, rho_D=1e3)
    g = 0.003
    pc = HelmholtzPreconditioner(1.0, g * cfg.diffusivity, cfg)
    z = np.random.default_rng(1).standard_normal(cfg.dimension)
    np.testing.assert_allclose(pc.operator(z), z - g * rhs_diffusion(cfg, 0.0, z), atol=1e-10)


def test_helmholtz_2d_reduces_residual():
    grid = BrusselatorPdeConfig(n_cells=16, dims=2)
    pc = HelmholtzPreconditioner(1.0, 0.01, grid, sweeps=4)
    r = np.random.default_rng(2).standard_normal(grid.dimension)
    z = pc(r)
    assert np.linalg.norm(pc.operator(z) - r) < 0.2 * np.linalg.norm(r)
