import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from mrkit.core import ContractError
from mrkit.models import (BrusselatorPdeConfig, LinearTwoRateOde, analytic_solution, brusselator_system,
                          cell_steady_state, default_two_rate_ode, expm_taylor, export_csv,
                          initial_condition, jv_diffusion, rhs_advection, rhs_diffusion, rhs_reaction)

CFG = BrusselatorPdeConfig(n_cells=32)
vals = st.floats(-10, 10, allow_nan=False)


def test_reaction_at_zero():
    out = rhs_reaction(CFG, 0.0, np.zeros(CFG.dimension)).reshape(3, -1)
    assert np.all(out[0] == CFG.a_par) and np.all(out[1] == 0.0)
    assert np.allclose(out[2], CFG.b_par / CFG.eps)


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_steady_state_against_root_find(eps):
    cfg = BrusselatorPdeConfig(n_cells=8, eps=eps)
    # u = a from the u + v equations; w solves (b - w)/eps = w a
    w = brentq(lambda w: (cfg.b_par - w) / eps - w * cfg.a_par, 0.0, cfg.b_par)
    ss = cell_steady_state(cfg)
    assert ss[2] == pytest.approx(w, rel=1e-12)
    Y = np.repeat(ss, cfg.n_cells)
    assert np.max(np.abs(rhs_reaction(cfg, 0.0, Y))) <= 1e-10


@pytest.mark.parametrize("eps", [1e-3, 1e-4])
def test_fast_eigenvalue(eps):
    cfg = BrusselatorPdeConfig(n_cells=8, eps=eps)
    u, v, w = cell_steady_state(cfg)
    J = np.array([[-(w + 1) + 2 * u * v, u * u, -u],
                  [w - 2 * u * v, -u * u, u],
                  [-w, 0.0, -1 / eps - u]])
    lam = np.roots(np.poly(J))
    assert np.min(lam.real) == pytest.approx(-1 / eps, rel=1e-2)


def test_advection_constant_and_conservation():
    assert np.max(np.abs(rhs_advection(CFG, 0.0, np.full(CFG.dimension, 3.7)))) <= 1e-13


@given(arrays(float, CFG.dimension, elements=vals))
def test_operators_conservative(Y):
    for op in (rhs_advection, rhs_diffusion):
        sums = op(CFG, 0.0, Y).reshape(3, -1).sum(axis=1)
        assert np.max(np.abs(sums)) <= 1e-13 * max(1.0, CFG.diffusivity / CFG.dx**2) * max(1.0, np.max(np.abs(Y)))


@given(arrays(float, CFG.dimension, elements=vals), arrays(float, CFG.dimension, elements=vals),
       st.floats(-3, 3), st.floats(-3, 3))
def test_diffusion_linear(Y1, Y2, a, b):
    lhs = rhs_diffusion(CFG, 0.0, a * Y1 + b * Y2)
    rhs = a * rhs_diffusion(CFG, 0.0, Y1) + b * rhs_diffusion(CFG, 0.0, Y2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_jv_is_operator():
    Y = initial_condition(CFG)
    V = np.random.default_rng(0).standard_normal(CFG.dimension)
    np.testing.assert_array_equal(jv_diffusion(CFG, 0.0, Y, V), rhs_diffusion(CFG, 0.0, V))


def test_advection_second_order():
    errs = []
    for n in (16, 32, 64, 128):
        cfg = BrusselatorPdeConfig(n_cells=n)
        x = cfg.cell_centers()[0]
        Y = np.tile(np.sin(2 * np.pi * x), 3)
        exact = -cfg.a_vel * 2 * np.pi * np.cos(2 * np.pi * x)
        errs.append(np.max(np.abs(rhs_advection(cfg, 0.0, Y)[:n] - exact)))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(rates - 2) < 0.1)


@pytest.mark.parametrize("k", [1, 3])
def test_diffusion_fourier_eigenvalue(k):
    cfg = BrusselatorPdeConfig(n_cells=32, rho_D=1e3)
    x = cfg.cell_centers()[0]
    mode = np.cos(2 * np.pi * k * x)
    lam = -cfg.diffusivity * (2 / cfg.dx**2) * (1 - np.cos(2 * np.pi * k * cfg.dx))
    out = rhs_diffusion(cfg, 0.0, np.tile(mode, 3))[:32]
    assert np.max(np.abs(out - lam * mode)) <= 1e-12 * abs(lam)


def test_initial_condition():
    Y = initial_condition(CFG).reshape(3, -1)
    assert np.mean(Y[0]) == pytest.approx(CFG.a_par, abs=1e-13)
    assert np.all(Y > 0)
    flat = initial_condition(BrusselatorPdeConfig(n_cells=16, amplitude=0.0)).reshape(3, -1)
    assert np.all(flat == flat[:, :1])
    two = initial_condition(BrusselatorPdeConfig(n_cells=16, dims=2))
    assert two.shape == (3 * 256,)


def test_config_validation():
    for kw in (dict(n_cells=4), dict(eps=0.0), dict(rho_D=0.5), dict(dims=3)):
        with pytest.raises(ContractError):
            BrusselatorPdeConfig(**kw)


def test_component_slices():
    cfg = BrusselatorPdeConfig(n_cells=16, dims=2)
    assert cfg.component("w") == slice(512, 768)


def test_system_partitions():
    sys_ = brusselator_system(BrusselatorPdeConfig(n_cells=16, reactions=False))
    assert sys_.f_fast is None and sys_.f_implicit is not None and sys_.jv_implicit is not None


def test_analytic_solution_examples():
    ode = LinearTwoRateOde(np.diag([-100.0, 0.0]), np.diag([0.0, -1.0]), np.zeros((2, 2)), [1.0, 1.0])
    np.testing.assert_allclose(analytic_solution(ode, 0.05), [np.exp(-5), np.exp(-0.05)], rtol=1e-14)
    np.testing.assert_array_equal(analytic_solution(default_two_rate_ode(), 0.0), [1.0, 0.5])
    zero = LinearTwoRateOde(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), [2.0, 3.0])
    np.testing.assert_allclose(analytic_solution(zero, 7.0), [2.0, 3.0])


@given(st.floats(0.0, 2.0))
def test_expm_damped_rotation(t):
    # exp(t [[-2, 20], [-20, -2]]) in closed form
    M = default_two_rate_ode().A_fast * t
    c, s = np.cos(20 * t), np.sin(20 * t)
    exact = np.exp(-2 * t) * np.array([[c, s], [-s, c]])
    assert np.max(np.abs(expm_taylor(M) - exact)) <= 1e-14


def test_export_csv(tmp_path):
    cfg = BrusselatorPdeConfig(n_cells=8)
    path = tmp_path / "state.csv"
    export_csv(cfg, initial_condition(cfg), path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["cell", "x", "u", "v", "w"] and len(rows) == 9
