import numpy as np
import pytest
from hypothesis import given, strategies as st

from mrkit.core import ContractError, EvalCounters, IntegrationFailure, PartitionedSystem
from mrkit.erk import erk_integrate, erk_step, reference_solution
from mrkit.tableau import registry_lookup


@given(st.sampled_from(["heun2", "kutta3", "classic-rk4", "cash-karp5"]), st.floats(-3, 3),
       st.floats(0.01, 0.5))
def test_constant_rhs_exact(name, a, h):
    y = erk_step(registry_lookup(name), lambda t, y: np.full_like(y, a), 0.0, np.zeros(2), h)
    np.testing.assert_allclose(y, a * h, rtol=1e-13, atol=1e-15)


def test_stage_count_and_counter():
    cnt = EvalCounters()
    erk_integrate("classic-rk4", lambda t, y: -y, 0.0, 1.0, 0.25, [1.0], counters=cnt)
    assert cnt.n_explicit_evals == 16


def test_failure_reports_stage():
    def f(t, y):
        return np.array([np.inf]) if t > 0.0 else -y
    with pytest.raises(IntegrationFailure) as err:
        erk_step(registry_lookup("classic-rk4"), f, 0.0, np.array([1.0]), 0.1)
    assert err.value.stage == 1


def test_bad_step_size():
    with pytest.raises(ContractError):
        erk_step(registry_lookup("heun2"), lambda t, y: y, 0.0, np.ones(1), 0.0)


def test_reference_cache_returns_copies():
    calls = []

    def f(t, y):
        calls.append(t)
        return -y

    prob = PartitionedSystem(1, f_explicit=f, key=("test-decay",))
    a = reference_solution(prob, 0.0, 1.0, 0.01, [1.0])
    n = len(calls)
    b = reference_solution(prob, 0.0, 1.0, 0.01, [1.0])
    assert len(calls) == n and np.array_equal(a, b)
    b[0] = 99.0
    assert reference_solution(prob, 0.0, 1.0, 0.01, [1.0])[0] == pytest.approx(np.exp(-1.0), abs=1e-12)
    # a different initial state is a different entry
    assert reference_solution(prob, 0.0, 1.0, 0.01, [2.0])[0] == pytest.approx(2 * np.exp(-1.0), abs=1e-12)
