import numpy as np
import pytest

from mrkit.erk import erk_integrate
from mrkit.tableau import (ArkPair, ButcherTable, UnknownMethodError, method_names, registry_lookup,
                           verify_ark_order_conditions, verify_order_conditions)


@pytest.mark.parametrize("name", [n for n in method_names()
                                  if isinstance(registry_lookup(n), ButcherTable)])
def test_registered_table_orders(name):
    tab = registry_lookup(name)
    chk = verify_order_conditions(tab, min(tab.order, 4))
    assert chk.passed, chk.residuals
    assert chk.max_residual <= 1e-13
    assert np.max(np.abs(tab.A.sum(axis=1) - tab.c)) <= 1e-14


@pytest.mark.parametrize("name", [n for n in method_names()
                                  if isinstance(registry_lookup(n), ButcherTable)
                                  and registry_lookup(n).order < 4])
def test_order_is_not_exceeded(name):
    tab = registry_lookup(name)
    assert not verify_order_conditions(tab, tab.order + 1).passed


def test_ark_pair_conditions():
    pair = registry_lookup("ark436-imex-pair")
    assert isinstance(pair, ArkPair)
    chk = verify_ark_order_conditions(pair, 4)
    assert chk.passed and chk.max_residual <= 1e-13
    # stiffly accurate ESDIRK with gamma = 1/4
    AI = pair.implicit_table.A
    assert np.allclose(np.diag(AI)[1:], 0.25) and AI[0, 0] == 0.0
    np.testing.assert_allclose(AI[-1], pair.implicit_table.b, atol=1e-15)


def test_unknown_method_lists_names():
    with pytest.raises(UnknownMethodError) as err:
        registry_lookup("rk-nonexistent")
    assert "classic-rk4" in str(err.value)


def test_bad_tables_rejected():
    with pytest.raises(ValueError):
        ButcherTable("bad", np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([0.5, 0.5]),
                     np.array([0.0, 0.0]), 1, "explicit")


def test_bogacki_shampine_has_zero_last_weight():
    tab = registry_lookup("bogacki-shampine3")
    assert tab.b[-1] == 0.0 and tab.stages == 4


@pytest.mark.parametrize("name", ["heun2", "kutta3", "knoth-wolke3", "classic-rk4", "zonneveld4",
                                  "rk4-6stage-lowstorage", "cash-karp5"])
def test_decay_slope(name):
    tab = registry_lookup(name)
    f = lambda t, y: -y
    hs = [0.2 / 2**k for k in range(4)]
    errs = [abs(erk_integrate(tab, f, 0.0, 1.0, h, [1.0])[0] - np.exp(-1.0)) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - tab.order) <= 0.3
