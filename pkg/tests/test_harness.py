import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mrkit.harness import (ConfigError, RunReport, StudyConfig, fitted_slope, linear_iterations,
                           list_methods, load_config, make_problem, pairwise_rates, parse_method,
                           run_convergence_study, run_efficiency_study, run_one,
                           run_preconditioner_study, run_tolerance_sweep, selected_tolerances)

LIN = make_problem("linear-two-rate")


@pytest.mark.parametrize("sel,family", [("sdc", "sdc"), ("mrsdc-338", "mrsdc"), ("mri3-4", "mri"),
                                        ("mri3-8-kutta3", "mri"), ("imex-mri3-10", "imex-mri"),
                                        ("imex-mri4-2", "imex-mri"), ("ark-imex", "ark-imex"),
                                        ("erk-classic-rk4", "erk")])
def test_parse_method(sel, family):
    assert parse_method(sel).family == family


@pytest.mark.parametrize("bad", ["mri3-0", "mri3-4-ark436-imex-pair", "imex-mri5-10", "erk-nope",
                                 "mrsdc-999", "rk4"])
def test_parse_method_rejects(bad):
    with pytest.raises(ConfigError):
        parse_method(bad)


def test_list_methods_mentions_every_family():
    text = "\n".join(list_methods())
    for key in ("sdc", "mrsdc-", "mri3-", "imex-mri3-", "imex-mri4-", "ark-imex", "erk-classic-rk4"):
        assert key in text


def test_problem_validation():
    with pytest.raises(ConfigError):
        make_problem("heat")
    with pytest.raises(ConfigError):
        make_problem("brusselator", {"n_cell": 8})
    with pytest.raises(ConfigError):
        make_problem("brusselator", {"n_cells": 4})


def test_study_config_invariants():
    m = (parse_method("mri3-4"),)
    with pytest.raises(ConfigError):
        StudyConfig(LIN, m, (0.1, 0.2))
    with pytest.raises(ConfigError):
        StudyConfig(LIN, m, (0.1, 0.1))
    with pytest.raises(ConfigError):
        StudyConfig(LIN, (), (0.1,))
    cfg = StudyConfig(LIN, m, (0.1, 0.05), tolerances=((0.1, 1e-6),))
    assert cfg.tolerance_for(0.1) == 1e-6 and cfg.tolerance_for(0.05) == cfg.solver_tol
    assert cfg.auto_h_ref() == pytest.approx(0.05 / 4 / 10)


def test_pairwise_rates():
    r = pairwise_rates([4.0, 1.0, float("nan"), 0.25, 0.0])
    assert np.isnan(r[0]) and r[1] == pytest.approx(2.0) and np.isnan(r[2]) and np.isnan(r[3])
    assert np.isnan(r[4])


@given(st.floats(0.5, 6.0), st.floats(1e-3, 1e3))
def test_fitted_slope_recovers_power_law(p, C):
    H = [0.1 / 2**k for k in range(5)]
    assert fitted_slope(H, [C * h**p for h in H]) == pytest.approx(p, abs=1e-9)


def test_fitted_slope_skips_diverged_and_uses_tail():
    H = [0.4, 0.2, 0.1, 0.05, 0.025]
    errs = [float("nan"), 1.0, 2.0**-3, 2.0**-6, 2.0**-9]
    assert fitted_slope(H, errs) == pytest.approx(3.0)
    assert fitted_slope(H, [5.0, 1.0, 2.0**-3, 2.0**-6, 2.0**-9], tail=3) == pytest.approx(3.0)


def test_zero_rhs_errors_vanish():
    cfg = StudyConfig(make_problem("linear-two-rate", {"scale": 0.0}),
                      (parse_method("mri3-4"), parse_method("ark-imex")), (0.2, 0.1, 0.05))
    rep = run_convergence_study(cfg)
    assert all(r.error == 0.0 for r in rep.rows)
    assert all(np.isnan(r.rate) for r in rep.rows)


def test_convergence_oracle_slope():
    cfg = StudyConfig(LIN, (parse_method("mri3-4"),), tuple(1 / 2**k for k in range(3, 8)))
    rep = run_convergence_study(cfg)
    assert rep.slopes["mri3-4"] == pytest.approx(3.0, abs=0.3)
    assert [r.steps for r in rep.rows] == [8, 16, 32, 64, 128]


def test_divergence_is_flagged_not_fatal():
    pr = make_problem("brusselator", {"n_cells": 16, "eps": 1e-4})
    cfg = StudyConfig(pr, (parse_method("erk-classic-rk4"),), (0.01, 1e-4), tf=0.2, component="u")
    rep = run_convergence_study(cfg)
    assert [r.status for r in rep.rows] == ["diverged", "finished"]
    assert np.isnan(rep.rows[0].error) and np.isfinite(rep.rows[1].error)


def test_efficiency_single_row(tmp_path):
    cfg = StudyConfig(LIN, (parse_method("imex-mri3-4"),), (0.1,))
    rep = run_efficiency_study(cfg)
    assert len(rep.rows) == 1
    r = rep.rows[0]
    assert r.extra["slow_evals"] == r.counters["n_implicit_evals"] + r.counters["n_explicit_evals"]
    rep.write_csv(tmp_path / "s.csv")
    rows = list(csv.DictReader(open(tmp_path / "s.csv", encoding="utf-8")))
    assert len(rows) == 1 and float(rows[0]["H"]) == 0.1


def test_csv_counters_match_per_step_formula(tmp_path):
    cfg = StudyConfig(LIN, (parse_method("ark-imex"),), (0.02, 0.01), tf=0.2)
    rep = run_convergence_study(cfg)
    rep.write_csv(tmp_path / "s.csv")
    for row in csv.DictReader(open(tmp_path / "s.csv", encoding="utf-8")):
        assert int(row["n_explicit_evals"]) == 6 * int(row["steps"])
        assert int(row["n_implicit_solves"]) == 5 * int(row["steps"])


def test_csv_seventeen_digits_and_json(tmp_path):
    cfg = StudyConfig(LIN, (parse_method("mri3-4"),), (0.1, 0.05))
    rep = run_convergence_study(cfg)
    rep.write_csv(tmp_path / "s.csv")
    rep.write_json(tmp_path / "s.json")
    row = next(csv.DictReader(open(tmp_path / "s.csv", encoding="utf-8")))
    assert float(row["error"]) == rep.rows[0].error
    assert row["rate"] == "" and row["tolerance"] == ""
    data = json.load(open(tmp_path / "s.json"))
    assert data["kind"] == "convergence" and len(data["rows"]) == 2


def test_tolerance_sweep_selection():
    cfg = StudyConfig(LIN, (parse_method("imex-mri3-4"), parse_method("mri3-4")),
                      (0.05, 0.025, 0.0125, 0.00625))
    rep = run_tolerance_sweep(cfg)
    sel = selected_tolerances(rep)
    tols = [sel[("imex-mri3-4", H)] for H in cfg.H]
    assert all(b <= a for a, b in zip(tols, tols[1:])) and tols[-1] < tols[0]
    explicit = [r for r in rep.rows if r.method == "mri3-4"]
    assert len(explicit) == 4 and all(r.tolerance is None for r in explicit)
    again = selected_tolerances(run_tolerance_sweep(cfg))
    assert again == sel


def test_precond_study_without_diffusion():
    pr = make_problem("brusselator", {"D": 0.0})
    cfg = StudyConfig(pr, (parse_method("imex-mri3-10"),), (0.001,), grids=(16, 32), rho_values=(1.0,),
                      n_steps=2)
    rep = run_preconditioner_study(cfg)
    assert linear_iterations(rep, 1.0, False) == linear_iterations(rep, 1.0, True)


def test_precond_study_requires_implicit_pde():
    with pytest.raises(ConfigError):
        run_preconditioner_study(StudyConfig(LIN, (parse_method("imex-mri3-4"),), (0.1,)))
    pr = make_problem("brusselator", {})
    with pytest.raises(ConfigError):
        run_preconditioner_study(StudyConfig(pr, (parse_method("mri3-4"),), (0.1,)))


def test_load_config(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("[study]\nproblem = brusselator\nmethods = imex-mri3-10\nH = 0.02, 0.01\n"
                 "component = u\nh_ref = auto\n\n[problem]\nn_cells = 16\neps = 1e-3\n\n"
                 "[tolerances]\n0.02 = 1e-6\n", encoding="utf-8")
    cfg = load_config(p)
    assert cfg.problem.config().n_cells == 16 and cfg.problem.config().eps == 1e-3
    assert cfg.H == (0.02, 0.01) and cfg.tolerance_for(0.02) == 1e-6 and cfg.h_ref is None
    cfg2 = load_config(p, {"methods": "ark-imex", "jobs": 2})
    assert [m.selector for m in cfg2.methods] == ["ark-imex"] and cfg2.jobs == 2


@pytest.mark.parametrize("text", ["[problem]\nn_cells = 8\n",
                                  "[study]\nmethods = mri3-4\nH = 0.1\nbogus = 1\n",
                                  "[study]\nmethods = mri3-4\nH = 0.1, x\n",
                                  "[study]\nmethods = warp-9\nH = 0.1\n",
                                  "this is not ini"])
def test_load_config_errors(tmp_path, text):
    p = tmp_path / "b.cfg"
    p.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(p)


def test_parallel_matches_serial():
    ms = (parse_method("mri3-4"), parse_method("imex-mri3-4"))
    a = run_convergence_study(StudyConfig(LIN, ms, (0.1, 0.05)))
    b = run_convergence_study(StudyConfig(LIN, ms, (0.1, 0.05), jobs=2))
    assert [r.error for r in a.rows] == [r.error for r in b.rows]
    assert [r.counters for r in a.rows] == [r.counters for r in b.rows]


def test_run_one_explicit_tolerance_empty():
    row, y = run_one(LIN, parse_method("sdc"), 0.1, 0.0, 0.5, 1e-8, False)
    assert row.tolerance is None and row.status == "finished" and y.shape == (2,)
