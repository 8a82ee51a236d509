"""Multirate time integration: MRI and IMEX-MRI couplings, multirate SDC,
IMEX additive Runge-Kutta, matrix-free Newton-Krylov stage solves, and a
study harness."""
from .core import ContractError, EvalCounters, IntegrationFailure, PartitionedSystem
from .tableau import ArkPair, ButcherTable, UnknownMethodError, method_names, registry_lookup
from .erk import erk_integrate, erk_step, reference_solution
from .algebraic import (GmresConfig, HelmholtzPreconditioner, NewtonConfig, SolverNonconvergence,
                        StageSolver, gmres_solve, newton_solve)
from .mri import MriCoupling, MriMethodConfig, coupling_names, mri_integrate, mri_step, register_coupling
from .sdc import build_scheme, lobatto_nodes, mrsdc_integrate, mrsdc_step, sdc_integrate, sdc_step
from .models import BrusselatorPdeConfig, brusselator_system, default_two_rate_ode
from .harness import StudyConfig, RunReport, load_config, parse_method, make_problem

__version__ = "0.1.0"
