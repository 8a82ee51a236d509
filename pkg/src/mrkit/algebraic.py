"""Newton iteration, matrix-free GMRES and a shifted-Laplacian preconditioner
for diagonally-implicit stage equations ``Y - gamma * f(t, Y) = known``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .core import ContractError, EvalCounters, wrms_norm

UNIT_ROUNDOFF = np.finfo(float).eps
_TINY = 1e-300


class SolverNonconvergence(RuntimeError):
    """Newton or GMRES did not meet its tolerance; carries the final residual."""

    def __init__(self, message, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class NewtonConfig:
    tolerance: float = 1e-8
    max_iters: int = 10
    safety: float = 0.1

    def __post_init__(self):
        if not self.tolerance > 0 or not 0 < self.safety <= 1 or self.max_iters < 1:
            raise ContractError("NewtonConfig needs tolerance > 0, 0 < safety <= 1, max_iters >= 1")


@dataclass(frozen=True)
class GmresConfig:
    tolerance: float = 1e-8
    max_iters: int = 100
    safety: float = 0.05

    def __post_init__(self):
        if not self.tolerance > 0 or not 0 < self.safety <= 1 or self.max_iters < 1:
            raise ContractError("GmresConfig needs tolerance > 0, 0 < safety <= 1, max_iters >= 1")


@dataclass
class StageResidualProblem:
    """``G(Y) = Y - gamma * f_implicit(t_stage, Y) - known``."""

    gamma: float
    t_stage: float
    known: np.ndarray
    f_implicit: Callable
    jv_implicit: Optional[Callable] = None

    def residual(self, Y, fY=None):
        if fY is None:
            fY = self.f_implicit(self.t_stage, Y)
        return Y - self.gamma * fY - self.known


@dataclass
class GmresResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list = field(default_factory=list)


@dataclass
class NewtonResult:
    y: np.ndarray
    iterations: int
    linear_iterations: int
    residual: float


def jacobian_vector(problem: StageResidualProblem, Y, v, fY=None) -> np.ndarray:
    """Action of ``I - gamma * df/dY`` on ``v``.

    Uses ``jv_implicit`` when available, otherwise a one-sided difference with
    ``sigma = sqrt(eps) * (1 + wrms(Y)) / wrms(v)``.  ``fY`` may supply a
    cached ``f_implicit(t, Y)``.
    """
    nv = wrms_norm(v)
    if nv == 0.0:
        return np.zeros_like(v)
    if problem.gamma == 0.0:
        return v.copy()
    if problem.jv_implicit is not None:
        return v - problem.gamma * problem.jv_implicit(problem.t_stage, Y, v)
    if fY is None:
        fY = problem.f_implicit(problem.t_stage, Y)
    sigma = np.sqrt(UNIT_ROUNDOFF) * (1.0 + wrms_norm(Y)) / max(nv, _TINY)
    fp = problem.f_implicit(problem.t_stage, Y + sigma * v)
    return v - problem.gamma * (fp - fY) / sigma


def gmres_solve(matvec, b, precond=None, cfg: GmresConfig = GmresConfig(),
                counters: Optional[EvalCounters] = None) -> GmresResult:
    """Right-preconditioned GMRES(m) with modified Gram-Schmidt, no restarts.

    Solves ``A x = b`` from ``x0 = 0`` and stops once the root-mean-square
    residual (2-norm over ``sqrt(n)``, matching the unit-weight WRMS norm of the
    Newton test) is at most ``safety * tolerance``.  ``precond(r)`` applies an approximate inverse.

    Raises
    ------
    SolverNonconvergence
        After ``max_iters`` Arnoldi steps without meeting the tolerance.
    """
    n = b.shape[0]
    # compare 2-norms against the target scaled to RMS
    target = cfg.safety * cfg.tolerance * np.sqrt(n)
    beta = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if beta <= target:
        return GmresResult(x, 0, beta / np.sqrt(n), [beta / np.sqrt(n)])
    m = cfg.max_iters
    V = np.zeros((m + 1, n))
    Z = np.zeros((m, n)) if precond is not None else None
    Hm = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[0] = b / beta
    history = [beta]
    k = 0
    res = beta
    for j in range(m):
        if precond is not None:
            Z[j] = precond(V[j])
            if counters is not None:
                counters.n_precond_solves += 1
            w = matvec(Z[j])
        else:
            w = matvec(V[j])
        if counters is not None:
            counters.n_linear_iters += 1
        for i in range(j + 1):
            Hm[i, j] = w @ V[i]
            w = w - Hm[i, j] * V[i]
        Hm[j + 1, j] = np.linalg.norm(w)
        breakdown = Hm[j + 1, j] <= 1e-14 * max(abs(Hm[j, j]), beta)
        if not breakdown:
            V[j + 1] = w / Hm[j + 1, j]
        for i in range(j):
            t1 = cs[i] * Hm[i, j] + sn[i] * Hm[i + 1, j]
            Hm[i + 1, j] = -sn[i] * Hm[i, j] + cs[i] * Hm[i + 1, j]
            Hm[i, j] = t1
        rho = np.hypot(Hm[j, j], Hm[j + 1, j])
        cs[j], sn[j] = Hm[j, j] / rho, Hm[j + 1, j] / rho
        Hm[j, j] = rho
        Hm[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        res = abs(g[j + 1])
        history.append(res)
        k = j + 1
        if res <= target or breakdown:
            break
    y = np.linalg.solve(np.triu(Hm[:k, :k]), g[:k])
    basis = Z if precond is not None else V
    x = y @ basis[:k]
    if res > target and k == m:
        raise SolverNonconvergence(f"GMRES reached {m} iterations with residual {res / np.sqrt(n):.3e}",
                                   res / np.sqrt(n), k)
    return GmresResult(x, k, res / np.sqrt(n), [h / np.sqrt(n) for h in history])


def newton_solve(problem: StageResidualProblem, y_guess, cfg: NewtonConfig = NewtonConfig(),
                 linear: GmresConfig = GmresConfig(), precond=None,
                 counters: Optional[EvalCounters] = None, weights=None) -> NewtonResult:
    """Newton iteration on the stage residual with a GMRES inner solve.

    Converged when ``wrms_norm(G(Y), weights) <= safety * tolerance``.  Each
    iteration counts once in ``n_nonlinear_iters``.
    """
    Y = np.array(y_guess, dtype=float)
    if not np.all(np.isfinite(Y)):
        raise ContractError("non-finite Newton initial guess")
    target = cfg.safety * cfg.tolerance
    lin_total = 0
    for it in range(cfg.max_iters + 1):
        fY = problem.f_implicit(problem.t_stage, Y)
        G = problem.residual(Y, fY)
        norm = wrms_norm(G, weights)
        if not np.isfinite(norm):
            raise SolverNonconvergence("non-finite nonlinear residual", norm, it)
        if norm <= target:
            return NewtonResult(Y, it, lin_total, norm)
        if it == cfg.max_iters:
            break
        if counters is not None:
            counters.n_nonlinear_iters += 1
        lin = gmres_solve(lambda v: jacobian_vector(problem, Y, v, fY), -G, precond, linear, counters)
        lin_total += lin.iterations
        Y = Y + lin.x
    raise SolverNonconvergence(f"Newton reached {cfg.max_iters} iterations with residual {norm:.3e}",
                               norm, cfg.max_iters)


@dataclass
class StageSolver:
    """Bundles solver settings for the implicit stages of an integrator.

    ``preconditioner`` maps the stage coefficient ``gamma`` to a callable
    approximate inverse of ``I - gamma * J``.
    """

    newton: NewtonConfig = field(default_factory=NewtonConfig)
    gmres: GmresConfig = field(default_factory=GmresConfig)
    preconditioner: Optional[Callable[[float], Callable]] = None
    weights: Optional[np.ndarray] = None

    def solve(self, problem: StageResidualProblem, guess, counters: Optional[EvalCounters] = None):
        pc = self.preconditioner(problem.gamma) if self.preconditioner is not None else None
        out = newton_solve(problem, guess, self.newton, self.gmres, pc, counters, self.weights)
        if counters is not None:
            counters.n_implicit_solves += 1
        return out


class HelmholtzPreconditioner:
    """Approximate inverse of ``alpha I - beta_k Lap_h`` per species on a periodic grid.

    ``grid`` needs ``n_cells``, ``dims``, ``dx`` and ``n_species``; states are
    species-major.  One dimension is solved exactly (cyclic tridiagonal); two
    dimensions use symmetric red-black Gauss-Seidel sweeps from a zero guess.
    """

    def __init__(self, alpha: float, beta, grid, sweeps: int = 4):
        beta = np.broadcast_to(np.asarray(beta, dtype=float), (grid.n_species,)).copy()
        if alpha < 0 or np.any(beta < 0):
            raise ContractError("need alpha >= 0 and beta >= 0")
        if alpha == 0 and np.any(beta == 0):
            raise ContractError("alpha = 0 with beta = 0 is singular")
        if alpha == 0:
            raise ContractError("the periodic Laplacian alone is singular; need alpha > 0")
        if grid.dims not in (1, 2):
            raise ContractError("grid dims must be 1 or 2")
        self.alpha = float(alpha)
        self.beta = beta
        self.grid = grid
        self.sweeps = sweeps
        n = grid.n_cells
        self.shape = (grid.n_species,) + (n,) * grid.dims
        self.kappa = beta / grid.dx**2
        if grid.dims == 2:
            ii, jj = np.indices((n, n))
            self.red = (ii + jj) % 2 == 0

    def __call__(self, r):
        return self.apply(r)

    def apply(self, r):
        R = np.asarray(r, dtype=float).reshape(self.shape)
        out = np.empty_like(R)
        for k in range(self.shape[0]):
            if self.kappa[k] == 0.0:
                out[k] = R[k] / self.alpha
            elif self.grid.dims == 1:
                out[k] = self._cyclic(R[k], self.kappa[k])
            else:
                out[k] = self._relax(R[k], self.kappa[k])
        return out.ravel()

    def operator(self, z):
        """Forward application of ``alpha I - beta_k Lap_h`` (for checks)."""
        Z = np.asarray(z, dtype=float).reshape(self.shape)
        out = np.empty_like(Z)
        for k in range(self.shape[0]):
            lap = -2 * self.grid.dims * Z[k]
            for ax in range(self.grid.dims):
                lap = lap + np.roll(Z[k], 1, axis=ax) + np.roll(Z[k], -1, axis=ax)
            out[k] = self.alpha * Z[k] - self.kappa[k] * lap
        return out.ravel()

    def _cyclic(self, r, kap):
        # tridiagonal solve plus Sherman-Morrison correction for the wrap entries
        n = r.shape[0]
        d = self.alpha + 2 * kap
        e = -kap
        gam = -d
        ab = np.zeros((3, n))
        ab[0, 1:] = e
        ab[1, :] = d
        ab[2, :-1] = e
        ab[1, 0] = d - gam
        ab[1, -1] = d - e * e / gam
        u = np.zeros(n)
        u[0], u[-1] = gam, e
        sol = solve_banded((1, 1), ab, np.column_stack([r, u]))
        x, q = sol[:, 0], sol[:, 1]
        fac = (x[0] + e * x[-1] / gam) / (1.0 + q[0] + e * q[-1] / gam)
        return x - fac * q

    def _relax(self, r, kap):
        z = np.zeros_like(r)
        diag = self.alpha + 4 * kap
        # red-black-red is palindromic, so each sweep is symmetric
        order = (self.red, ~self.red, self.red)
        for _ in range(self.sweeps):
            for mask in order:
                nb = (np.roll(z, 1, 0) + np.roll(z, -1, 0) + np.roll(z, 1, 1) + np.roll(z, -1, 1))
                z = np.where(mask, (r + kap * nb) / diag, z)
        return z


def helmholtz_preconditioner(alpha: float, beta, grid, sweeps: int = 4) -> HelmholtzPreconditioner:
    return HelmholtzPreconditioner(alpha, beta, grid, sweeps)
