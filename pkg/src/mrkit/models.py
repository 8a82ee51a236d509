"""Test problems: a linear two-rate ODE with an exact solution, and a periodic
finite-volume advection-diffusion-reaction system with stiff surrogate chemistry.

Grid states are species-major: ``Y.reshape(3, n)`` in 1D, ``Y.reshape(3, n, n)``
in 2D, species order ``(u, v, w)``.
"""
from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, field
from typing import Optional

import numpy as np

from .algebraic import HelmholtzPreconditioner
from .core import ContractError, PartitionedSystem, as_state

SPECIES = ("u", "v", "w")


# -- linear two-rate ODE ------------------------------------------------------

@dataclass(frozen=True)
class LinearTwoRateOde:
    """``y' = A_fast y + A_slow_implicit y + A_slow_explicit y``."""

    A_fast: np.ndarray
    A_slow_implicit: np.ndarray
    A_slow_explicit: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        for name in ("A_fast", "A_slow_implicit", "A_slow_explicit", "y0"):
            arr = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.y0.shape[0]
        for name in ("A_fast", "A_slow_implicit", "A_slow_explicit"):
            if getattr(self, name).shape != (n, n):
                raise ContractError(f"{name} must be {n}x{n}")

    @property
    def key(self):
        return ("linear-two-rate",) + tuple(a.tobytes() for a in
                                            (self.A_fast, self.A_slow_implicit, self.A_slow_explicit, self.y0))

    def system(self, slow: str = "imex") -> PartitionedSystem:
        """Partitioned right-hand side.

        ``slow = "imex"`` keeps both slow matrices; ``"explicit"`` merges them into
        ``f_explicit`` (for explicit multirate methods).
        """
        Af, Ai, Ae = self.A_fast, self.A_slow_implicit, self.A_slow_explicit
        if slow == "explicit":
            As = Ai + Ae
            return PartitionedSystem(len(self.y0), f_fast=lambda t, y: Af @ y,
                                     f_explicit=lambda t, y: As @ y, key=self.key + ("explicit",))
        if slow != "imex":
            raise ContractError("slow must be 'imex' or 'explicit'")
        return PartitionedSystem(len(self.y0), f_fast=lambda t, y: Af @ y,
                                 f_implicit=lambda t, y: Ai @ y, f_explicit=lambda t, y: Ae @ y,
                                 jv_implicit=lambda t, y, v: Ai @ v, key=self.key + ("imex",))


def default_two_rate_ode() -> LinearTwoRateOde:
    """Non-commuting 2x2 oracle problem with a fast rotation and slow coupling."""
    return LinearTwoRateOde(
        A_fast=[[-2.0, 20.0], [-20.0, -2.0]],
        A_slow_implicit=[[-1.0, 0.5], [0.25, -1.5]],
        A_slow_explicit=[[0.0, 0.8], [-0.6, 0.1]],
        y0=[1.0, 0.5],
    )


def expm_taylor(M: np.ndarray, tol: float = 1e-16) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series."""
    M = np.asarray(M, dtype=float)
    norm = np.max(np.sum(np.abs(M), axis=1)) if M.size else 0.0
    k = max(0, int(np.ceil(np.log2(norm / 0.5))) if norm > 0.5 else 0)
    X = M / 2.0**k
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for j in range(1, 40):
        term = term @ X / j
        out = out + term
        if np.max(np.abs(term)) <= tol * np.max(np.abs(out)):
            break
    for _ in range(k):
        out = out @ out
    return out


def analytic_solution(ode: LinearTwoRateOde, t: float) -> np.ndarray:
    A = ode.A_fast + ode.A_slow_implicit + ode.A_slow_explicit
    return expm_taylor(A * t) @ ode.y0


# -- Brusselator advection-diffusion-reaction PDE -----------------------------

@dataclass(frozen=True)
class BrusselatorPdeConfig:
    """Periodic box of ``n_cells`` per side.  Units: lengths in cm, times in s."""

    n_cells: int = 64
    dims: int = 1
    length: float = 1.0
    a_vel: float = 0.1
    D: float = 1e-3
    rho_D: float = 1.0
    eps: float = 1e-2
    a_par: float = 0.6
    b_par: float = 2.0
    reactions: bool = True
    amplitude: float = 1.0

    def __post_init__(self):
        if self.n_cells < 8:
            raise ContractError("n_cells >= 8")
        if self.dims not in (1, 2):
            raise ContractError("dims must be 1 or 2")
        if not self.eps > 0:
            raise ContractError("eps > 0")
        if self.rho_D < 1:
            raise ContractError("rho_D >= 1")
        if not (self.length > 0 and self.D >= 0):
            raise ContractError("need length > 0 and D >= 0")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def n_species(self) -> int:
        return 3

    @property
    def shape(self) -> tuple:
        return (3,) + (self.n_cells,) * self.dims

    @property
    def dimension(self) -> int:
        return int(np.prod(self.shape))

    @property
    def diffusivity(self) -> float:
        return self.rho_D * self.D

    def component(self, name: str) -> slice:
        """Index range of one species in the flat state."""
        k = SPECIES.index(name)
        m = self.n_cells ** self.dims
        return slice(k * m, (k + 1) * m)

    def cell_centers(self):
        x = (np.arange(self.n_cells) + 0.5) * self.dx
        if self.dims == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))


def rhs_reaction(cfg: BrusselatorPdeConfig, t, Y) -> np.ndarray:
    """Cell-local surrogate chemistry; ``eps`` sets the fast relaxation of ``w``."""
    u, v, w = np.asarray(Y).reshape(3, -1)
    uuv = u * u * v
    out = np.empty((3, u.shape[0]))
    out[0] = cfg.a_par - (w + 1.0) * u + uuv
    out[1] = w * u - uuv
    out[2] = (cfg.b_par - w) / cfg.eps - w * u
    return out.ravel()


def rhs_advection(cfg: BrusselatorPdeConfig, t, Y) -> np.ndarray:
    """``-div(Y a)`` with centered face fluxes; velocity ``a_vel`` along every axis."""
    Z = np.asarray(Y).reshape(cfg.shape)
    out = np.zeros_like(Z)
    for ax in range(1, cfg.dims + 1):
        face = 0.5 * cfg.a_vel * (Z + np.roll(Z, -1, axis=ax))  # flux at i + 1/2
        out -= (face - np.roll(face, 1, axis=ax)) / cfg.dx
    return out.ravel()


def rhs_diffusion(cfg: BrusselatorPdeConfig, t, Y) -> np.ndarray:
    """``rho_D * D * Lap_h Y`` in flux form (periodic)."""
    Z = np.asarray(Y).reshape(cfg.shape)
    out = np.zeros_like(Z)
    k = cfg.diffusivity / cfg.dx**2
    for ax in range(1, cfg.dims + 1):
        grad = np.roll(Z, -1, axis=ax) - Z  # face difference at i + 1/2
        out += k * (grad - np.roll(grad, 1, axis=ax))
    return out.ravel()


def jv_diffusion(cfg: BrusselatorPdeConfig, t, Y, V) -> np.ndarray:
    return rhs_diffusion(cfg, t, V)


def initial_condition(cfg: BrusselatorPdeConfig) -> np.ndarray:
    amp = cfg.amplitude
    tp = 2 * np.pi / cfg.length
    xs = cfg.cell_centers()
    x = xs[0]
    su = np.sin(tp * x) if cfg.dims == 1 else np.sin(tp * x) * np.sin(tp * xs[1])
    u = cfg.a_par + 0.1 * amp * su
    v = cfg.b_par / cfg.a_par + 0.1 * amp * np.cos(tp * x)
    w = cfg.b_par + 0.05 * amp * np.sin(2 * tp * x)
    return np.stack([u, v, w]).ravel()


def cell_steady_state(cfg: BrusselatorPdeConfig) -> np.ndarray:
    """Spatially uniform equilibrium ``(u, v, w)`` of the reaction terms."""
    w = cfg.b_par / (1.0 + cfg.eps * cfg.a_par)
    return np.array([cfg.a_par, w / cfg.a_par, w])


def brusselator_system(cfg: BrusselatorPdeConfig) -> PartitionedSystem:
    """Fast reaction, implicit diffusion and explicit advection partitions."""
    return PartitionedSystem(
        cfg.dimension,
        f_fast=(lambda t, y: rhs_reaction(cfg, t, y)) if cfg.reactions else None,
        f_implicit=lambda t, y: rhs_diffusion(cfg, t, y),
        f_explicit=lambda t, y: rhs_advection(cfg, t, y),
        jv_implicit=lambda t, y, v: rhs_diffusion(cfg, t, v),
        key=("brusselator",) + astuple(cfg),
        meta={"config": cfg},
    )


def diffusion_preconditioner(cfg: BrusselatorPdeConfig, sweeps: int = 4):
    """Map a stage coefficient ``gamma`` to a solver for ``I - gamma * rho_D * D * Lap_h``."""
    cache: dict = {}

    def factory(gamma: float):
        if gamma not in cache:
            cache[gamma] = HelmholtzPreconditioner(1.0, gamma * cfg.diffusivity, cfg, sweeps)
        return cache[gamma]

    return factory


def export_csv(cfg: BrusselatorPdeConfig, Y, path) -> None:
    """Write ``cell, x[, y], u, v, w`` rows."""
    Z = as_state(Y).reshape(3, -1)
    xs = [c.ravel() for c in cfg.cell_centers()]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["cell", "x"] + (["y"] if cfg.dims == 2 else []) + list(SPECIES))
        for i in range(Z.shape[1]):
            wr.writerow([i] + [f"{c[i]:.17g}" for c in xs] + [f"{Z[k, i]:.17g}" for k in range(3)])
