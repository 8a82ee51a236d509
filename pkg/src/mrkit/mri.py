"""Infinitesimal multirate steppers: explicit MIS and solve-decoupled IMEX-MRI-GARK,
plus the single-rate additive (ARK-IMEX) stepper used as baseline.

A step from ``t`` to ``t + H`` runs the stages of an :class:`MriCoupling`:

* ``fast-ivp`` (``dc_i > 0``): solve ``v' = f_fast(theta, v) + r_i(theta)`` over
  ``[T_{i-1}, T_i]`` from ``v = Y_{i-1}`` with an explicit RK method;
* ``implicit-solve`` (``dc_i = 0``): ``Y_i = Y_{i-1} + H sum_j (Gbar_ij fI_j + Wbar_ij fE_j)``
  where the ``j = i`` implicit term makes it a DIRK-type stage equation;
* ``explicit-update`` (``dc_i = 0``): the same combination with ``j < i`` only.

``Gbar = sum_k Gamma^k / (k + 1)`` is the forcing integrated over the stage.
Slow right-hand sides are evaluated once per distinct abscissa (see
:attr:`MriCoupling.slow_eval_stages`) and never reused across steps.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _coupling_data as data
from .algebraic import SolverNonconvergence, StageResidualProblem, StageSolver
from .core import (ContractError, CountingSystem, EvalCounters, IntegrationFailure,
                   PartitionedSystem, as_state, check_finite, step_times)
from .erk import erk_step
from .tableau import ArkPair, ButcherTable, UnknownMethodError, registry_lookup

STAGE_KINDS = ("fast-ivp", "implicit-solve", "explicit-update")
CONSISTENCY_TOL = 1e-12


def _dense(entries, s):
    out = np.zeros((len(entries), s, s))
    for k, ent in enumerate(entries):
        for (i, j), v in ent.items():
            out[k, i, j] = v
    return out


@dataclass(frozen=True)
class MriCoupling:
    """Coupling tables of one MRI method.

    Parameters
    ----------
    c : array_like, shape (s,)
        Nondecreasing slow abscissae with ``c[0] = 0`` and ``c[-1] = 1``.
    kinds : sequence of str
        Stage kinds; the first stage (``Y_1 = y_n``) is an ``explicit-update``.
    gamma, omega : array_like, shape (ndeg, s, s)
        ``gamma[k][i][j]`` multiplies ``tau**k * fI_j`` in stage ``i``.
    order : int
        Claimed slow order.
    """

    name: str
    c: np.ndarray
    kinds: tuple
    gamma: np.ndarray
    omega: np.ndarray
    order: int

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        s = c.shape[0]
        gamma = np.array(self.gamma, dtype=float).reshape(-1, s, s)
        omega = np.array(self.omega, dtype=float).reshape(-1, s, s)
        if gamma.shape[0] != omega.shape[0]:
            nd = max(gamma.shape[0], omega.shape[0])
            gamma = np.concatenate([gamma, np.zeros((nd - gamma.shape[0], s, s))])
            omega = np.concatenate([omega, np.zeros((nd - omega.shape[0], s, s))])
        for attr, val in (("c", c), ("gamma", gamma), ("omega", omega)):
            val.setflags(write=False)
            object.__setattr__(self, attr, val)
        object.__setattr__(self, "kinds", tuple(self.kinds))
        self._validate()

    # -- structure ---------------------------------------------------------
    @property
    def s(self) -> int:
        return self.c.shape[0]

    @property
    def degrees(self) -> int:
        return self.gamma.shape[0]

    @property
    def dc(self) -> np.ndarray:
        return np.diff(self.c, prepend=0.0)

    @property
    def gbar(self) -> np.ndarray:
        return np.tensordot(1.0 / np.arange(1, self.degrees + 1), self.gamma, axes=1)

    @property
    def wbar(self) -> np.ndarray:
        return np.tensordot(1.0 / np.arange(1, self.degrees + 1), self.omega, axes=1)

    @property
    def is_implicit(self) -> bool:
        return "implicit-solve" in self.kinds

    @property
    def slow_eval_stages(self) -> tuple:
        """Stages where slow right-hand sides are evaluated: one per distinct
        abscissa, at the last stage of that abscissa whose value is not a pure
        explicit update (or the last stage, if all are)."""
        out = []
        i = 0
        while i < self.s:
            j = i
            while j + 1 < self.s and self.c[j + 1] == self.c[i]:
                j += 1
            group = range(i, j + 1)
            cand = [k for k in group if self.kinds[k] != "explicit-update"]
            out.append(cand[-1] if cand else j)
            i = j + 1
        return tuple(out)

    def _validate(self):
        s, c, kinds = self.s, self.c, self.kinds
        name = self.name
        if len(kinds) != s or any(k not in STAGE_KINDS for k in kinds):
            raise ContractError(f"{name}: stage kinds must be one of {STAGE_KINDS}")
        if c[0] != 0.0 or c[-1] != 1.0 or np.any(np.diff(c) < 0):
            raise ContractError(f"{name}: abscissae must be nondecreasing from 0 to 1")
        if kinds[0] != "explicit-update":
            raise ContractError(f"{name}: first stage is Y_1 = y_n")
        dc = self.dc
        for i in range(1, s):
            if (kinds[i] == "fast-ivp") != (dc[i] > 0):
                raise ContractError(f"{name}: stage {i} kind {kinds[i]} inconsistent with dc = {dc[i]}")
        for M in (self.gamma, self.omega):
            if np.any(np.triu(M, 1) != 0):
                raise ContractError(f"{name}: coupling may not reference later stages")
        diag = np.diagonal(self.gamma, axis1=1, axis2=2)
        for i in range(s):
            if np.any(diag[:, i] != 0) and kinds[i] != "implicit-solve":
                raise ContractError(f"{name}: implicit dependence at stage {i} with dc = {dc[i]}")
            if kinds[i] == "implicit-solve" and diag[0, i] == 0:
                raise ContractError(f"{name}: implicit-solve stage {i} has zero diagonal")
        if np.any(np.diagonal(self.omega, axis1=1, axis2=2) != 0):
            raise ContractError(f"{name}: explicit coupling must be strictly lower triangular")
        if np.any(self.gamma[1:, :, :][:, [k != "fast-ivp" for k in kinds], :] != 0) or \
                np.any(self.omega[1:, :, :][:, [k != "fast-ivp" for k in kinds], :] != 0):
            raise ContractError(f"{name}: polynomial forcing only applies to fast-ivp stages")
        used = set(np.nonzero(np.any(self.gamma != 0, axis=(0, 1)) | np.any(self.omega != 0, axis=(0, 1)))[0])
        missing = used - set(self.slow_eval_stages)
        if missing:
            raise ContractError(f"{name}: coupling uses slow values at stages {sorted(missing)} "
                                "that are never evaluated")
        # first-order consistency: each stage advances the slow clock by dc_i
        wsum = self.wbar.sum(axis=1)
        if np.max(np.abs(wsum - dc)) > CONSISTENCY_TOL:
            raise ContractError(f"{name}: explicit coupling rows do not sum to dc")
        if self.is_implicit and np.max(np.abs(self.gbar.sum(axis=1) - dc)) > CONSISTENCY_TOL:
            raise ContractError(f"{name}: implicit coupling rows do not sum to dc")

    # -- derived methods ---------------------------------------------------
    def slow_base(self) -> Union[ButcherTable, ArkPair]:
        """Single-rate method the coupling reduces to when ``f_fast = 0``."""
        AE = np.cumsum(self.wbar, axis=0)
        if not self.is_implicit:
            return ButcherTable(f"{self.name}-slow", AE, AE[-1], self.c, self.order, "explicit")
        AI = np.cumsum(self.gbar, axis=0)
        e = ButcherTable(f"{self.name}-slow-explicit", AE, AE[-1], self.c, self.order, "explicit")
        i = ButcherTable(f"{self.name}-slow-implicit", AI, AI[-1], self.c, self.order,
                         "diagonally-implicit")
        return ArkPair(f"{self.name}-slow", e, i, self.order)

    # -- text format -------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"mri-coupling v1 {self.name} s={self.s} degrees={self.degrees}",
                 f"# order={self.order}",
                 " ".join(repr(float(v)) for v in self.c),
                 " ".join(self.kinds)]
        for M in (self.gamma, self.omega):
            for k in range(self.degrees):
                for row in M[k]:
                    lines.append(" ".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, order: Optional[int] = None) -> "MriCoupling":
        raw = [ln.strip() for ln in text.splitlines()]
        head = raw[0].split()
        if len(head) != 5 or head[:2] != ["mri-coupling", "v1"]:
            raise ContractError("not an 'mri-coupling v1' table")
        name = head[2]
        s = int(head[3].removeprefix("s="))
        nd = int(head[4].removeprefix("degrees="))
        for ln in raw[1:]:
            if ln.startswith("# order=") and order is None:
                order = int(ln.split("=", 1)[1])
        body = [ln for ln in raw[1:] if ln and not ln.startswith("#")]
        if len(body) != 2 + 2 * nd * s:
            raise ContractError("wrong number of rows for the declared s and degrees")
        c = [float(v) for v in body[0].split()]
        kinds = body[1].split()
        mats = np.array([[float(v) for v in ln.split()] for ln in body[2:]]).reshape(2, nd, s, s)
        if order is None:
            raise ContractError("coupling order not given")
        return cls(name, c, kinds, mats[0], mats[1], order)


_COUPLINGS = {
    "mis-kw3": data.MIS_KW3,
    "imex-mri-gark3b": data.IMEX_MRI_GARK3B,
    "imex-mri-gark4": data.IMEX_MRI_GARK4,
}


def coupling_names() -> list[str]:
    return sorted(_COUPLINGS)


_BUILT: dict = {}


def register_coupling(name: str) -> MriCoupling:
    """Return the registered coupling ``name`` (validated on first use)."""
    if name not in _COUPLINGS:
        raise UnknownMethodError(name, _COUPLINGS)
    if name not in _BUILT:
        d = _COUPLINGS[name]
        s = len(d["c"])
        _BUILT[name] = MriCoupling(name, d["c"], d["kinds"], _dense(d["gamma"], s),
                                   _dense(d["omega"], s), d["order"])
    return _BUILT[name]


@dataclass(frozen=True)
class MriMethodConfig:
    """An MRI coupling paired with a fast explicit table and ``m`` fast substeps per slow step."""

    coupling: MriCoupling
    fast_table: ButcherTable
    m: int = 10

    def __post_init__(self):
        if isinstance(self.coupling, str):
            object.__setattr__(self, "coupling", register_coupling(self.coupling))
        if isinstance(self.fast_table, str):
            object.__setattr__(self, "fast_table", registry_lookup(self.fast_table))
        if self.m < 1:
            raise ContractError("m >= 1 fast substeps per slow step")
        if not isinstance(self.fast_table, ButcherTable) or self.fast_table.kind != "explicit":
            raise ContractError("the fast method must be an explicit Butcher table")

    def substeps(self, i: int) -> int:
        return max(1, int(round(self.m * self.coupling.dc[i])))


def substep_schedule(config: MriMethodConfig, t: float, H: float) -> list:
    """``(T_start, h, n)`` for every fast-ivp stage of a step."""
    cp = config.coupling
    out = []
    for i in range(1, cp.s):
        if cp.kinds[i] == "fast-ivp":
            n = config.substeps(i)
            out.append((t + cp.c[i - 1] * H, cp.dc[i] * H / n, n))
    return out


def build_forcing(coupling: MriCoupling, i: int, f_implicit: list, f_explicit: list) -> list:
    """Coefficient vectors of ``r_i(tau) = sum_k tau**k * out[k]`` in normalized time.

    ``out[k] = (1 / dc_i) * sum_j (Gamma^k_ij fI_j + Omega^k_ij fE_j)``.  Stored
    slow values that the coupling references must not be ``None``.
    """
    dc = coupling.dc[i]
    if not dc > 0:
        raise ContractError(f"stage {i} has dc = 0; it has no forcing polynomial")
    out = []
    n = None
    for k in range(coupling.degrees):
        acc = None
        for M, store in ((coupling.gamma, f_implicit), (coupling.omega, f_explicit)):
            for j in range(i):
                a = M[k, i, j]
                if a == 0.0:
                    continue
                if store[j] is None:
                    raise RuntimeError(f"sequencing error: slow value of stage {j} missing at stage {i}")
                n = store[j].shape[0]
                acc = a * store[j] if acc is None else acc + a * store[j]
        out.append(acc)
    if n is None:
        n = next((v.shape[0] for v in list(f_implicit) + list(f_explicit) if v is not None), 0)
    return [np.zeros(n) if v is None else v / dc for v in out]


def _as_counting(system, counters) -> CountingSystem:
    if isinstance(system, CountingSystem):
        if counters is not None and counters is not system.counters:
            raise ContractError("pass counters either through the CountingSystem or directly")
        return system
    return CountingSystem(system, counters)


def _stage_solve(solver: StageSolver, csys: CountingSystem, gamma: float, T: float, known, guess,
                 stage: int, t: float):
    prob = StageResidualProblem(gamma, T, known, csys.implicit, csys.system.jv_implicit)
    try:
        return solver.solve(prob, guess, csys.counters).y
    except SolverNonconvergence as err:
        raise IntegrationFailure(f"implicit stage solve failed: {err}", stage=stage, time=t,
                                 diagnostics={"residual": err.residual,
                                              "iterations": err.iterations}) from err


def mri_step(config: MriMethodConfig, system, solver: Optional[StageSolver], t: float, y, H: float,
             counters: Optional[EvalCounters] = None) -> np.ndarray:
    """Advance ``y`` from ``t`` to ``t + H`` with an MRI method.

    For couplings without implicit stages ``f_implicit + f_explicit`` is the
    (explicit) slow partition.
    """
    if not H > 0:
        raise ContractError("need H > 0")
    csys = _as_counting(system, counters)
    cnt = csys.counters
    cp = config.coupling
    solver = solver or StageSolver()
    y = as_state(y)
    s = cp.s
    c, dc, gbar, wbar = cp.c, cp.dc, cp.gbar, cp.wbar
    evals = set(cp.slow_eval_stages)
    fI: list = [None] * s
    fE: list = [None] * s
    implicit = cp.is_implicit

    def slow(i, Yi):
        T = t + c[i] * H
        if implicit:
            fE[i] = csys.explicit(T, Yi)
            if fI[i] is None:
                fI[i] = csys.implicit(T, Yi)
        else:
            fE[i] = csys.implicit(T, Yi) + csys.explicit(T, Yi)
            fI[i] = np.zeros_like(Yi)

    def combo(i, base):
        out = base.copy()
        for j in range(i):
            if gbar[i, j] != 0.0:
                out += (H * gbar[i, j]) * fI[j]
            if wbar[i, j] != 0.0:
                out += (H * wbar[i, j]) * fE[j]
        return out

    Y = y
    if 0 in evals:
        slow(0, Y)
    for i in range(1, s):
        kind = cp.kinds[i]
        if kind == "fast-ivp":
            coeffs = build_forcing(cp, i, fI, fE)
            T0 = t + c[i - 1] * H
            width = dc[i] * H
            n = config.substeps(i)
            h = width / n

            def rhs(theta, v, T0=T0, width=width, coeffs=coeffs):
                tau = (theta - T0) / width
                out = csys.fast(theta, v)
                p = 1.0
                for r in coeffs:
                    out = out + p * r
                    p *= tau
                return out

            v = Y
            try:
                for k in range(n):
                    v = erk_step(config.fast_table, rhs, T0 + k * h, v, h)
            except IntegrationFailure as err:
                raise IntegrationFailure(f"fast IVP failed: {err}", stage=i, time=t) from err
            cnt.n_fast_ivps += 1
            Y = v
        elif kind == "implicit-solve":
            known = combo(i, Y)
            Y = _stage_solve(solver, csys, H * gbar[i, i], t + c[i] * H, known, Y, i, t)
            # the stage equation gives fI_i without a further evaluation only
            # up to the solver tolerance, so evaluate it
            fI[i] = csys.implicit(t + c[i] * H, Y)
        else:
            Y = combo(i, Y)
        check_finite(Y, "stage value", stage=i, time=t)
        if i in evals:
            slow(i, Y)
    return Y


def ark_imex_step(pair: ArkPair, system, solver: Optional[StageSolver], t: float, y, H: float,
                  counters: Optional[EvalCounters] = None) -> np.ndarray:
    """One additive Runge-Kutta step; ``f_fast + f_explicit`` forms the explicit partition.

    Stage right-hand sides are evaluated only where a later stage or the
    solution weights use them.
    """
    if not H > 0:
        raise ContractError("need H > 0")
    csys = _as_counting(system, counters)
    solver = solver or StageSolver()
    y = as_state(y)
    AE, AI = pair.explicit_table.A, pair.implicit_table.A
    bE, bI = pair.explicit_table.b, pair.implicit_table.b
    c = pair.explicit_table.c
    s = pair.stages
    needE = [bool(bE[j] != 0 or np.any(AE[j + 1:, j] != 0)) for j in range(s)]
    needI = [bool(bI[j] != 0 or np.any(AI[j + 1:, j] != 0)) for j in range(s)]
    kE: list = [None] * s
    kI: list = [None] * s
    for i in range(s):
        T = t + c[i] * H
        known = y.copy()
        for j in range(i):
            if AE[i, j] != 0.0:
                known += (H * AE[i, j]) * kE[j]
            if AI[i, j] != 0.0:
                known += (H * AI[i, j]) * kI[j]
        if AI[i, i] != 0.0:
            Yi = _stage_solve(solver, csys, H * AI[i, i], T, known, known, i, t)
        else:
            Yi = known
        check_finite(Yi, "stage value", stage=i, time=t)
        if needE[i]:
            kE[i] = csys.fast(T, Yi) + csys.explicit(T, Yi)
        if needI[i]:
            kI[i] = csys.implicit(T, Yi)
    out = y.copy()
    for j in range(s):
        if bE[j] != 0.0:
            out += (H * bE[j]) * kE[j]
        if bI[j] != 0.0:
            out += (H * bI[j]) * kI[j]
    check_finite(out, "step result", time=t)
    return out


def mri_integrate(method, system, solver: Optional[StageSolver], t0: float, tf: float, H: float, y0,
                  trace: Optional[list] = None):
    """Constant-step integration with an :class:`MriMethodConfig` or an :class:`ArkPair`.

    Returns ``(y, counters)``.  When ``trace`` is a list, the per-step counter
    increments are appended to it.
    """
    counters = EvalCounters()
    csys = CountingSystem(system, counters)
    if isinstance(method, MriMethodConfig):
        step = mri_step
    elif isinstance(method, ArkPair):
        step = ark_imex_step
    else:
        raise ContractError("method must be an MriMethodConfig or an ArkPair")
    y = as_state(y0)
    for t, h in step_times(t0, tf, H):
        before = counters.snapshot() if trace is not None else None
        y = step(method, csys, solver, t, y, h)
        if trace is not None:
            trace.append(counters.diff(before))
    return y, counters
