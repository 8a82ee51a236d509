"""Explicit spectral deferred corrections, single-rate and multirate (MRSDC-XYZ).

Nodes live on the unit interval; a step of size ``H`` maps ``tau`` to
``t + tau * H``.  An MRSDC-XYZ scheme uses X coarse Gauss-Lobatto nodes for
the slow partition and, inside each coarse subinterval, a Y-node Lobatto rule
applied Z times for the fast partition.

Right-hand sides are cached between sweeps and only re-evaluated at nodes
whose value changed.  In the final sweep the end node is not evaluated since
nothing uses it.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P

from .core import ContractError, CountingSystem, EvalCounters, IntegrationFailure, as_state, step_times


@dataclass(frozen=True)
class QuadratureNodes:
    """Interpolatory rule on ``[0, 1]``.

    Attributes
    ----------
    nodes : ndarray, shape (n,)
    weights : ndarray, shape (n,)
        Integrals of the Lagrange basis over ``[0, 1]``.
    S : ndarray, shape (n - 1, n)
        ``S[q, j]`` integrates basis ``j`` over ``[nodes[q], nodes[q + 1]]``.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    S: np.ndarray


def _lagrange_integrals(nodes: np.ndarray, a, b) -> np.ndarray:
    """``out[k, j]`` = integral of the j-th Lagrange basis over ``[a[k], b[k]]``."""
    n = nodes.shape[0]
    V = np.vander(nodes, n, increasing=True)
    coefs = np.linalg.solve(V, np.eye(n))  # column j: monomial coefficients of basis j
    out = np.empty((len(a), n))
    for j in range(n):
        anti = P.polyint(coefs[:, j])
        out[:, j] = P.polyval(np.asarray(b), anti) - P.polyval(np.asarray(a), anti)
    return out


@lru_cache(maxsize=None)
def lobatto_nodes(n: int) -> QuadratureNodes:
    """Gauss-Lobatto rule with ``n`` in {3, 5} nodes on ``[0, 1]``."""
    if n not in (3, 5):
        raise ContractError("Lobatto rules with 3 or 5 nodes are supported")
    interior = np.sort(L.Legendre.basis(n - 1).deriv().roots().real)
    x = np.concatenate([[0.0], 0.5 * (interior + 1.0), [1.0]])
    if n == 3:
        x[1] = 0.5
    weights = _lagrange_integrals(x, [0.0], [1.0])[0]
    S = _lagrange_integrals(x, x[:-1], x[1:])
    for arr in (x, weights, S):
        arr.setflags(write=False)
    return QuadratureNodes(n, x, weights, S)


@dataclass(frozen=True)
class MrsdcScheme:
    """Coarse/fine node hierarchy of MRSDC-XYZ.

    Attributes
    ----------
    fine_nodes : ndarray, shape (n_q,)
    coarse_index : ndarray, shape (X,)
        Fine-node index of each coarse node.
    p_of_q : ndarray, shape (n_q,)
        Coarse node at or closest to the left of each fine node.
    SF : ndarray, shape (n_q - 1, n_q)
        Fine quadrature of the fast partition over each fine subinterval.
    SS : ndarray, shape (n_q - 1, X)
        Coarse interpolant of the slow partition integrated over each fine subinterval.
    """

    X: int
    Y: int
    Z: int
    n_sweeps: int
    coarse: QuadratureNodes
    fine_nodes: np.ndarray
    coarse_index: np.ndarray
    p_of_q: np.ndarray
    SF: np.ndarray
    SS: np.ndarray

    @property
    def n_q(self) -> int:
        return self.fine_nodes.shape[0]

    @property
    def label(self) -> str:
        return f"mrsdc-{self.X}{self.Y}{self.Z}"


@lru_cache(maxsize=None)
def build_scheme(X: int, Y: int, Z: int, n_sweeps: int = 4) -> MrsdcScheme:
    if X not in (3, 5) or Y not in (3, 5):
        raise ContractError("X and Y must be 3 or 5")
    if Z < 1 or n_sweeps < 1:
        raise ContractError("need Z >= 1 and n_sweeps >= 1")
    coarse = lobatto_nodes(X)
    fine_rule = lobatto_nodes(Y)
    nodes = [0.0]
    coarse_index = [0]
    SF_rows = []
    for p in range(X - 1):
        a, b = coarse.nodes[p], coarse.nodes[p + 1]
        for z in range(Z):
            lo = a + (b - a) * z / Z
            hi = a + (b - a) * (z + 1) / Z
            w = hi - lo
            start = len(nodes) - 1  # fine index of this application's first node
            for local in range(1, Y):
                nodes.append(b if (z == Z - 1 and local == Y - 1) else lo + w * fine_rule.nodes[local])
            for local in range(Y - 1):
                row = {start + j: w * fine_rule.S[local, j] for j in range(Y)}
                SF_rows.append(row)
        coarse_index.append(len(nodes) - 1)
    fine = np.array(nodes)
    n_q = fine.shape[0]
    expected = X + (X - 1) * (Z - 1) + (X - 1) * (Y - 2) * Z
    assert n_q == expected, (n_q, expected)
    SF = np.zeros((n_q - 1, n_q))
    for q, row in enumerate(SF_rows):
        for j, v in row.items():
            SF[q, j] = v
    SS = _lagrange_integrals(coarse.nodes, fine[:-1], fine[1:])
    cidx = np.array(coarse_index)
    p_of_q = np.searchsorted(cidx, np.arange(n_q), side="right") - 1
    for arr in (fine, cidx, p_of_q, SF, SS):
        arr.setflags(write=False)
    return MrsdcScheme(X, Y, Z, n_sweeps, coarse, fine, cidx, p_of_q, SF, SS)


def parse_scheme(label: str, n_sweeps: int = 4) -> MrsdcScheme:
    """``"mrsdc-338"`` -> ``build_scheme(3, 3, 8, n_sweeps)``."""
    digits = label.lower().removeprefix("mrsdc-")
    if len(digits) < 3 or not digits.isdigit():
        raise ContractError(f"bad MRSDC label {label!r}")
    return build_scheme(int(digits[0]), int(digits[1]), int(digits[2:]), n_sweeps)


# -- sweeps ------------------------------------------------------------------

@dataclass
class SweepCache:
    """Right-hand-side values from the previous iteration.

    ``fs[p]`` at coarse nodes, ``ff[q]`` at fine nodes; ``None`` marks a value
    that has not been evaluated yet.
    """

    fs: list
    ff: list


def _check(v, node, t):
    if not np.all(np.isfinite(v)):
        raise IntegrationFailure("non-finite SDC update", stage=node, time=t)


def mrsdc_sweep(scheme: MrsdcScheme, f_slow, f_fast, t_n: float, H: float, states: np.ndarray,
                cache: SweepCache, last: bool = False):
    """One explicit multirate correction sweep.

    Parameters
    ----------
    states : ndarray, shape (n_q, N)
        Iterate ``k`` at every fine node.
    cache : SweepCache
        Right-hand sides of iterate ``k``; complete except possibly at the end node.
    last : bool
        Skip evaluating the end node (its right-hand side would be unused).

    Returns
    -------
    (new_states, new_cache)
    """
    n_q = scheme.n_q
    tq = t_n + H * scheme.fine_nodes
    tp = t_n + H * scheme.coarse.nodes
    for p in range(scheme.X):
        if cache.fs[p] is None:
            cache.fs[p] = f_slow(tp[p], states[scheme.coarse_index[p]])
    for q in range(n_q):
        if cache.ff[q] is None:
            cache.ff[q] = f_fast(tq[q], states[q])
    FS = np.array(cache.fs)
    FF = np.array(cache.ff)
    quad = H * (scheme.SF @ FF + scheme.SS @ FS)
    new = np.empty_like(states)
    new[0] = states[0]
    fs_new: list = [None] * scheme.X
    ff_new: list = [None] * n_q
    fs_new[0], ff_new[0] = cache.fs[0], cache.ff[0]
    is_coarse = {int(q): p for p, q in enumerate(scheme.coarse_index)}
    for q in range(n_q - 1):
        if q > 0:
            ff_new[q] = f_fast(tq[q], new[q])
            if q in is_coarse:
                fs_new[is_coarse[q]] = f_slow(tp[is_coarse[q]], new[q])
        p = scheme.p_of_q[q]
        hq = tq[q + 1] - tq[q]
        new[q + 1] = (new[q] + hq * (fs_new[p] - cache.fs[p]) + hq * (ff_new[q] - cache.ff[q])
                      + quad[q])
        _check(new[q + 1], q + 1, t_n)
    if not last:
        ff_new[n_q - 1] = f_fast(tq[n_q - 1], new[n_q - 1])
        fs_new[scheme.X - 1] = f_slow(tp[scheme.X - 1], new[n_q - 1])
    return new, SweepCache(fs_new, ff_new)


def _zero(n):
    return lambda t, y: np.zeros(n)


def mrsdc_step(scheme: MrsdcScheme, system, t: float, y, H: float,
               counters: Optional[EvalCounters] = None, n_sweeps: Optional[int] = None) -> np.ndarray:
    """One MRSDC step; the slow partition ``f_implicit + f_explicit`` is treated explicitly."""
    csys = system if isinstance(system, CountingSystem) else CountingSystem(system, counters)
    y = as_state(y)
    n = y.shape[0]

    def f_slow(tt, x):
        return csys.implicit(tt, x) + csys.explicit(tt, x)

    f_fast = csys.fast if csys.has_fast else _zero(n)
    if not (csys.has_implicit or csys.has_explicit):
        f_slow = _zero(n)
    sweeps = scheme.n_sweeps if n_sweeps is None else n_sweeps
    states = np.tile(y, (scheme.n_q, 1))
    # spread initial guess: one evaluation serves every node
    fs0 = f_slow(t, y)
    ff0 = f_fast(t, y)
    cache = SweepCache([fs0] * scheme.X, [ff0] * scheme.n_q)
    for k in range(sweeps):
        states, cache = mrsdc_sweep(scheme, f_slow, f_fast, t, H, states, cache, last=(k == sweeps - 1))
    return states[-1].copy()


def sdc_sweep(nodes: QuadratureNodes, f, t_n: float, H: float, states: np.ndarray, F: list,
              last: bool = False):
    """One explicit single-rate sweep; ``F`` holds ``f`` at iterate ``k``."""
    tm = t_n + H * nodes.nodes
    quad = H * (nodes.S @ np.array(F))
    new = np.empty_like(states)
    new[0] = states[0]
    F_new: list = [None] * nodes.n
    F_new[0] = F[0]
    for m in range(nodes.n - 1):
        if m > 0:
            F_new[m] = f(tm[m], new[m])
        hm = tm[m + 1] - tm[m]
        new[m + 1] = new[m] + hm * (F_new[m] - F[m]) + quad[m]
        _check(new[m + 1], m + 1, t_n)
    if not last:
        F_new[-1] = f(tm[-1], new[-1])
    return new, F_new


def sdc_step(nodes, f, t: float, y, H: float, n_sweeps: int = 4) -> np.ndarray:
    """Single-rate explicit SDC from the spread initial guess."""
    if isinstance(nodes, int):
        nodes = lobatto_nodes(nodes)
    y = as_state(y)
    states = np.tile(y, (nodes.n, 1))
    f0 = f(t, y)
    F = [f0] * nodes.n
    for k in range(n_sweeps):
        states, F = sdc_sweep(nodes, f, t, H, states, F, last=(k == n_sweeps - 1))
    return states[-1].copy()


def sdc_integrate(nodes, system, t0: float, tf: float, H: float, y0, n_sweeps: int = 4):
    """Single-rate SDC on the unsplit right-hand side; returns ``(y, counters)``.

    Evaluations are booked per partition like the other integrators.
    """
    counters = EvalCounters()
    csys = CountingSystem(system, counters)

    def f(tt, x):
        out = csys.fast(tt, x)
        if csys.has_implicit:
            out = out + csys.implicit(tt, x)
        if csys.has_explicit:
            out = out + csys.explicit(tt, x)
        return out

    y = as_state(y0)
    for t, h in step_times(t0, tf, H):
        y = sdc_step(nodes, f, t, y, h, n_sweeps)
    return y, counters


def mrsdc_integrate(scheme: MrsdcScheme, system, t0: float, tf: float, H: float, y0,
                    trace: Optional[list] = None):
    counters = EvalCounters()
    csys = CountingSystem(system, counters)
    y = as_state(y0)
    for t, h in step_times(t0, tf, H):
        before = counters.snapshot() if trace is not None else None
        y = mrsdc_step(scheme, csys, t, y, h)
        if trace is not None:
            trace.append(counters.diff(before))
    return y, counters
