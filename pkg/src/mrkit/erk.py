"""Single-rate explicit Runge-Kutta stepping and reference solutions."""
from __future__ import annotations

from collections import OrderedDict
from typing import Optional

import numpy as np

from .core import (ContractError, EvalCounters, IntegrationFailure, PartitionedSystem, as_state,
                   step_times)
from .tableau import ButcherTable, registry_lookup

REFERENCE_TABLE = "cash-karp5"


def _table(table) -> ButcherTable:
    if isinstance(table, str):
        table = registry_lookup(table)
    if not isinstance(table, ButcherTable) or table.kind != "explicit":
        raise ContractError("an explicit Butcher table is required")
    return table


def erk_step(table, f, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One explicit Runge-Kutta step; calls ``f`` exactly ``table.stages`` times.

    Raises
    ------
    IntegrationFailure
        If a stage derivative is not finite; ``stage`` is its 0-based index.
    """
    table = _table(table)
    if not h > 0:
        raise ContractError("need h > 0")
    A, b, c = table.A, table.b, table.c
    s = table.stages
    K = np.empty((s, y.shape[0]))
    for i in range(s):
        yi = y + h * (A[i, :i] @ K[:i]) if i else y
        ki = f(t + c[i] * h, yi)
        if not np.all(np.isfinite(ki)):
            raise IntegrationFailure("non-finite stage derivative", stage=i, time=t)
        K[i] = ki
    return y + h * (b @ K)


def erk_integrate(table, f, t0: float, tf: float, h: float, y0,
                  counters: Optional[EvalCounters] = None,
                  counter_field: str = "n_explicit_evals") -> np.ndarray:
    """Constant-step integration from ``t0`` to ``tf``; the last step is shortened to land on ``tf``.

    When ``counters`` is given, ``counter_field`` is incremented once per
    right-hand-side call.
    """
    table = _table(table)
    y = as_state(y0)
    if counters is not None:
        g = f

        def f(t, x):
            setattr(counters, counter_field, getattr(counters, counter_field) + 1)
            return g(t, x)

    for t, hk in step_times(t0, tf, h):
        y = erk_step(table, f, t, y, hk)
    return y


_REF_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_REF_CACHE_SIZE = 64


def reference_solution(problem: PartitionedSystem, t0: float, tf: float, h_ref: float, y0,
                       table: str = REFERENCE_TABLE) -> np.ndarray:
    """Integrate the unsplit right-hand side with a fine explicit method.

    Results are cached by ``(problem.key, t0, tf, h_ref, table, y0)`` when the
    problem carries a key; keyless problems are recomputed every call.
    """
    key = None
    if problem.key is not None:
        key = (problem.key, float(t0), float(tf), float(h_ref), table,
               np.asarray(y0, dtype=float).tobytes())
        if key in _REF_CACHE:
            _REF_CACHE.move_to_end(key)
            return _REF_CACHE[key].copy()
    out = erk_integrate(table, problem.unsplit(), t0, tf, h_ref, y0)
    if key is not None:
        _REF_CACHE[key] = out.copy()
        while len(_REF_CACHE) > _REF_CACHE_SIZE:
            _REF_CACHE.popitem(last=False)
    return out
