"""Vector contract, partitioned right-hand sides and evaluation counters.

State vectors are contiguous one-dimensional float64 numpy arrays.  The helpers
below are the only vector operations the integrators need; they validate
lengths so that a mismatched partition surfaces as :class:`ContractError`
instead of a silent broadcast.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]
JacVec = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


class ContractError(ValueError):
    """A vector or callback violated its length/shape contract."""


class IntegrationFailure(RuntimeError):
    """A step could not be completed.

    Attributes
    ----------
    stage : int or None
        Stage (or quadrature node) index where the failure was detected.
    time : float or None
        Step start time.
    """

    def __init__(self, message: str, stage: Optional[int] = None, time: Optional[float] = None,
                 diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.stage = stage
        self.time = time
        self.diagnostics = diagnostics or {}


def as_state(y) -> np.ndarray:
    out = np.array(y, dtype=np.float64)
    if out.ndim != 1:
        raise ContractError(f"state vectors are one-dimensional, got shape {out.shape}")
    return out


def axpy_combination(coefficients: Sequence[float], vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Return ``sum_k coefficients[k] * vectors[k]``."""
    if len(coefficients) != len(vectors) or len(vectors) == 0:
        raise ContractError("need equally many coefficients and vectors (at least one)")
    n = vectors[0].shape[0]
    out = np.zeros(n)
    for a, v in zip(coefficients, vectors):
        if v.shape != (n,):
            raise ContractError(f"length mismatch: {v.shape} vs ({n},)")
        if a != 0.0:
            out += a * v
    return out


def elementwise_product(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if x.shape != y.shape:
        raise ContractError(f"length mismatch: {x.shape} vs {y.shape}")
    return x * y


def wrms_norm(x: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    """Weighted root-mean-square norm ``sqrt(mean((x*w)**2))``.

    ``weights`` defaults to all ones, i.e. a pure absolute tolerance test.
    """
    if x.size == 0:
        raise ContractError("WRMS norm of an empty vector")
    if weights is None:
        return float(np.sqrt(np.mean(x * x)))
    if weights.shape != x.shape:
        raise ContractError(f"length mismatch: {x.shape} vs {weights.shape}")
    xw = x * weights
    return float(np.sqrt(np.mean(xw * xw)))


def max_norm(x: np.ndarray) -> float:
    if x.size == 0:
        raise ContractError("max norm of an empty vector")
    return float(np.max(np.abs(x)))


def max_norm_component(x: np.ndarray, selector) -> float:
    """Max norm restricted to the entries picked by ``selector``.

    ``selector`` is anything numpy accepts as an index (slice, mask, index
    array); models expose ``component(name)`` returning one.
    """
    return max_norm(np.asarray(x)[selector])


@dataclass
class EvalCounters:
    """Logical method evaluations, reset at the start of a run."""

    n_fast_evals: int = 0
    n_implicit_evals: int = 0
    n_explicit_evals: int = 0
    n_nonlinear_iters: int = 0
    n_linear_iters: int = 0
    n_precond_solves: int = 0
    n_fast_ivps: int = 0
    n_implicit_solves: int = 0

    def snapshot(self) -> dict:
        return dataclasses.asdict(self)

    def diff(self, before: dict) -> dict:
        now = self.snapshot()
        return {k: now[k] - before[k] for k in now}

    def add(self, other: "EvalCounters") -> None:
        for f in dataclasses.fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))


@dataclass
class PartitionedSystem:
    """Right-hand side ``y' = f_fast + f_implicit + f_explicit``.

    Any partition may be ``None`` (treated as zero), but not all of them.
    ``jv_implicit(t, y, v)`` optionally gives the action of the Jacobian of
    ``f_implicit`` on ``v``.  ``key`` identifies the problem for reference
    caching; systems without a key are never cached.
    """

    dimension: int
    f_fast: Optional[Rhs] = None
    f_implicit: Optional[Rhs] = None
    f_explicit: Optional[Rhs] = None
    jv_implicit: Optional[JacVec] = None
    key: Optional[tuple] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.f_fast is None and self.f_implicit is None and self.f_explicit is None:
            raise ContractError("a partitioned system needs at least one partition")
        if self.dimension < 1:
            raise ContractError("dimension must be positive")

    def unsplit(self) -> Rhs:
        """The full right-hand side as a single callback."""
        parts = [f for f in (self.f_fast, self.f_implicit, self.f_explicit) if f is not None]

        def f(t, y):
            out = parts[0](t, y)
            for g in parts[1:]:
                out = out + g(t, y)
            return out

        return f


class CountingSystem:
    """Evaluates a :class:`PartitionedSystem` and records every call.

    Missing partitions evaluate to zero without being counted.  Each returned
    vector is checked for length and finiteness.
    """

    def __init__(self, system: PartitionedSystem, counters: Optional[EvalCounters] = None):
        self.system = system
        self.counters = counters if counters is not None else EvalCounters()
        self.n = system.dimension

    def _call(self, f, t, y, name):
        out = np.asarray(f(t, y), dtype=np.float64)
        if out.shape != (self.n,):
            raise ContractError(f"{name} returned shape {out.shape}, expected ({self.n},)")
        return out

    def fast(self, t, y):
        if self.system.f_fast is None:
            return np.zeros(self.n)
        self.counters.n_fast_evals += 1
        return self._call(self.system.f_fast, t, y, "f_fast")

    def implicit(self, t, y):
        if self.system.f_implicit is None:
            return np.zeros(self.n)
        self.counters.n_implicit_evals += 1
        return self._call(self.system.f_implicit, t, y, "f_implicit")

    def explicit(self, t, y):
        if self.system.f_explicit is None:
            return np.zeros(self.n)
        self.counters.n_explicit_evals += 1
        return self._call(self.system.f_explicit, t, y, "f_explicit")

    @property
    def has_fast(self):
        return self.system.f_fast is not None

    @property
    def has_implicit(self):
        return self.system.f_implicit is not None

    @property
    def has_explicit(self):
        return self.system.f_explicit is not None


def check_finite(y: np.ndarray, what: str, stage: Optional[int] = None, time: Optional[float] = None):
    if not np.all(np.isfinite(y)):
        raise IntegrationFailure(f"non-finite {what}", stage=stage, time=time)


def step_count(t0: float, tf: float, h: float) -> int:
    """Number of constant steps of size ``h`` covering ``[t0, tf]``; a trailing
    sliver within roundoff of a whole step is not counted."""
    if not tf > t0:
        raise ContractError("need tf > t0")
    if not h > 0:
        raise ContractError("need a positive step")
    n = (tf - t0) / h
    k = int(np.ceil(n - 1e-9 * max(1.0, n)))
    return max(k, 1)


def step_times(t0: float, tf: float, h: float):
    """Yield ``(t, h_step)`` pairs; the last step is shortened to land on ``tf``."""
    n = step_count(t0, tf, h)
    for k in range(n):
        t = t0 + k * h
        yield t, (tf - t) if k == n - 1 else h
