"""Butcher tables for the single-rate methods, with order-condition checks.

Coefficients are compiled-in constants.  Every table is checked against the
rooted-tree order conditions through ``min(order, 4)`` when the registry is
first built; fifth-order tables are additionally covered by empirical
convergence tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bseries import additive_residuals

ROW_SUM_TOL = 1e-14
ORDER_TOL = 1e-13


class UnknownMethodError(KeyError):
    def __init__(self, name, valid):
        super().__init__(f"unknown method {name!r}; valid names: {', '.join(sorted(valid))}")
        self.name = name
        self.valid = sorted(valid)

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class ButcherTable:
    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    kind: str = field(default="explicit")

    def __post_init__(self):
        for attr in ("A", "b", "c"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        s = len(self.b)
        if self.A.shape != (s, s) or self.c.shape != (s,):
            raise ValueError(f"{self.name}: inconsistent table shapes")
        if self.kind == "explicit" and np.any(np.triu(self.A) != 0):
            raise ValueError(f"{self.name}: explicit table must be strictly lower triangular")
        if self.kind == "diagonally-implicit":
            if np.any(np.triu(self.A, 1) != 0) or not np.any(np.diag(self.A) != 0):
                raise ValueError(f"{self.name}: not diagonally implicit")

    @property
    def stages(self) -> int:
        return len(self.b)

    def row_sum_defect(self) -> float:
        return float(np.max(np.abs(self.A.sum(axis=1) - self.c)))


@dataclass(frozen=True)
class ArkPair:
    name: str
    explicit_table: ButcherTable
    implicit_table: ButcherTable
    order: int

    def __post_init__(self):
        e, i = self.explicit_table, self.implicit_table
        if e.stages != i.stages or np.max(np.abs(e.c - i.c)) > ROW_SUM_TOL:
            raise ValueError(f"{self.name}: additive tables must share c and stage count")

    @property
    def stages(self) -> int:
        return self.explicit_table.stages


@dataclass
class OrderCheck:
    passed: bool
    residuals: dict

    def __bool__(self):
        return self.passed

    @property
    def max_residual(self) -> float:
        return max((abs(v) for v in self.residuals.values()), default=0.0)


def verify_order_conditions(table: ButcherTable, p: int) -> OrderCheck:
    """Evaluate the rooted-tree order conditions of ``table`` through order ``p``.

    ``p`` must be 1..4.  The check passes iff every residual is at most 1e-13.
    """
    if p not in (1, 2, 3, 4):
        raise ValueError("order conditions are checked for p in 1..4")
    A, b, c = table.A, table.b, table.c
    conds = {"sum(b)=1": b.sum() - 1.0}
    if p >= 2:
        conds["b.c=1/2"] = b @ c - 1 / 2
    if p >= 3:
        conds["b.c^2=1/3"] = b @ c**2 - 1 / 3
        conds["b.Ac=1/6"] = b @ A @ c - 1 / 6
    if p >= 4:
        conds["b.c^3=1/4"] = b @ c**3 - 1 / 4
        conds["(b*c).Ac=1/8"] = (b * c) @ A @ c - 1 / 8
        conds["b.Ac^2=1/12"] = b @ A @ c**2 - 1 / 12
        conds["b.AAc=1/24"] = b @ A @ A @ c - 1 / 24
    res = {k: float(v) for k, v in conds.items()}
    return OrderCheck(all(abs(v) <= ORDER_TOL for v in res.values()), res)


def verify_ark_order_conditions(pair: ArkPair, p: int) -> OrderCheck:
    """Additive (two-colored tree) order conditions of an ARK pair through ``p``."""
    tables = {"E": (pair.explicit_table.A, pair.explicit_table.b),
              "I": (pair.implicit_table.A, pair.implicit_table.b)}
    res = {repr(t): v for t, v in additive_residuals(tables, p).items()}
    return OrderCheck(all(abs(v) <= ORDER_TOL for v in res.values()), res)


def _explicit(name, rows, b, order):
    s = len(b)
    A = np.zeros((s, s))
    for i, row in enumerate(rows, start=1):
        A[i, : len(row)] = row
    return ButcherTable(name, A, np.array(b, dtype=float), A.sum(axis=1), order, "explicit")


def _two_register(name, sub, b, order):
    # van der Houwen form: subdiagonal entries ``sub``, earlier columns repeat b
    s = len(b)
    A = np.zeros((s, s))
    for i in range(1, s):
        A[i, i - 1] = sub[i - 1]
        A[i, : i - 1] = b[: i - 1]
    return ButcherTable(name, A, np.array(b, dtype=float), A.sum(axis=1), order, "explicit")


def _build():
    reg = {}
    reg["heun2"] = _explicit("heun2", [[1.0]], [1 / 2, 1 / 2], 2)
    reg["kutta3"] = _explicit("kutta3", [[1 / 2], [-1.0, 2.0]], [1 / 6, 2 / 3, 1 / 6], 3)
    # fourth stage only feeds the (unused) embedding; b4 = 0
    reg["bogacki-shampine3"] = _explicit(
        "bogacki-shampine3", [[1 / 2], [0.0, 3 / 4], [2 / 9, 1 / 3, 4 / 9]],
        [2 / 9, 1 / 3, 4 / 9, 0.0], 3)
    reg["knoth-wolke3"] = _explicit(
        "knoth-wolke3", [[1 / 3], [-3 / 16, 15 / 16]], [1 / 6, 3 / 10, 8 / 15], 3)
    reg["zonneveld4"] = _explicit(
        "zonneveld4", [[1 / 2], [0.0, 1 / 2], [0.0, 0.0, 1.0], [5 / 32, 7 / 32, 13 / 32, -1 / 32]],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6, 0.0], 4)
    reg["classic-rk4"] = _explicit(
        "classic-rk4", [[1 / 2], [0.0, 1 / 2], [0.0, 0.0, 1.0]], [1 / 6, 1 / 3, 1 / 3, 1 / 6], 4)
    reg["cash-karp5"] = _explicit(
        "cash-karp5",
        [[1 / 5],
         [3 / 40, 9 / 40],
         [3 / 10, -9 / 10, 6 / 5],
         [-11 / 54, 5 / 2, -70 / 27, 35 / 27],
         [1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096]],
        [37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771], 5)
    # six-stage fourth-order two-register method (LDDC4()6[2R], Calvo et al.)
    b6 = np.array([0.10893125722541, 0.13201701492152, 0.38911623225517,
                   -0.59203884581148, 0.47385028714844, 0.48812405426094])
    g6 = np.array([0.17985400977138, 0.14081893152111, 0.08255631629428,
                   0.65804425034331, 0.31862993413251])
    reg["rk4-6stage-lowstorage"] = _two_register("rk4-6stage-lowstorage", b6[:-1] + g6, b6, 4)
    reg["ark436-imex-pair"] = _ark436()
    return reg


def _ark436():
    """ARK4(3)6L[2]SA additive pair (Kennedy and Carpenter)."""
    g = 1 / 4
    c = np.array([0.0, 1 / 2, 83 / 250, 31 / 50, 17 / 20, 1.0])
    Ae = np.zeros((6, 6))
    Ae[1, 0] = 1 / 2
    Ae[2, :2] = [13861 / 62500, 6889 / 62500]
    Ae[3, :3] = [-116923316275 / 2393684061468, -2731218467317 / 15368042101831,
                 9408046702089 / 11113171139209]
    Ae[4, :4] = [-451086348788 / 2902428689909, -2682348792572 / 7519795681897,
                 12662868775082 / 11960479115383, 3355817975965 / 11060851509271]
    Ae[5, :5] = [647845179188 / 3216320057751, 73281519250 / 8382639484533,
                 552539513391 / 3454668386233, 3354512671639 / 8306763924573, 4040 / 17871]
    Ai = np.zeros((6, 6))
    Ai[1, :2] = [1 / 4, g]
    Ai[2, :3] = [8611 / 62500, -1743 / 31250, g]
    Ai[3, :4] = [5012029 / 34652500, -654441 / 2922500, 174375 / 388108, g]
    Ai[4, :5] = [15267082809 / 155376265600, -71443401 / 120774400, 730878875 / 902184768,
                 2285395 / 8070912, g]
    b = np.array([82889 / 524892, 0.0, 15625 / 83664, 69875 / 102672, -2260 / 8211, g])
    Ai[5, :] = b
    exp = ButcherTable("ark436-explicit", Ae, b, c, 4, "explicit")
    imp = ButcherTable("ark436-implicit", Ai, b, c, 4, "diagonally-implicit")
    return ArkPair("ark436-imex-pair", exp, imp, 4)


@lru_cache(maxsize=1)
def _registry():
    reg = _build()
    for name, entry in reg.items():
        tables = (entry.explicit_table, entry.implicit_table) if isinstance(entry, ArkPair) else (entry,)
        for tab in tables:
            if tab.row_sum_defect() > ROW_SUM_TOL:
                raise AssertionError(f"{tab.name}: row sums differ from c")
            check = verify_order_conditions(tab, min(tab.order, 4))
            if not check:
                raise AssertionError(f"{tab.name}: order conditions fail ({check.max_residual:.2e})")
    return reg


def method_names() -> list[str]:
    return sorted(_registry())


def registry_lookup(name: str):
    """Return the :class:`ButcherTable` or :class:`ArkPair` registered as ``name``."""
    reg = _registry()
    try:
        return reg[name]
    except KeyError:
        raise UnknownMethodError(name, reg) from None
