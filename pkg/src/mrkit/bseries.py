"""Colored rooted trees and elementary weights for additive and multirate methods.

A tree is a pair ``(color, children)`` where ``children`` is a sorted tuple of
trees.  Colors label the right-hand-side partition at each node: ``"F"`` fast,
``"I"`` implicit slow, ``"E"`` explicit slow.  A method has order ``p`` when its
elementary weight equals ``1 / density(t)`` for every tree with at most ``p``
nodes.

For infinitesimal (MRI) methods the fast partition is integrated exactly, so
stage weights inside a fast solve are polynomials in normalized time.  Time is
carried by the fast partition, which makes the autonomous conditions cover the
non-autonomous case exactly.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from numpy.polynomial import polynomial as P


def _order(tree) -> int:
    return 1 + sum(_order(ch) for ch in tree[1])


def density(tree) -> int:
    """Tree factorial: ``|t|`` times the densities of the subtrees."""
    out = _order(tree)
    for ch in tree[1]:
        out *= density(ch)
    return out


@lru_cache(maxsize=None)
def colored_trees(max_order: int, colors: tuple[str, ...]) -> tuple:
    """All colored rooted trees with at most ``max_order`` nodes, by increasing order."""
    by_order: dict[int, list] = {1: [(c, ()) for c in colors]}
    flat: list = list(by_order[1])
    for n in range(2, max_order + 1):
        forests = _forests(n - 1, flat)
        by_order[n] = [(c, f) for c in colors for f in forests]
        flat.extend(by_order[n])
    return tuple(flat)


def _forests(m: int, trees: list) -> list[tuple]:
    """Multisets of trees (as sorted tuples) whose orders sum to ``m``."""
    sized = [(t, _order(t)) for t in trees if _order(t) <= m]
    out = []
    for k in range(1, m + 1):
        for combo in combinations_with_replacement(range(len(sized)), k):
            if sum(sized[i][1] for i in combo) == m:
                out.append(tuple(sorted((sized[i][0] for i in combo), key=repr)))
    return out


def additive_weights(tables: dict, max_order: int) -> dict:
    """Elementary weights of an additive Runge-Kutta method.

    Parameters
    ----------
    tables : dict
        Maps a color to ``(A, b)``.  All tables share the stage count.
    max_order : int
        Largest tree order considered.

    Returns
    -------
    dict
        Tree -> elementary weight ``sum_j b^{color}_j prod phi_j(children)``.
    """
    colors = tuple(sorted(tables))
    trees = colored_trees(max_order, colors)
    s = len(next(iter(tables.values()))[1])
    stage = {}  # tree -> vector of stage weights
    out = {}
    for t in trees:
        prod = np.ones(s)
        for ch in t[1]:
            prod = prod * stage[ch]
        A, b = tables[t[0]]
        stage[t] = np.asarray(A, dtype=float) @ prod
        out[t] = float(np.asarray(b, dtype=float) @ prod)
    return out


def additive_residuals(tables: dict, max_order: int) -> dict:
    """Order-condition residuals ``weight - 1/density`` for every tree."""
    w = additive_weights(tables, max_order)
    return {t: v - 1.0 / density(t) for t, v in w.items()}


def _integrate0(p: np.ndarray) -> np.ndarray:
    """Antiderivative vanishing at zero."""
    return P.polyint(p)


def mri_weights(c, kinds, gamma, omega, max_order: int,
                colors: tuple[str, ...] = ("E", "F", "I")) -> dict:
    """Elementary weights of a solve-decoupled IMEX-MRI-GARK method.

    Parameters
    ----------
    c : array_like, shape (s,)
        Slow abscissae.
    kinds : sequence of str
        Per-stage kind; only ``"fast-ivp"`` stages evolve the fast partition.
    gamma, omega : ndarray, shape (ndeg, s, s)
        Coupling matrices for the implicit and explicit slow partitions.  For
        fast-ivp stages row ``i`` of ``gamma[k]`` multiplies ``tau**k``; for
        ``Delta c_i = 0`` stages the degree-integrated sum is used.
    max_order : int
        Largest tree order.

    Returns
    -------
    dict
        Tree -> weight of the final stage.
    """
    c = np.asarray(c, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    omega = np.asarray(omega, dtype=float)
    s = len(c)
    ndeg = gamma.shape[0]
    trees = colored_trees(max_order, tuple(sorted(colors)))
    # degree-integrated coefficients
    scale = 1.0 / np.arange(1, ndeg + 1)
    gbar = np.tensordot(scale, gamma, axes=1)
    wbar = np.tensordot(scale, omega, axes=1)
    phi = [dict.fromkeys(trees, 0.0)]
    for i in range(1, s):
        dc = c[i] - c[i - 1]
        prev = phi[i - 1]
        cur: dict = {}
        if kinds[i] == "fast-ivp":
            # per-column antiderivative polynomials of the forcing coefficients
            gint = [_integrate0(gamma[:, i, j]) for j in range(s)]
            wint = [_integrate0(omega[:, i, j]) for j in range(s)]
            poly: dict = {}
            for t in trees:
                color, kids = t
                if color == "F":
                    prod = np.array([1.0])
                    for ch in kids:
                        prod = P.polymul(prod, poly[ch])
                    val = P.polyadd(np.array([prev[t]]), dc * _integrate0(prod))
                else:
                    tab = gint if color == "I" else wint
                    val = np.array([prev[t]])
                    for j in range(i):
                        prod = 1.0
                        for ch in kids:
                            prod *= phi[j][ch]
                        if prod != 0.0:
                            val = P.polyadd(val, prod * tab[j])
                poly[t] = val
                cur[t] = float(np.sum(val))
        else:
            for t in trees:
                color, kids = t
                val = prev[t]
                if color != "F":
                    tab = gbar if color == "I" else wbar
                    for j in range(i + 1):
                        coef = tab[i, j]
                        if coef == 0.0:
                            continue
                        src = cur if j == i else phi[j]
                        prod = 1.0
                        for ch in kids:
                            prod *= src[ch]
                        val += coef * prod
                cur[t] = val
        phi.append(cur)
    return phi[-1]


def mri_residuals(c, kinds, gamma, omega, max_order: int,
                  colors: tuple[str, ...] = ("E", "F", "I")) -> dict:
    """Order-condition residuals of an MRI coupling (exact fast solves)."""
    w = mri_weights(c, kinds, gamma, omega, max_order, colors)
    return {t: v - 1.0 / density(t) for t, v in w.items()}
