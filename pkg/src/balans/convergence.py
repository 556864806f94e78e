"""Nested-grid self-convergence studies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import l1_overlap
from .problem import Ibvp, build_grid, discretize
from .scheme import run

__all__ = ["ConvergenceRow", "self_convergence", "check_nested"]


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    N_fine: int
    t: float
    error: float
    order: float | None


def check_nested(N_list) -> list[int]:
    Ns = [int(n) for n in N_list]
    if len(Ns) < 2:
        raise ValueError("need at least two resolutions")
    for lo, hi in zip(Ns, Ns[1:]):
        if not hi > lo or hi % lo:
            raise ValueError(f"resolutions must increase and nest: {lo} -> {hi}")
    return Ns


def self_convergence(
    p: Ibvp,
    N_list,
    alpha: float | None = None,
    cfl_fraction: float = 1.0,
    quad_points: int = 3,
    boundary: str = "average",
) -> list[ConvergenceRow]:
    """L1 distances between consecutive resolutions at a common final time.

    All grids share ``alpha`` and ``lam``, so the coarsest final level is a
    level of every finer grid.  Distances are exact overlap integrals of the
    piecewise-constant solutions.  ``order`` compares each error with the
    previous one.
    """
    Ns = check_nested(N_list)
    grids = []
    for N in Ns:
        g = build_grid(p, N, alpha=alpha, cfl_fraction=cfl_fraction)
        alpha = g.alpha
        grids.append(g)
    t_end = grids[0].horizon
    rows_u = []
    for g in grids:
        n = int(round(t_end / g.dt))
        sol = run(p, g, discretize(p, g, quad_points, boundary))
        rows_u.append((sol.u[n], g.interfaces))
    out = []
    prev = None
    for i in range(len(Ns) - 1):
        (u1, e1), (u2, e2) = rows_u[i], rows_u[i + 1]
        err = l1_overlap(u1, e1, u2, e2)
        order = None
        if prev is not None and prev > 0 and err > 0:
            order = math.log(prev / err) / math.log(Ns[i] / Ns[i - 1])
        out.append(ConvergenceRow(Ns[i], Ns[i + 1], t_end, err, order))
        prev = err
    return out
