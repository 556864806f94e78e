"""Lax-Friedrichs convection step with explicit source splitting."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .expr import Expr, ExprDomainError
from .problem import DiscreteData, Grid, Ibvp

__all__ = [
    "DiscreteSolution",
    "SchemeBreakdown",
    "numerical_flux",
    "convection_step",
    "source_step",
    "run",
    "monotone_coefficients",
]


class SchemeBreakdown(FloatingPointError):
    """A non-finite value appeared during time stepping."""

    def __init__(self, n: int, j: int):
        super().__init__(f"non-finite value at step n={n}, cell j={j}")
        self.n = n
        self.j = j


@dataclass(frozen=True)
class DiscreteSolution:
    """Space-time array ``u[n, j-1] = u_j^n`` plus the boundary sequences.

    ``intermediate[n]`` holds the half-step row ``u^{n+1/2}`` when it was
    kept.
    """

    u: np.ndarray
    ua: np.ndarray
    ub: np.ndarray
    grid: Grid
    intermediate: np.ndarray | None = None

    def extended(self, n: int) -> np.ndarray:
        """Row ``n`` with the ghost values ``u_0 = ua[n]``, ``u_{N+1} = ub[n]``."""
        return np.concatenate(([self.ua[n]], self.u[n], [self.ub[n]]))

    @property
    def NT(self) -> int:
        return self.grid.NT


def numerical_flux(fl: Expr, t, x_iface, u_left, u_right, alpha: float):
    """``(f(t,x,uL) + f(t,x,uR))/2 - alpha/2 (uR - uL)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return 0.5 * (fl(t, x_iface, u_left) + fl(t, x_iface, u_right)) - 0.5 * alpha * (
        np.asarray(u_right) - np.asarray(u_left)
    )


def _interface_fluxes(ext: np.ndarray, tn: float, grid: Grid, fl: Expr) -> np.ndarray:
    xi = grid.interfaces
    return numerical_flux(fl, tn, xi, ext[:-1], ext[1:], grid.alpha)


def convection_step(state_row, ua_n: float, ub_n: float, tn: float, grid: Grid, fl: Expr) -> np.ndarray:
    """Half step ``u^{n+1/2}``; the input row is not modified."""
    row = np.asarray(state_row, dtype=float)
    ext = np.concatenate(([ua_n], row, [ub_n]))
    F = _interface_fluxes(ext, tn, grid, fl)
    return row - grid.lam * (F[1:] - F[:-1])


def source_step(half_row, tn: float, grid: Grid, src: Expr) -> np.ndarray:
    half = np.asarray(half_row, dtype=float)
    return half + src(tn, grid.centers, half) * grid.dt


def run(
    p: Ibvp,
    grid: Grid,
    data: DiscreteData,
    keep_intermediate: bool = False,
    truncate_on_breakdown: bool = False,
    ceiling: float = np.inf,
) -> DiscreteSolution:
    """March the scheme from ``t = 0`` to ``t = NT * dt``.

    Raises :class:`SchemeBreakdown` at the first non-finite cell value, or,
    with ``truncate_on_breakdown``, returns the levels computed so far on a
    grid whose ``NT`` is cut accordingly.  Values above ``ceiling`` in
    magnitude also count as a breakdown.
    """
    N, NT = grid.N, grid.NT
    if data.u0.shape != (N,) or data.ua.shape[0] < NT:
        raise ValueError("data were not discretized on this grid")
    u = np.empty((NT + 1, N))
    u[0] = data.u0
    half = np.empty((NT, N)) if keep_intermediate else None
    for n in range(NT):
        tn = n * grid.dt
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                h = convection_step(u[n], data.ua[n], data.ub[n], tn, grid, p.f)
                nxt = source_step(h, tn, grid, p.g)
            bad = ~(np.abs(nxt) <= ceiling)
            if bad.any():
                raise SchemeBreakdown(n + 1, int(np.argmax(bad)) + 1)
        except (SchemeBreakdown, ExprDomainError) as exc:
            if not truncate_on_breakdown:
                if isinstance(exc, SchemeBreakdown):
                    raise
                raise SchemeBreakdown(n + 1, int(np.argmax(np.abs(u[n]))) + 1) from exc
            grid = replace(grid, NT=n)
            u = u[: n + 1]
            half = None if half is None else half[:n]
            break
        if keep_intermediate:
            half[n] = h
        u[n + 1] = nxt
    u.setflags(write=False)
    if half is not None:
        half.setflags(write=False)
    return DiscreteSolution(u, data.ua[: grid.NT + 1], data.ub[: grid.NT + 1], grid, half)


def _divided(num, den):
    out = np.zeros_like(num)
    nz = den != 0.0
    out[nz] = num[nz] / den[nz]
    return out


def monotone_coefficients(state_row, ua_n: float, ub_n: float, tn: float, grid: Grid, fl: Expr):
    """Incremental coefficients ``(beta, gamma, delta)`` for cells ``1..N``.

    Each is a divided difference of the numerical flux; equal neighbouring
    states give 0.
    """
    row = np.asarray(state_row, dtype=float)
    ext = np.concatenate(([ua_n], row, [ub_n]))
    xi = grid.interfaces
    lam, al = grid.lam, grid.alpha
    left, mid, right = ext[:-2], ext[1:-1], ext[2:]
    x_lo, x_hi = xi[:-1], xi[1:]
    F = lambda x, v, w: numerical_flux(fl, tn, x, v, w, al)  # noqa: E731
    beta = lam * _divided(F(x_lo, mid, mid) - F(x_lo, left, mid), mid - left)
    gamma = -lam * _divided(F(x_hi, mid, right) - F(x_hi, mid, mid), right - mid)
    delta = lam * _divided(F(x_hi, mid, mid) - F(x_hi, left, mid), mid - left)
    return beta, gamma, delta
