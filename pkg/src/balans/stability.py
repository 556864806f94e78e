"""Paired solves measuring L1 distances against stability envelopes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import ENVELOPE_SLACK, Envelopes, l1_distance, tv_snapshot
from .expr import _axis_points, jet_arrays, sup_abs_on_box
from .problem import Ibvp, build_grid, discretize, lipschitz_constants
from .scheme import DiscreteSolution, run

__all__ = [
    "StabilityReport",
    "stability_bound",
    "data_dependence_bound",
    "run_pair",
    "run_data_pair",
    "COMPONENTS",
]

COMPONENTS = ("x_flux_term", "source_term", "u_flux_tv_term", "boundary_a_term", "boundary_b_term")

# composite Gauss-Legendre rule for the x-integrals
X_PANELS = 16
X_NODES = 4


@dataclass
class StabilityReport:
    """Measured L1 distances next to the stability bound, per checkpoint.

    Each checkpoint stores ``bound = exp_prefactor * sum(components)``.  The
    TV factor uses the discrete TV of the computed solutions; the
    ``bound_conservative`` column replaces it with the BV envelope.
    """

    checkpoints: list = field(default_factory=list)
    boxes: dict = field(default_factory=dict)
    kind: str = "flux-source"
    slack: float = ENVELOPE_SLACK

    @property
    def ok(self) -> bool:
        return all(c["measured"] <= c["bound"] * (1.0 + self.slack) for c in self.checkpoints)

    def to_dict(self) -> dict:
        return asdict(self)


def _x_rule(a: float, b: float):
    nodes, weights = np.polynomial.legendre.leggauss(X_NODES)
    edges = np.linspace(a, b, X_PANELS + 1)
    h = np.diff(edges)[:, None]
    xs = (edges[:-1, None] + 0.5 * h * (nodes[None, :] + 1.0)).ravel()
    ws = (0.5 * h * weights[None, :]).ravel()
    return xs, ws


def _same_data(p1: Ibvp, p2: Ibvp) -> bool:
    return (
        p1.u_o.root == p2.u_o.root
        and p1.u_a.root == p2.u_a.root
        and p1.u_b.root == p2.u_b.root
        and (p1.a, p1.b, p1.T) == (p2.a, p2.b, p2.T)
    )


def _trapezoid_cumulative(vals: np.ndarray, dt: float) -> np.ndarray:
    """Entry ``n`` is the trapezoid integral over levels ``0..n``."""
    mids = 0.5 * (vals[1:] + vals[:-1]) * dt
    return np.concatenate(([0.0], np.cumsum(mids)))


class _PairIntegrands:
    """Per-level integrands of the stability bound for two problems."""

    def __init__(self, p1, p2, sol1, sol2, samples):
        self.p1, self.p2 = p1, p2
        self.sol1, self.sol2 = sol1, sol2
        self.samples = samples
        self.env1 = Envelopes(p1, sol1, samples)
        self.env2 = Envelopes(p2, sol2, samples)
        self.df = p2.f - p1.f
        self.dg = p1.g - p2.g
        self.xs, self.ws = _x_rule(p1.a, p1.b)

    def box(self, s: float):
        u1 = self.env1.U(s)[0]
        u2 = self.env2.U(s)[0]
        return u1, u2, max(u1, u2)

    def _x_integral_of_usup(self, e, selector, s, M):
        us = _axis_points(-M, M, self.samples) if "u" in e.variables else np.array([0.0])
        X, Uu = np.meshgrid(self.xs, us, indexing="ij")
        if selector == "value":
            vals = np.broadcast_to(e(s, X, Uu), X.shape)
        else:
            vals = jet_arrays(e, s, X, Uu, need_xx=False)[selector]
        return float((np.max(np.abs(vals), axis=1) * self.ws).sum())

    def at_level(self, m: int) -> dict:
        g = self.sol1.grid
        s = m * g.dt
        _, _, M = self.box(s)
        p = self.p1
        full = [(s, s), (p.a, p.b), (-M, M)]
        f_u = sup_abs_on_box(self.df, "d_u", full, self.samples)
        tv = min(tv_snapshot(self.sol1, m), tv_snapshot(self.sol2, m))
        if m == 0:
            cx = tv
        else:
            cx = min(self.env1.Cx(m)["Cx"], self.env2.Cx(m)["Cx"])
        return {
            "x_flux_term": self._x_integral_of_usup(self.df, "d_x", s, M),
            "source_term": self._x_integral_of_usup(self.dg, "value", s, M),
            "u_flux_tv_term": f_u * tv,
            "u_flux_cx_term": f_u * cx,
            "boundary_a_term": 2.0 * sup_abs_on_box(self.df, "value", [(s, s), (p.a, p.a), (-M, M)], self.samples),
            "boundary_b_term": 2.0 * sup_abs_on_box(self.df, "value", [(s, s), (p.b, p.b), (-M, M)], self.samples),
        }

    def prefactor(self, t: float) -> float:
        M = self.box(t)[2]
        box = [(0.0, t), (self.p1.a, self.p1.b), (-M, M)]
        gu1 = sup_abs_on_box(self.p1.g, "d_u", box, self.samples)
        gu2 = sup_abs_on_box(self.p2.g, "d_u", box, self.samples)
        return math.exp(t * min(gu1, gu2))


def _check_pair(p1, p2, sol1, sol2):
    if not _same_data(p1, p2):
        raise ValueError("the two problems must share u_o, u_a, u_b, a, b and T")
    if sol1.grid != sol2.grid:
        raise ValueError("the two solutions must live on the same grid")


def _report(pi: _PairIntegrands, levels, slack) -> StabilityReport:
    g = pi.sol1.grid
    top = max(levels) if levels else 0
    rows = [pi.at_level(m) for m in range(top + 1)]
    keys = list(COMPONENTS) + ["u_flux_cx_term"]
    cum = {k: _trapezoid_cumulative(np.array([r[k] for r in rows]), g.dt) for k in keys}
    rep = StabilityReport(slack=slack)
    for n in levels:
        t = n * g.dt
        comps = {k: float(cum[k][n]) for k in COMPONENTS}
        pref = pi.prefactor(t) if n > 0 else 1.0
        comps["exp_prefactor"] = pref
        total = sum(comps[k] for k in COMPONENTS)
        cons = total - comps["u_flux_tv_term"] + float(cum["u_flux_cx_term"][n])
        u1, u2, M = pi.box(t)
        rep.checkpoints.append(
            {
                "t": t,
                "n": n,
                "measured": l1_distance(pi.sol1, pi.sol2, n),
                "bound": pref * total,
                "bound_conservative": pref * cons,
                "components": comps,
                "boxes": {"U1": [-u1, u1], "U2": [-u2, u2], "U": [-M, M]},
            }
        )
        rep.boxes[repr(t)] = {"U1": [-u1, u1], "U2": [-u2, u2], "U": [-M, M]}
    return rep


def stability_bound(
    p1: Ibvp,
    p2: Ibvp,
    sol1: DiscreteSolution,
    sol2: DiscreteSolution,
    t: float,
    samples: int = 33,
) -> dict:
    """One checkpoint of the flux/source stability estimate at the level nearest ``t``.

    Time integrals use the trapezoid rule on the solver levels; u-sups are
    taken over ``U(s) = U1(s) u U2(s)`` from the L-infinity envelopes.
    """
    _check_pair(p1, p2, sol1, sol2)
    n = sol1.grid.level(t)
    return _report(_PairIntegrands(p1, p2, sol1, sol2, samples), [n], ENVELOPE_SLACK).checkpoints[0]


def _common_grid(p1, p2, N, cfl_fraction=1.0, samples=33):
    alpha = max(build_grid(p1, N, samples=samples).alpha, build_grid(p2, N, samples=samples).alpha)
    return build_grid(p1, N, alpha=alpha, cfl_fraction=cfl_fraction, samples=samples)


def run_pair(
    p1: Ibvp,
    p2: Ibvp,
    N: int,
    checkpoints=None,
    samples: int = 33,
    quad_points: int = 3,
    boundary: str = "average",
    slack: float = ENVELOPE_SLACK,
) -> StabilityReport:
    """Solve both problems on a grid valid for both fluxes and report the bound.

    ``checkpoints`` default to ``T/4, T/2, T``; each maps to the nearest level.
    """
    if not _same_data(p1, p2):
        raise ValueError("the two problems must share u_o, u_a, u_b, a, b and T")
    grid = _common_grid(p1, p2, N, samples=samples)
    data = discretize(p1, grid, quad_points, boundary)
    sol1 = run(p1, grid, data)
    sol2 = sol1 if p1 == p2 else run(p2, grid, data)
    if checkpoints is None:
        checkpoints = [p1.T / 4, p1.T / 2, p1.T]
    levels = sorted({grid.level(t) for t in checkpoints})
    return _report(_PairIntegrands(p1, p2, sol1, sol2, samples), levels, slack)


def data_dependence_bound(
    p: Ibvp,
    data1,
    data2,
    sol1: DiscreteSolution,
    sol2: DiscreteSolution,
    t: float,
    samples: int = 33,
):
    """``(measured, bound, parts)`` for Lipschitz dependence on the data.

    The data distances are the discrete ones the scheme consumed: ``dx``
    weighted for the initial datum and ``dt`` weighted over levels
    ``0..n-1`` for the boundary data.  ``L_f`` and ``L_g`` are sampled over
    the range spanned by both solutions and their boundary values.
    """
    if sol1.grid != sol2.grid:
        raise ValueError("the two solutions must live on the same grid")
    g = sol1.grid
    n = g.level(t)
    tn = n * g.dt
    d_o = g.dx * float(np.abs(data1.u0 - data2.u0).sum())
    d_a = g.dt * float(np.abs(data1.ua[:n] - data2.ua[:n]).sum())
    d_b = g.dt * float(np.abs(data1.ub[:n] - data2.ub[:n]).sum())
    vals = np.concatenate([sol1.u.ravel(), sol2.u.ravel(), sol1.ua, sol2.ua, sol1.ub, sol2.ub])
    box = (float(vals.min()), float(vals.max()))
    if n == 0:
        lf, lg = lipschitz_constants(p, g.horizon, box, samples)
    else:
        lf, lg = lipschitz_constants(p, tn, box, samples)
    bound = math.exp(lg * tn) * (d_o + lf * (d_a + d_b))
    parts = {"u_o": d_o, "u_a": d_a, "u_b": d_b, "L_f": lf, "L_g": lg, "u_box": list(box)}
    return l1_distance(sol1, sol2, n), bound, parts


def run_data_pair(
    p: Ibvp,
    q: Ibvp,
    N: int,
    checkpoints=None,
    samples: int = 33,
    quad_points: int = 3,
    boundary: str = "average",
    slack: float = ENVELOPE_SLACK,
) -> StabilityReport:
    """Same flux and source, different data: paired solve against the data-dependence bound."""
    if p.f.root != q.f.root or p.g.root != q.g.root or (p.a, p.b, p.T) != (q.a, q.b, q.T):
        raise ValueError("data-dependence pairs must share f, g, a, b and T")
    grid = _common_grid(p, q, N, samples=samples)
    d1 = discretize(p, grid, quad_points, boundary)
    d2 = discretize(q, grid, quad_points, boundary)
    sol1 = run(p, grid, d1)
    sol2 = run(q, grid, d2)
    if checkpoints is None:
        checkpoints = [p.T / 4, p.T / 2, p.T]
    rep = StabilityReport(kind="data", slack=slack)
    for n in sorted({grid.level(t) for t in checkpoints}):
        t = n * grid.dt
        measured, bound, parts = data_dependence_bound(p, d1, d2, sol1, sol2, t, samples)
        rep.checkpoints.append({"t": t, "n": n, "measured": measured, "bound": bound, "components": parts})
    return rep
