"""Problem instances, grids and data discretization."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .expr import Expr, as_expr, sup_abs_on_box

__all__ = [
    "Ibvp",
    "Grid",
    "DiscreteData",
    "make_problem",
    "catalog",
    "CATALOG",
    "build_grid",
    "discretize",
    "lipschitz_constants",
    "data_sup",
    "SUP_SAFETY",
]

#: multiplicative margin on sampled sup-norms when they set the CFL viscosity
SUP_SAFETY = 1.001
DATA_SAMPLES = 257


@dataclass(frozen=True)
class Ibvp:
    """``u_t + (f(t,x,u))_x = g(t,x,u)`` on ``]a,b[`` up to time ``T``."""

    f: Expr
    g: Expr
    u_o: Expr
    u_a: Expr
    u_b: Expr
    a: float
    b: float
    T: float
    name: str = ""

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if not self.T > 0:
            raise ValueError(f"need T > 0, got {self.T}")
        for label, e, allowed in (
            ("u_o", self.u_o, {"x"}),
            ("u_a", self.u_a, {"t"}),
            ("u_b", self.u_b, {"t"}),
        ):
            extra = e.variables - allowed
            if extra:
                raise ValueError(f"{label} may only depend on {sorted(allowed)}, uses {sorted(extra)}")
        for label, e in (("f", self.f), ("g", self.g)):
            if e.is_piecewise:
                warnings.warn(
                    f"{label} = {e.source!r} uses a piecewise builtin; "
                    "the C2 regularity the estimates assume may fail",
                    stacklevel=3,
                )
        xs = np.linspace(self.a, self.b, DATA_SAMPLES)
        ts = np.linspace(0.0, self.T, DATA_SAMPLES)
        for label, vals in (
            ("u_o", self.u_o(0.0, xs, 0.0)),
            ("u_a", self.u_a(ts, 0.0, 0.0)),
            ("u_b", self.u_b(ts, 0.0, 0.0)),
        ):
            vals = np.broadcast_to(vals, xs.shape)
            if not np.all(np.isfinite(vals)) or not np.isfinite(np.abs(np.diff(vals)).sum()):
                raise ValueError(f"{label} is not bounded with finite variation on its domain")

    @property
    def length(self) -> float:
        return self.b - self.a

    def with_data(self, u_o=None, u_a=None, u_b=None) -> "Ibvp":
        changes = {
            k: as_expr(v) for k, v in (("u_o", u_o), ("u_a", u_a), ("u_b", u_b)) if v is not None
        }
        return replace(self, **changes)


def make_problem(f, g="0", u_o="0", u_a="0", u_b="0", a=0.0, b=1.0, T=1.0, name="") -> Ibvp:
    """Build an :class:`Ibvp` from expression strings (or parsed expressions)."""
    return Ibvp(
        f=as_expr(f),
        g=as_expr(g),
        u_o=as_expr(u_o),
        u_a=as_expr(u_a),
        u_b=as_expr(u_b),
        a=float(a),
        b=float(b),
        T=float(T),
        name=name,
    )


CATALOG = {
    # exact solution u(t, x) = t; the boundary data are its traces
    "advection-x": dict(f="-x", g="0", u_o="0", u_a="t", u_b="t", a=0, b=1, T=1),
    "lwr-ramp": dict(f="u*(1-u)", g="0", u_o="0", u_a="min(4*t, 0.4)", u_b="0", a=0, b=1, T=0.5),
    # the shock leaves through x = 1 at t = 1
    "burgers-riemann": dict(
        f="u^2/2", g="0", u_o="if(0.5 - x, 1, 0)", u_a="1", u_b="0", a=0, b=1, T=1.5
    ),
    "decay": dict(
        f="u^2/2", g="-u", u_o="1 + 0.5*sin(2*pi*x)", u_a="exp(-t)", u_b="exp(-t)", a=0, b=1, T=1
    ),
    # smooth up to the breaking time 2/pi
    "burgers-smooth": dict(
        f="u^2/2", g="0", u_o="0.5 + 0.25*sin(2*pi*x)", u_a="0.5", u_b="0.5", a=0, b=1, T=0.3
    ),
}


def catalog(name: str) -> Ibvp:
    try:
        spec = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog problem {name!r}; known: {sorted(CATALOG)}") from None
    return make_problem(name=name, **spec)


def data_sup(p: Ibvp, t: float, samples: int = DATA_SAMPLES) -> float:
    """Sampled ``max(|u_o|, sup_[0,t] |u_a|, sup_[0,t] |u_b|)``."""
    box_x = [(0.0, 0.0), (p.a, p.b), (0.0, 0.0)]
    box_t = [(0.0, t), (0.0, 0.0), (0.0, 0.0)]
    return max(
        sup_abs_on_box(p.u_o, "value", box_x, samples),
        sup_abs_on_box(p.u_a, "value", box_t, samples),
        sup_abs_on_box(p.u_b, "value", box_t, samples),
    )


def _data_range(p: Ibvp, samples: int = DATA_SAMPLES) -> tuple[float, float]:
    xs = np.linspace(p.a, p.b, samples)
    ts = np.linspace(0.0, p.T, samples)
    vals = np.concatenate(
        [
            np.broadcast_to(p.u_o(0.0, xs, 0.0), xs.shape),
            np.broadcast_to(p.u_a(ts, 0.0, 0.0), ts.shape),
            np.broadcast_to(p.u_b(ts, 0.0, 0.0), ts.shape),
        ]
    )
    return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class Grid:
    """Uniform space-time mesh with Lax-Friedrichs viscosity ``alpha``."""

    a: float
    b: float
    N: int
    dx: float
    dt: float
    lam: float
    alpha: float
    NT: int
    unsafe: bool = False

    @property
    def centers(self) -> np.ndarray:
        return self.a + (np.arange(1, self.N + 1) - 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        return self.a + np.arange(0, self.N + 1) * self.dx

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.NT + 1) * self.dt

    @property
    def horizon(self) -> float:
        """Time actually covered, ``NT * dt``."""
        return self.NT * self.dt

    def level(self, t: float) -> int:
        """Index of the time level closest to ``t`` (clamped to ``[0, NT]``)."""
        return int(min(max(round(t / self.dt), 0), self.NT))


def estimate_lf(p: Ibvp, samples: int = 33) -> tuple[float, tuple[float, float]]:
    """Sampled ``L_f(T)`` over a u-range guaranteed to contain the scheme's values.

    The range is the data range widened by the growth the L-infinity
    estimate allows over ``[0, T]``; for ``f = f(u)``, ``g = 0`` it is the
    data range itself.
    """
    lo, hi = _data_range(p)
    D = max(abs(lo), abs(hi))
    tx = [(0.0, p.T), (p.a, p.b), (0.0, 0.0)]
    c1 = sup_abs_on_box(p.f, "d_x", tx, samples) + sup_abs_on_box(p.g, "value", tx, samples)
    M = D
    try:
        for _ in range(2):
            box = [(0.0, p.T), (p.a, p.b), (-M, M)]
            c2 = sup_abs_on_box(p.f, "d_xu", box, samples) + sup_abs_on_box(p.g, "d_u", box, samples)
            M = (D + p.T * c1) * math.exp(c2 * p.T)
    except (OverflowError, ArithmeticError):
        M = math.inf
    if not math.isfinite(M) or M > 1e12:
        warnings.warn(
            "the L-infinity envelope is unbounded on [0, T]; L_f is estimated on the data range only",
            stacklevel=3,
        )
        M = D
    widen = M - D
    u_box = (lo - widen, hi + widen)
    lf = sup_abs_on_box(p.f, "d_u", [(0.0, p.T), (p.a, p.b), u_box], samples)
    return lf, u_box


def build_grid(
    p: Ibvp,
    N: int,
    alpha: float | None = None,
    cfl_fraction: float = 1.0,
    unsafe: bool = False,
    samples: int = 33,
) -> Grid:
    """Mesh with ``lam = cfl_fraction / (3 alpha)``.

    ``alpha`` defaults to ``max(1, 1.001 * L_f)``.  ``cfl_fraction`` above 1
    breaks the monotonicity the estimates rely on and is refused unless
    ``unsafe`` is set (a debugging aid for the audits).
    """
    if int(N) != N or N < 2:
        raise ValueError(f"need an integer N >= 2, got {N}")
    N = int(N)
    if not cfl_fraction > 0:
        raise ValueError("cfl_fraction must be positive")
    if cfl_fraction > 1 and not unsafe:
        raise ValueError(f"cfl_fraction={cfl_fraction} violates the CFL condition")
    lf, _ = estimate_lf(p, samples)
    floor = max(1.0, lf)
    if alpha is None:
        alpha = max(1.0, SUP_SAFETY * lf)
    elif alpha < floor:
        raise ValueError(f"alpha={alpha} below the CFL floor max(1, L_f) = {floor}")
    alpha = float(alpha)
    dx = (p.b - p.a) / N
    lam = cfl_fraction / (3.0 * alpha)
    dt = lam * dx
    NT = int(math.floor(p.T / dt * (1 + 1e-14)))
    return Grid(p.a, p.b, N, dx, dt, lam, alpha, NT, unsafe)


@dataclass(frozen=True)
class DiscreteData:
    """Cell averages of ``u_o`` and per-step values of the boundary data.

    ``ua``/``ub`` hold ``NT + 1`` levels: the scheme consumes ``0..NT-1``,
    the extra level closes the boundary jump sums at the final time.
    """

    u0: np.ndarray
    ua: np.ndarray
    ub: np.ndarray
    boundary: str = "average"
    quad_points: int = 3

    def __post_init__(self):
        for arr in (self.u0, self.ua, self.ub):
            arr.setflags(write=False)


def _averages(e: Expr, edges: np.ndarray, quad_points: int, axis: str) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    lo, hi = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes[None, :]
    vals = e(pts, 0.0, 0.0) if axis == "t" else e(0.0, pts, 0.0)
    vals = np.broadcast_to(vals, pts.shape)
    avg = 0.5 * (vals * weights[None, :]).sum(axis=1)
    # keep constant stretches exact; the weighted sum may round them
    flat = vals.max(axis=1) == vals.min(axis=1)
    return np.where(flat, vals[:, 0], avg)


def discretize(p: Ibvp, grid: Grid, quad_points: int = 3, boundary: str = "average") -> DiscreteData:
    """Gauss-Legendre cell averages of the initial datum and boundary data.

    ``boundary="average"`` averages ``u_a``, ``u_b`` over ``[t^n, t^{n+1}]``;
    ``boundary="point"`` samples them at ``t^n`` instead.
    """
    if quad_points < 1:
        raise ValueError("quad_points must be >= 1")
    u0 = _averages(p.u_o, grid.interfaces, quad_points, "x")
    levels = np.arange(grid.NT + 2) * grid.dt
    if boundary == "average":
        ua = _averages(p.u_a, levels, quad_points, "t")
        ub = _averages(p.u_b, levels, quad_points, "t")
    elif boundary == "point":
        ts = levels[:-1]
        ua = np.broadcast_to(p.u_a(ts, 0.0, 0.0), ts.shape).astype(float)
        ub = np.broadcast_to(p.u_b(ts, 0.0, 0.0), ts.shape).astype(float)
    else:
        raise ValueError(f"boundary must be 'average' or 'point', got {boundary!r}")
    return DiscreteData(np.array(u0), np.array(ua), np.array(ub), boundary, quad_points)


def lipschitz_constants(p: Ibvp, t: float, u_box, samples: int = 33) -> tuple[float, float]:
    """Sampled ``(L_f(t), L_g(t))`` over ``[0,t] x [a,b] x u_box``."""
    if not 0 < t:
        raise ValueError("t must be positive")
    box = [(0.0, t), (p.a, p.b), (float(u_box[0]), float(u_box[1]))]
    return (
        sup_abs_on_box(p.f, "d_u", box, samples),
        sup_abs_on_box(p.g, "d_u", box, samples),
    )
