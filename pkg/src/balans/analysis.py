"""Observed solution functionals, theoretical envelopes and entropy audits.

Semi-entropy notation: ``(s - k)^+ = max(s, k) - k`` and
``(s - k)^- = k - min(s, k)``; the numerical entropy fluxes are built from
``max(., k)`` (plus family) and ``min(., k)`` (minus family).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .expr import sup_abs_on_box
from .problem import Ibvp, data_sup
from .scheme import DiscreteSolution, numerical_flux

__all__ = [
    "linf_snapshot",
    "tv_snapshot",
    "time_lipschitz_quotient",
    "spacetime_bv",
    "l1_distance",
    "l1_overlap",
    "Envelopes",
    "envelope_U",
    "envelope_Cx",
    "envelope_Ct",
    "envelope_Cxt",
    "BoundsReport",
    "bounds_report",
    "EntropyReport",
    "entropy_residuals",
    "bln_residuals",
    "default_k_samples",
    "ENVELOPE_SLACK",
    "ENTROPY_TOL",
]

ENVELOPE_SLACK = 1e-9
ENTROPY_TOL = 1e-12


def pos(s):
    return np.maximum(s, 0.0)


def neg(s):
    return np.maximum(-s, 0.0)


def sgn_plus(s):
    return (s > 0).astype(float)


def sgn_minus(s):
    return -(s < 0).astype(float)


# ---------------------------------------------------------------------------
# observed functionals


def linf_snapshot(sol: DiscreteSolution, n: int) -> float:
    _check_level(sol, n)
    return float(np.max(np.abs(sol.u[n])))


def tv_snapshot(sol: DiscreteSolution, n: int) -> float:
    """Total variation of row ``n`` including the jumps to both ghost values."""
    _check_level(sol, n)
    return float(np.abs(np.diff(sol.extended(n))).sum())


def time_lipschitz_quotient(sol: DiscreteSolution, n: int) -> float:
    """``||u^n - u^{n-1}||_{L1} / dt``."""
    if not 1 <= n <= sol.NT:
        raise IndexError(f"level {n} outside 1..{sol.NT}")
    g = sol.grid
    return float(g.dx * np.abs(sol.u[n] - sol.u[n - 1]).sum() / g.dt)


def spacetime_bv(sol: DiscreteSolution, n: int) -> float:
    """Discrete space-time variation over levels ``0..n``, ghosts included."""
    if not 1 <= n <= sol.NT:
        raise IndexError(f"level {n} outside 1..{sol.NT}")
    return float(_spacetime_bv_all(sol, n)[n])


def _spacetime_bv_all(sol, upto=None):
    """Cumulative space-time variation, entry ``n`` covering levels ``0..n``."""
    g = sol.grid
    upto = sol.NT if upto is None else upto
    ext = np.column_stack([sol.ua[: upto + 1], sol.u[: upto + 1], sol.ub[: upto + 1]])
    space = g.dt * np.abs(np.diff(ext[:upto], axis=1)).sum(axis=1)
    time = g.dx * np.abs(np.diff(ext, axis=0)).sum(axis=1)
    return np.concatenate(([0.0], np.cumsum(space + time)))


def _check_level(sol, n):
    if not 0 <= n <= sol.NT:
        raise IndexError(f"level {n} outside 0..{sol.NT}")


def l1_distance(sol1: DiscreteSolution, sol2: DiscreteSolution, n: int) -> float:
    """``sum_j dx |u1_j^n - u2_j^n|`` on identical grids."""
    g1, g2 = sol1.grid, sol2.grid
    if (g1.N, g1.a, g1.b, g1.dt) != (g2.N, g2.a, g2.b, g2.dt):
        raise ValueError("l1_distance needs identical grids")
    return float(g1.dx * np.abs(sol1.u[n] - sol2.u[n]).sum())


def l1_overlap(u1, edges1, u2, edges2) -> float:
    """Exact L1 distance between two piecewise-constant functions."""
    edges1, edges2 = np.asarray(edges1, float), np.asarray(edges2, float)
    if not (np.isclose(edges1[0], edges2[0]) and np.isclose(edges1[-1], edges2[-1])):
        raise ValueError("piecewise-constant functions live on different intervals")
    br = np.union1d(edges1, edges2)
    mid = 0.5 * (br[:-1] + br[1:])
    i1 = np.clip(np.searchsorted(edges1, mid) - 1, 0, len(u1) - 1)
    i2 = np.clip(np.searchsorted(edges2, mid) - 1, 0, len(u2) - 1)
    return float((np.diff(br) * np.abs(np.asarray(u1)[i1] - np.asarray(u2)[i2])).sum())


# ---------------------------------------------------------------------------
# envelopes


class Envelopes:
    """Theoretical envelopes of a problem, evaluated from sampled sup-norms.

    With a solution attached, the data sups also include the discrete data
    the scheme consumed up to the requested time, and the discrete jump
    sums of the data become available for the BV envelopes.
    """

    def __init__(self, p: Ibvp, sol: DiscreteSolution | None = None, samples: int = 33):
        self.p = p
        self.sol = sol
        self.samples = samples
        self._cache: dict = {}
        if sol is not None:
            ua, ub = sol.ua, sol.ub
            self._ua_abs = np.maximum.accumulate(np.abs(ua))
            self._ub_abs = np.maximum.accumulate(np.abs(ub))
            self._u0_abs = float(np.max(np.abs(sol.u[0])))
            self._ja = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(ua)))))
            self._jb = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(ub)))))
            self._j0 = float(np.abs(np.diff(sol.extended(0))).sum())

    def _sup(self, which, selectors, box):
        e = self.p.f if which == "f" else self.p.g
        # axes the expression ignores do not change the sup
        box = [tuple(r) if v in e.variables else (r[0], r[0]) for v, r in zip("txu", box)]
        key = (which, tuple(selectors), tuple(box))
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = sup_abs_on_box(e, selectors, box, self.samples)
        return hit

    def level(self, n: int) -> float:
        return n * self.sol.grid.dt

    def data_sup(self, t: float) -> float:
        key = ("data", t)
        if key not in self._cache:
            d = data_sup(self.p, t)
            if self.sol is not None:
                n = self.sol.grid.level(t)
                d = max(d, self._u0_abs)
                if n >= 1:
                    d = max(d, self._ua_abs[n - 1], self._ub_abs[n - 1])
            self._cache[key] = d
        return self._cache[key]

    def ua_sup(self, t: float) -> float:
        key = ("ua", t)
        if key in self._cache:
            return self._cache[key]
        d = sup_abs_on_box(self.p.u_a, "value", [(0.0, t), (0.0, 0.0), (0.0, 0.0)], 257)
        if self.sol is not None:
            n = self.sol.grid.level(t)
            if n >= 1:
                d = max(d, self._ua_abs[n - 1])
        self._cache[key] = d
        return d

    def C1(self, t: float) -> float:
        box = [(0.0, t), (self.p.a, self.p.b), (0.0, 0.0)]
        return self._sup("f", ("d_x",), box)["d_x"] + self._sup("g", ("value",), box)["value"]

    def C2(self, t: float, M: float) -> float:
        box = [(0.0, t), (self.p.a, self.p.b), (-M, M)]
        return self._sup("f", ("d_xu",), box)["d_xu"] + self._sup("g", ("d_u",), box)["d_u"]

    def U(self, t: float) -> tuple[float, float, float]:
        """``(U, C1, C2)``; ``C2`` is sampled on the data box, then on the first-pass U box."""
        key = ("U", t)
        if key not in self._cache:
            D = self.data_sup(t)
            c1 = self.C1(t)
            u1 = (D + t * c1) * math.exp(self.C2(t, D) * t)
            c2 = self.C2(t, u1)
            self._cache[key] = ((D + t * c1) * math.exp(c2 * t), c1, c2)
        return self._cache[key]

    def sigma(self, t: float) -> dict:
        """Sup-norms over ``[0,t] x [a,b] x [-U(t), U(t)]``."""
        U = self.U(t)[0]
        box = [(0.0, t), (self.p.a, self.p.b), (-U, U)]
        f = self._sup("f", ("d_u", "d_x", "d_xu", "d_xx"), box)
        g = self._sup("g", ("value", "d_u", "d_x"), box)
        return {
            "f_u": f["d_u"],
            "f_x": f["d_x"],
            "f_xu": f["d_xu"],
            "f_xx": f["d_xx"],
            "g": g["value"],
            "g_u": g["d_u"],
            "g_x": g["d_x"],
            "U": U,
        }

    def _need_sol(self):
        if self.sol is None:
            raise ValueError("this envelope needs the discrete solution")

    def Cx(self, n: int) -> dict:
        self._need_sol()
        if n < 1:
            raise ValueError("Cx is defined for n >= 1")
        key = ("Cx", n)
        if key in self._cache:
            return self._cache[key]
        g = self.sol.grid
        t = self.level(n)
        U, c1, _ = self.U(t)
        s = self.sigma(t)
        c2 = s["f_xu"] + s["g_u"]
        L = self.p.length
        k1 = 2.0 * (self._sup("f", ("d_x",), [(0.0, t), (self.p.a, self.p.b), (0.0, 0.0)])["d_x"] + L * s["f_xx"])
        k2 = (
            2.0 * c1
            + L * (2.0 * s["f_xx"] + s["g_x"])
            + 0.5 * (3.0 * U + self.ua_sup(t)) * s["f_xu"] * g.dt
            + 2.0 * s["g_u"] * U
        )
        jumps = self._j0 + self._ja[n] + self._jb[n]
        cx = math.exp(c2 * t) * (jumps + t * k2)
        out = self._cache[key] = {"Cx": cx, "K1": k1, "K2": k2, "C2_sigma": c2, "jumps": jumps}
        return out

    def Ct(self, n: int) -> dict:
        s = self.sigma(self.level(n))
        cx = self.Cx(n)["Cx"]
        ct = (self.sol.grid.alpha + s["f_u"]) * cx + self.p.length * s["f_x"]
        return {"Ct": ct, "g_norm": s["g"], "Ct_plus_g": ct + s["g"]}

    def Cxt(self, n: int) -> float:
        g = self.sol.grid
        s = self.sigma(self.level(n))
        cx = self.Cx(n)["Cx"]
        tn = n * g.dt
        return (
            tn * (1.0 + g.alpha + s["f_u"]) * cx
            + tn * (self.p.length * s["f_x"] + s["g"])
            + g.dx * (self._ja[n] + self._jb[n])
        )


def envelope_U(p: Ibvp, t: float, samples: int = 33, sol: DiscreteSolution | None = None):
    """L-infinity envelope ``(U(t), C1(t), C2(t))``."""
    if not t > 0:
        raise ValueError("t must be positive")
    return Envelopes(p, sol, samples).U(t)


def envelope_Cx(p: Ibvp, sol: DiscreteSolution, n: int, samples: int = 33):
    """Space BV envelope ``(Cx(t^n), K2(t^n))`` from the discrete data jumps."""
    r = Envelopes(p, sol, samples).Cx(n)
    return r["Cx"], r["K2"]


def envelope_Ct(p: Ibvp, sol: DiscreteSolution, n: int, samples: int = 33) -> float:
    """``Ct(t^n) + ||g||`` over the L-infinity box, bound on the per-step L1 quotient."""
    if n < 1:
        raise ValueError("Ct is defined for n >= 1")
    return Envelopes(p, sol, samples).Ct(n)["Ct_plus_g"]


def envelope_Cxt(p: Ibvp, sol: DiscreteSolution, n: int, samples: int = 33) -> float:
    if n < 1:
        raise ValueError("Cxt is defined for n >= 1")
    return Envelopes(p, sol, samples).Cxt(n)


@dataclass
class BoundsReport:
    """Observed functionals next to their envelopes, one entry per checkpoint level."""

    checkpoints: list = field(default_factory=list)
    alpha: float = 0.0
    observed_lf: float = 0.0
    observed_range: tuple = (0.0, 0.0)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return asdict(self)


_PAIRS = (
    ("observed_linf", "bound_U"),
    ("observed_tv", "bound_Cx"),
    ("observed_time_lipschitz", "bound_Ct_plus_g"),
    ("observed_bv_spacetime", "bound_Cxt"),
)


def _data_tv(e, lo, hi, axis):
    pts = np.linspace(lo, hi, 1025)
    vals = e(pts, 0.0, 0.0) if axis == "t" else e(0.0, pts, 0.0)
    return float(np.abs(np.diff(np.broadcast_to(vals, pts.shape))).sum())


def bounds_report(
    p: Ibvp,
    sol: DiscreteSolution,
    levels=None,
    samples: int = 33,
    slack: float = ENVELOPE_SLACK,
) -> BoundsReport:
    """Audit the L-infinity, BV, time-Lipschitz and space-time BV envelopes.

    ``levels`` defaults to every time level ``1..NT``.
    """
    env = Envelopes(p, sol, samples)
    g = sol.grid
    levels = range(1, sol.NT + 1) if levels is None else sorted(set(int(n) for n in levels))
    ext_all = np.column_stack([sol.ua, sol.u, sol.ub])
    lo, hi = float(ext_all.min()), float(ext_all.max())
    lf_obs = sup_abs_on_box(p.f, "d_u", [(0.0, g.horizon), (p.a, p.b), (lo, hi)], samples)
    stbv = _spacetime_bv_all(sol)
    rep = BoundsReport(alpha=g.alpha, observed_lf=lf_obs, observed_range=(lo, hi))
    if g.alpha < lf_obs:
        rep.violations.append({"what": "alpha below observed L_f", "alpha": g.alpha, "L_f": lf_obs})
    for n in levels:
        if n < 1:
            continue
        t = n * g.dt
        U, c1, c2 = env.U(t)
        cx = env.Cx(n)
        ct = env.Ct(n)
        s = env.sigma(t)
        entry = {
            "n": n,
            "t": t,
            "observed_linf": linf_snapshot(sol, n),
            "bound_U": U,
            "observed_tv": tv_snapshot(sol, n),
            "bound_Cx": cx["Cx"],
            "observed_time_lipschitz": time_lipschitz_quotient(sol, n),
            "bound_Ct_plus_g": ct["Ct_plus_g"],
            "observed_bv_spacetime": float(stbv[n]),
            "bound_Cxt": env.Cxt(n),
            "C1": c1,
            "C2": c2,
            "C2_sigma": cx["C2_sigma"],
            "K1": cx["K1"],
            "K2": cx["K2"],
            "L_f": s["f_u"],
            "L_g": s["g_u"],
            "sigma_box": [[0.0, t], [p.a, p.b], [-U, U]],
            "data_jumps_discrete": cx["jumps"],
            "data_tv_continuum": _data_tv(p.u_o, p.a, p.b, "x")
            + _data_tv(p.u_a, 0.0, t, "t")
            + _data_tv(p.u_b, 0.0, t, "t"),
        }
        rep.checkpoints.append(entry)
        for obs, bound in _PAIRS:
            if entry[obs] > entry[bound] * (1.0 + slack):
                rep.violations.append({"what": obs, "n": n, "observed": entry[obs], "bound": entry[bound]})
    return rep


# ---------------------------------------------------------------------------
# entropy audits


@dataclass
class EntropyReport:
    worst_plus_residual: float
    worst_plus_at: tuple
    worst_minus_residual: float
    worst_minus_at: tuple
    k_samples: list
    bln_worst_left: float = 0.0
    bln_worst_right: float = 0.0
    violation_count: int = 0
    tolerance: float = ENTROPY_TOL

    @property
    def ok(self) -> bool:
        return self.violation_count == 0

    def to_dict(self) -> dict:
        return asdict(self)


def default_k_samples(sol: DiscreteSolution, count: int = 21) -> np.ndarray:
    """``count`` levels spanning the solution and data range with 10% margins,
    plus the exact data extremes."""
    vals = np.concatenate([sol.u.ravel(), sol.ua, sol.ub])
    lo, hi = float(vals.min()), float(vals.max())
    width = hi - lo
    margin = 0.1 * width if width > 0 else 0.1 * max(1.0, abs(lo))
    ks = np.linspace(lo - margin, hi + margin, count)
    extremes = [sol.ua.min(), sol.ua.max(), sol.ub.min(), sol.ub.max(), sol.u[0].min(), sol.u[0].max()]
    return np.unique(np.concatenate([ks, extremes]))


def entropy_residuals(sol: DiscreteSolution, p: Ibvp, k_values=None, tol: float = ENTROPY_TOL) -> EntropyReport:
    """Largest left-hand sides of both discrete semi-entropy inequalities.

    The scheme guarantees both are ``<= 0`` under the CFL condition; a
    residual above ``tol`` counts as a violation.
    """
    if sol.intermediate is None:
        raise ValueError("entropy audit needs a solution run with keep_intermediate=True")
    g = sol.grid
    NT = sol.NT
    if k_values is None:
        k_values = default_k_samples(sol)
    k_values = np.asarray(k_values, dtype=float)
    cur = sol.u[:NT]
    nxt = sol.u[1:]
    half = sol.intermediate
    ext = np.column_stack([sol.ua[:NT], cur, sol.ub[:NT]])
    left, right = ext[:, :-1], ext[:, 1:]
    t = (np.arange(NT) * g.dt)[:, None]
    xi = g.interfaces[None, :]
    src = g.dt * p.g(t, g.centers[None, :], half)
    lam, al = g.lam, g.alpha

    def F(v, w):
        return numerical_flux(p.f, t, xi, v, w, al)

    best = {"+": (-np.inf, None), "-": (-np.inf, None)}
    count = 0
    for k in k_values:
        fk = np.broadcast_to(p.f(t, xi, k), left.shape)
        dfk = fk[:, 1:] - fk[:, :-1]
        G = F(np.maximum(left, k), np.maximum(right, k)) - fk
        Lf = fk - F(np.minimum(left, k), np.minimum(right, k))
        sp = sgn_plus(nxt - k)
        sm = sgn_minus(nxt - k)
        r_plus = pos(nxt - k) - pos(cur - k) + lam * (G[:, 1:] - G[:, :-1]) + lam * sp * dfk - sp * src
        r_minus = neg(nxt - k) - neg(cur - k) + lam * (Lf[:, 1:] - Lf[:, :-1]) + lam * sm * dfk - sm * src
        for fam, r in (("+", r_plus), ("-", r_minus)):
            count += int(np.count_nonzero(r > tol))
            i = int(np.argmax(r))
            val = float(r.flat[i])
            if val > best[fam][0]:
                n, j = divmod(i, r.shape[1])
                best[fam] = (val, (n, j + 1, float(k)))
    return EntropyReport(
        worst_plus_residual=best["+"][0],
        worst_plus_at=best["+"][1],
        worst_minus_residual=best["-"][0],
        worst_minus_at=best["-"][1],
        k_samples=[float(k) for k in k_values],
        violation_count=count,
        tolerance=tol,
    )


def bln_residuals(sol: DiscreteSolution, p: Ibvp, k_grid_size: int = 21):
    """Worst boundary-condition violation per time level at ``x = a`` and ``x = b``.

    Traces are the first and last cell values.  For each level the k-grid
    spans the interval between trace and datum plus 10% margins.  Positive
    entries are violations; they are expected to shrink with ``dx`` rather
    than vanish at finite resolution.
    """
    g = sol.grid
    levels = np.arange(sol.NT + 1)
    t = (levels * g.dt)[:, None]
    s = np.linspace(-0.1, 1.1, k_grid_size)[None, :]

    def side(trace, datum, x):
        trace, datum = trace[:, None], datum[:, None]
        lo, hi = np.minimum(trace, datum), np.maximum(trace, datum)
        k = lo + (hi - lo) * s
        r = (np.sign(trace - k) - np.sign(datum - k)) * (p.f(t, x, trace) - p.f(t, x, k))
        return r

    r_left = side(sol.u[:, 0], sol.ua[: sol.NT + 1], p.a)
    r_right = side(sol.u[:, -1], sol.ub[: sol.NT + 1], p.b)
    return np.max(r_left, axis=1), np.max(-r_right, axis=1)
