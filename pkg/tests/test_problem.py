import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balans.problem import (
    CATALOG,
    build_grid,
    catalog,
    discretize,
    lipschitz_constants,
    make_problem,
)


def test_catalog_loads():
    for name in CATALOG:
        p = catalog(name)
        assert p.name == name and p.a < p.b and p.T > 0
    with pytest.raises(KeyError):
        catalog("nope")


def test_advection_catalog_entry():
    p = catalog("advection-x")
    assert (p.f.source, p.g.source, p.u_o.source, p.u_a.source, p.u_b.source) == ("-x", "0", "0", "t", "t")
    assert (p.a, p.b, p.T) == (0.0, 1.0, 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(f="u", a=1, b=0),
        dict(f="u", T=0),
        dict(f="u", u_o="t"),
        dict(f="u", u_a="x"),
        dict(f="u", u_b="u"),
        dict(f="u", u_o="1/(x - 0.5)"),
    ],
)
def test_invalid_problems(kwargs):
    with pytest.raises((ValueError, ArithmeticError)):
        make_problem(**kwargs)


def test_piecewise_flux_warns():
    with pytest.warns(UserWarning):
        make_problem(f="abs(u)")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make_problem(f="u^2", u_o="if(x - 0.5, 1, 0)")


def test_grid_for_u_independent_flux():
    g = build_grid(catalog("advection-x"), 100)
    assert g.alpha == 1.0
    assert g.lam == 1 / 3
    assert g.dt == pytest.approx(g.dx / 3, rel=1e-15)
    assert g.NT == math.floor(1.0 / g.dt * (1 + 1e-14))


def test_grid_lwr_alpha():
    g = build_grid(catalog("lwr-ramp"), 100)
    # dense scan of |1 - 2u| over the data range [0, 0.4]
    dense = np.max(np.abs(1 - 2 * np.linspace(0.0, 0.4, 100_001)))
    assert g.alpha == pytest.approx(1.001 * dense, rel=1e-12)
    assert g.lam == pytest.approx(1 / (3 * 1.001), rel=1e-12)


def test_alpha_override_floor():
    p = catalog("advection-x")
    with pytest.raises(ValueError):
        build_grid(p, 100, alpha=0.5)
    assert build_grid(p, 100, alpha=2.0).alpha == 2.0
    with pytest.raises(ValueError):
        build_grid(p, 1)
    with pytest.raises(ValueError):
        build_grid(p, 10, cfl_fraction=1.5)
    assert build_grid(p, 10, cfl_fraction=1.5, unsafe=True).unsafe


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(CATALOG)), st.integers(2, 400), st.floats(0.05, 1.0))
def test_cfl_invariant(name, N, frac):
    g = build_grid(catalog(name), N, cfl_fraction=frac)
    assert g.lam * g.alpha <= 1 / 3 + 1e-15
    assert g.alpha >= 1
    assert g.N * g.dx == pytest.approx(g.b - g.a, rel=1e-14)
    assert g.NT * g.dt <= catalog(name).T * (1 + 1e-13)


def test_grid_coordinates():
    g = build_grid(make_problem("u", a=-1, b=1), 4)
    np.testing.assert_allclose(g.centers, [-0.75, -0.25, 0.25, 0.75])
    np.testing.assert_allclose(g.interfaces, [-1, -0.5, 0, 0.5, 1])
    assert g.times[-1] == g.horizon


def test_discretize_zero_and_linear():
    p = make_problem("u", u_o="x")
    g = build_grid(p, 4)
    d = discretize(p, g)
    np.testing.assert_allclose(d.u0, [0.125, 0.375, 0.625, 0.875], rtol=0, atol=1e-15)
    z = discretize(make_problem("u"), g)
    assert not z.u0.any() and not z.ua.any()
    assert z.ua.shape == (g.NT + 1,)


def test_discretize_constant_exact():
    c = 0.1
    p = make_problem("u^2/2", u_o=repr(c), u_a=repr(c), u_b=repr(c))
    g = build_grid(p, 37)
    for q in (1, 2, 3, 5):
        d = discretize(p, g, q)
        assert np.all(d.u0 == c) and np.all(d.ua == c) and np.all(d.ub == c)


def test_ramp_boundary_averages_against_riemann_sums():
    p = catalog("lwr-ramp")
    g = build_grid(p, 50)
    d = discretize(p, g)
    for n in (0, 1, 2, 5, 20):
        s = (np.arange(10_000) + 0.5) / 10_000
        ts = (n + s) * g.dt
        ref = np.minimum(4 * ts, 0.4).mean()
        assert d.ua[n] == pytest.approx(ref, abs=1e-9)
    assert d.ua[0] == pytest.approx(2 * g.dt, rel=1e-13)


def test_quadrature_refinement_on_square():
    p = make_problem("u", u_o="x^2")
    g = build_grid(p, 10)
    exact = ((g.interfaces[1:] ** 3 - g.interfaces[:-1] ** 3) / 3) / g.dx
    e1 = np.abs(discretize(p, g, 1).u0 - exact).max()
    e2 = np.abs(discretize(p, g, 2).u0 - exact).max()
    assert e1 == pytest.approx(g.dx**2 / 12, rel=1e-9)
    assert e2 < 1e-15


def test_discrete_data_within_sampled_bounds():
    p = make_problem("u", u_o="sin(6*x) + 0.3*x")
    g = build_grid(p, 23)
    d = discretize(p, g)
    xs = np.linspace(0, 1, 100_001)
    vals = np.sin(6 * xs) + 0.3 * xs
    assert np.abs(d.u0).max() <= np.abs(vals).max()
    assert np.abs(np.diff(d.u0)).sum() <= np.abs(np.diff(vals)).sum() + 1e-12


def test_point_boundary_rule():
    p = catalog("advection-x")
    g = build_grid(p, 10)
    d = discretize(p, g, boundary="point")
    np.testing.assert_allclose(d.ua, np.arange(g.NT + 1) * g.dt, rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        discretize(p, g, boundary="midpoint")


def test_data_arrays_are_read_only():
    p = catalog("decay")
    d = discretize(p, build_grid(p, 10))
    with pytest.raises(ValueError):
        d.u0[0] = 1.0


def test_lipschitz_constants():
    assert lipschitz_constants(make_problem("-x"), 1.0, (-1, 1))[0] == 0.0
    assert lipschitz_constants(make_problem("u*(1-u)"), 1.0, (0, 1))[0] == 1.0
    assert lipschitz_constants(make_problem("u", g="u"), 1.0, (-1, 1))[1] == 1.0
    with pytest.raises(ValueError):
        lipschitz_constants(make_problem("u"), 0.0, (0, 1))
