import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nosignlab.diagnostics import (bmo_seminorm, c1_graph_fit, dini_integral, free_boundary_extract,
                                   lambda_density, minimal_diameter, monotonicity_violation,
                                   quad_growth, sign_check, thickness, weiss, weiss_convention,
                                   weiss_limit)
from nosignlab.fields import Grid, Mask, ScalarField, interpolate
from nosignlab.solver import make_fixture
from nosignlab.zeroset import essential_mask

from conftest import field, rng


@pytest.fixture(scope="module")
def grid257():
    return Grid.square(257)


@pytest.fixture(scope="module")
def fx257(grid257):
    return {k: make_fixture(k, grid257) for k in ("half_space", "polynomial", "radial")}


# ------------------------------------------------------------ zero-set size

def test_lambda_density(grid129, fixtures129):
    X, _ = grid129.coords()
    half = Mask(grid129, X <= 0)
    for r in (0.1, 0.3, 0.6):
        assert abs(lambda_density(half, (0, 0), r) - 0.5) <= 3 * grid129.h / r
    assert lambda_density(Mask.empty(grid129), (0, 0), 0.5) == 0
    assert lambda_density(fixtures129["radial"].zero_set, (0, 0), 0.4) == 1
    assert lambda_density(essential_mask(fixtures129["polynomial"].zero_set), (0, 0), 0.4) == 0


def test_minimal_diameter_disk_and_segment(grid129):
    h, rho = grid129.h, 0.3
    disk = grid129.points(grid129.ball((0, 0), rho))
    assert abs(minimal_diameter(disk, (0, 0), 0.5) - 2 * rho) <= 2 * (math.pi / 180) * rho + h
    seg = np.column_stack([np.linspace(-0.4, 0.4, 50), 0.2 * np.linspace(-0.4, 0.4, 50)])
    assert minimal_diameter(seg, (0, 0), 0.5) <= h + 2 * (math.pi / 180) * 0.4
    assert minimal_diameter(np.empty((0, 2)), (0, 0), 0.5) == 0
    with pytest.raises(ValueError):
        minimal_diameter(disk, (0, 0), 0.5, n_angles=45)


def test_minimal_diameter_half_disk(grid129):
    X, _ = grid129.coords()
    r = 0.4
    pts = grid129.points((X <= 0) & grid129.ball((0, 0), r))
    md = minimal_diameter(pts, (0, 0), r, n_angles=720)
    assert abs(md - r) <= grid129.h + r * (1 - math.cos(math.pi / 720))
    s = thickness(Mask(grid129, X <= 0), (0, 0), r)
    assert s.delta == pytest.approx(md / r, abs=grid129.h / r) and 0 <= s.lam <= 1


# ------------------------------------------------------------------- Weiss

def test_weiss_half_space_analytic(fx257):
    fx = fx257["half_space"]
    # continuum values pi/8 +- 3 pi/16 for u = (x1+)^2/2, f = 1
    for sign, exact in ((1, 5 * math.pi / 16), (-1, -math.pi / 16)):
        w = weiss(fx.u, fx.f, (0, 0), 0.4, sign)
        assert w.value == pytest.approx(exact, rel=1e-2)
        assert w.boundary_sign == sign and w.r == 0.4


def test_weiss_ratio_two(fx257):
    for sign in (1, -1):
        radii = [0.4, 0.3, 0.2, 0.1]
        a = weiss_limit(fx257["half_space"].u, fx257["half_space"].f, (0, 0), radii, sign).value
        b = weiss_limit(fx257["polynomial"].u, fx257["polynomial"].f, (0, 0), radii, sign).value
        assert b / a == pytest.approx(2, rel=0.05)


def test_weiss_limit_zero_and_validation(grid65):
    zero = field(grid65, lambda x, y: 0 * x)
    one = field(grid65, lambda x, y: 1 + 0 * x)
    lim = weiss_limit(zero, one, (0, 0), [0.4, 0.3, 0.2, 0.1])
    assert lim.value == 0 and lim.confident
    with pytest.raises(ValueError):
        weiss_limit(zero, one, (0, 0), [0.1, 0.2, 0.3, 0.4])
    with pytest.raises(ValueError):
        weiss_limit(zero, one, (0, 0), [0.3, 0.2, 0.1])
    with pytest.raises(ValueError):
        weiss(zero, one, (0, 0), 0.3, boundary_sign=0)


def test_weiss_homogeneous_scaling(grid129):
    u = field(grid129, lambda x, y: np.sin(2 * x) + x * y**2)
    zero = field(grid129, lambda x, y: 0 * x)
    for c in (-2.0, 0.5, 3.0):
        for sign in (1, -1):
            a = weiss(u * c, zero, (0.1, 0.1), 0.3, sign).value
            b = weiss(u, zero, (0.1, 0.1), 0.3, sign).value
            assert a == pytest.approx(c * c * b, rel=1e-12)


def test_weiss_convention_report(fx257):
    fx = fx257["radial"]
    best, viol, vals = weiss_convention(fx.u, fx.f, (0.5, 0.0), np.geomspace(0.1, 0.4, 6))
    assert best in (1, -1) and set(viol) == {1, -1} and len(vals[best]) == 6
    assert viol[best] == min(viol.values())


def test_monotonicity_violation():
    assert monotonicity_violation([1, 2, 3]) == 0
    assert monotonicity_violation([1.0, 0.9, 1.2]) == pytest.approx(0.1)
    assert monotonicity_violation([-1.0, -1.1]) == pytest.approx(0.1)
    assert monotonicity_violation([5.0]) == 0


# --------------------------------------------------------------------- BMO

def test_bmo_quadratic_zero(grid65):
    u = field(grid65, lambda x, y: 3 * x**2 - x * y + 0.5 * y**2 + x)
    assert bmo_seminorm(u, [((0, 0), 0.4), ((0.2, -0.1), 0.2)]) < 1e-12
    with pytest.raises(ValueError):
        bmo_seminorm(u, [])


def test_bmo_half_space_bounded(fx257):
    fx = fx257["half_space"]
    # continuum: u11 is the indicator of a half-disk, oscillation 1/4 over
    # the ball, so r^-2 |B_r| / 4 = pi / 4 for every r
    vals = [bmo_seminorm(fx.u, [((0, 0), r)]) for r in (0.05, 0.1, 0.2, 0.4)]
    assert all(0.85 * math.pi / 4 <= v <= 1.02 * math.pi / 4 for v in vals)


def test_bmo_scaling(fixtures129):
    u = fixtures129["radial"].u
    s = [((0.5, 0.0), 0.2), ((0.0, 0.6), 0.1)]
    assert bmo_seminorm(u * 3.0, s) == pytest.approx(9 * bmo_seminorm(u, s), rel=1e-12)


# -------------------------------------------------------------------- Dini

def _log_radii(lo=1e-8, hi=0.5, n=2001):
    return np.geomspace(lo, hi, n)


def test_dini_sqrt():
    r = _log_radii()
    res = dini_integral(r, np.sqrt(r))
    assert res.converged
    assert res.value == pytest.approx(2 * math.sqrt(0.5), abs=1e-3)


def test_dini_log_diverges():
    r = _log_radii(1e-12, 0.5)
    res = dini_integral(r, 1 / np.log(1 / r))
    assert not res.converged


def test_dini_zero_and_validation():
    r = _log_radii()
    res = dini_integral(r, np.zeros_like(r))
    assert res.value == 0 and res.converged
    with pytest.raises(ValueError):
        dini_integral(np.geomspace(1e-2, 0.5, 50), np.sqrt(np.geomspace(1e-2, 0.5, 50)))
    with pytest.raises(ValueError):
        dini_integral(r, -np.sqrt(r))
    with pytest.raises(ValueError):
        dini_integral(r, np.sqrt(r)[::-1])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(0.0, 3.0))
def test_dini_monotone_in_sigma(alpha, bump):
    r = _log_radii(1e-6, 0.5, 400)
    s1 = r**alpha
    s2 = s1 * (1 + bump)
    assert dini_integral(r, s2).value >= dini_integral(r, s1).value


# ---------------------------------------------------------- growth & sign

def test_quad_growth(fx257, grid257):
    h = grid257.h
    radii = [0.05, 0.1, 0.2, 0.4]
    # the sup over nodes is attained on the axis at the last node inside B_r
    nodal = [0.5 * (math.floor(r / h + 1e-9) * h) ** 2 / r**2 for r in radii]
    for kind in ("half_space", "polynomial"):
        g = quad_growth(fx257[kind].u, (0, 0), radii)
        assert np.allclose(g, nodal, rtol=1e-12)
        assert all(0.5 * (1 - h / r) ** 2 <= v <= 0.5 for v, r in zip(g, radii))
    g = quad_growth(fx257["radial"].u, (0.5, 0.0), [0.4 / 2**j for j in range(5)])
    assert max(g) / min(g) <= 4


def test_sign_check(fixtures129, grid129):
    assert sign_check(fixtures129["radial"].u, (0.5, 0.0), 0.2) == 0
    assert sign_check(fixtures129["half_space"].u, (0, 0), 0.3) == 0
    u = field(grid129, lambda x, y: x**3 - x * y**2)
    inside = grid129.ball((0, 0), 0.5)
    assert sign_check(u, (0, 0), 0.5) == u.values[inside].min() < 0


# ----------------------------------------------------------- free boundary

def test_free_boundary_extract(fixtures129, grid129):
    h = grid129.h
    pts = free_boundary_extract(fixtures129["radial"])
    assert len(pts) > 100
    assert np.all(np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 0.5) <= 2 * h)
    pts = free_boundary_extract(fixtures129["half_space"])
    assert np.all(np.abs(pts[:, 0]) <= 2 * h)
    assert len(pts) >= grid129.ny - 2


def test_free_boundary_points_near_zero(radial_solve129):
    pts = free_boundary_extract(radial_solve129)
    assert np.all(np.abs(interpolate(radial_solve129.u, pts)) <= 2 * radial_solve129.zero_tol)


def test_free_boundary_empty(grid65):
    from nosignlab.solver import solve_no_sign
    res = solve_no_sign(0.1, 5.0, grid=grid65)
    assert free_boundary_extract(res).shape == (0, 2)


def test_graph_fit_half_space(fixtures129, grid129):
    gamma = fixtures129["half_space"].free_boundary
    r = 0.3
    fit = c1_graph_fit(gamma, (0, 0), r)
    assert fit.residual <= grid129.h / r
    angle = math.degrees(math.atan2(abs(fit.normal[1]), fit.normal[0]))
    assert angle <= 2 and not fit.flagged


def test_graph_fit_circle_sagitta():
    a = 0.5
    r = a / 8
    phi = np.linspace(-0.3, 0.3, 4001)
    pts = np.column_stack([a * np.cos(phi), a * np.sin(phi)])
    fit = c1_graph_fit(pts, (a, 0.0), r)
    # rms offset of an arc from its best chord-parallel line is r^2 / (a sqrt 45)
    oracle = r / (a * math.sqrt(45))
    assert oracle / 2 <= fit.residual <= 2 * oracle
    assert abs(fit.normal[0]) == pytest.approx(1, abs=1e-6)


def test_graph_fit_flags_crossing_lines():
    t = np.linspace(-0.2, 0.2, 41)
    pts = np.vstack([np.column_stack([t, t]), np.column_stack([t, -t])])
    fit = c1_graph_fit(pts, (0, 0), 0.25)
    assert fit.residual > 0.1 and fit.flagged
    with pytest.raises(ValueError):
        c1_graph_fit(pts[:3], (0, 0), 0.25)


# ------------------------------------------------------------- properties

@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (20, 2), elements=st.floats(-0.5, 0.5, allow_nan=False)),
       arrays(np.float64, (5, 2), elements=st.floats(-0.5, 0.5, allow_nan=False)))
def test_minimal_diameter_monotone(pts, extra):
    a = minimal_diameter(pts, (0, 0), 0.6)
    b = minimal_diameter(np.vstack([pts, extra]), (0, 0), 0.6)
    assert b >= a - 1e-12
    assert a <= 2 * 0.6 + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 0.6))
def test_lambda_and_delta_ranges(seed, r):
    g = Grid.square(33)
    flags = rng(seed).random(g.shape) < 0.3
    s = thickness(Mask(g, flags), (0, 0), r, 90)
    assert 0 <= s.lam <= 1 and 0 <= s.delta <= 2 and s.md <= 2 * r + 1e-12
