from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherevg import reflection
from spherevg.errors import NoConvergence, NoPhysicalRoot
from spherevg.geometry import ReducedGeometry, Scene, reduce
from spherevg.oracle import brute_force_alpha, random_scene
from spherevg.reflection import (
    Method,
    alpha_series,
    geometry_from_uv,
    leg_lengths,
    path_length,
    root_candidates,
    solve_alpha_exact,
    solve_alpha_newton,
    solve_reflection,
    trig_residual,
)


def test_worked_example_angle(worked, oracle_values):
    ref = oracle_values["worked_example"]
    g = reduce(worked)
    assert solve_alpha_exact(g) == pytest.approx(ref["alpha"], abs=1e-12)
    assert solve_alpha_newton(g) == pytest.approx(ref["alpha"], abs=1e-12)
    assert solve_alpha_exact(g) == pytest.approx(-0.0653, abs=5e-5)


def test_worked_example_solution(worked, oracle_values):
    ref = oracle_values["worked_example"]
    sol = solve_reflection(worked)
    assert sol.ell_plus == pytest.approx(1.1886, abs=5e-5)
    assert sol.ell_minus == pytest.approx(2.2385, abs=5e-5)
    assert sol.L == pytest.approx(ref["L"], rel=1e-14)
    assert max(sol.residual_eq4, sol.residual_eq5) < 1e-10
    assert sol.residual_eq6 < 1e-12
    assert sol.method is Method.QuarticExact
    assert np.linalg.norm(sol.r_coll) == pytest.approx(1.0, rel=1e-15)


def test_oracle_fixture_is_current(worked, oracle_values):
    # the pinned number should still be what the oracle produces
    assert brute_force_alpha(reduce(worked)) == pytest.approx(
        oracle_values["worked_example"]["alpha"], abs=1e-12)


@pytest.mark.parametrize("u", [0.05, 0.3, 0.5, 0.9, 0.999])
def test_zero_v_gives_zero_angle(u):
    g = geometry_from_uv(u, 0.0) if u < 0.999 else ReducedGeometry(1.0, 1.5, 1.5, 0.01, u, 0.0)
    assert solve_alpha_exact(g) == 0.0
    assert solve_alpha_newton(g) == 0.0
    assert alpha_series(g) == 0.0


def test_equal_radii_give_zero_angle():
    s = Scene(1.0, (2, 0, 0), (0, 2, 0))
    sol = solve_reflection(s)
    assert sol.alpha == 0.0
    expected = math.sqrt(1 + 4 - 4 * math.cos(math.pi / 4))
    assert sol.ell_plus == pytest.approx(expected, rel=1e-15)
    assert sol.ell_minus == pytest.approx(expected, rel=1e-15)


def test_swap_flips_angle(rng):
    for _ in range(300):
        s = random_scene(rng)
        a, b = solve_reflection(s), solve_reflection(s.swapped())
        assert b.alpha == pytest.approx(-a.alpha, abs=1e-13)
        assert b.L == pytest.approx(a.L, rel=1e-12)


def test_exact_angle_is_local_minimum(rng):
    for _ in range(300):
        s = random_scene(rng)
        sol = solve_reflection(s)
        g = sol.geometry
        assert sol.L <= path_length(g, sol.alpha + 1e-4)
        assert sol.L <= path_length(g, sol.alpha - 1e-4)


def test_half_angle_tangent_is_a_quartic_root(rng):
    for _ in range(200):
        sol = solve_reflection(random_scene(rng))
        xs = [c.x for c in root_candidates(sol.geometry)]
        assert min(abs(x - sol.x) for x in xs) <= 1e-15 * max(1.0, abs(sol.x))
        assert sol.x == pytest.approx(math.tan(0.5 * sol.alpha), rel=1e-14, abs=1e-300)


def test_exact_matches_newton(rng):
    worst = 0.0
    for _ in range(2000):
        g = reduce(random_scene(rng))
        worst = max(worst, abs(solve_alpha_exact(g) - solve_alpha_newton(g)))
    assert worst <= 1e-11


def test_exact_matches_bruteforce(rng):
    for _ in range(200):
        g = reduce(random_scene(rng))
        assert solve_alpha_exact(g) == pytest.approx(brute_force_alpha(g), abs=1e-9)


def test_methods_agree_on_worked_example(worked):
    exact = solve_reflection(worked)
    newton = solve_reflection(worked, Method.NewtonTrig)
    series = solve_reflection(worked, Method.Series)
    assert newton.alpha == pytest.approx(exact.alpha, abs=1e-13)
    assert series.alpha == pytest.approx(exact.alpha, abs=1e-5)
    assert solve_reflection(worked, verify=True).alpha_newton == pytest.approx(exact.alpha, abs=1e-13)


def test_series_arithmetic():
    g = ReducedGeometry(1.0, 2.0, 3.0, math.pi / 3, 0.3608439, 0.0416667)
    expected = -0.0416667 / 0.6391561 - 1.7216878 * 0.0416667**3 / (6 * 0.6391561**4)
    assert alpha_series(g) == pytest.approx(expected, rel=1e-15)
    assert alpha_series(g) == pytest.approx(-0.065314, abs=1e-6)


def test_series_error_fifth_order():
    u = 0.4
    errs = []
    for v in (0.02, 0.01):
        g = geometry_from_uv(u, v)
        errs.append(abs(alpha_series(g) - solve_alpha_exact(g)))
    assert errs[0] / errs[1] == pytest.approx(32.0, rel=0.05)


def test_series_error_grows_towards_unit_u():
    v = 0.005
    errs = []
    for u in (0.1, 0.5, 0.8, 0.95):
        g = geometry_from_uv(u, v)
        errs.append(abs(alpha_series(g) - solve_alpha_exact(g)))
    assert all(b > a for a, b in zip(errs, errs[1:]))


def test_radial_leg_lengths():
    g = ReducedGeometry.from_scalars(1.0, 2.0, 3.0, 0.0)
    assert leg_lengths(g, 0.0) == (1.0, 2.0)
    assert path_length(g, 0.0) == 3.0


def test_symmetric_leg_lengths():
    g = ReducedGeometry.from_scalars(1.0, 2.5, 2.5, 1.0)
    lp, lm = leg_lengths(g, 0.0)
    assert lp == lm


def test_trig_residual_vanishes_at_solution(worked):
    sol = solve_reflection(worked)
    assert abs(trig_residual(sol.geometry, sol.alpha)) <= 1e-15


def test_hidden_bounce_raises():
    g = ReducedGeometry.from_scalars(1.0, 1.2, 30.0, 2.5)
    with pytest.raises(NoPhysicalRoot):
        solve_alpha_exact(g)
    with pytest.raises(NoPhysicalRoot):
        solve_alpha_newton(g)


def test_newton_reports_nonconvergence(worked, monkeypatch):
    monkeypatch.setattr(reflection, "NEWTON_MAX_ITER", 1)
    with pytest.raises(NoConvergence, match="bracket"):
        solve_alpha_newton(reduce(worked))


def test_geometry_from_uv_realises_parameters():
    for u, v in [(0.1, 0.05), (0.5, 0.2), (0.9, -0.01), (0.5, -0.2)]:
        g = geometry_from_uv(u, v)
        h = ReducedGeometry.from_scalars(g.a, g.r1_mag, g.r2_mag, g.theta)
        assert h.u == pytest.approx(u, rel=1e-12)
        assert h.v == pytest.approx(v, rel=1e-10)
        assert sum(g.visible_caps()) > g.theta


@settings(max_examples=200, deadline=None)
@given(
    k1=st.floats(1.001, 50.0),
    k2=st.floats(1.001, 50.0),
    frac=st.floats(0.01, 0.99),
)
def test_solution_residuals_property(k1, k2, frac):
    g0 = ReducedGeometry.from_scalars(1.0, k1, k2, 0.0)
    theta = frac * min(math.pi, sum(g0.visible_caps()))
    th = theta
    s = Scene(1.0, (k1, 0, 0), (k2 * math.cos(th), k2 * math.sin(th), 0))
    sol = solve_reflection(s)
    assert sol.residual_eq4 <= 1e-10
    assert sol.residual_eq5 <= 1e-10
    assert sol.residual_eq6 <= 1e-12
    assert abs(sol.alpha) <= 0.5 * sol.geometry.theta
