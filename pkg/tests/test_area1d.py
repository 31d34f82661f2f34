import numpy as np
import pytest
from numpy.testing import assert_allclose

from nanopnp import area1d, quasi1d, scenarios
from nanopnp.errors import NoConvergence
from nanopnp.fv1d import face_average
from nanopnp.model import nondimensionalize

from test_quasi1d import ohmic_current


def test_uncharged_equilibrium_is_flat():
    sc = scenarios.cylinder_uncharged()
    c = sc.bc.conc_left_n / nondimensionalize(sc).conc_scale
    sol = area1d.solve_area_averaged(sc, 0.0)
    assert_allclose(sol.phi, 0.0, atol=1e-14)
    assert_allclose(sol.n, c, rtol=1e-14)
    assert_allclose(sol.p, c, rtol=1e-14)
    assert abs(sol.current_I) <= 1e-14


@pytest.mark.parametrize("name", sorted(scenarios.BUILTIN))
def test_equilibrium_current_vanishes(name):
    sol = area1d.solve_area_averaged(scenarios.builtin(name), 0.0)
    assert abs(sol.current_I) <= 1e-9
    assert np.all(sol.n > 0) and np.all(sol.p > 0)


@pytest.mark.parametrize("v", [0.01, 0.05, -0.1])
def test_ohmic_limit_is_exact(v):
    # exponential fitting reproduces the uncharged linear state exactly
    sc = scenarios.cylinder_uncharged(v=v)
    sol = area1d.solve_area_averaged(sc)
    assert_allclose(sol.current_I, ohmic_current(sc), rtol=1e-10)


def test_uncharged_cylinder_agrees_with_quasi1d():
    sc = scenarios.cylinder_uncharged(v=0.05)
    a = area1d.solve_area_averaged(sc).current_I
    q = quasi1d.solve_steady(sc).current_I
    assert_allclose(a, q, rtol=5e-3)


def test_boundary_values(trumpet):
    sol = area1d.solve_area_averaged(trumpet, 0.2)
    p = nondimensionalize(trumpet)
    c = trumpet.bc.conc_left_n / p.conc_scale
    assert sol.phi[0] == 0.0
    assert_allclose(sol.phi[-1], 0.2 / p.thermal_voltage, rtol=1e-14)
    assert_allclose([sol.n[0], sol.n[-1], sol.p[0], sol.p[-1]], c, rtol=1e-14)


@pytest.mark.parametrize("name,v", [("conical", -0.2), ("conical", 0.1), ("trumpet", 0.2)])
def test_current_is_conserved(name, v):
    # the reported current is the exactly constant flux of the continuity
    # solves; face fluxes recomputed from nodal densities agree with it up to
    # cancellation on highly conducting faces (wide baths, and the clustered
    # cells at the charge edges)
    sc = scenarios.builtin(name)
    sol = area1d.solve_area_averaged(sc, v)
    assert sol.current_spread <= 1e-6 * abs(sol.current_I)
    grid = area1d.make_grid(sc, area1d.SolverOptions())
    disc = area1d._Discretization(sc.with_voltage(v), grid)
    faces = disc.current_faces(sol.phi, sol.n, sol.p)
    assert_allclose(face_average(faces, grid.h), sol.current_I, rtol=1e-7)


def test_current_is_conserved_on_a_uniform_grid(trumpet):
    opts = area1d.SolverOptions(grid="uniform", n_intervals=400)
    sol = area1d.solve_area_averaged(trumpet, 0.2, options=opts)
    assert sol.current_spread <= 1e-8 * abs(sol.current_I)


def test_antisymmetry_of_symmetric_cylinder():
    sc = scenarios.cylinder_charged()
    i_pos = area1d.solve_area_averaged(sc, 0.1).current_I
    i_neg = area1d.solve_area_averaged(sc, -0.1).current_I
    assert_allclose(i_neg, -i_pos, rtol=1e-8)


def test_warm_start_reaches_the_same_state(trumpet):
    cold = area1d.solve_area_averaged(trumpet, 0.2)
    warm = area1d.solve_area_averaged(trumpet, 0.2, initial=area1d.solve_area_averaged(trumpet, 0.1))
    assert_allclose(warm.current_I, cold.current_I, rtol=1e-7)


def test_conical_rectifies(conical):
    fwd = area1d.solve_area_averaged(conical, -0.2).current_I
    rev = area1d.solve_area_averaged(conical, 0.2).current_I
    assert fwd > 0 > rev
    assert abs(rev) / abs(fwd) < 0.2


def test_gummel_without_fallback_reports_failure(trumpet):
    g = area1d.GummelOptions(max_iter=3, newton_polish=False)
    with pytest.raises(NoConvergence) as info:
        area1d.solve_area_averaged(trumpet, 0.2, gummel=g)
    assert len(info.value.history) == 3


def test_newton_fallback_matches_gummel(trumpet):
    ref = area1d.solve_area_averaged(trumpet, 0.1)
    g = area1d.GummelOptions(max_iter=3)
    sol = area1d.solve_area_averaged(trumpet, 0.1, gummel=g)
    assert sol.method == "gummel+newton"
    assert_allclose(sol.current_I, ref.current_I, rtol=1e-9)
