import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acoustic_limit.velocity_space import (
    SQRT_2PI, FluidTriple, average, build_grid, fluid_moments, grid_report,
    infinitesimal_maxwellian, infinitesimal_maxwellian_field,
)

finite = st.floats(-2.0, 2.0, allow_nan=False)


@pytest.mark.parametrize("D", [1, 2, 3])
def test_moments_of_default_resolution(D):
    g = build_grid(D, 6.0, 24 if D < 3 else 16)
    assert abs(average(np.ones(g.K), g) - 1.0) <= 1e-14
    for j in range(D):
        assert average(g.nodes[:, j], g) == 0.0
    assert abs(average(g.speed2, g) - D) <= 1e-5


def test_default_grid_report(grid):
    rep = grid.report
    assert rep["D"] == 2 and rep["n"] == 24 and rep["v_max"] == 6.0
    assert rep["mass_defect"] <= 1e-14
    assert rep["moment_defects"][1] <= 1e-5
    assert rep["halfspace_defect"] <= 1e-14
    assert grid_report(grid)["moment_defects"] == rep["moment_defects"]


def test_midpoint_rule_has_visible_halfspace_defect():
    assert build_grid(2, weight_rule="midpoint").report["halfspace_defect"] > 1e-3


def test_gauss_hermite_moments():
    g = build_grid(2, n_per_axis=16, weight_rule="gauss-hermite")
    s2 = g.speed2
    assert abs(np.sum(g.weights) - 1) < 1e-13
    assert abs(g.weights @ s2 - 2) < 1e-12
    assert abs(g.weights @ s2**2 - 8) < 1e-11
    assert np.isnan(g.spacing) and not g.uniform


@pytest.mark.parametrize("kwargs", [dict(D=4), dict(D=2, n_per_axis=13), dict(D=2, weight_rule="simpson"),
                                    dict(D=2, v_max=3.0)])
def test_invalid_grids_rejected(kwargs):
    with pytest.raises(ValueError):
        build_grid(**kwargs)


def test_moment_tolerance_warning():
    g = build_grid(2, 4.0, 8, moment_tol=1e-12)
    assert g.report["warnings"]


def test_reflections_are_involutions(grid):
    for d, R in enumerate(grid.reflect):
        assert np.array_equal(R[R], np.arange(grid.K))
        flipped = grid.nodes[R]
        assert np.array_equal(flipped[:, d], -grid.nodes[:, d])
        assert np.array_equal(grid.weights[R], grid.weights)


def test_infinitesimal_maxwellian_basics(grid):
    assert np.all(infinitesimal_maxwellian(FluidTriple(0, [0, 0], 0), grid) == 0)
    assert np.all(infinitesimal_maxwellian(FluidTriple(1, [0, 0], 0), grid) == 1)
    with pytest.raises(ValueError):
        infinitesimal_maxwellian(FluidTriple(0, [0, 0, 0], 0), grid)


def test_fluid_moments_examples(grid):
    t = fluid_moments(np.zeros(grid.K), grid)
    assert t.rho == 0 and t.theta == 0 and np.all(t.u == 0)
    t = fluid_moments(infinitesimal_maxwellian(FluidTriple(1, [0, 0], 0), grid), grid)
    assert abs(t.rho - 1) < 1e-14 and np.all(np.abs(t.u) < 1e-15) and abs(t.theta) < 1e-6
    t = fluid_moments(infinitesimal_maxwellian(FluidTriple(0, [1, 0], 0), grid), grid)
    assert abs(t.u[0] - 1) < 1e-6 and abs(t.u[1]) < 1e-15


@settings(max_examples=100, deadline=None)
@given(finite, finite, finite, finite)
def test_moment_round_trip(rho, u1, u2, theta):
    g = build_grid(2)
    tol = 10 * max(g.report["moment_defects"]) * (1 + abs(rho) + abs(u1) + abs(u2) + abs(theta))
    got = fluid_moments(infinitesimal_maxwellian(FluidTriple(rho, [u1, u2], theta), g), g)
    assert np.allclose(got.as_array(), [rho, u1, u2, theta], atol=tol, rtol=0)


@settings(max_examples=50, deadline=None)
@given(finite, finite, st.integers(0, 2**31))
def test_average_is_linear(a, b, seed):
    g = build_grid(2)
    r = np.random.default_rng(seed)
    f, h = r.normal(size=(2, g.K))
    assert np.isclose(average(a * f + b * h, g), a * average(f, g) + b * average(h, g), rtol=1e-12, atol=1e-13)


def test_field_version_matches_pointwise(grid, rng):
    rho, theta = rng.normal(size=(2, 5))
    u = rng.normal(size=(5, 2))
    F = infinitesimal_maxwellian_field(rho, u, theta, grid)
    for i in range(5):
        assert np.allclose(F[i], infinitesimal_maxwellian(FluidTriple(rho[i], u[i], theta[i]), grid))
    R, U, T = fluid_moments(F, grid)
    assert R.shape == (5,) and U.shape == (5, 2) and T.shape == (5,)


def test_average_shape_check(grid):
    with pytest.raises(ValueError):
        average(np.ones(grid.K + 1), grid)


def test_half_gaussian_flux_moment(grid):
    out = grid.nodes[:, 0] > 0
    val = SQRT_2PI * np.sum(grid.weights[out] * grid.nodes[out, 0] ** 2)
    assert abs(val - np.sqrt(np.pi / 2)) < 1e-6
