import numpy as np
import pytest

from relaxrk.errors import NumericalError, UnsupportedError
from relaxrk.models import make_broadwell, make_shallow_water
from relaxrk.space import (
    Grid1D,
    Inflow,
    Outflow,
    Periodic,
    ReflectiveWall,
    SpatialOperator,
    as_bc_pair,
    convective_rhs,
    fv_rhs,
    ghost_fill,
    llf_flux,
    llf_split,
    minmod,
)


def test_grid_geometry():
    g = Grid1D(0.0, 2.0, 4)
    assert g.dx == 0.5
    np.testing.assert_allclose(g.x, [0.25, 0.75, 1.25, 1.75])
    assert g.refined().n == 8
    with pytest.raises(ValueError):
        Grid1D(1.0, 1.0, 4)
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 0)


def test_ghost_fill_variants():
    v = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
    np.testing.assert_array_equal(ghost_fill(v, Periodic(), 2)[:, 0], [2, 3, 1, 2, 3, 1, 2])
    np.testing.assert_array_equal(ghost_fill(v, Outflow(), 2)[:, 0], [1, 1, 1, 2, 3, 3, 3])
    wall = ghost_fill(v, ReflectiveWall((1,)), 2)
    np.testing.assert_array_equal(wall[:, 0], [2, 1, 1, 2, 3, 3, 2])
    np.testing.assert_array_equal(wall[:, 1], [-20, -10, 10, 20, 30, -30, -20])
    mixed = ghost_fill(v, (Inflow([7.0, 8.0]), ReflectiveWall()), 3)
    np.testing.assert_array_equal(mixed[:3], [[7, 8]] * 3)
    np.testing.assert_array_equal(mixed[-3:, 0], [3, 2, 1])


def test_ghost_fill_errors():
    v = np.ones(2)
    with pytest.raises(ValueError):
        ghost_fill(v, Periodic(), 3)
    with pytest.raises(ValueError):
        ghost_fill(v, ReflectiveWall(()), 3)
    with pytest.raises(ValueError):
        ghost_fill(v, Outflow(), 0)
    with pytest.raises(ValueError):
        as_bc_pair((Periodic(), Outflow()))


def test_llf_pieces():
    f, u = np.array([1.0, -2.0]), np.array([0.5, 3.0])
    fp, fm = llf_split(f, u, 2.0)
    np.testing.assert_allclose(fp + fm, f)
    np.testing.assert_allclose(fp - fm, 2.0 * u)
    with pytest.raises(ValueError):
        llf_split(f, u, -1.0)
    assert llf_flux(1.0, 1.0, 2.0, 2.0, 5.0) == 1.0
    assert llf_flux(0.0, 0.0, 0.0, 1.0, 2.0) == -1.0
    np.testing.assert_array_equal(minmod(np.array([1.0, -1.0, 2.0]), np.array([2.0, 1.0, 0.5])), [1.0, 0.0, 0.5])


def _smooth_broadwell(n, length=20.0):
    grid = Grid1D(0.0, length, n)
    s = np.sin(2 * np.pi * grid.x / length)
    rho = 1 + 0.3 * s
    m = rho * (0.5 + 0.1 * s)
    z = 0.8 + 0.2 * s
    return grid, np.stack([rho, m, z], axis=-1)


def _exact_rhs(grid, length=20.0):
    k = 2 * np.pi / length
    s, c = np.sin(k * grid.x), np.cos(k * grid.x)
    rho, drho = 1 + 0.3 * s, 0.3 * k * c
    v, dv = 0.5 + 0.1 * s, 0.1 * k * c
    dm = drho * v + rho * dv
    dz = 0.2 * k * c
    return -np.stack([dm, dz, dm], axis=-1)


@pytest.mark.parametrize("order, disc, expected", [(5, "fd", 4.5), (2, "fd", 1.8), (1, "fd", 0.9), (2, "fv", 1.8), (1, "fv", 0.9)])
def test_convective_accuracy(order, disc, expected):
    model = make_broadwell()
    errs = []
    for n in (80, 160, 320):
        grid, U = _smooth_broadwell(n)
        op = SpatialOperator(model, grid, Periodic(), order, disc)
        # L1: minmod clips extrema, which caps the max-norm rate at one
        errs.append(np.mean(np.abs(op(U) - _exact_rhs(grid))))
    rate = np.log2(errs[-2] / errs[-1])
    assert rate > expected, (errs, rate)


@pytest.mark.parametrize("order, disc", [(1, "fd"), (2, "fd"), (5, "fd"), (1, "fv"), (2, "fv")])
def test_periodic_divergence_sums_to_zero_and_constants_are_steady(order, disc):
    model = make_shallow_water()
    grid = Grid1D(0.0, 1.0, 64)
    h = 1 + 0.2 * np.sin(8 * np.pi * grid.x) + 0.3 * (grid.x > 0.5)
    U = np.stack([h, 0.4 * h * h], axis=-1)
    rhs = SpatialOperator(model, grid, Periodic(), order, disc)(U)
    assert abs(rhs[:, 0].sum()) < 1e-11
    const = np.tile([1.3, 0.2], (64, 1))
    assert np.max(np.abs(SpatialOperator(model, grid, Outflow(), order, disc)(const))) < 1e-13


@pytest.mark.parametrize("order", [1, 2, 5])
def test_walls_stop_mass_flux(order):
    model = make_broadwell()
    grid, U = _smooth_broadwell(40)
    rhs = convective_rhs(model, U, grid, ReflectiveWall((1,)), order)
    assert abs(rhs[:, 0].sum()) < 1e-12


def test_operator_validation():
    model = make_broadwell()
    grid, U = _smooth_broadwell(40)
    with pytest.raises(UnsupportedError):
        SpatialOperator(model, grid, Periodic(), 5, "fv")
    with pytest.raises(UnsupportedError):
        SpatialOperator(model, grid, Periodic(), 3)
    with pytest.raises(UnsupportedError):
        SpatialOperator(model, grid, Periodic(), 2, "dg")
    with pytest.raises(UnsupportedError):
        fv_rhs(model, U, grid, Periodic(), 5)
    small_grid = Grid1D(0.0, 1.0, 3)
    with pytest.raises(ValueError, match="stencil"):
        convective_rhs(model, U[:3], small_grid, Periodic(), 5)


def test_nonfinite_input_detected():
    model = make_broadwell()
    grid, U = _smooth_broadwell(40)
    U[7, 1] = np.nan
    with pytest.raises(NumericalError, match="non-finite"):
        convective_rhs(model, U, grid, Periodic(), 5)
