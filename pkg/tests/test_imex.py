import math

import numpy as np
import pytest

from relaxrk.errors import NumericalError, StepFailure, UnsupportedError
from relaxrk.imex import (
    SolverConfig,
    cfl_dt,
    equilibrium_integrate,
    explicit_step,
    generic_newton_stage_solve,
    imex_step,
    integrate,
    steps_for,
)
from relaxrk.models import RelaxationModel, initial_conditions, make_broadwell, make_granular
from relaxrk.space import Grid1D, Periodic, SpatialOperator
from relaxrk.tableau import ButcherTableau, ImexTableau, builtin_scheme


class Decay(RelaxationModel):
    """Component 1 relaxes to zero, component 0 is conserved; no flux."""

    name = "decay"
    m = 2
    n_cons = 1

    def flux(self, U):
        return np.zeros_like(U)

    def relax(self, U):
        out = np.zeros_like(U)
        out[..., 1] = -U[..., 1]
        return out

    def equilibrium(self, u):
        return np.concatenate([u, np.zeros_like(u)], axis=-1)

    def wave_speed(self, U):
        return np.zeros(np.shape(U)[:-1])

    def stage_solve(self, B, mu):
        out = np.array(B, dtype=float)
        out[..., 1] = B[..., 1] / (1 + mu)
        return out


def zero_rhs(U):
    return np.zeros_like(U)


def test_scalar_decay_matches_hand_unrolled_step():
    t = builtin_scheme("ssp2-222")
    g = t.implicit.A[0, 0]
    dt, eps, u0 = 0.3, 0.05, 1.7
    lam = dt / eps
    U = imex_step(Decay(), t, np.array([[4.0, u0]]), dt, eps, zero_rhs)
    u1 = u0 / (1 + g * lam)
    u2 = (u0 - (1 - 2 * g) * lam * u1) / (1 + g * lam)
    expected = u0 - lam * 0.5 * (u1 + u2)
    assert U[0, 1] == pytest.approx(expected, rel=1e-14)
    assert U[0, 0] == 4.0


@pytest.mark.parametrize("scheme", ["ssp2-222", "ssp3-433", "ssp2-332"])
def test_zero_relaxation_is_the_explicit_scheme_bit_for_bit(scheme):
    model = make_granular(e_rest=1.0, g_grav=2.0)
    grid = Grid1D(0.0, 1.0, 64)
    x = grid.x
    U = model.conserved_from_primitive(30 + 5 * np.sin(2 * np.pi * x), np.cos(2 * np.pi * x), 20 + np.sin(4 * np.pi * x))
    rhs = SpatialOperator(model, grid, Periodic(), 5)
    t = builtin_scheme(scheme)
    a = imex_step(model, t, U, 1e-3, 0.01, rhs)
    b = explicit_step(model, t, U, 1e-3, rhs)
    assert np.array_equal(a, b)


def test_frozen_convection_keeps_equilibrium():
    model = make_broadwell()
    rng = np.random.default_rng(2)
    u = np.stack([rng.uniform(0.5, 2, 50), rng.uniform(-1, 1, 50)], axis=-1)
    U = model.equilibrium(u)
    for eps in (1.0, 1e-6, 1e-12):
        out = imex_step(model, "ssp3-433", U, 0.1, eps, zero_rhs)
        np.testing.assert_allclose(out, U, rtol=1e-14, atol=1e-15)


def test_relaxation_routes_agree_when_not_stiff():
    ic = initial_conditions("broadwell-smooth", n=60, a_z=0.2)
    rng = np.random.default_rng(4)
    U = ic.state * (1 + 0.05 * rng.standard_normal(ic.state.shape))
    rhs = SpatialOperator(ic.model, ic.grid, Periodic(), 5)
    for scheme in ("ssp2-222", "ssp3-433"):
        a = imex_step(ic.model, scheme, U, 0.2, 1.0, rhs, "recombine")
        b = imex_step(ic.model, scheme, U, 0.2, 1.0, rhs, "direct")
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_stiff_step_stays_finite_and_matches_limit_to_round_off():
    ic = initial_conditions("broadwell-smooth", n=80)
    rhs = SpatialOperator(ic.model, ic.grid, Periodic(), 5)
    dt = 0.6 * ic.grid.dx
    out = imex_step(ic.model, "ssp3-433", ic.state, dt, 1e-12, rhs)
    assert np.all(np.isfinite(out))
    cfg = SolverConfig("ssp3-433", 1e-12, 0.6, dt, bc=Periodic())
    lim = equilibrium_integrate(ic.model, cfg, ic.state[:, :2], ic.grid).final
    assert np.max(np.abs(out[:, :2] - lim)) < 1e-10


def test_first_stage_without_implicit_part_well_prepared():
    half = 0.5
    ex = ButcherTableau([[0, 0], [1, 0]], [half, half], kind="explicit")
    im = ButcherTableau([[0, 0], [half, half]], [half, half])
    t = ImexTableau(ex, im, "wp")
    model = make_broadwell()
    U = model.equilibrium(np.array([[1.0, 0.2], [2.0, -0.4]]))
    assert np.all(model.relax(U) == 0)
    out = imex_step(model, t, U, 0.1, 1e-10, zero_rhs)
    np.testing.assert_allclose(out, U, rtol=1e-14)


def test_not_ap_scheme_rejected():
    ex = ButcherTableau([[0, 0], [1, 0]], [0.5, 0.5], kind="explicit")
    im = ButcherTableau([[0.5, 0], [0.5, 0]], [0.5, 0.5])
    with pytest.raises(UnsupportedError):
        imex_step(make_broadwell(), ImexTableau(ex, im), np.ones((3, 3)), 0.1, 1.0, zero_rhs)


def test_stage_failure_reports_stage_and_node():
    model = make_broadwell()
    U = np.tile([1.0, 0.0, 0.5], (6, 1))
    U[4, 0] = -1.0
    with pytest.raises(StepFailure) as info:
        imex_step(model, "ssp2-222", U, 0.1, 1.0, zero_rhs)
    assert info.value.stage == 1 and info.value.node == 4
    assert "stage=1" in str(info.value)


def test_cfl_dt_convention():
    model = make_broadwell()
    U = np.ones((4, 3))
    assert cfl_dt(model, U, Grid1D(0, 0.4, 4), 0.6) == pytest.approx(0.06)
    assert cfl_dt(model, U, Grid1D(0, 1, 100), 0.5) == pytest.approx(0.005)
    assert cfl_dt(model, U, 0.1, 0.6) == pytest.approx(0.06)

    class Fast(Decay):
        def wave_speed(self, U):
            return np.full(np.shape(U)[:-1], 3.0)

    with pytest.raises(NumericalError, match="CFL"):
        cfl_dt(Fast(), U, 1.0, 0.5)
    assert cfl_dt(Fast(), U, 1.0, 0.5, max_courant=0.9) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        cfl_dt(model, U, 0.0, 0.5)
    with pytest.raises(ValueError):
        cfl_dt(model, U, 0.1, 0.0)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(cfl=0, bc=Periodic())
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0, bc=Periodic())
    with pytest.raises(ValueError):
        SolverConfig(t_end=-1, bc=Periodic())
    with pytest.raises(ValueError):
        SolverConfig()
    with pytest.raises(ValueError):
        SolverConfig(bc=Periodic(), relax_route="other")


def _smooth_run(n, **kw):
    ic = initial_conditions("broadwell-smooth", n=n)
    cfg = SolverConfig(kw.pop("scheme", "ssp3-433"), kw.pop("eps", 1.0), 0.6, kw.pop("t_end", 1.0), bc=ic.bc, **kw)
    return ic, integrate(ic.model, cfg, ic.state, ic.grid)


def test_zero_time_trajectory():
    ic, tr = _smooth_run(40, t_end=0.0)
    assert tr.times == (0.0,) and tr.step_count == 0
    np.testing.assert_array_equal(tr.final, ic.state)


def test_determinism_and_landing():
    _, a = _smooth_run(50, t_end=1.3)
    _, b = _smooth_run(50, t_end=1.3)
    assert a.times[-1] == 1.3
    assert np.array_equal(a.final, b.final)


def test_step_count_doubles_with_resolution():
    counts = [_smooth_run(n, t_end=2.0)[1].step_count for n in (25, 50, 100)]
    for coarse, fine in zip(counts, counts[1:]):
        assert abs(fine - 2 * coarse) <= 1
    assert counts[0] == steps_for(2.0, 0.6 * 20 / 25)


def test_output_times():
    _, tr = _smooth_run(40, t_end=1.0, output_times=(0.25, 0.5, 2.0))
    assert tr.times == (0.25, 0.5, 1.0)
    assert len(tr.states) == 3


def test_project_output_moves_only_nonconserved_components():
    _, raw = _smooth_run(60, eps=1e-12, t_end=1.0)
    ic, proj = _smooth_run(60, eps=1e-12, t_end=1.0, project_output=True)
    np.testing.assert_array_equal(raw.final[:, :2], proj.final[:, :2])
    z_eq = ic.model.equilibrium(proj.final[:, :2])[:, 2]
    assert np.max(np.abs(proj.final[:, 2] - z_eq) / z_eq) < 1e-12


def test_failure_carries_time():
    ic = initial_conditions("broadwell-smooth", n=40)
    state = ic.state.copy()
    state[3, 0] = -0.5
    cfg = SolverConfig("ssp2-222", 1.0, 0.6, 1.0, bc=ic.bc)
    with pytest.raises(StepFailure) as info:
        integrate(ic.model, cfg, state, ic.grid)
    assert info.value.time == 0.0
    state[3, 0] = np.nan
    with pytest.raises(NumericalError):
        integrate(ic.model, cfg, state, ic.grid)


@pytest.mark.parametrize("ic_name, scheme", [("broadwell-smooth", "ssp3-433"), ("shallow-sine", "ssp2-222")])
def test_asymptotic_limit(ic_name, scheme):
    ic = initial_conditions(ic_name, n=100)
    cfg = SolverConfig(scheme, 1e-12, ic.cfl, 0.3, bc=ic.bc)
    full = integrate(ic.model, cfg, ic.state, ic.grid).final
    lim = equilibrium_integrate(ic.model, cfg, ic.model.project(ic.state), ic.grid).final
    assert np.sum(np.abs(full[:, : ic.model.n_cons] - lim)) / np.sum(np.abs(lim)) < 1e-10


def test_limit_alpha_modes_differ_but_stay_close():
    ic = initial_conditions("shallow-sine", n=100)
    cfg = SolverConfig("ssp3-433", 1e-12, 0.5, 0.1, bc=ic.bc)
    u0 = ic.model.project(ic.state)
    a = equilibrium_integrate(ic.model, cfg, u0, ic.grid, "relaxation").final
    b = equilibrium_integrate(ic.model, cfg, u0, ic.grid, "limit").final
    assert 0 < np.max(np.abs(a - b)) < 1e-2
    with pytest.raises(ValueError):
        equilibrium_integrate(ic.model, cfg, u0, ic.grid, "other")


def test_granular_limit_disabled():
    ic = initial_conditions("granular-inflow", n=20)
    cfg = SolverConfig("ssp3-433", 0.01, 0.025, 0.01, bc=ic.bc)
    with pytest.raises(UnsupportedError):
        equilibrium_integrate(ic.model, cfg, ic.model.project(ic.state), ic.grid)


# -- generic Newton ---------------------------------------------------------------------


def test_newton_identity_and_linear_cases():
    B = np.array([1.0, -2.0, 3.0])
    U, it = generic_newton_stage_solve(lambda V: -V, B, 0.0)
    assert it == 1 and np.array_equal(U, B)
    U, _ = generic_newton_stage_solve(lambda V: -V, B, 4.0, jacobian=lambda V: -np.eye(3), max_iter=1)
    np.testing.assert_allclose(U, B / 5.0, rtol=1e-15)


def test_newton_nonlinear_scalar():
    # u = b - mu u^3 has a unique real root
    B = np.array([2.0])
    U, it = generic_newton_stage_solve(lambda V: -V**3, B, 10.0)
    assert U[0] + 10.0 * U[0] ** 3 == pytest.approx(2.0, rel=1e-14)
    assert it < 50


def test_newton_failures():
    with pytest.raises(NumericalError, match="singular"):
        generic_newton_stage_solve(lambda V: V, np.array([1.0, 1.0]), 1.0, jacobian=lambda V: np.eye(2))
    with pytest.raises(NumericalError, match="residual"):
        generic_newton_stage_solve(lambda V: -np.sinh(V) * 50, np.array([40.0]), 1e6, max_iter=2)
    with pytest.raises(ValueError):
        generic_newton_stage_solve(lambda V: V, np.array([1.0]), -1.0)


def test_steps_for():
    assert steps_for(0.0, 0.1) == 0
    assert steps_for(1.0, 0.1) == 10
    assert steps_for(1.05, 0.1) == 11
    assert math.isclose(0.1 * steps_for(1.0, 0.1), 1.0)
