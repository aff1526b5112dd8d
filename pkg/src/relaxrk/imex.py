"""IMEX Runge-Kutta time integration of relaxation systems.

Convection (and any non-stiff forcing) is advanced with the explicit
tableau, the relaxation term with the diagonally implicit one.  Each
implicit stage reduces to the per-node problem ``U = B + mu R(U)`` with
``mu = a_ii dt / eps``, delegated to the model's ``stage_solve``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, StepFailure, UnsupportedError
from .space import SpatialOperator, as_bc_pair
from .tableau import APClass, ImexTableau, ap_classify, builtin_scheme

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
RELAX_ROUTES = ("recombine", "direct")


def resolve_scheme(scheme):
    if isinstance(scheme, ImexTableau):
        return scheme
    return builtin_scheme(scheme)


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.  ``cfl`` is the ratio ``dt / dx``."""

    scheme: object = "ssp3-433"
    epsilon: float = 1.0
    cfl: float = 0.5
    t_end: float = 1.0
    spatial_order: int = 5
    discretization: str = "fd"
    bc: object = None
    fixed_dt: float | None = None
    output_times: tuple = ()
    relax_route: str = "recombine"
    # relax recorded snapshots with one extra stage solve (evolution unchanged)
    project_output: bool = False
    # when set, dt = min(cfl dx, max_courant dx / speed) instead of a hard CFL error
    max_courant: float | None = None

    def __post_init__(self):
        if not self.cfl > 0:
            raise ValueError(f"cfl must be positive, got {self.cfl}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise ValueError(f"fixed_dt must be positive, got {self.fixed_dt}")
        if self.max_courant is not None and not 0 < self.max_courant <= 1:
            raise ValueError(f"max_courant must lie in (0, 1], got {self.max_courant}")
        if self.relax_route not in RELAX_ROUTES:
            raise ValueError(f"relax_route must be one of {RELAX_ROUTES}, got {self.relax_route!r}")
        if self.bc is None:
            raise ValueError("a boundary condition (or left/right pair) is required")
        as_bc_pair(self.bc)

    @property
    def tableau(self):
        return resolve_scheme(self.scheme)


@dataclass(frozen=True)
class Trajectory:
    times: tuple
    states: tuple
    step_count: int
    newton_iteration_stats: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]


def _combine(coeffs, vectors):
    """``sum(c * v)`` skipping zero coefficients; ``None`` if all vanish."""
    acc = None
    for c, v in zip(coeffs, vectors):
        if c == 0:
            continue
        term = c * v
        acc = term if acc is None else acc + term
    return acc


def _advance(U, dt, *parts):
    out = U
    for p in parts:
        if p is not None:
            out = out + dt * p
    return out


def _first_bad_node(arr):
    bad = np.argwhere(~np.isfinite(arr))
    return int(bad[0][0]) if len(bad) else None


def _convective_part(model, rhs, U):
    K = rhs(U)
    if model.has_explicit_source():
        K = K + model.explicit_source(U)
    return K


def _solve_stage(model, B, mu, stage):
    try:
        U, iters = model.stage_solve_with_stats(B, mu)
    except NumericalError as exc:
        raise StepFailure(f"stage solve failed: {exc}", stage=stage, node=getattr(exc, "node", None)) from exc
    node = _first_bad_node(U)
    if node is not None:
        raise StepFailure("stage solve produced a non-finite value", stage=stage, node=node)
    return U, iters


def imex_step(model, tableau, state, dt, epsilon, rhs, relax_route="recombine", stats=None):
    """Advance ``state`` by one IMEX step of size ``dt``.

    ``rhs`` evaluates the semi-discrete convective term.  With
    ``relax_route="recombine"`` the stiff contribution of a stage with
    nonzero diagonal entry is recovered as ``(U_i - B_i) / (a_ii dt)``,
    which never multiplies by ``1/epsilon``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    tableau = resolve_scheme(tableau)
    if ap_classify(tableau) is APClass.NOT_AP:
        raise UnsupportedError(f"scheme {tableau.name!r} is not asymptotic preserving")
    if relax_route not in RELAX_ROUTES:
        raise ValueError(f"relax_route must be one of {RELAX_ROUTES}, got {relax_route!r}")
    Ae = tableau.explicit.as_float().A
    we = tableau.explicit.as_float().w
    Ai = tableau.implicit.as_float().A
    wi = tableau.implicit.as_float().w
    U0 = np.asarray(state, dtype=float)
    K, S = [], []
    for i in range(tableau.nu):
        B = _advance(U0, dt, _combine(Ae[i, :i], K), _combine(Ai[i, :i], S))
        a = Ai[i, i]
        if a != 0:
            Ui, iters = _solve_stage(model, B, a * dt / epsilon, i + 1)
            if stats is not None:
                stats["max"] = max(stats.get("max", 0), iters)
                stats["total"] = stats.get("total", 0) + iters
            if relax_route == "recombine":
                S.append((Ui - B) / (a * dt))
            else:
                S.append(model.relax(Ui) / epsilon)
        else:
            Ui = B
            S.append(model.relax(Ui) / epsilon)
        K.append(_convective_part(model, rhs, Ui))
    out = _advance(U0, dt, _combine(we, K), _combine(wi, S))
    node = _first_bad_node(out)
    if node is not None:
        raise StepFailure("non-finite value after step", node=node)
    return out


def explicit_step(model, tableau, state, dt, rhs):
    """One step of the explicit tableau alone (``tableau`` may be an IMEX pair)."""
    ex = resolve_scheme(tableau).explicit if not hasattr(tableau, "kind") else tableau
    ex = ex.as_float()
    U0 = np.asarray(state, dtype=float)
    K = []
    for i in range(ex.nu):
        Ui = _advance(U0, dt, _combine(ex.A[i, :i], K))
        K.append(_convective_part(model, rhs, Ui))
    out = _advance(U0, dt, _combine(ex.w, K))
    node = _first_bad_node(out)
    if node is not None:
        raise StepFailure("non-finite value after step", node=node)
    return out


def cfl_dt(model, state, grid, cfl, max_courant=None):
    """``dt = cfl * dx``; raises if the true Courant number exceeds one.

    With ``max_courant`` the step is instead shortened so that
    ``dt * speed / dx <= max_courant``.
    """
    if not cfl > 0:
        raise ValueError(f"cfl must be positive, got {cfl}")
    dx = grid.dx if hasattr(grid, "dx") else float(grid)
    if not dx > 0:
        raise ValueError(f"grid spacing must be positive, got {dx}")
    dt = cfl * dx
    if max_courant is not None:
        speed = model.wave_speed_bound(state)
        if speed > 0:
            dt = min(dt, max_courant * dx / speed)
    _check_courant(model, state, dt, dx)
    return dt


def _check_courant(model, state, dt, dx):
    speed = model.wave_speed_bound(state)
    if dt * speed / dx > 1.0:
        raise NumericalError(
            f"CFL violation: dt * max speed / dx = {dt * speed / dx:.6g} > 1 "
            f"(dt = {dt:.6g}, max speed = {speed:.6g})"
        )


def _step_sequence(t_end, output_times):
    targets = sorted({float(t) for t in output_times if 0 < t < t_end} | {float(t_end)})
    return targets


def _run(model, config, initial, grid, stepper, snapshot=None):
    U = np.asarray(initial, dtype=float).copy()
    if not np.all(np.isfinite(U)):
        raise NumericalError("initial data contain non-finite values")
    times, states = [], []
    t = 0.0
    steps = 0
    if config.t_end == 0:
        return Trajectory((0.0,), (U,), 0, {})
    for target in _step_sequence(config.t_end, config.output_times):
        while t < target:
            if config.fixed_dt is not None:
                dt = config.fixed_dt
                _check_courant(model, U, dt, grid.dx)
            else:
                dt = cfl_dt(model, U, grid, config.cfl, config.max_courant)
            last = t + dt * (1.0 + 1e-10) >= target
            if last:
                dt = target - t
            try:
                U = stepper(U, dt)
            except StepFailure as exc:
                exc.time = t
                raise
            steps += 1
            t = target if last else t + dt
        times.append(t)
        states.append(U.copy() if snapshot is None else snapshot(U, t))
    return times, states, steps


def integrate(model, config, initial, grid):
    """Integrate the full relaxation system from ``t = 0`` to ``config.t_end``."""
    tableau = config.tableau
    rhs = SpatialOperator(model, grid, config.bc, config.spatial_order, config.discretization)
    stats = {"max": 0, "total": 0}

    def stepper(U, dt):
        return imex_step(model, tableau, U, dt, config.epsilon, rhs, config.relax_route, stats)

    snapshot = None
    if config.project_output:
        a_last = float(tableau.implicit.as_float().A[-1, -1])

        h = config.fixed_dt if config.fixed_dt is not None else config.cfl * grid.dx

        def snapshot(U, dt):
            # nominal step, so a clipped final step does not weaken the solve
            return _solve_stage(model, U, a_last * h / config.epsilon, tableau.nu)[0]

    result = _run(model, config, initial, grid, stepper, snapshot)
    if isinstance(result, Trajectory):
        return result
    times, states, steps = result
    return Trajectory(tuple(times), tuple(states), steps, stats)


class EquilibriumSystem:
    """The reduced conservation law ``u_t + G(u)_x = Q s(E(u))`` of a model.

    ``alpha_mode`` selects the Lax-Friedrichs dissipation speed:
    ``"relaxation"`` uses the full system's bound at ``E(u)`` (so the
    discrete limit of the relaxation scheme is reproduced exactly),
    ``"limit"`` the characteristic speed of the reduced system.
    """

    def __init__(self, model, alpha_mode="relaxation"):
        if not model.supports_limit:
            raise UnsupportedError(f"model {model.name!r} has no enabled limit system")
        if alpha_mode not in ("relaxation", "limit"):
            raise ValueError(f"alpha_mode must be 'relaxation' or 'limit', got {alpha_mode!r}")
        self.model = model
        self.alpha_mode = alpha_mode
        self.name = f"{model.name}-limit"
        self.m = self.n_cons = model.n_cons

    def flux(self, u):
        return self.model.limit_flux(u)

    def wave_speed(self, u):
        if self.alpha_mode == "relaxation":
            return self.model.wave_speed(self.model.equilibrium(u))
        return self.model.limit_wave_speed(u)

    def wave_speed_bound(self, u):
        return float(np.max(self.wave_speed(u)))

    def has_explicit_source(self):
        return self.model.has_explicit_source()

    def explicit_source(self, u):
        return self.model.project(self.model.explicit_source(self.model.equilibrium(u)))


def equilibrium_integrate(model, config, initial_u, grid, alpha_mode="relaxation"):
    """Integrate the limit system with the explicit tableau of the configured scheme."""
    system = EquilibriumSystem(model, alpha_mode)
    bc = _project_bc(model, config.bc)
    rhs = SpatialOperator(system, grid, bc, config.spatial_order, config.discretization)
    ex = config.tableau.explicit

    def stepper(u, dt):
        return explicit_step(system, ex, u, dt, rhs)

    result = _run(system, config, initial_u, grid, stepper)
    if isinstance(result, Trajectory):
        return result
    times, states, steps = result
    return Trajectory(tuple(times), tuple(states), steps, {})


def _project_bc(model, bc):
    from .space import Inflow, ReflectiveWall

    out = []
    for side in as_bc_pair(bc):
        if isinstance(side, Inflow):
            side = Inflow(model.project(side.state))
        elif isinstance(side, ReflectiveWall):
            side = ReflectiveWall(tuple(k for k in side.velocity_indices if k < model.n_cons))
        out.append(side)
    return tuple(out)


# -- generic Newton stage solver ------------------------------------------------


def _fd_jacobian(func, U):
    m = U.shape[0]
    J = np.empty((m, m))
    for k in range(m):
        h = 1e-7 * max(1.0, abs(U[k]))
        up, dn = U.copy(), U.copy()
        up[k] += h
        dn[k] -= h
        J[:, k] = (func(up) - func(dn)) / (2.0 * h)
    return J


def generic_newton_stage_solve(relax, B, mu, jacobian=None, guess=None,
                               tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Solve ``U - B - mu relax(U) = 0`` for one node by damped Newton.

    The residual is divided by ``1 + mu`` so that the stopping test
    ``|r|_inf < tol (1 + |B|_inf)`` stays meaningful for very stiff
    stages.  ``jacobian`` returns ``d relax / dU``; finite differences are
    used when it is omitted.  Returns ``(U, iterations)``.
    """
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    B = np.asarray(B, dtype=float)
    U = B.copy() if guess is None else np.asarray(guess, dtype=float).copy()
    scale = 1.0 + mu
    jac = jacobian if jacobian is not None else (lambda V: _fd_jacobian(relax, V))
    target = tol * (1.0 + np.max(np.abs(B)))

    def residual(V):
        return ((V - B) - mu * relax(V)) / scale

    r = residual(U)
    rn = np.max(np.abs(r))
    polish = 0
    for it in range(1, max_iter + 1):
        J = (np.eye(B.shape[0]) - mu * jac(U)) / scale
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular stage Jacobian at iteration {it}") from exc
        if not np.all(np.isfinite(step)):
            raise NumericalError(f"singular stage Jacobian at iteration {it}")
        lam = 1.0
        for _ in range(30):
            cand = U + lam * step
            rc = residual(cand)
            rcn = np.max(np.abs(rc))
            if np.isfinite(rcn) and rcn <= (1.0 - 1e-4 * lam) * rn:
                break
            lam *= 0.5
        else:
            if rn < target:
                return U, it - 1
            raise NumericalError(f"Newton line search failed, residual {rn:.3e}")
        U, r, rn = cand, rc, rcn
        if rn < target:
            # a couple of extra iterations push the error to round-off
            polish += 1
            if polish > 2 or rn == 0:
                return U, it
    if rn < target:
        return U, max_iter
    raise NumericalError(f"Newton did not converge in {max_iter} iterations, residual {rn:.3e}")


def newton_stage_solve(model, B, mu, **kwargs):
    """Node-by-node generic Newton solve using the model's relaxation term."""
    B = np.asarray(B, dtype=float)
    flat = B.reshape(-1, B.shape[-1])
    out = np.empty_like(flat)
    for j, b in enumerate(flat):
        guess = b
        if mu > 0 and mu * np.max(np.abs(model.relax_jacobian(b))) > 1.0:
            guess = model.equilibrium(model.project(b))
        if mu == 0:
            out[j] = b
            continue
        try:
            out[j], _ = generic_newton_stage_solve(
                model.relax, b, mu, jacobian=model.relax_jacobian, guess=guess, **kwargs
            )
        except NumericalError as exc:
            exc.node = j
            raise
    return out.reshape(B.shape)


def steps_for(t_end, dt):
    """Number of steps the time loop takes for a constant ``dt``."""
    if t_end == 0:
        return 0
    return max(1, math.ceil(t_end / dt - 1e-10))
