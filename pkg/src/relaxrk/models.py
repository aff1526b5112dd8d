"""Hyperbolic systems with relaxation and their test configurations.

Each model works on state arrays of shape ``(..., m)``; the conserved
quantities are the leading ``n_cons`` components, so the conserved
projection is a coordinate selection.  The relaxation parameter is not a
model attribute: it is supplied per run and enters the stage solver through
``mu = a_ii * dt / eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, UnsupportedError
from .space import Grid1D, Inflow, Outflow, Periodic, ReflectiveWall

# Newton iteration cap for the granular energy equation
GRANULAR_MAX_ITER = 50


class RelaxationModel:
    """Interface shared by every relaxation system.

    Subclasses provide ``flux``, ``relax``, ``equilibrium``, ``wave_speed``
    and a vectorised ``stage_solve`` returning ``U`` with
    ``U = B + mu * relax(U)``.
    """

    name = "abstract"
    m = 0
    n_cons = 0
    component_names: tuple = ()
    velocity_indices: tuple = ()
    supports_limit = True

    @property
    def Q(self):
        q = np.zeros((self.n_cons, self.m))
        q[np.arange(self.n_cons), np.arange(self.n_cons)] = 1.0
        return q

    def project(self, U):
        return np.asarray(U, dtype=float)[..., : self.n_cons]

    def limit_flux(self, u):
        return self.project(self.flux(self.equilibrium(u)))

    def wave_speed_bound(self, U):
        return float(np.max(self.wave_speed(U)))

    def limit_wave_speed_bound(self, u):
        return float(np.max(self.limit_wave_speed(u)))

    def explicit_source(self, U):
        return np.zeros_like(np.asarray(U, dtype=float))

    def has_explicit_source(self):
        return False

    def stage_solve_with_stats(self, B, mu):
        """Stage solve plus the largest per-cell iteration count (0 if closed form)."""
        return self.stage_solve(B, mu), 0

    def relax_jacobian(self, U):
        """Jacobian of ``relax`` at one state, by central differences."""
        U = np.asarray(U, dtype=float)
        J = np.empty((self.m, self.m))
        for k in range(self.m):
            h = 1e-7 * max(1.0, abs(U[k]))
            up, dn = U.copy(), U.copy()
            up[k] += h
            dn[k] -= h
            J[:, k] = (self.relax(up) - self.relax(dn)) / (2 * h)
        return J

    def reflective_wall(self):
        return ReflectiveWall(self.velocity_indices)

    def __repr__(self):
        return f"{type(self).__name__}()"


def _fail(message, bad):
    """NumericalError tagged with the first offending node."""
    err = NumericalError(message)
    idx = np.argwhere(np.atleast_1d(bad))
    err.node = int(idx[0][0]) if len(idx) else None
    return err


def _split(U):
    U = np.asarray(U, dtype=float)
    return U, [U[..., k] for k in range(U.shape[-1])]


class BroadwellModel(RelaxationModel):
    """Three-velocity discrete kinetic model, state ``(rho, m, z)``."""

    name = "broadwell"
    m = 3
    n_cons = 2
    component_names = ("rho", "m", "z")
    velocity_indices = (1,)

    def flux(self, U):
        U, (rho, m, z) = _split(U)
        return np.stack([m, z, m], axis=-1)

    def relax(self, U):
        U, (rho, m, z) = _split(U)
        zero = np.zeros_like(rho)
        return np.stack([zero, zero, 0.5 * (rho * rho + m * m - 2.0 * rho * z)], axis=-1)

    def relax_jacobian(self, U):
        rho, m, z = np.asarray(U, dtype=float)
        return np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [rho - z, m, -rho]])

    def equilibrium(self, u):
        u = np.asarray(u, dtype=float)
        rho, m = u[..., 0], u[..., 1]
        return np.stack([rho, m, (rho * rho + m * m) / (2.0 * rho)], axis=-1)

    def limit_flux(self, u):
        u = np.asarray(u, dtype=float)
        rho, m = u[..., 0], u[..., 1]
        v = m / rho
        return np.stack([rho * v, 0.5 * (rho + rho * v * v)], axis=-1)

    def wave_speed(self, U):
        # characteristic speeds of the linear flux are -1, 0, 1
        return np.ones(np.shape(U)[:-1])

    def limit_wave_speed(self, u):
        u = np.asarray(u, dtype=float)
        v = u[..., 1] / u[..., 0]
        root = np.sqrt(np.maximum(2.0 - v * v, 0.0))
        return np.maximum(np.abs(v + root), np.abs(v - root)) / 2.0

    def stage_solve(self, B, mu):
        B = np.asarray(B, dtype=float)
        rho, m, bz = B[..., 0], B[..., 1], B[..., 2]
        if np.any(rho <= 0):
            raise _fail("Broadwell stage solve needs rho > 0", rho <= 0)
        z = (bz + mu * (0.5 * (rho * rho + m * m))) / (1.0 + mu * rho)
        return np.stack([rho, m, z], axis=-1)


class ShallowWaterModel(RelaxationModel):
    """Shallow water with relaxation to ``hv = h^2/2``; state ``(h, hv)``."""

    name = "shallow-water"
    m = 2
    n_cons = 1
    component_names = ("h", "hv")
    velocity_indices = (1,)

    def flux(self, U):
        U, (h, hv) = _split(U)
        return np.stack([hv, h + 0.5 * h * h], axis=-1)

    def relax(self, U):
        U, (h, hv) = _split(U)
        return np.stack([np.zeros_like(h), 0.5 * h * h - hv], axis=-1)

    def relax_jacobian(self, U):
        h, hv = np.asarray(U, dtype=float)
        return np.array([[0.0, 0.0], [h, -1.0]])

    def equilibrium(self, u):
        h = np.asarray(u, dtype=float)[..., 0]
        return np.stack([h, 0.5 * h * h], axis=-1)

    def limit_flux(self, u):
        h = np.asarray(u, dtype=float)[..., 0]
        return (0.5 * h * h)[..., None]

    def wave_speed(self, U):
        h = np.asarray(U, dtype=float)[..., 0]
        if np.any(h <= 0):
            raise _fail("shallow water needs h > 0", h <= 0)
        # eigenvalues of [[0, 1], [1 + h, 0]]
        return np.sqrt(1.0 + h)

    def limit_wave_speed(self, u):
        return np.abs(np.asarray(u, dtype=float)[..., 0])

    def stage_solve(self, B, mu):
        B = np.asarray(B, dtype=float)
        h, bhv = B[..., 0], B[..., 1]
        if np.any(h <= 0):
            raise _fail("shallow water stage solve needs h > 0", h <= 0)
        hv = (bhv + mu * (0.5 * h * h)) / (1.0 + mu)
        return np.stack([h, hv], axis=-1)


@dataclass(frozen=True)
class TrafficParams:
    A_coef: float = 1.0
    c_v: float = 2.0
    gamma_exp: float = 0.0
    rho_m: float = 1.0
    v_m: float = 1.0
    alpha_v: float = 11.0
    beta_v: float = 0.22


class TrafficModel(RelaxationModel):
    """Second-order traffic model in conservative variables ``(rho, rho w)``.

    ``w = v + P(rho)``; the run's relaxation parameter plays the role of the
    relaxation time ``T``.
    """

    name = "traffic"
    m = 2
    n_cons = 1
    component_names = ("rho", "y")
    velocity_indices = ()

    def __init__(self, **params):
        self.params = TrafficParams(**params)
        if self.params.A_coef <= 0 or self.params.rho_m <= 0 or self.params.v_m <= 0:
            raise ValueError("traffic model needs A > 0, rho_m > 0, v_m > 0")
        self._check_subcharacteristic()

    def __repr__(self):
        return f"TrafficModel({self.params})"

    def _check_subcharacteristic(self, tol=1e-8):
        rho = np.linspace(0.01, 0.99, 99) * self.params.rho_m
        h = 1e-6 * self.params.rho_m
        dV = (self.V(rho + h) - self.V(rho - h)) / (2 * h)
        dP = self.dP(rho)
        if np.any(dV > tol) or np.any(-dP > dV + tol):
            raise ValueError("traffic parameters violate -P'(rho) <= V'(rho) <= 0")

    def P(self, rho):
        p = self.params
        r = np.asarray(rho, dtype=float) / p.rho_m
        if p.gamma_exp > 0:
            return p.c_v / p.gamma_exp * r**p.gamma_exp
        return p.c_v * np.log(r)

    def dP(self, rho):
        p = self.params
        rho = np.asarray(rho, dtype=float)
        if p.gamma_exp > 0:
            return p.c_v / p.rho_m * (rho / p.rho_m) ** (p.gamma_exp - 1.0)
        return p.c_v / rho

    def V(self, rho):
        p = self.params
        r = np.asarray(rho, dtype=float) / p.rho_m
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = p.alpha_v * (r - p.beta_v) / (r - 1.0)
            num = np.where(r >= 1.0, 0.0, math.pi / 2 + np.arctan(arg))
        return p.v_m * num / (math.pi / 2 + math.atan(p.alpha_v * p.beta_v))

    def _check_density(self, rho):
        bad = (rho <= 0) | (rho >= self.params.rho_m)
        if np.any(bad):
            raise _fail("traffic density must lie in (0, rho_m)", bad)

    def velocity(self, U):
        U = np.asarray(U, dtype=float)
        rho, y = U[..., 0], U[..., 1]
        return y / rho - self.P(rho)

    def flux(self, U):
        U = np.asarray(U, dtype=float)
        rho, y = U[..., 0], U[..., 1]
        v = y / rho - self.P(rho)
        return np.stack([rho * v, v * y], axis=-1)

    def relax(self, U):
        U = np.asarray(U, dtype=float)
        rho = U[..., 0]
        v = self.velocity(U)
        return np.stack([np.zeros_like(rho), self.params.A_coef * rho * (self.V(rho) - v)], axis=-1)

    def equilibrium(self, u):
        rho = np.asarray(u, dtype=float)[..., 0]
        return np.stack([rho, rho * (self.V(rho) + self.P(rho))], axis=-1)

    def limit_flux(self, u):
        rho = np.asarray(u, dtype=float)[..., 0]
        return (rho * self.V(rho))[..., None]

    def wave_speed(self, U):
        U = np.asarray(U, dtype=float)
        rho = U[..., 0]
        self._check_density(rho)
        v = self.velocity(U)
        return np.maximum(np.abs(v), np.abs(v - rho * self.dP(rho)))

    def limit_wave_speed(self, u):
        rho = np.asarray(u, dtype=float)[..., 0]
        h = 1e-7 * self.params.rho_m
        dV = (self.V(rho + h) - self.V(rho - h)) / (2 * h)
        return np.abs(self.V(rho) + rho * dV)

    def stage_solve(self, B, mu):
        B = np.asarray(B, dtype=float)
        rho, by = B[..., 0], B[..., 1]
        self._check_density(rho)
        a = mu * self.params.A_coef
        y = (by + a * (rho * (self.V(rho) + self.P(rho)))) / (1.0 + a)
        return np.stack([rho, y], axis=-1)


@dataclass(frozen=True)
class GranularParams:
    e_rest: float = 0.97
    sigma: float = 0.1
    g_grav: float = 1.0
    nu_M: float = 0.64994


class GranularModel(RelaxationModel):
    """Euler equations of a dense granular gas, state ``(rho, rho u, E)``.

    ``E = rho u^2 / 2 + 3 rho T / 2``.  Inelastic collisions drain the
    granular temperature through the stiff sink; gravity is an explicit,
    non-stiff momentum source.
    """

    name = "granular"
    m = 3
    n_cons = 2
    component_names = ("rho", "rho_u", "E")
    velocity_indices = (1,)
    supports_limit = False

    def __init__(self, **params):
        self.params = GranularParams(**params)
        p = self.params
        if not 0 <= p.e_rest <= 1 or p.sigma <= 0 or not 0 < p.nu_M < 1:
            raise ValueError(f"invalid granular parameters {p}")

    def __repr__(self):
        return f"GranularModel({self.params})"

    def volume_fraction(self, rho):
        return self.params.sigma**3 * np.asarray(rho, dtype=float) * math.pi / 6.0

    def correlation(self, rho):
        p = self.params
        nu = self.volume_fraction(rho)
        if np.any(nu >= p.nu_M):
            raise _fail(f"volume fraction reached close packing ({np.max(nu):.6g} >= {p.nu_M})", nu >= p.nu_M)
        if np.any(nu <= 0):
            raise _fail("granular density must be positive", nu <= 0)
        return nu / (1.0 - (nu / p.nu_M) ** (4.0 * p.nu_M / 3.0))

    def temperature(self, U):
        """Granular temperature, clamped at zero."""
        U = np.asarray(U, dtype=float)
        rho, mom, E = U[..., 0], U[..., 1], U[..., 2]
        return np.maximum(0.0, 2.0 * (E - 0.5 * mom * mom / rho) / (3.0 * rho))

    def raw_temperature(self, U):
        U = np.asarray(U, dtype=float)
        rho, mom, E = U[..., 0], U[..., 1], U[..., 2]
        return 2.0 * (E - 0.5 * mom * mom / rho) / (3.0 * rho)

    def pressure(self, U):
        U = np.asarray(U, dtype=float)
        rho = U[..., 0]
        G = self.correlation(rho)
        return rho * self.temperature(U) * (1.0 + 2.0 * (1.0 + self.params.e_rest) * G)

    def temperature_from_pressure(self, rho, p):
        G = self.correlation(rho)
        return p / (rho * (1.0 + 2.0 * (1.0 + self.params.e_rest) * G))

    def conserved_from_primitive(self, rho, u, T):
        rho, u, T = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (rho, u, T)))
        return np.stack([rho, rho * u, 0.5 * rho * u * u + 1.5 * rho * T], axis=-1)

    def flux(self, U):
        U = np.asarray(U, dtype=float)
        rho, mom, E = U[..., 0], U[..., 1], U[..., 2]
        u = mom / rho
        p = self.pressure(U)
        return np.stack([mom, mom * u + p, (E + p) * u], axis=-1)

    def _sink_coefficient(self, rho):
        p = self.params
        return (1.0 - p.e_rest**2) * self.correlation(rho) * rho * rho

    def relax(self, U):
        U = np.asarray(U, dtype=float)
        rho = U[..., 0]
        T = self.temperature(U)
        zero = np.zeros_like(rho)
        return np.stack([zero, zero, -self._sink_coefficient(rho) * T**1.5], axis=-1)

    def explicit_source(self, U):
        U = np.asarray(U, dtype=float)
        out = np.zeros_like(U)
        out[..., 1] = U[..., 0] * self.params.g_grav
        return out

    def has_explicit_source(self):
        return self.params.g_grav != 0

    def equilibrium(self, u):
        u = np.asarray(u, dtype=float)
        rho, mom = u[..., 0], u[..., 1]
        return np.stack([rho, mom, 0.5 * mom * mom / rho], axis=-1)

    def limit_flux(self, u):
        # pressureless gas dynamics
        u = np.asarray(u, dtype=float)
        rho, mom = u[..., 0], u[..., 1]
        return np.stack([mom, mom * mom / rho], axis=-1)

    def correlation_derivative(self, rho):
        """``dG/drho``."""
        p = self.params
        nu = self.volume_fraction(rho)
        k = 4.0 * p.nu_M / 3.0
        r = (nu / p.nu_M) ** k
        dG_dnu = (1.0 - r + k * r) / (1.0 - r) ** 2
        return dG_dnu * nu / np.asarray(rho, dtype=float)

    def sound_speed(self, U):
        """Adiabatic sound speed of the dense-gas equation of state.

        With ``p = rho T Z(rho)`` and internal energy ``3T/2`` per unit mass,
        ``c^2 = T (Z (1 + 2Z/3) + rho Z')``; the ideal-gas value
        ``5p/(3 rho)`` is recovered for ``Z = 1``.
        """
        U = np.asarray(U, dtype=float)
        rho = U[..., 0]
        T = self.temperature(U)
        two_e = 2.0 * (1.0 + self.params.e_rest)
        Z = 1.0 + two_e * self.correlation(rho)
        dZ = two_e * self.correlation_derivative(rho)
        return np.sqrt(T * (Z * (1.0 + 2.0 * Z / 3.0) + rho * dZ))

    def wave_speed(self, U):
        U = np.asarray(U, dtype=float)
        u = U[..., 1] / U[..., 0]
        return 1.2 * (np.abs(u) + self.sound_speed(U))

    def limit_wave_speed(self, u):
        u = np.asarray(u, dtype=float)
        return np.abs(u[..., 1] / u[..., 0])

    def stage_solve(self, B, mu):
        return self.stage_solve_with_stats(B, mu)[0]

    def stage_solve_with_stats(self, B, mu):
        """Solve ``E = B_E - mu k(rho) T(E)^{3/2}`` cell by cell.

        With ``e = E - rho u^2/2`` the equation reads ``e + K e^{3/2} = b``,
        convex and increasing in ``e >= 0``.  Newton started from the upper
        bound ``min(b, (b/K)^{2/3})`` decreases monotonically to the root;
        iterates leaving the bracket fall back to bisection.
        """
        B = np.asarray(B, dtype=float)
        rho, mom, BE = B[..., 0], B[..., 1], B[..., 2]
        kin = 0.5 * mom * mom / rho
        b = BE - kin
        K = mu * self._sink_coefficient(rho) * (2.0 / (3.0 * rho)) ** 1.5
        active = (b > 0) & (K > 0)
        drop = np.zeros_like(b)
        if not np.any(active):
            return B.copy(), 0
        ba, Ka = b[active], K[active]
        lo = np.zeros_like(ba)
        hi = np.minimum(ba, (ba / Ka) ** (2.0 / 3.0))
        e = hi.copy()
        iters = np.zeros(ba.shape, dtype=int)
        done = np.zeros(ba.shape, dtype=bool)
        for it in range(1, GRANULAR_MAX_ITER + 1):
            todo = ~done
            s = np.sqrt(e[todo])
            phi = e[todo] + Ka[todo] * e[todo] * s - ba[todo]
            dphi = 1.0 + 1.5 * Ka[todo] * s
            # bracket update: phi is increasing
            hi_t, lo_t = hi[todo], lo[todo]
            hi_t = np.where(phi > 0, e[todo], hi_t)
            lo_t = np.where(phi < 0, e[todo], lo_t)
            new = e[todo] - phi / dphi
            outside = ~((new >= lo_t) & (new <= hi_t))
            new = np.where(outside, 0.5 * (lo_t + hi_t), new)
            step = np.abs(new - e[todo])
            conv = (step <= 1e-15 * np.maximum(new, 1e-300)) | (phi == 0) | (hi_t - lo_t <= 1e-15 * hi_t)
            e[todo] = new
            hi[todo] = hi_t
            lo[todo] = lo_t
            iters[todo] = it
            done[np.flatnonzero(todo)[conv]] = True
            if np.all(done):
                break
        if not np.all(done):
            bad = np.flatnonzero(active)[np.flatnonzero(~done)[0]]
            err = NumericalError("granular stage Newton did not converge")
            err.node = int(bad)
            raise err
        drop[active] = ba - e
        out = B.copy()
        out[..., 2] = BE - drop
        return out, int(iters.max())


# -- registry ------------------------------------------------------------------------


def make_broadwell():
    return BroadwellModel()


def make_shallow_water():
    return ShallowWaterModel()


def make_traffic(**params):
    return TrafficModel(**params)


def make_granular(**params):
    return GranularModel(**params)


MODELS = {
    "broadwell": make_broadwell,
    "shallow-water": make_shallow_water,
    "traffic": make_traffic,
    "granular": make_granular,
}
MODEL_NAMES = tuple(MODELS)


def make_model(name, **params):
    try:
        factory = MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; valid models: {', '.join(MODEL_NAMES)}") from None
    if params and name in ("broadwell", "shallow-water"):
        raise UnsupportedError(f"model {name!r} takes no parameters, got {sorted(params)}")
    return factory(**params)


# -- initial conditions ------------------------------------------------------------


@dataclass
class InitialCondition:
    """Initial data with the grid, boundary pair and suggested run settings."""

    name: str
    model: RelaxationModel
    grid: Grid1D
    state: np.ndarray
    bc: tuple
    t_end: float
    epsilon: float
    cfl: float
    periodic: bool = False


def _riemann(grid, left, right, x0):
    x = grid.x
    return np.where((x < x0)[:, None], np.asarray(left, float)[None, :], np.asarray(right, float)[None, :])


def broadwell_smooth(n=200, a_z=1.0, a_rho=0.3, a_v=0.1, length=20.0):
    model = make_broadwell()
    grid = Grid1D(0.0, length, n)
    s = np.sin(2.0 * math.pi * grid.x / length)
    rho = 1.0 + a_rho * s
    v = 0.5 + a_v * s
    m = rho * v
    z = a_z * (rho * rho + m * m) / (2.0 * rho)
    return InitialCondition(
        "broadwell-smooth", model, grid, np.stack([rho, m, z], axis=-1),
        (Periodic(), Periodic()), t_end=5.0, epsilon=1.0, cfl=0.6, periodic=True,
    )


def broadwell_rim1(n=200):
    model = make_broadwell()
    grid = Grid1D(-1.0, 1.0, n)
    state = _riemann(grid, (2.0, 1.0, 1.0), (1.0, 0.13962, 1.0), 0.2)
    return InitialCondition("broadwell-rim1", model, grid, state, (Outflow(), Outflow()),
                            t_end=0.5, epsilon=1e-8, cfl=0.5)


def broadwell_rim2(n=200):
    model = make_broadwell()
    grid = Grid1D(-1.0, 1.0, n)
    state = _riemann(grid, (1.0, 0.0, 1.0), (0.2, 0.0, 1.0), 0.0)
    return InitialCondition("broadwell-rim2", model, grid, state, (Outflow(), Outflow()),
                            t_end=0.25, epsilon=1e-8, cfl=0.5)


def shallow_sine(n=200):
    model = make_shallow_water()
    grid = Grid1D(0.0, 1.0, n)
    h = 1.0 + 0.2 * np.sin(8.0 * math.pi * grid.x)
    return InitialCondition("shallow-sine", model, grid, np.stack([h, 0.5 * h * h], axis=-1),
                            (Periodic(), Periodic()), t_end=0.5, epsilon=1e-8, cfl=0.5, periodic=True)


def traffic_riemann(n=200, **params):
    model = make_traffic(**params)
    grid = Grid1D(-3.0, 3.0, n)
    prim = _riemann(grid, (0.05, 0.05), (0.05, 0.5), 0.0)
    rho, v = prim[:, 0], prim[:, 1]
    state = np.stack([rho, rho * (v + model.P(rho))], axis=-1)
    return InitialCondition("traffic-riemann", model, grid, state, (Outflow(), Outflow()),
                            t_end=1.0, epsilon=0.2, cfl=0.4)


GRANULAR_INFLOW = {"rho": 34.37746770, "v": 18.0, "p": 1589.2685472}


def granular_inflow(n=200, **params):
    model = make_granular(**params)
    grid = Grid1D(0.0, 10.0, n)
    rho, v, p = GRANULAR_INFLOW["rho"], GRANULAR_INFLOW["v"], GRANULAR_INFLOW["p"]
    T = float(model.temperature_from_pressure(rho, p))
    inflow = model.conserved_from_primitive(rho, v, T)
    state = np.repeat(inflow[None, :], n, axis=0)
    return InitialCondition("granular-inflow", model, grid, state,
                            (Inflow(inflow), model.reflective_wall()),
                            t_end=0.2, epsilon=0.01, cfl=0.025)


INITIAL_CONDITIONS = {
    "broadwell-smooth": broadwell_smooth,
    "broadwell-rim1": broadwell_rim1,
    "broadwell-rim2": broadwell_rim2,
    "shallow-sine": shallow_sine,
    "traffic-riemann": traffic_riemann,
    "granular-inflow": granular_inflow,
}
IC_NAMES = tuple(INITIAL_CONDITIONS)
IC_MODEL = {
    "broadwell-smooth": "broadwell",
    "broadwell-rim1": "broadwell",
    "broadwell-rim2": "broadwell",
    "shallow-sine": "shallow-water",
    "traffic-riemann": "traffic",
    "granular-inflow": "granular",
}


def initial_conditions(name, n=200, **kwargs):
    """Build a named test configuration.

    ``broadwell-smooth`` accepts ``a_z``; the traffic and granular setups
    accept model parameter overrides.
    """
    try:
        factory = INITIAL_CONDITIONS[name]
    except KeyError:
        raise KeyError(
            f"unknown initial condition {name!r}; valid: {', '.join(IC_NAMES)}"
        ) from None
    return factory(n=n, **kwargs)
