"""Uniform 1-D grids, ghost cells and conservative convective operators.

State arrays ("fields") have shape ``(n, m)``: one row per grid node, one
column per state component.  Nodes sit at cell centres
``x_j = x_min + (j + 1/2) dx`` for both the finite-difference (point
values) and finite-volume (cell averages) paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError, UnsupportedError

FD_ORDERS = (1, 2, 5)
FV_ORDERS = (1, 2)
GHOST_DEPTH = {1: 1, 2: 2, 5: 3}


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid needs n >= 1 nodes, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError(f"empty interval [{self.x_min}, {self.x_max}]")

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n

    @property
    def x(self):
        return self.x_min + (np.arange(self.n) + 0.5) * self.dx

    def refined(self, factor=2):
        return Grid1D(self.x_min, self.x_max, self.n * factor)


# -- boundary conditions ---------------------------------------------------------


class BoundaryCondition:
    """Rule for filling ghost cells on one side of the domain."""

    name = "abstract"

    def __repr__(self):
        return f"{type(self).__name__}()"


class Periodic(BoundaryCondition):
    name = "periodic"


class Outflow(BoundaryCondition):
    """Zero-gradient extrapolation of the edge value."""

    name = "outflow"


class Inflow(BoundaryCondition):
    """Fixed ghost state."""

    name = "inflow"

    def __init__(self, state):
        self.state = np.atleast_1d(np.asarray(state, dtype=float))

    def __repr__(self):
        return f"Inflow({self.state.tolist()})"


class ReflectiveWall(BoundaryCondition):
    """Mirror the interior with the listed velocity components negated."""

    name = "wall"

    def __init__(self, velocity_indices=(1,)):
        self.velocity_indices = tuple(velocity_indices)

    def __repr__(self):
        return f"ReflectiveWall({list(self.velocity_indices)})"


def as_bc_pair(bc):
    """Normalise a single condition or a ``(left, right)`` pair."""
    if isinstance(bc, BoundaryCondition):
        left = right = bc
    else:
        left, right = bc
    if isinstance(left, Periodic) != isinstance(right, Periodic):
        raise ValueError("periodic boundaries must be imposed on both sides")
    return left, right


def _side_ghosts(values, bc, depth, side):
    n = values.shape[0]
    if isinstance(bc, Outflow):
        edge = values[:1] if side == "left" else values[-1:]
        return np.repeat(edge, depth, axis=0)
    if isinstance(bc, Inflow):
        state = np.broadcast_to(bc.state, values.shape[1:])
        return np.repeat(state[None, ...], depth, axis=0).astype(float)
    if isinstance(bc, ReflectiveWall):
        if depth > n:
            raise ValueError(f"reflective ghost depth {depth} exceeds n = {n}")
        if side == "left":
            ghosts = values[depth - 1::-1].copy()
        else:
            ghosts = values[: n - depth - 1: -1].copy() if n > depth else values[::-1].copy()
        for k in bc.velocity_indices:
            ghosts[:, k] = -ghosts[:, k]
        return ghosts
    raise TypeError(f"unsupported boundary condition {bc!r}")


def ghost_fill(values, bc, depth):
    """Return ``values`` extended by ``depth`` ghost nodes on each side.

    >>> ghost_fill(np.array([1.0, 2.0, 3.0]), Periodic(), 1)
    array([3., 1., 2., 3., 1.])
    """
    if depth < 1:
        raise ValueError(f"ghost depth must be >= 1, got {depth}")
    values = np.asarray(values, dtype=float)
    flat = values.ndim == 1
    vals = values[:, None] if flat else values
    left, right = as_bc_pair(bc)
    n = vals.shape[0]
    if isinstance(left, Periodic):
        if depth > n:
            raise ValueError(f"periodic ghost depth {depth} exceeds n = {n}")
        out = np.concatenate([vals[n - depth:], vals, vals[:depth]], axis=0)
    else:
        out = np.concatenate(
            [_side_ghosts(vals, left, depth, "left"), vals, _side_ghosts(vals, right, depth, "right")],
            axis=0,
        )
    return out[:, 0] if flat else out


# -- reconstruction and flux splitting --------------------------------------------


def weno5_reconstruct(window, bias="left"):
    """Fifth-order WENO value from a 5-cell window ``(v_{j-2} .. v_{j+2})``.

    ``bias="left"`` gives the value at the right face of the centre cell;
    ``bias="right"`` reverses the window and gives the value at its left
    face.  Extra trailing axes are reconstructed independently.
    """
    w = np.asarray(window, dtype=float)
    if w.shape[0] != 5:
        raise ValueError(f"WENO5 needs a window of 5 values, got {w.shape[0]}")
    if bias == "right":
        w = w[::-1]
    elif bias != "left":
        raise ValueError(f"bias must be 'left' or 'right', got {bias!r}")
    return kernels.weno5_faces(w)[0]


def llf_split(f_vals, u_vals, alpha):
    """Local Lax-Friedrichs splitting ``f± = (f ± alpha u) / 2``."""
    if alpha < 0:
        raise ValueError(f"dissipation speed must be nonnegative, got {alpha}")
    f = np.asarray(f_vals, dtype=float)
    u = np.asarray(u_vals, dtype=float)
    au = alpha * u
    return 0.5 * (f + au), 0.5 * (f - au)


def llf_flux(f_left, f_right, u_left, u_right, alpha):
    """Rusanov numerical flux ``(f(a) + f(b) - alpha (b - a)) / 2``."""
    return 0.5 * ((f_left + f_right) - alpha * (u_right - u_left))


def minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _limited_slopes(v):
    """Minmod slope (times dx) for interior entries ``1 .. len(v) - 2``."""
    return minmod(v[2:] - v[1:-1], v[1:-1] - v[:-2])


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(np.asarray(arr)))[0]
        raise NumericalError(f"non-finite value in {what} at index {tuple(bad)}")
    return arr


def _check_size(n, order):
    width = 2 * GHOST_DEPTH[order] - 1
    if n < width:
        raise ValueError(f"grid with n = {n} is smaller than the order-{order} stencil ({width})")


def convective_rhs(model, field, grid, bc, order=5):
    """Finite-difference approximation of ``-d/dx F(U)`` in conservative form.

    The flux is split with a single (global) dissipation speed, the largest
    wave-speed bound over the ghost-extended data.  Order 1 uses the split
    fluxes directly, order 2 a minmod-limited linear reconstruction of each
    split flux and order 5 WENO5.
    """
    if order not in FD_ORDERS:
        raise UnsupportedError(f"finite-difference order must be one of {FD_ORDERS}, got {order}")
    U = np.asarray(field, dtype=float)
    n = U.shape[0]
    _check_size(n, order)
    depth = GHOST_DEPTH[order]
    Ue = ghost_fill(U, bc, depth)
    alpha = float(np.max(model.wave_speed(Ue)))
    fp, fm = llf_split(model.flux(Ue), Ue, alpha)
    dx = grid.dx
    if order == 5:
        rhs = kernels.weno5_divergence(fp, fm, dx)
    else:
        if order == 1:
            face = fp[: n + 1] + fm[1 : n + 2]
        else:
            sp = _limited_slopes(fp)  # cells 1 .. n + 2
            sm = _limited_slopes(fm)
            face = (fp[1 : n + 2] + 0.5 * sp[: n + 1]) + (fm[2 : n + 3] - 0.5 * sm[1 : n + 2])
        rhs = -(face[1:] - face[:-1]) / dx
    return _check_finite(rhs, "convective term")


def fv_rhs(model, field, grid, bc, order=2):
    """Finite-volume convective term on cell averages with the Rusanov flux.

    Order 2 reconstructs interface states with minmod-limited slopes; the
    dissipation speed is global over the extended averages and the
    reconstructed interface states.
    """
    if order not in FV_ORDERS:
        raise UnsupportedError(f"finite-volume order must be one of {FV_ORDERS}, got {order}")
    U = np.asarray(field, dtype=float)
    n = U.shape[0]
    _check_size(n, order)
    depth = GHOST_DEPTH[order]
    Ue = ghost_fill(U, bc, depth)
    if order == 1:
        ul, ur = Ue[: n + 1], Ue[1 : n + 2]
    else:
        s = _limited_slopes(Ue)  # cells 1 .. n + 2
        ul = Ue[1 : n + 2] + 0.5 * s[: n + 1]
        ur = Ue[2 : n + 3] - 0.5 * s[1 : n + 2]
    alpha = float(max(np.max(model.wave_speed(Ue)), np.max(model.wave_speed(ul)), np.max(model.wave_speed(ur))))
    face = llf_flux(model.flux(ul), model.flux(ur), ul, ur, alpha)
    rhs = -(face[1:] - face[:-1]) / grid.dx
    return _check_finite(rhs, "convective term")


class SpatialOperator:
    """Callable convective term for a fixed model, grid and boundary setup."""

    def __init__(self, model, grid, bc, order=5, discretization="fd"):
        if discretization not in ("fd", "fv"):
            raise UnsupportedError(f"discretization must be 'fd' or 'fv', got {discretization!r}")
        allowed = FD_ORDERS if discretization == "fd" else FV_ORDERS
        if order not in allowed:
            raise UnsupportedError(
                f"{discretization} discretization supports orders {allowed}, got {order}"
            )
        self.model = model
        self.grid = grid
        self.bc = as_bc_pair(bc)
        self.order = order
        self.discretization = discretization

    def __call__(self, field):
        if self.discretization == "fd":
            return convective_rhs(self.model, field, self.grid, self.bc, self.order)
        return fv_rhs(self.model, field, self.grid, self.bc, self.order)
