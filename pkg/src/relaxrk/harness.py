"""Experiment engine: run specifications, error norms, convergence tables, CSV output."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import NumericalError, UnsupportedError
from .imex import SolverConfig, equilibrium_integrate, integrate
from .models import IC_MODEL, IC_NAMES, MODEL_NAMES, initial_conditions
from .space import Periodic, as_bc_pair
from .tableau import SCHEME_NAMES

NORMS = ("l1", "linf")
STIFF_RATIO = 1e4

@dataclass
class ExperimentSpec:
    """One run (or one convergence study when ``n_list`` is given).

    Unset numerical settings fall back to the suggestions attached to the
    initial condition.
    """

    ic: str = "broadwell-smooth"
    model: str | None = None
    scheme: str = "ssp3-433"
    n: int = 200
    n_list: tuple = ()
    cfl: float | None = None
    epsilon: float | None = None
    t_end: float | None = None
    spatial_order: int = 5
    discretization: str = "fd"
    out: str | None = None
    params: dict = field(default_factory=dict)
    a_z: float | None = None
    norm: str = "l1"
    component: int = 0
    project_output: bool = False
    max_courant: float | None = None

    def validate(self):
        if self.ic not in IC_NAMES:
            raise KeyError(f"unknown initial condition {self.ic!r}; valid: {', '.join(IC_NAMES)}")
        expected = IC_MODEL[self.ic]
        if self.model is not None and self.model != expected:
            if self.model not in MODEL_NAMES:
                raise KeyError(f"unknown model {self.model!r}; valid models: {', '.join(MODEL_NAMES)}")
            raise ValueError(f"initial condition {self.ic!r} belongs to model {expected!r}, not {self.model!r}")
        if self.scheme not in SCHEME_NAMES:
            raise KeyError(f"unknown scheme {self.scheme!r}; valid schemes: {', '.join(SCHEME_NAMES)}")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.a_z is not None and self.ic != "broadwell-smooth":
            raise ValueError("a_z applies to broadwell-smooth only")
        if self.n_list:
            check_nested(self.n_list)
        return self

    @property
    def model_name(self):
        return IC_MODEL[self.ic]

    def build(self, n=None):
        """Return ``(initial_condition, SolverConfig)`` for ``n`` nodes."""
        self.validate()
        kwargs = dict(self.params)
        if self.a_z is not None:
            kwargs["a_z"] = self.a_z
        ic = initial_conditions(self.ic, n=n or self.n, **kwargs)
        config = SolverConfig(
            scheme=self.scheme,
            epsilon=ic.epsilon if self.epsilon is None else self.epsilon,
            cfl=ic.cfl if self.cfl is None else self.cfl,
            t_end=ic.t_end if self.t_end is None else self.t_end,
            spatial_order=self.spatial_order,
            discretization=self.discretization,
            bc=ic.bc,
            project_output=self.project_output,
            max_courant=self.max_courant,
        )
        return ic, config


def check_nested(n_list):
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("empty n-list")
    for a, b in zip(n_list, n_list[1:]):
        if b != 2 * a:
            raise ValueError(f"n-list must double at every entry, got {n_list}")
    return n_list


def error_norm(a, b, component=None, norm="l1"):
    """Relative distance of ``a`` from ``b`` (L1 sum ratio or max ratio)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if component is not None:
        a, b = a[..., component], b[..., component]
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if norm == "l1":
        num, den = diff.sum(), np.abs(b).sum()
    elif norm == "linf":
        num, den = diff.max(initial=0.0), np.abs(b).max(initial=0.0)
    else:
        raise ValueError(f"norm must be one of {NORMS}, got {norm!r}")
    if den == 0:
        raise ZeroDivisionError("reference field is identically zero")
    return float(num / den)


def _fourier_shift(values, shift):
    """Periodic samples translated by ``shift`` grid spacings (trigonometric interpolation)."""
    n = values.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    phase = np.exp(2j * np.pi * k * shift / n)
    if n % 2 == 0:
        # Nyquist mode: keep the real (symmetric) part of the shift
        phase[n // 2] = np.cos(np.pi * shift)
    spec = np.fft.fft(values, axis=0)
    return np.real(np.fft.ifft(spec * phase.reshape((-1,) + (1,) * (values.ndim - 1)), axis=0))


def restrict(fine, factor, discretization="fd", periodic=True):
    """Map a field on a grid ``factor`` times finer onto the coarse nodes.

    Cell averages (``fv``) are averaged over children.  Point values (``fd``)
    sit at cell centres, which nested grids do not share; on periodic data
    they are moved to the coarse centres by trigonometric interpolation, so
    restriction does not limit the measured order.  Non-periodic point
    values fall back to child averaging.
    """
    out = np.asarray(fine, dtype=float)
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"restriction factor must be a power of two, got {factor}")
    if out.shape[0] % factor:
        raise ValueError(f"{out.shape[0]} nodes cannot be restricted by {factor}")
    if factor == 1:
        return out
    if discretization == "fd" and periodic:
        return _fourier_shift(out, (factor - 1) / 2.0)[::factor]
    return out.reshape((-1, factor) + out.shape[1:]).mean(axis=1)


@dataclass
class ErrorTable:
    rows: list
    component: int = 0
    norm: str = "l1"

    @property
    def orders(self):
        return [r[2] for r in self.rows]

    @property
    def finest_order(self):
        return self.rows[-1][2]

    def format(self):
        lines = [f"{'n':>6}  {'rel ' + self.norm + ' error':>16}  {'order':>7}"]
        for n, err, order in self.rows:
            o = "" if order is None else f"{order:7.3f}"
            lines.append(f"{n:>6}  {err:16.6e}  {o:>7}")
        return "\n".join(lines)

    def to_csv(self):
        lines = ["n,error,order"]
        for n, err, order in self.rows:
            lines.append(f"{n},{err:.17g},{'' if order is None else f'{order:.17g}'}")
        return "\n".join(lines) + "\n"


def _workers():
    raw = os.environ.get("RELAXRK_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _final_state(spec, n):
    ic, config = spec.build(n)
    return ic, integrate(ic.model, config, ic.state, ic.grid).final


def convergence_study(spec, reference_factor=4):
    """Self-convergence table against a run ``reference_factor`` times finer."""
    n_list = check_nested(spec.n_list or (spec.n,))
    spec.validate()
    n_ref = n_list[-1] * reference_factor
    ns = [n_ref] + n_list
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        results = list(pool.map(lambda n: _final_state(spec, n), ns))
    ic_ref, ref = results[0]
    periodic = isinstance(as_bc_pair(ic_ref.bc)[0], Periodic)
    rows = []
    prev = None
    for n, (_, U) in zip(n_list, results[1:]):
        r = restrict(ref, n_ref // n, spec.discretization, periodic)
        if np.array_equal(U[..., spec.component], r[..., spec.component]):
            err = 0.0
        else:
            err = error_norm(U, r, spec.component, spec.norm)
        order = None
        if prev is not None:
            order = math.log2(prev / err) if prev > 0 and err > 0 else (0.0 if prev == err else math.inf)
        rows.append((n, err, order))
        prev = err
    return ErrorTable(rows, spec.component, spec.norm)


# -- single runs and artifacts ------------------------------------------------------------


def format_csv(x, U):
    m = U.shape[1]
    head = "x," + ",".join(f"comp_{k}" for k in range(m))
    body = [",".join(f"{v:.17g}" for v in (xi, *row)) for xi, row in zip(x, U)]
    return head + "\n" + "\n".join(body) + "\n"


def read_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


@dataclass
class RunResult:
    x: np.ndarray
    state: np.ndarray
    step_count: int
    wall_time: float
    newton_max: int
    paths: tuple = ()


def _manifest(spec, config, ic, result):
    lines = [
        f"ic = {spec.ic}",
        f"model = {ic.model.name}",
        f"scheme = {spec.scheme}",
        f"n = {ic.grid.n}",
        f"x_min = {ic.grid.x_min!r}",
        f"x_max = {ic.grid.x_max!r}",
        f"cfl = {config.cfl!r}",
        f"epsilon = {config.epsilon!r}",
        f"t_end = {config.t_end!r}",
        f"order = {config.spatial_order}",
        f"disc = {config.discretization}",
        f"bc = {as_bc_pair(config.bc)!r}",
        f"project_output = {config.project_output}",
        f"max_courant = {config.max_courant!r}",
        f"model_repr = {ic.model!r}",
    ]
    for k in sorted(spec.params):
        lines.append(f"param.{k} = {spec.params[k]!r}")
    if spec.a_z is not None:
        lines.append(f"a_z = {spec.a_z!r}")
    lines += [
        f"step_count = {result.step_count}",
        f"newton_max_iterations = {result.newton_max}",
        f"wall_time_s = {result.wall_time:.3f}",
        f"written = {time.strftime('%Y-%m-%dT%H:%M:%S')}",
    ]
    return "\n".join(lines) + "\n"


def manifest_path(out):
    return f"{out}.manifest"


def run_experiment(spec):
    """Integrate one configuration; write CSV and manifest when ``spec.out`` is set."""
    ic, config = spec.build()
    t0 = time.perf_counter()
    traj = integrate(ic.model, config, ic.state, ic.grid)
    result = RunResult(
        ic.grid.x, traj.final, traj.step_count, time.perf_counter() - t0,
        traj.newton_iteration_stats.get("max", 0),
    )
    if spec.out:
        paths = (spec.out, manifest_path(spec.out))
        try:
            with open(paths[0], "w", newline="\n") as fh:
                fh.write(format_csv(result.x, result.state))
            with open(paths[1], "w", newline="\n") as fh:
                fh.write(_manifest(spec, config, ic, result))
        except BaseException:
            for p in paths:
                if os.path.exists(p):
                    os.remove(p)
            raise
        result.paths = paths
    return result


@dataclass
class APReport:
    conserved_distance: float
    manifold_deviation: float
    stiff: bool
    dt: float
    epsilon: float

    def format(self):
        lines = [
            f"conserved relative L1 distance: {self.conserved_distance:.6e}",
            f"max relative distance from equilibrium manifold: {self.manifold_deviation:.6e}",
        ]
        if not self.stiff:
            lines.append(f"not in stiff regime (dt/eps = {self.dt / self.epsilon:.3g} < {STIFF_RATIO:g})")
        return "\n".join(lines)


def manifold_deviation(model, U):
    """Largest relative gap between ``U`` and ``E(QU)`` over the non-conserved components."""
    U = np.asarray(U, dtype=float)
    eq = model.equilibrium(model.project(U))
    k = model.n_cons
    num = np.abs(U[..., k:] - eq[..., k:])
    den = np.maximum(np.abs(eq[..., k:]), 1e-300)
    return float(np.max(num / den)) if num.size else 0.0


def ap_compare(spec, alpha_mode="relaxation"):
    """Full system at the configured epsilon versus the limit-system run."""
    ic, config = spec.build()
    if not ic.model.supports_limit:
        raise UnsupportedError(f"model {ic.model.name!r} has no enabled limit system")
    full = integrate(ic.model, config, ic.state, ic.grid).final
    limit = equilibrium_integrate(ic.model, config, ic.model.project(ic.state), ic.grid, alpha_mode).final
    dt = config.cfl * ic.grid.dx
    return APReport(
        conserved_distance=error_norm(ic.model.project(full), limit),
        manifold_deviation=manifold_deviation(ic.model, full),
        stiff=dt / config.epsilon >= STIFF_RATIO,
        dt=dt,
        epsilon=config.epsilon,
    )


# -- configuration files --------------------------------------------------------------------


def read_config(path):
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


_FLOAT_FIELDS = {"cfl", "epsilon", "t_end", "a_z", "max_courant"}
_INT_FIELDS = {"n", "spatial_order", "component"}
_ALIASES = {"eps": "epsilon", "tend": "t_end", "order": "spatial_order", "disc": "discretization"}


def spec_from_mapping(values, base=None):
    """Build an ``ExperimentSpec`` from string-valued settings."""
    spec = base or ExperimentSpec()
    known = {f.name for f in fields(ExperimentSpec)}
    updates, params = {}, dict(spec.params)
    for key, value in values.items():
        key = _ALIASES.get(key, key)
        if key.startswith("param."):
            params[key[6:]] = float(value)
        elif key in _FLOAT_FIELDS:
            updates[key] = float(value)
        elif key in _INT_FIELDS:
            updates[key] = int(value)
        elif key == "n_list":
            updates[key] = tuple(int(v) for v in str(value).split(","))
        elif key == "project_output":
            updates[key] = str(value).lower() in ("1", "true", "yes")
        elif key in known:
            updates[key] = value
        else:
            raise ValueError(f"unknown configuration key {key!r}")
    return replace(spec, params=params, **updates)


def check_run_properties(model, U):
    """Raise if a final state leaves the admissible set of its model."""
    if not np.all(np.isfinite(U)):
        raise NumericalError("non-finite values in final state")
    if np.any(U[..., 0] <= 0):
        raise NumericalError("density is not positive")
