"""IMEX Runge-Kutta schemes for hyperbolic systems with stiff relaxation."""

from .errors import NumericalError, RelaxRKError, StepFailure, TableauError, UnsupportedError
from .imex import (
    SolverConfig,
    Trajectory,
    cfl_dt,
    equilibrium_integrate,
    explicit_step,
    generic_newton_stage_solve,
    imex_step,
    integrate,
    newton_stage_solve,
)
from .kernels import BACKEND
from .models import MODEL_NAMES, IC_NAMES, initial_conditions, make_model
from .space import Grid1D, Inflow, Outflow, Periodic, ReflectiveWall, SpatialOperator
from .tableau import (
    SCHEME_NAMES,
    APClass,
    ButcherTableau,
    ImexTableau,
    ap_classify,
    builtin_scheme,
    count_coupling_conditions,
    is_l_stable,
    is_stiffly_accurate,
    verify_order,
)

__version__ = "0.1.0"
