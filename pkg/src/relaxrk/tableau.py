"""IMEX Runge-Kutta coefficient tables and their algebraic diagnostics.

An IMEX scheme pairs an explicit tableau (applied to the convective term)
with a diagonally implicit one (applied to the stiff relaxation).  This
module stores such pairs, checks the order conditions of the combined
scheme up to order three, and classifies the implicit part (L-stability
criterion, stiff accuracy, asymptotic-preserving class).

Coefficients are float64 by default.  Tables built from
:class:`fractions.Fraction` entries keep an object dtype so every condition
is then evaluated in exact rational arithmetic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import TableauError, UnsupportedError
from .trees import count_coupling_conditions  # noqa: F401  (re-exported)

CONDITION_TOL = 1e-13
MAX_VERIFIED_ORDER = 3


def _as_coeff_array(values, ndim):
    arr = np.array(values, dtype=object)
    if arr.ndim != ndim:
        raise TableauError(f"expected a {ndim}-d coefficient array, got shape {arr.shape}")
    if all(isinstance(v, (Fraction, int)) for v in arr.flat):
        return np.vectorize(Fraction, otypes=[object])(arr) if arr.size else arr
    return np.array(values, dtype=float)


def _is_exact(arr):
    return arr.dtype == object


def derive_c(A, kind="implicit"):
    """Abscissae of a tableau: row sums of ``A`` (strictly below the diagonal
    for an explicit table, up to and including it for a DIRK table)."""
    A = _as_coeff_array(A, 2)
    nu = A.shape[0]
    if A.shape != (nu, nu):
        raise TableauError(f"coefficient matrix must be square, got {A.shape}")
    if kind not in ("explicit", "implicit"):
        raise TableauError(f"kind must be 'explicit' or 'implicit', got {kind!r}")
    offset = 0 if kind == "explicit" else 1
    for i in range(nu):
        for j in range(i + offset, nu):
            if A[i, j] != 0:
                shape = "strictly lower" if kind == "explicit" else "lower"
                raise TableauError(
                    f"{kind} tableau must be {shape} triangular; a[{i}][{j}] = {A[i, j]}"
                )
    c = [sum(A[i, : i + offset], Fraction(0) if _is_exact(A) else 0.0) for i in range(nu)]
    return np.array(c, dtype=A.dtype)


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """One Butcher tableau ``(A, w, c)`` with ``nu`` stages.

    ``c`` is derived from ``A`` when omitted; when given it must agree with
    the row sums to within ``1e-14``.
    """

    A: np.ndarray
    w: np.ndarray
    c: np.ndarray = None
    kind: str = "implicit"

    def __post_init__(self):
        A = _as_coeff_array(self.A, 2)
        w = _as_coeff_array(self.w, 1)
        if _is_exact(A) != _is_exact(w):
            A, w = A.astype(float), w.astype(float)
        nu = A.shape[0]
        if A.shape != (nu, nu) or w.shape != (nu,):
            raise TableauError(f"inconsistent shapes A{A.shape}, w{w.shape}")
        derived = derive_c(A, self.kind)
        if self.c is None:
            c = derived
        else:
            c = _as_coeff_array(self.c, 1)
            if c.shape != (nu,):
                raise TableauError(f"c must have length {nu}, got {c.shape}")
            if _is_exact(c) != _is_exact(A):
                c = c.astype(A.dtype) if _is_exact(A) else c.astype(float)
            mismatch = max(abs(float(a - b)) for a, b in zip(c, derived))
            if mismatch > 1e-14:
                raise TableauError(f"abscissae inconsistent with A (max deviation {mismatch:.3g})")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", c)

    @property
    def nu(self):
        return self.A.shape[0]

    @property
    def exact(self):
        return _is_exact(self.A)

    @property
    def diagonal(self):
        return np.diag(self.A)

    def as_float(self):
        return ButcherTableau(self.A.astype(float), self.w.astype(float), None, self.kind)


@dataclass(frozen=True, eq=False)
class ImexTableau:
    """An explicit/implicit pair sharing the stage count."""

    explicit: ButcherTableau
    implicit: ButcherTableau
    name: str = "custom"
    declared_order: int | None = None

    def __post_init__(self):
        if self.explicit.nu != self.implicit.nu:
            raise TableauError(
                f"stage counts differ: explicit {self.explicit.nu}, implicit {self.implicit.nu}"
            )
        if self.explicit.kind != "explicit" or self.implicit.kind != "implicit":
            raise TableauError("ImexTableau needs an explicit and an implicit (DIRK) table")

    @property
    def nu(self):
        return self.explicit.nu


@dataclass(frozen=True)
class ConditionEntry:
    label: str
    order: int
    coupling: bool
    lhs: object
    target: object
    residual: object


@dataclass
class ConditionReport:
    entries: list = field(default_factory=list)
    requested_order: int = 0
    tol: float = CONDITION_TOL

    def passed(self, entry):
        return entry.residual == 0 or float(entry.residual) < self.tol

    @property
    def max_order_satisfied(self):
        best = 0
        for p in range(1, self.requested_order + 1):
            if all(self.passed(e) for e in self.entries if e.order <= p):
                best = p
            else:
                break
        return best

    @property
    def max_residual(self):
        return max((float(e.residual) for e in self.entries), default=0.0)

    def format(self):
        lines = []
        for e in self.entries:
            status = "ok" if self.passed(e) else "FAIL"
            kind = "coupling" if e.coupling else "pure"
            lines.append(
                f"[{status:4}] order {e.order} {kind:8} {e.label:28} "
                f"lhs={float(e.lhs):+.16e} target={e.target} residual={float(e.residual):.3e}"
            )
        lines.append(f"max order satisfied: {self.max_order_satisfied}")
        return "\n".join(lines)


def _condition_table(t):
    ex, im = t.explicit, t.implicit
    wt, At, ct = ex.w, ex.A, ex.c
    w, A, c = im.w, im.A, im.c
    half = Fraction(1, 2)
    third = Fraction(1, 3)
    sixth = Fraction(1, 6)
    # (label, order, coupling, lhs thunk, target)
    return [
        ("sum w~_i", 1, False, lambda: wt.sum(), 1),
        ("sum w_i", 1, False, lambda: w.sum(), 1),
        ("sum w~_i c~_i", 2, False, lambda: wt @ ct, half),
        ("sum w_i c_i", 2, False, lambda: w @ c, half),
        ("sum w~_i c_i", 2, True, lambda: wt @ c, half),
        ("sum w_i c~_i", 2, True, lambda: w @ ct, half),
        ("sum w~_i a~_ij c~_j", 3, False, lambda: wt @ (At @ ct), sixth),
        ("sum w~_i c~_i c~_i", 3, False, lambda: wt @ (ct * ct), third),
        ("sum w_i a_ij c_j", 3, False, lambda: w @ (A @ c), sixth),
        ("sum w_i c_i c_i", 3, False, lambda: w @ (c * c), third),
        ("sum w~_i a~_ij c_j", 3, True, lambda: wt @ (At @ c), sixth),
        ("sum w~_i a_ij c~_j", 3, True, lambda: wt @ (A @ ct), sixth),
        ("sum w~_i a_ij c_j", 3, True, lambda: wt @ (A @ c), sixth),
        ("sum w_i a~_ij c_j", 3, True, lambda: w @ (At @ c), sixth),
        ("sum w_i a_ij c~_j", 3, True, lambda: w @ (A @ ct), sixth),
        ("sum w_i a~_ij c~_j", 3, True, lambda: w @ (At @ ct), sixth),
        ("sum w~_i c_i c_i", 3, True, lambda: wt @ (c * c), third),
        ("sum w~_i c~_i c_i", 3, True, lambda: wt @ (ct * c), third),
        ("sum w_i c~_i c~_i", 3, True, lambda: w @ (ct * ct), third),
        ("sum w_i c~_i c_i", 3, True, lambda: w @ (ct * c), third),
    ]


def verify_order(t, p, tol=CONDITION_TOL):
    """Evaluate every order condition of the IMEX pair ``t`` up to order ``p``.

    Order 1 has two conditions, order 2 four (two of them coupling) and
    order 3 fourteen (ten coupling).  Conditions are evaluated with unit
    relaxation parameter and the stored abscissae.
    """
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= MAX_VERIFIED_ORDER:
        raise UnsupportedError(
            f"order conditions are implemented for p in 1..{MAX_VERIFIED_ORDER}, got {p!r}"
        )
    exact = t.explicit.exact and t.implicit.exact
    if not exact:
        t = ImexTableau(t.explicit.as_float(), t.implicit.as_float(), t.name, t.declared_order)
    report = ConditionReport(requested_order=int(p), tol=tol)
    for label, order, coupling, thunk, target in _condition_table(t):
        if order > p:
            continue
        lhs = thunk()
        tgt = target if exact else float(target)
        report.entries.append(ConditionEntry(label, order, coupling, lhs, target, abs(lhs - tgt)))
    return report


def stability_function_at_infinity(t):
    """Return ``w^T A^{-1} e`` for a DIRK tableau, by forward substitution.

    The implicit table meets the L-stability criterion when the value is 1.
    Raises :class:`TableauError` when ``A`` is singular (some diagonal entry
    vanishes) since the criterion does not apply.
    """
    A, w = t.A, t.w
    nu = t.nu
    for i in range(nu):
        if A[i, i] == 0:
            raise TableauError(
                f"criterion inapplicable: A is singular (a[{i}][{i}] = 0)"
            )
    y = []
    for i in range(nu):
        acc = 1 - sum((A[i, j] * y[j] for j in range(i)), 0)
        y.append(acc / A[i, i])
    return sum((w[i] * y[i] for i in range(nu)), 0)


def is_l_stable(t, tol=CONDITION_TOL):
    """True when the L-stability criterion applies and holds."""
    try:
        value = stability_function_at_infinity(t)
    except TableauError:
        return False
    return abs(float(value) - 1.0) < tol


def is_stiffly_accurate(t):
    """Last row of ``A`` equals the weights, compared coefficient by coefficient."""
    return bool(all(a == b for a, b in zip(t.A[-1], t.w)))


class APClass(enum.Enum):
    FULL_AP = "FullAP"
    AP_WELL_PREPARED_ONLY = "APWellPreparedOnly"
    NOT_AP = "NotAP"

    def __str__(self):
        return self.value


def ap_classify(t):
    """Asymptotic-preserving class of an IMEX pair from its implicit diagonal."""
    im = t.implicit if isinstance(t, ImexTableau) else t
    diag = im.diagonal
    if all(d != 0 for d in diag):
        return APClass.FULL_AP
    if diag[0] == 0 and im.c[0] == 0 and all(d != 0 for d in diag[1:]):
        return APClass.AP_WELL_PREPARED_ONLY
    return APClass.NOT_AP


# -- built-in IMEX-SSP schemes ------------------------------------------------

_GAMMA = 1.0 - 1.0 / math.sqrt(2.0)
# alpha is the root of 6 a^3 - 21 a^2 + 13 a - 2 = 0 near 0.2417 (L-stability
# together with third order); beta and eta then follow linearly
_ALPHA = 0.24169426078820838
_BETA = _ALPHA / 4.0
_ETA = (1.0 - 2.0 * _ALPHA) / 4.0


def _ssp2_222():
    g = _GAMMA
    ex = ButcherTableau([[0, 0], [1, 0]], [0.5, 0.5], [0, 1], kind="explicit")
    im = ButcherTableau([[g, 0], [1 - 2 * g, g]], [0.5, 0.5], [g, 1 - g])
    return ImexTableau(ex, im, "ssp2-222", 2)


def _ssp2_322():
    ex = ButcherTableau(
        [[0, 0, 0], [0, 0, 0], [0, 1, 0]], [0, 0.5, 0.5], [0, 0, 1], kind="explicit"
    )
    im = ButcherTableau(
        [[0.5, 0, 0], [-0.5, 0.5, 0], [0, 0.5, 0.5]], [0, 0.5, 0.5], [0.5, 0, 1]
    )
    return ImexTableau(ex, im, "ssp2-322", 2)


def _ssp2_332():
    third = 1.0 / 3.0
    ex = ButcherTableau(
        [[0, 0, 0], [0.5, 0, 0], [0.5, 0.5, 0]], [third] * 3, [0, 0.5, 1], kind="explicit"
    )
    im = ButcherTableau(
        [[0.25, 0, 0], [0, 0.25, 0], [third, third, third]], [third] * 3, [0.25, 0.25, 1]
    )
    return ImexTableau(ex, im, "ssp2-332", 2)


def _ssp3_332():
    g = _GAMMA
    w = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]
    ex = ButcherTableau(
        [[0, 0, 0], [1, 0, 0], [0.25, 0.25, 0]], w, [0, 1, 0.5], kind="explicit"
    )
    im = ButcherTableau(
        [[g, 0, 0], [1 - 2 * g, g, 0], [0.5 - g, 0, g]], w, [g, 1 - g, 0.5]
    )
    return ImexTableau(ex, im, "ssp3-332", 2)


def _ssp3_433():
    a, b, e = _ALPHA, _BETA, _ETA
    w = [0, 1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]
    ex = ButcherTableau(
        [[0, 0, 0, 0], [0, 0, 0, 0], [0, 1, 0, 0], [0, 0.25, 0.25, 0]],
        w,
        [0, 0, 1, 0.5],
        kind="explicit",
    )
    im = ButcherTableau(
        [
            [a, 0, 0, 0],
            [-a, a, 0, 0],
            [0, 1 - a, a, 0],
            [b, e, 0.5 - b - e - a, a],
        ],
        w,
        [a, 0, 1, 0.5],
    )
    return ImexTableau(ex, im, "ssp3-433", 3)


BUILTIN_SCHEMES = {
    "ssp2-222": _ssp2_222,
    "ssp2-322": _ssp2_322,
    "ssp2-332": _ssp2_332,
    "ssp3-332": _ssp3_332,
    "ssp3-433": _ssp3_433,
}
SCHEME_NAMES = tuple(BUILTIN_SCHEMES)


def builtin_scheme(name):
    """Look up one of the built-in IMEX-SSP pairs by name."""
    try:
        factory = BUILTIN_SCHEMES[name]
    except KeyError:
        raise KeyError(
            f"unknown scheme {name!r}; valid schemes: {', '.join(SCHEME_NAMES)}"
        ) from None
    return factory()


# -- Shu-Osher representation --------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShuOsherForm:
    """Convex-combination form of an explicit RK scheme.

    Row ``i`` (0-based, stage ``i + 1``) holds ``alpha[i][k]`` and
    ``beta[i][k]`` for ``k = 0 .. i``; ragged input rows are zero padded.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        nu = len(self.alpha)
        if len(self.beta) != nu:
            raise TableauError("alpha and beta must have the same number of rows")
        alpha = np.zeros((nu, nu))
        beta = np.zeros((nu, nu))
        for i in range(nu):
            ra, rb = list(self.alpha[i]), list(self.beta[i])
            if len(ra) > i + 1 or len(rb) > i + 1:
                raise TableauError(f"row {i} of the Shu-Osher form has too many entries")
            alpha[i, : len(ra)] = ra
            beta[i, : len(rb)] = rb
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def nu(self):
        return self.alpha.shape[0]

    def validate(self, tol=1e-14):
        if np.any(self.alpha < 0):
            raise TableauError("Shu-Osher form needs alpha_ik >= 0")
        bad = (self.alpha == 0) & (self.beta != 0)
        if np.any(bad):
            i, k = np.argwhere(bad)[0]
            raise TableauError(f"alpha[{i}][{k}] = 0 while beta[{i}][{k}] != 0")
        sums = self.alpha.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > tol):
            raise TableauError(f"alpha rows must sum to 1, got {sums}")


def shu_osher_convert(s):
    """Butcher form of a Shu-Osher scheme and its SSP coefficient.

    Every stage is accumulated as ``U^n + h * sum_j b_j L(U^(j))``; the last
    accumulated row becomes the weight vector.  The SSP coefficient is the
    smallest ``alpha_ik / beta_ik`` over pairs with ``beta_ik > 0``; it is 0
    when some ``beta_ik`` is negative (no convex forward-Euler decomposition).
    """
    s.validate()
    nu = s.nu
    rows = np.zeros((nu + 1, nu))
    for i in range(1, nu + 1):
        for k in range(i):
            a, b = s.alpha[i - 1, k], s.beta[i - 1, k]
            rows[i] += a * rows[k]
            rows[i, k] += b
    tableau = ButcherTableau(rows[:nu], rows[nu], kind="explicit")
    if np.any(s.beta < 0):
        return tableau, 0.0
    positive = s.beta > 0
    if not np.any(positive):
        return tableau, math.inf
    return tableau, float(np.min(s.alpha[positive] / s.beta[positive]))


# -- plain-text tableau files --------------------------------------------------


def parse_tableau_text(text, name="custom", declared_order=None):
    """Parse two ``---``-separated sections (explicit first).

    Each section lists the rows of ``A`` followed by one row of weights, as
    whitespace-separated decimals; ``#`` starts a comment.  Entries of the
    form ``p/q`` are accepted and kept exact when every entry is rational.
    """
    sections = [[]]
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "---":
            sections.append([])
            continue
        sections[-1].append([_parse_number(tok) for tok in line.split()])
    sections = [s for s in sections if s]
    if len(sections) != 2:
        raise TableauError(f"expected 2 sections (explicit, implicit), found {len(sections)}")
    tables = []
    for rows, kind in zip(sections, ("explicit", "implicit")):
        *A, w = rows
        if not A or any(len(r) != len(w) for r in A) or len(A) != len(w):
            raise TableauError(f"{kind} section must hold nu rows of nu entries plus a weight row")
        exact = all(isinstance(v, Fraction) for r in rows for v in r)
        if not exact:
            A = [[float(v) for v in r] for r in A]
            w = [float(v) for v in w]
        tables.append(ButcherTableau(A, w, kind=kind))
    return ImexTableau(tables[0], tables[1], name, declared_order)


def _parse_number(token):
    try:
        if "/" in token:
            return Fraction(token)
        if any(ch in token for ch in ".eE"):
            return float(token)
        return Fraction(int(token))
    except ValueError:
        raise TableauError(f"cannot parse coefficient {token!r}") from None


def read_tableau_file(path, declared_order=None):
    path = Path(path)
    return parse_tableau_text(path.read_text(), path.stem, declared_order)


def format_tableau_text(t):
    """Inverse of :func:`parse_tableau_text` at 17 significant digits."""

    def fmt(v):
        return str(v) if isinstance(v, Fraction) else f"{float(v):.17g}"

    out = [f"# {t.name}"]
    for k, tab in enumerate((t.explicit, t.implicit)):
        if k:
            out.append("---")
        for row in tab.A:
            out.append(" ".join(fmt(v) for v in row))
        out.append(" ".join(fmt(v) for v in tab.w))
    return "\n".join(out) + "\n"
