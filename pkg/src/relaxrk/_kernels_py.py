"""Pure numpy WENO5 kernels, used when the compiled extension is unavailable.

Array arguments hold cells along axis 0; any trailing axes (state
components) are processed independently.
"""

import numpy as np

WENO_EPS = 1e-6
_C1312 = 13.0 / 12.0

BACKEND = "python"


def weno5_combine(v0, v1, v2, v3, v4):
    """Left-biased WENO5 value at the right face of the cell holding ``v2``."""
    q0 = (2.0 * v0 - 7.0 * v1 + 11.0 * v2) / 6.0
    q1 = (-v1 + 5.0 * v2 + 2.0 * v3) / 6.0
    q2 = (2.0 * v2 + 5.0 * v3 - v4) / 6.0
    d0 = v0 - 2.0 * v1 + v2
    e0 = v0 - 4.0 * v1 + 3.0 * v2
    d1 = v1 - 2.0 * v2 + v3
    e1 = v1 - v3
    d2 = v2 - 2.0 * v3 + v4
    e2 = 3.0 * v2 - 4.0 * v3 + v4
    b0 = _C1312 * (d0 * d0) + 0.25 * (e0 * e0)
    b1 = _C1312 * (d1 * d1) + 0.25 * (e1 * e1)
    b2 = _C1312 * (d2 * d2) + 0.25 * (e2 * e2)
    s0 = WENO_EPS + b0
    s1 = WENO_EPS + b1
    s2 = WENO_EPS + b2
    a0 = 0.1 / (s0 * s0)
    a1 = 0.6 / (s1 * s1)
    a2 = 0.3 / (s2 * s2)
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def weno5_faces(v):
    """Left-biased face values at ``i + 1/2`` for ``i = 2 .. len(v) - 3``."""
    v = np.asarray(v, dtype=float)
    return weno5_combine(v[:-4], v[1:-3], v[2:-2], v[3:-1], v[4:])


def weno5_divergence(fp, fm, dx):
    """``-(F_{j+1/2} - F_{j-1/2}) / dx`` from split fluxes with 3 ghost cells per side.

    ``F_{j+1/2}`` adds the left-biased reconstruction of ``fp`` from cell
    ``j`` and the right-biased reconstruction of ``fm`` from cell ``j + 1``.
    """
    fp = np.asarray(fp, dtype=float)
    fm = np.asarray(fm, dtype=float)
    n = fp.shape[0] - 6
    plus = weno5_combine(fp[0:n + 1], fp[1:n + 2], fp[2:n + 3], fp[3:n + 4], fp[4:n + 5])
    minus = weno5_combine(fm[5:n + 6], fm[4:n + 5], fm[3:n + 4], fm[2:n + 3], fm[1:n + 2])
    face = plus + minus
    return -(face[1:] - face[:-1]) / dx
