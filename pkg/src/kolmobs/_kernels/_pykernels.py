"""Pure NumPy/LAPACK backend for the tridiagonal hot kernels.

Same call surface as the compiled backend (`_ckernels`): tridiagonal
matvec, reusable solver, and fused Crank-Nicolson trajectories with
per-step boundary-flux recording.  Solves go through LAPACK's pivoted
banded driver, so there is no growth monitoring to do here.
"""

import numpy as np
from scipy.linalg import solve_banded

BACKEND_NAME = "pure"


def _as_banded(sub, diag, sup):
    m = diag.shape[0]
    ab = np.zeros((3, m), dtype=np.complex128)
    ab[0, 1:] = sup
    ab[1, :] = diag
    ab[2, :-1] = sub
    return ab


def tridiag_matvec(sub, diag, sup, x):
    """y = M x for tridiagonal M; x may be (m,) or (m, k)."""
    x = np.asarray(x)
    if x.ndim == 1:
        y = diag * x
        y[:-1] += sup * x[1:]
        y[1:] += sub * x[:-1]
    else:
        y = diag[:, None] * x
        y[:-1] += sup[:, None] * x[1:]
        y[1:] += sub[:, None] * x[:-1]
    return y


class TridiagSolver:
    """Reusable tridiagonal solve M x = b (LAPACK banded, partial pivoting)."""

    def __init__(self, sub, diag, sup):
        self.m = diag.shape[0]
        self._ab = _as_banded(
            np.asarray(sub, dtype=np.complex128),
            np.asarray(diag, dtype=np.complex128),
            np.asarray(sup, dtype=np.complex128),
        )
        self.growth = 1.0
        self.ok = True

    def solve(self, b):
        return solve_banded((1, 1), self._ab, b)


def _flux_pair(v, h):
    # second-order one-sided derivatives using the Dirichlet zeros
    lo = (4.0 * v[0] - v[1]) / (2.0 * h)
    hi = (v[-2] - 4.0 * v[-1]) / (2.0 * h)
    return lo, hi


def _cn_arrays(sub, diag, sup, dt):
    c = 0.5 * dt
    a = (c * sub, 1.0 + c * diag, c * sup)
    b = (-c * sub, 1.0 - c * diag, -c * sup)
    return a, b


def cn_evolve(sub, diag, sup, v0, dt, steps, h):
    """Crank-Nicolson trajectory of u' = -M u with boundary fluxes.

    Returns (v_final, flux_lo, flux_hi); fluxes have steps+1 entries,
    the first pair evaluated on the initial state.
    """
    (asub, adiag, asup), bco = _cn_arrays(sub, diag, sup, dt)
    ab = _as_banded(asub, adiag, asup)
    v = np.array(v0, dtype=np.complex128)
    flux_lo = np.empty(steps + 1, dtype=np.complex128)
    flux_hi = np.empty(steps + 1, dtype=np.complex128)
    flux_lo[0], flux_hi[0] = _flux_pair(v, h)
    for k in range(steps):
        rhs = tridiag_matvec(*bco, v)
        v = solve_banded((1, 1), ab, rhs)
        flux_lo[k + 1], flux_hi[k + 1] = _flux_pair(v, h)
    return v, flux_lo, flux_hi


def cn_evolve_multi(sub, diag, sup, v0, dt, steps, h):
    """Crank-Nicolson trajectory for a block of initial vectors (m, k)."""
    (asub, adiag, asup), bco = _cn_arrays(sub, diag, sup, dt)
    ab = _as_banded(asub, adiag, asup)
    v = np.array(v0, dtype=np.complex128)
    k = v.shape[1]
    flux_lo = np.empty((steps + 1, k), dtype=np.complex128)
    flux_hi = np.empty((steps + 1, k), dtype=np.complex128)
    flux_lo[0] = (4.0 * v[0] - v[1]) / (2.0 * h)
    flux_hi[0] = (v[-2] - 4.0 * v[-1]) / (2.0 * h)
    for j in range(steps):
        rhs = tridiag_matvec(*bco, v)
        v = solve_banded((1, 1), ab, rhs)
        flux_lo[j + 1] = (4.0 * v[0] - v[1]) / (2.0 * h)
        flux_hi[j + 1] = (v[-2] - 4.0 * v[-1]) / (2.0 * h)
    return v, flux_lo, flux_hi


def cn_apply(sub, diag, sup, v0, dt, steps):
    """Apply the Crank-Nicolson propagator without recording fluxes."""
    (asub, adiag, asup), bco = _cn_arrays(sub, diag, sup, dt)
    ab = _as_banded(asub, adiag, asup)
    v = np.array(v0, dtype=np.complex128)
    for _ in range(steps):
        v = solve_banded((1, 1), ab, tridiag_matvec(*bco, v))
    return v
