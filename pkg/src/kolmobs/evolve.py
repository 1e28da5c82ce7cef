"""Time integration of the Fourier-mode problems and 2-D synthesis.

Each mode n evolves independently under its own operator; a 2-D field
on the torus-cross-interval domain is the mode sum u(x,y) = sum_n
u_n(y) e^{inx}, with the Parseval identity ||u||^2 = 2 pi sum ||u_n||^2
as the structural check.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError
from .eigen import smallest_real_eigenpair

TWO_PI = 2.0 * math.pi


@dataclass
class ModeState:
    n: int
    t: float
    values: np.ndarray

    def norm(self, grid):
        return math.sqrt(grid.h) * float(np.linalg.norm(self.values))


@dataclass
class BoundaryTrace:
    times: np.ndarray
    flux_lo: np.ndarray
    flux_hi: np.ndarray

    def observation_energy(self):
        """Trapezoid-in-time integral of |flux_lo|^2 + |flux_hi|^2."""
        power = np.abs(self.flux_lo) ** 2 + np.abs(self.flux_hi) ** 2
        return float(np.trapezoid(power, self.times))


def evolve_mode(op, initial, t_final, dt, contraction_tol=1e-12):
    """Crank-Nicolson trajectory with per-step boundary fluxes.

    Returns (final ModeState, BoundaryTrace).  The discrete stepping is
    unconditionally stable and contracting; a growing norm means the
    linear solves went wrong, so it raises.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if initial.n != op.params.get("n", initial.n):
        raise ValidationError("initial.n does not match the operator")
    if initial.values.shape[0] != op.m:
        raise ValidationError("initial data does not match the grid")
    steps = int(round(t_final / dt))
    if steps < 1:
        raise ValidationError("t_final shorter than one step")
    v0 = np.asarray(initial.values, dtype=np.complex128)
    norm0 = np.linalg.norm(v0)
    v, flux_lo, flux_hi = _kernels.cn_evolve(op.sub, op.diag, op.sup, v0,
                                             dt, steps, op.grid.h)
    if not np.all(np.isfinite(v)):
        raise NumericalError("evolution produced non-finite values")
    if np.linalg.norm(v) > norm0 * (1.0 + max(contraction_tol, 1e-12) * steps):
        raise NumericalError("evolution is not contracting")
    times = initial.t + dt * np.arange(steps + 1)
    state = ModeState(n=initial.n, t=initial.t + steps * dt, values=v)
    return state, BoundaryTrace(times=times, flux_lo=flux_lo, flux_hi=flux_hi)


def evolve_trajectory(op, v0, dt, steps):
    """Full trajectory (steps+1, m), kept for the space-time verifications."""
    out = np.empty((steps + 1, v0.shape[0]), dtype=np.complex128)
    out[0] = v0
    v = np.asarray(v0, dtype=np.complex128)
    for k in range(steps):
        v = _kernels.cn_apply(op.sub, op.diag, op.sup, v, dt, 1)
        out[k + 1] = v
    return out


@dataclass
class FourierField:
    modes: dict = field(default_factory=dict)

    def add(self, state):
        self.modes[state.n] = state

    def mode_energy(self, grid):
        return sum(s.norm(grid) ** 2 for s in self.modes.values())


def synthesize_2d(fld, x_points, grid):
    """Pointwise mode sum u(x_i, y_j); x on the uniform torus grid."""
    if not fld.modes:
        raise ValidationError("field has no modes")
    max_n = max(abs(n) for n in fld.modes)
    if x_points <= 2 * max_n:
        raise ValidationError("x_points must exceed twice the largest |n|")
    x = TWO_PI * np.arange(x_points) / x_points
    out = np.zeros((x_points, grid.m), dtype=np.complex128)
    for n, state in sorted(fld.modes.items()):
        out += np.exp(1j * n * x)[:, None] * state.values[None, :]
    return x, out


def field_energy_2d(u2d, grid, x_points):
    """L2(torus x interval) energy by quadrature (exact in x for mode sums)."""
    return TWO_PI / x_points * grid.h * float(np.sum(np.abs(u2d) ** 2))


def parseval_gap(fld, x_points, grid):
    """Relative gap between the 2-D energy and 2 pi times the mode sum."""
    _, u2d = synthesize_2d(fld, x_points, grid)
    e2 = field_energy_2d(u2d, grid, x_points)
    em = TWO_PI * fld.mode_energy(grid)
    return abs(e2 - em) / max(em, 1e-300)


# -- built-in initial data ----------------------------------------------


def initial_laplacian_mode(grid, k=1):
    """k-th Dirichlet Laplacian eigenfunction, unit discrete L2 norm."""
    length = grid.y_hi - grid.y_lo
    v = np.sin(k * math.pi * (grid.nodes - grid.y_lo) / length)
    return (v / (np.linalg.norm(v) * math.sqrt(grid.h))).astype(np.complex128)


def initial_gaussian(grid, center=0.0, width=0.2):
    v = np.exp(-((grid.nodes - center) / width) ** 2)
    return (v / (np.linalg.norm(v) * math.sqrt(grid.h))).astype(np.complex128)


def initial_eigenfunction(op, seed=7):
    return smallest_real_eigenpair(op, seed=seed).vector


BUILTIN_INITIAL = {
    "laplacian-mode-1": lambda op: initial_laplacian_mode(op.grid, 1),
    "laplacian-mode-2": lambda op: initial_laplacian_mode(op.grid, 2),
    "laplacian-mode-3": lambda op: initial_laplacian_mode(op.grid, 3),
    "gaussian": lambda op: initial_gaussian(op.grid),
    "eigenfunction": initial_eigenfunction,
}


def load_mode_csv(path, grid):
    """Initial data from CSV rows (y, re, im); y must match the grid nodes."""
    data = np.loadtxt(path, delimiter=",", dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValidationError("mode CSV needs rows of y,re,im")
    if data.shape[0] != grid.m or not np.allclose(data[:, 0], grid.nodes,
                                                  atol=1e-10 * grid.h):
        raise ValidationError("mode CSV ordinates do not match the grid")
    return data[:, 1] + 1j * data[:, 2]
