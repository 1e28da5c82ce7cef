"""Propagator norms, resolvent norms and pseudospectral diagnostics.

The propagator e^{-tM} is applied by Crank-Nicolson stepping; its L2
operator norm is the square root of the dominant eigenvalue of P*P,
found by power iteration (the adjoint propagator steps the
conjugate-transposed bands).  Resolvent norms come from inverse power
iteration on (M-z)*(M-z) using tridiagonal solves.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError
from .operators import assemble_kn, grid_for_n

SQRT2 = math.sqrt(2.0)


def spectral_scale(op):
    """Magnitude of the slowest-decaying eigenvalue (step-sizing scale)."""
    tag = op.model_tag
    p = op.params
    if tag == "kolmogorov":
        return max(1.0, math.sqrt(p["n"]) * p["qprime0"])
    if tag == "harmonic":
        return max(1.0, 3.0 * math.sqrt(p["n"]) * p["qprime0"])
    if tag in ("airy_plus", "airy_minus"):
        return max(1.0, 4.1 * abs(p["alpha"]) ** (2.0 / 3.0))
    length = op.grid.y_hi - op.grid.y_lo
    return max(1.0, 4.0 * (math.pi / length) ** 2)


def cn_steps(op, t, local_tol=1e-8, min_steps=64, max_steps=200000):
    """Step count keeping the per-step local error of the slow modes below tol.

    Crank-Nicolson's one-step relative error on a mode with eigenvalue
    lam is ~ |lam dt|^3/12, so dt <= (12 tol)^(1/3) / scale.
    """
    if t <= 0.0:
        return min_steps
    zmax = (12.0 * local_tol) ** (1.0 / 3.0)
    steps = int(math.ceil(t * spectral_scale(op) / zmax))
    return max(min_steps, min(steps, max_steps))


def propagator_norm(op, t, steps=None, tol=1e-10, max_iter=10000, seed=11,
                    validate_steps=False):
    """L2 -> L2 norm of the discrete propagator over time t."""
    if t < 0:
        raise ValidationError("need t >= 0")
    if t == 0.0:
        return 1.0
    if steps is None:
        steps = cn_steps(op, t)
    dt = t / steps
    norm = _power_norm(op, dt, steps, tol, max_iter, seed)
    if validate_steps:
        refined = _power_norm(op, dt / 2.0, 2 * steps, tol, max_iter, seed)
        if abs(refined - norm) > 1e-6 * max(norm, refined, 1e-300):
            raise NumericalError(
                "propagator norm not step-converged: %.17g vs %.17g"
                % (norm, refined))
    return norm


def _power_norm(op, dt, steps, tol, max_iter, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.m) + 1j * rng.standard_normal(op.m)
    v /= np.linalg.norm(v)
    rho_old = np.inf
    for it in range(max_iter):
        w = _kernels.cn_apply(op.sub, op.diag, op.sup, v, dt, steps)
        rho = float(np.real(np.vdot(w, w)))
        u = _kernels.cn_apply_adjoint(op.sub, op.diag, op.sup, w, dt, steps)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = u / nu
        if abs(rho - rho_old) <= tol * max(rho, 1e-300):
            return math.sqrt(rho)
        rho_old = rho
    raise NumericalError("propagator norm power iteration did not converge "
                         "(last rho %.3g)" % rho_old)


@dataclass
class DecayTrace:
    n: int
    times: np.ndarray
    norms: np.ndarray
    rate_fit: float      # decay rate per unit t
    gamma_fit: float     # rate per unit t*sqrt(n) (rate itself when n=0)

    def fitted_points(self):
        mask = _fit_mask(self.n, self.times)
        return self.times[mask], self.norms[mask]


def _fit_mask(n, times):
    if n <= 0:
        return times > 0.0
    return times >= 0.5 / math.sqrt(n)   # drop the non-modal transient window


def decay_sweep(profile, n_list, t_grid, min_cells=64):
    """Propagator-norm traces and fitted decay rates for a list of modes."""
    if len(n_list) == 0 or len(t_grid) == 0:
        raise ValidationError("need nonempty n_list and t_grid")
    t_grid = np.asarray(t_grid, float)
    traces = []
    for n in n_list:
        grid = grid_for_n(profile, abs(n), min_cells=min_cells)
        op = assemble_kn(profile, n, grid)
        norms = np.array([propagator_norm(op, t) for t in t_grid])
        mask = _fit_mask(abs(n), t_grid)
        if np.count_nonzero(mask) < 2:
            raise ValidationError("t_grid leaves fewer than 2 points to fit "
                                  "for n=%d" % n)
        slope = np.polyfit(t_grid[mask], np.log(norms[mask]), 1)[0]
        rate = -float(slope)
        gamma = rate / math.sqrt(abs(n)) if n != 0 else rate
        traces.append(DecayTrace(n=n, times=t_grid, norms=norms,
                                 rate_fit=rate, gamma_fit=gamma))
    return traces


def n_threshold_for(traces, gamma):
    """Smallest n in the sweep whose fitted rate clears gamma (else None)."""
    for tr in sorted(traces, key=lambda tr: abs(tr.n)):
        if tr.n != 0 and tr.gamma_fit >= gamma:
            return tr.n
    return None


@dataclass
class ResolventSample:
    z: complex
    norm: float
    smin: float
    flagged: bool = False


def resolvent_norm(op, z, tol=1e-10, max_iter=10000, seed=13):
    """||(M - z)^{-1}|| via inverse power iteration on (M-z)*(M-z)."""
    shifted_diag = op.diag - z
    scale = float(np.max(np.abs(shifted_diag)) + 2.0 * np.max(np.abs(op.sub)))
    try:
        solver = _kernels.Solver(op.sub, shifted_diag, op.sup)
        solver_h = _kernels.Solver(np.conj(op.sup), np.conj(shifted_diag),
                                   np.conj(op.sub))
    except Exception:
        return ResolventSample(z=complex(z), norm=np.inf, smin=0.0, flagged=True)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.m) + 1j * rng.standard_normal(op.m)
    v /= np.linalg.norm(v)
    rho_old = np.inf
    for _ in range(max_iter):
        try:
            y = solver_h.solve(v)
            x = solver.solve(y)
        except Exception:
            return ResolventSample(z=complex(z), norm=np.inf, smin=0.0, flagged=True)
        if not np.all(np.isfinite(x)):
            return ResolventSample(z=complex(z), norm=np.inf, smin=0.0, flagged=True)
        rho = float(np.real(np.vdot(x, v)))
        nx = np.linalg.norm(x)
        v = x / nx
        if abs(rho - rho_old) <= tol * max(abs(rho), 1e-300):
            break
        rho_old = rho
    else:
        raise NumericalError("resolvent inverse iteration did not converge")
    smin = 1.0 / math.sqrt(max(rho, 1e-300))
    flagged = smin < 1e-12 * scale
    return ResolventSample(z=complex(z), norm=1.0 / smin, smin=smin, flagged=flagged)


def pseudospectrum_grid(op, re_range, im_range, resolution):
    """Matrix of smallest singular values of M - z over a z window.

    re_range/im_range are (lo, hi); resolution is (n_re, n_im) or an int.
    """
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    n_re, n_im = resolution
    if n_re * n_im > 256 * 256:
        raise ValidationError("pseudospectrum grid capped at 256x256")
    re_axis = np.linspace(re_range[0], re_range[1], n_re)
    im_axis = np.linspace(im_range[0], im_range[1], n_im)
    smin = np.empty((n_im, n_re))
    for i, b in enumerate(im_axis):
        for j, a in enumerate(re_axis):
            smin[i, j] = resolvent_norm(op, complex(a, b)).smin
    return re_axis, im_axis, smin
