"""Finite-difference assembly of the mode operators.

Second-order central differences on uniform grids, Dirichlet rows
eliminated: operators act on the interior nodes only and stay
tridiagonal, which is what the shift-invert eigensolver and the
Crank-Nicolson stepper exploit.

Model tags:
- kolmogorov(n, profile): -d_yy + i n q(y)^2 on [-ell_minus, ell_plus]
- harmonic(n, qprime0):   -d_yy + i n q'(0)^2 y^2, truncated to a box
- airy_plus / airy_minus: -d_yy + i alpha y on a truncated half-line
- dirichlet_laplacian:    -d_yy
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError

DENSE_LIMIT = 2000


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [y_lo, y_hi] with n_cells cells; nodes are interior."""

    y_lo: float
    y_hi: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 4:
            raise ValidationError("need at least 4 cells")
        if not self.y_hi > self.y_lo:
            raise ValidationError("need y_hi > y_lo")

    @property
    def h(self):
        return (self.y_hi - self.y_lo) / self.n_cells

    @property
    def m(self):
        return self.n_cells - 1

    @property
    def nodes(self):
        return self.y_lo + self.h * np.arange(1, self.n_cells)

    @property
    def full_nodes(self):
        return self.y_lo + self.h * np.arange(self.n_cells + 1)


@dataclass
class DiscreteOperator:
    grid: Grid1D
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    model_tag: str
    params: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.diag.shape[0]

    def matvec(self, x):
        return _kernels.tridiag_matvec(self.sub, self.diag, self.sup, x)

    def dense(self):
        if self.m > DENSE_LIMIT:
            raise ValidationError(
                "dense form capped at %d nodes (got %d)" % (DENSE_LIMIT, self.m))
        full = np.diag(self.diag)
        full += np.diag(self.sub, -1)
        full += np.diag(self.sup, 1)
        return full

    def conjugated(self):
        """Operator with the conjugate potential (mode -n)."""
        return DiscreteOperator(self.grid, np.conj(self.sub), np.conj(self.diag),
                                np.conj(self.sup), self.model_tag,
                                dict(self.params, conjugated=True))

    def shifted(self, z):
        return DiscreteOperator(self.grid, self.sub.copy(), self.diag - z,
                                self.sup.copy(), self.model_tag,
                                dict(self.params, shift=complex(z)))


def _second_difference(grid):
    h2 = grid.h * grid.h
    m = grid.m
    sub = np.full(m - 1, -1.0 / h2, dtype=np.complex128)
    sup = sub.copy()
    diag = np.full(m, 2.0 / h2, dtype=np.complex128)
    return sub, diag, sup


def assemble_laplacian(grid):
    sub, diag, sup = _second_difference(grid)
    return DiscreteOperator(grid, sub, diag, sup, "dirichlet_laplacian",
                            {"length": grid.y_hi - grid.y_lo})


def assemble_kn(profile, n, grid):
    """Mode operator -d_yy + i n q(y)^2 on the profile's interval."""
    if n < 0:
        # negative modes evolve under the conjugate operator
        return assemble_kn(profile, -n, grid).conjugated()
    tol = 1e-12 * (abs(grid.y_lo) + abs(grid.y_hi) + 1.0)
    if abs(grid.y_lo + profile.ell_minus) > tol or abs(grid.y_hi - profile.ell_plus) > tol:
        raise ValidationError("grid must span exactly [-ell_minus, ell_plus]")
    sub, diag, sup = _second_difference(grid)
    qv = np.asarray(profile.q(grid.nodes), float)
    diag = diag + 1j * n * qv * qv
    tag = "kolmogorov" if n > 0 else "dirichlet_laplacian"
    return DiscreteOperator(grid, sub, diag, sup, tag,
                            {"n": int(n), "qprime0": profile.qprime0,
                             "profile_kind": profile.kind})


def hn_box_half_width(n, qprime0, k_max=1, envelope_tol=1e-12):
    """Smallest half-width L with the k-th mode's Gaussian envelope below tol.

    The k-th eigenfunction looks like (polynomial of degree k) times
    exp(-(alpha y)^2 / (2 sqrt 2)) with alpha = n^(1/4) q'(0)^(1/2); we
    require the envelope times (alpha L)^k to sit below envelope_tol.
    """
    if n < 1 or qprime0 <= 0:
        raise ValidationError("need n >= 1 and q'(0) > 0")
    alpha = n ** 0.25 * math.sqrt(qprime0)
    x = math.sqrt(2.0 * math.sqrt(2.0) * math.log(1.0 / envelope_tol))
    for _ in range(60):
        x_new = math.sqrt(2.0 * math.sqrt(2.0) * (math.log(1.0 / envelope_tol)
                                                  + k_max * math.log(max(x, 2.0))))
        if abs(x_new - x) < 1e-12:
            break
        x = x_new
    return x / alpha


def assemble_hn(qprime0, n, grid, k_max=1, envelope_tol=1e-12):
    """Complex harmonic oscillator truncated to [-L, L] with Dirichlet walls."""
    if n < 1:
        raise ValidationError("harmonic model needs n >= 1")
    need = hn_box_half_width(n, qprime0, k_max, envelope_tol)
    tol = 1e-12 * (abs(grid.y_lo) + abs(grid.y_hi) + 1.0)
    if abs(grid.y_lo + grid.y_hi) > tol:
        raise ValidationError("harmonic box must be symmetric about 0")
    if grid.y_hi < need - tol:
        raise ValidationError(
            "box half-width %.3f too small for mode k=%d at n=%d: need >= %.3f "
            "(Gaussian envelope must fall below %g at the wall)"
            % (grid.y_hi, k_max, n, need, envelope_tol))
    sub, diag, sup = _second_difference(grid)
    y = grid.nodes
    diag = diag + 1j * n * qprime0 * qprime0 * y * y
    return DiscreteOperator(grid, sub, diag, sup, "harmonic",
                            {"n": int(n), "qprime0": float(qprime0)})


def airy_box_length(alpha, k_max=1):
    """Box-length rule for the truncated half-line Airy operator."""
    mu1 = 2.33810741045976704
    return 10.0 * abs(alpha) ** (-1.0 / 3.0) * max(1.0, mu1 * k_max ** (2.0 / 3.0))


def assemble_airy(alpha, side, grid, offset=0.0):
    """Half-line operator -d_yy + i alpha y, Dirichlet at 0 and the far wall.

    side='plus' lives on [0, L] (grid.y_lo must be 0), side='minus' on
    [-L, 0].  `offset` adds a constant imaginary shift i*offset.
    """
    if alpha == 0.0:
        raise ValidationError("alpha must be nonzero")
    tol = 1e-12 * (abs(grid.y_lo) + abs(grid.y_hi) + 1.0)
    if side == "plus":
        if abs(grid.y_lo) > tol:
            raise ValidationError("plus side grid must start at 0")
        tag = "airy_plus"
    elif side == "minus":
        if abs(grid.y_hi) > tol:
            raise ValidationError("minus side grid must end at 0")
        tag = "airy_minus"
    else:
        raise ValidationError("side must be 'plus' or 'minus'")
    sub, diag, sup = _second_difference(grid)
    diag = diag + 1j * (alpha * grid.nodes + offset)
    return DiscreteOperator(grid, sub, diag, sup, tag,
                            {"alpha": float(alpha), "offset": float(offset)})


def grid_for_n(profile, n, min_cells=64, max_cells=None):
    """Grid resolving the y=0 concentration layer: h <= n^(-1/2)/5."""
    length = profile.ell_minus + profile.ell_plus
    h_target = length / min_cells
    if n > 0:
        h_target = min(h_target, n ** -0.5 / 5.0)
    cells = int(math.ceil(length / h_target))
    if max_cells is not None:
        cells = min(cells, max_cells)
    return Grid1D(-profile.ell_minus, profile.ell_plus, cells)


def accretivity_gap(op, samples=8, seed=0):
    """Min over random complex vectors of Re<Mu,u>/|u|^2 (should be >= 0)."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(samples):
        u = rng.standard_normal(op.m) + 1j * rng.standard_normal(op.m)
        val = np.real(np.vdot(u, op.matvec(u))) / np.real(np.vdot(u, u))
        worst = min(worst, val)
    return worst


def truncation_check(assemble, grid, target_eigenvalues, rel_tol=1e-8):
    """Box-doubling comparison for truncated model operators.

    `assemble(grid)` must build the operator on any compatible grid;
    `target_eigenvalues(op)` returns the eigenvalues being tracked.
    Returns the max relative change when the box doubles (same h).
    """
    big = Grid1D(2.0 * grid.y_lo, 2.0 * grid.y_hi, 2 * grid.n_cells)
    lam1 = np.atleast_1d(target_eigenvalues(assemble(grid)))
    lam2 = np.atleast_1d(target_eigenvalues(assemble(big)))
    rel = np.max(np.abs(lam1 - lam2) / np.abs(lam2))
    return float(rel), rel <= rel_tol


def operator_to_json(op):
    """Text export: bands as [re, im] pairs."""
    def pairs(arr):
        return [[float(v.real), float(v.imag)] for v in arr]

    return json.dumps({
        "model_tag": op.model_tag,
        "params": {k: (v if isinstance(v, (int, float, str, bool)) else str(v))
                   for k, v in op.params.items()},
        "grid": {"y_lo": op.grid.y_lo, "y_hi": op.grid.y_hi, "n_cells": op.grid.n_cells},
        "sub": pairs(op.sub), "diag": pairs(op.diag), "sup": pairs(op.sup),
    }, indent=1)


def operator_from_json(text):
    data = json.loads(text)
    grid = Grid1D(data["grid"]["y_lo"], data["grid"]["y_hi"], data["grid"]["n_cells"])

    def arr(key):
        return np.array([complex(re, im) for re, im in data[key]], dtype=np.complex128)

    return DiscreteOperator(grid, arr("sub"), arr("diag"), arr("sup"),
                            data["model_tag"], data.get("params", {}))
