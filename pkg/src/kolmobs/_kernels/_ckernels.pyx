# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tridiagonal hot kernels.

Complex tridiagonal LU without pivoting (element growth monitored) plus
fused Crank-Nicolson trajectories.  Mirrors `_pykernels`.
"""

import numpy as np

cimport numpy as cnp

ctypedef double complex zval

BACKEND_NAME = "compiled"

GROWTH_LIMIT = 1.0e8


cdef inline double _zabs(zval z) noexcept:
    return abs(z.real) + abs(z.imag)


cdef int _factor(const zval[::1] sub, const zval[::1] diag, const zval[::1] sup,
                 zval[::1] low, zval[::1] piv, double* growth) noexcept:
    """No-pivot LU of a tridiagonal matrix: piv holds U's diagonal, low the multipliers.

    Returns 0 on success, 1 on a (near-)zero pivot.  *growth is the max of
    multiplier and pivot magnitudes relative to the input scale.
    """
    cdef Py_ssize_t m = diag.shape[0]
    cdef Py_ssize_t i
    cdef double scale = 0.0, g = 0.0, a
    cdef zval l
    for i in range(m):
        a = _zabs(diag[i])
        if a > scale:
            scale = a
    for i in range(m - 1):
        a = _zabs(sub[i])
        if a > scale:
            scale = a
        a = _zabs(sup[i])
        if a > scale:
            scale = a
    if scale == 0.0:
        return 1
    piv[0] = diag[0]
    if _zabs(piv[0]) < 1e-300 * scale:
        return 1
    g = _zabs(piv[0]) / scale
    for i in range(1, m):
        l = sub[i - 1] / piv[i - 1]
        low[i - 1] = l
        piv[i] = diag[i] - l * sup[i - 1]
        a = _zabs(l)
        if a > g:
            g = a
        a = _zabs(piv[i]) / scale
        if a > g:
            g = a
        if _zabs(piv[i]) < 1e-300 * scale:
            growth[0] = g
            return 1
    growth[0] = g
    return 0


cdef void _solve_one(const zval[::1] low, const zval[::1] piv, const zval[::1] sup,
                     zval[::1] x) noexcept:
    cdef Py_ssize_t m = piv.shape[0]
    cdef Py_ssize_t i
    for i in range(1, m):
        x[i] = x[i] - low[i - 1] * x[i - 1]
    x[m - 1] = x[m - 1] / piv[m - 1]
    for i in range(m - 2, -1, -1):
        x[i] = (x[i] - sup[i] * x[i + 1]) / piv[i]


cdef void _solve_block(const zval[::1] low, const zval[::1] piv, const zval[::1] sup,
                       zval[:, ::1] x) noexcept:
    cdef Py_ssize_t m = piv.shape[0]
    cdef Py_ssize_t k = x.shape[1]
    cdef Py_ssize_t i, j
    cdef zval l, p
    for i in range(1, m):
        l = low[i - 1]
        for j in range(k):
            x[i, j] = x[i, j] - l * x[i - 1, j]
    p = piv[m - 1]
    for j in range(k):
        x[m - 1, j] = x[m - 1, j] / p
    for i in range(m - 2, -1, -1):
        l = sup[i]
        p = piv[i]
        for j in range(k):
            x[i, j] = (x[i, j] - l * x[i + 1, j]) / p


def tridiag_matvec(sub, diag, sup, x):
    """y = M x for tridiagonal M; x may be (m,) or (m, k)."""
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.complex128)
    cdef cnp.ndarray y
    cdef const zval[::1] s = np.ascontiguousarray(sub, dtype=np.complex128)
    cdef const zval[::1] d = np.ascontiguousarray(diag, dtype=np.complex128)
    cdef const zval[::1] u = np.ascontiguousarray(sup, dtype=np.complex128)
    cdef Py_ssize_t m = d.shape[0]
    cdef Py_ssize_t i, j, k
    cdef const zval[::1] xv
    cdef zval[::1] yv
    cdef const zval[:, ::1] xb
    cdef zval[:, ::1] yb
    if xa.ndim == 1:
        y = np.empty(m, dtype=np.complex128)
        xv = xa
        yv = y
        yv[0] = d[0] * xv[0] + u[0] * xv[1]
        for i in range(1, m - 1):
            yv[i] = s[i - 1] * xv[i - 1] + d[i] * xv[i] + u[i] * xv[i + 1]
        yv[m - 1] = s[m - 2] * xv[m - 2] + d[m - 1] * xv[m - 1]
        return y
    k = xa.shape[1]
    y = np.empty((m, k), dtype=np.complex128)
    xb = xa
    yb = y
    for j in range(k):
        yb[0, j] = d[0] * xb[0, j] + u[0] * xb[1, j]
    for i in range(1, m - 1):
        for j in range(k):
            yb[i, j] = s[i - 1] * xb[i - 1, j] + d[i] * xb[i, j] + u[i] * xb[i + 1, j]
    for j in range(k):
        yb[m - 1, j] = s[m - 2] * xb[m - 2, j] + d[m - 1] * xb[m - 1, j]
    return y


class GrowthError(ArithmeticError):
    """Raised when the no-pivot factorization is unusable."""


cdef class TridiagSolver:
    """Reusable no-pivot LU of a tridiagonal matrix with growth monitoring."""

    cdef zval[::1] low
    cdef zval[::1] piv
    cdef zval[::1] sup
    cdef public Py_ssize_t m
    cdef public double growth
    cdef public bint ok

    def __init__(self, sub, diag, sup):
        cdef const zval[::1] s = np.ascontiguousarray(sub, dtype=np.complex128)
        cdef const zval[::1] d = np.ascontiguousarray(diag, dtype=np.complex128)
        self.sup = np.ascontiguousarray(sup, dtype=np.complex128).copy()
        self.m = d.shape[0]
        self.low = np.empty(self.m - 1, dtype=np.complex128)
        self.piv = np.empty(self.m, dtype=np.complex128)
        cdef double g = 0.0
        cdef int bad = _factor(s, d, self.sup, self.low, self.piv, &g)
        self.growth = g
        self.ok = (bad == 0) and (g <= GROWTH_LIMIT)

    def solve(self, b):
        if not self.ok:
            raise GrowthError("tridiagonal factor growth %.3g" % self.growth)
        cdef cnp.ndarray x = np.array(b, dtype=np.complex128, order="C")
        if x.ndim == 1:
            _solve_one(self.low, self.piv, self.sup, x)
        else:
            _solve_block(self.low, self.piv, self.sup, x)
        return x


def cn_evolve(sub, diag, sup, v0, double dt, Py_ssize_t steps, double h):
    """Crank-Nicolson trajectory of u' = -M u with boundary fluxes."""
    cdef const zval[::1] s = np.ascontiguousarray(sub, dtype=np.complex128)
    cdef const zval[::1] d = np.ascontiguousarray(diag, dtype=np.complex128)
    cdef const zval[::1] u = np.ascontiguousarray(sup, dtype=np.complex128)
    cdef Py_ssize_t m = d.shape[0]
    cdef double c = 0.5 * dt
    cdef zval[::1] asub = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] adiag = np.empty(m, dtype=np.complex128)
    cdef zval[::1] asup = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] bsub = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] bdiag = np.empty(m, dtype=np.complex128)
    cdef zval[::1] bsup = np.empty(m - 1, dtype=np.complex128)
    cdef Py_ssize_t i, k
    for i in range(m):
        adiag[i] = 1.0 + c * d[i]
        bdiag[i] = 1.0 - c * d[i]
    for i in range(m - 1):
        asub[i] = c * s[i]
        asup[i] = c * u[i]
        bsub[i] = -c * s[i]
        bsup[i] = -c * u[i]
    cdef zval[::1] low = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] piv = np.empty(m, dtype=np.complex128)
    cdef double g = 0.0
    if _factor(asub, adiag, asup, low, piv, &g) or g > GROWTH_LIMIT:
        raise GrowthError("Crank-Nicolson factor growth %.3g" % g)
    cdef cnp.ndarray vout = np.array(v0, dtype=np.complex128, order="C")
    cdef zval[::1] v = vout
    cdef zval[::1] w = np.empty(m, dtype=np.complex128)
    cdef cnp.ndarray flo = np.empty(steps + 1, dtype=np.complex128)
    cdef cnp.ndarray fhi = np.empty(steps + 1, dtype=np.complex128)
    cdef zval[::1] flov = flo
    cdef zval[::1] fhiv = fhi
    cdef double twoh = 2.0 * h
    flov[0] = (4.0 * v[0] - v[1]) / twoh
    fhiv[0] = (v[m - 2] - 4.0 * v[m - 1]) / twoh
    for k in range(steps):
        w[0] = bdiag[0] * v[0] + bsup[0] * v[1]
        for i in range(1, m - 1):
            w[i] = bsub[i - 1] * v[i - 1] + bdiag[i] * v[i] + bsup[i] * v[i + 1]
        w[m - 1] = bsub[m - 2] * v[m - 2] + bdiag[m - 1] * v[m - 1]
        _solve_one(low, piv, asup, w)
        for i in range(m):
            v[i] = w[i]
        flov[k + 1] = (4.0 * v[0] - v[1]) / twoh
        fhiv[k + 1] = (v[m - 2] - 4.0 * v[m - 1]) / twoh
    return vout, flo, fhi


def cn_evolve_multi(sub, diag, sup, v0, double dt, Py_ssize_t steps, double h):
    """Crank-Nicolson trajectory for a block of initial vectors (m, k)."""
    cdef const zval[::1] s = np.ascontiguousarray(sub, dtype=np.complex128)
    cdef const zval[::1] d = np.ascontiguousarray(diag, dtype=np.complex128)
    cdef const zval[::1] u = np.ascontiguousarray(sup, dtype=np.complex128)
    cdef Py_ssize_t m = d.shape[0]
    cdef double c = 0.5 * dt
    cdef zval[::1] asub = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] adiag = np.empty(m, dtype=np.complex128)
    cdef zval[::1] asup = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] bsub = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] bdiag = np.empty(m, dtype=np.complex128)
    cdef zval[::1] bsup = np.empty(m - 1, dtype=np.complex128)
    cdef Py_ssize_t i, j, k
    for i in range(m):
        adiag[i] = 1.0 + c * d[i]
        bdiag[i] = 1.0 - c * d[i]
    for i in range(m - 1):
        asub[i] = c * s[i]
        asup[i] = c * u[i]
        bsub[i] = -c * s[i]
        bsup[i] = -c * u[i]
    cdef zval[::1] low = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] piv = np.empty(m, dtype=np.complex128)
    cdef double g = 0.0
    if _factor(asub, adiag, asup, low, piv, &g) or g > GROWTH_LIMIT:
        raise GrowthError("Crank-Nicolson factor growth %.3g" % g)
    cdef cnp.ndarray vout = np.array(v0, dtype=np.complex128, order="C")
    cdef zval[:, ::1] v = vout
    cdef Py_ssize_t nrhs = v.shape[1]
    cdef zval[:, ::1] w = np.empty((m, nrhs), dtype=np.complex128)
    cdef cnp.ndarray flo = np.empty((steps + 1, nrhs), dtype=np.complex128)
    cdef cnp.ndarray fhi = np.empty((steps + 1, nrhs), dtype=np.complex128)
    cdef zval[:, ::1] flov = flo
    cdef zval[:, ::1] fhiv = fhi
    cdef double twoh = 2.0 * h
    cdef zval bs, bd, bu
    for j in range(nrhs):
        flov[0, j] = (4.0 * v[0, j] - v[1, j]) / twoh
        fhiv[0, j] = (v[m - 2, j] - 4.0 * v[m - 1, j]) / twoh
    for k in range(steps):
        bd = bdiag[0]
        bu = bsup[0]
        for j in range(nrhs):
            w[0, j] = bd * v[0, j] + bu * v[1, j]
        for i in range(1, m - 1):
            bs = bsub[i - 1]
            bd = bdiag[i]
            bu = bsup[i]
            for j in range(nrhs):
                w[i, j] = bs * v[i - 1, j] + bd * v[i, j] + bu * v[i + 1, j]
        bs = bsub[m - 2]
        bd = bdiag[m - 1]
        for j in range(nrhs):
            w[m - 1, j] = bs * v[m - 2, j] + bd * v[m - 1, j]
        _solve_block(low, piv, asup, w)
        for i in range(m):
            for j in range(nrhs):
                v[i, j] = w[i, j]
        for j in range(nrhs):
            flov[k + 1, j] = (4.0 * v[0, j] - v[1, j]) / twoh
            fhiv[k + 1, j] = (v[m - 2, j] - 4.0 * v[m - 1, j]) / twoh
    return vout, flo, fhi


def cn_apply(sub, diag, sup, v0, double dt, Py_ssize_t steps):
    """Apply the Crank-Nicolson propagator without recording fluxes."""
    cdef const zval[::1] s = np.ascontiguousarray(sub, dtype=np.complex128)
    cdef const zval[::1] d = np.ascontiguousarray(diag, dtype=np.complex128)
    cdef const zval[::1] u = np.ascontiguousarray(sup, dtype=np.complex128)
    cdef Py_ssize_t m = d.shape[0]
    cdef double c = 0.5 * dt
    cdef zval[::1] asub = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] adiag = np.empty(m, dtype=np.complex128)
    cdef zval[::1] asup = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] bsub = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] bdiag = np.empty(m, dtype=np.complex128)
    cdef zval[::1] bsup = np.empty(m - 1, dtype=np.complex128)
    cdef Py_ssize_t i, k
    for i in range(m):
        adiag[i] = 1.0 + c * d[i]
        bdiag[i] = 1.0 - c * d[i]
    for i in range(m - 1):
        asub[i] = c * s[i]
        asup[i] = c * u[i]
        bsub[i] = -c * s[i]
        bsup[i] = -c * u[i]
    cdef zval[::1] low = np.empty(m - 1, dtype=np.complex128)
    cdef zval[::1] piv = np.empty(m, dtype=np.complex128)
    cdef double g = 0.0
    if _factor(asub, adiag, asup, low, piv, &g) or g > GROWTH_LIMIT:
        raise GrowthError("Crank-Nicolson factor growth %.3g" % g)
    cdef cnp.ndarray vout = np.array(v0, dtype=np.complex128, order="C")
    cdef zval[::1] v = vout
    cdef zval[::1] w = np.empty(m, dtype=np.complex128)
    for k in range(steps):
        w[0] = bdiag[0] * v[0] + bsup[0] * v[1]
        for i in range(1, m - 1):
            w[i] = bsub[i - 1] * v[i - 1] + bdiag[i] * v[i] + bsup[i] * v[i + 1]
        w[m - 1] = bsub[m - 2] * v[m - 2] + bdiag[m - 1] * v[m - 1]
        _solve_one(low, piv, asup, w)
        for i in range(m):
            v[i] = w[i]
    return vout
