"""The degeneracy coefficient q and its scalar functionals.

A profile q on [-ell_minus, ell_plus] must vanish at 0 and be strictly
increasing with q' bounded away from zero.  Everything downstream is a
functional of q: the critical-time bounds built from the two one-sided
integrals of |q|, the concentration weight kappa, and the truncated
Agmon weight W.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SQRT2 = float(np.sqrt(2.0))

DEFAULT_QUAD_POINTS = 4096


@dataclass(frozen=True)
class AgmonParams:
    """Spectral-bound scale E (units of sqrt(n)), margin eps, mode index n."""

    E: float
    eps: float
    n: int

    def __post_init__(self):
        if not self.E > 0:
            raise ValidationError("AgmonParams.E must be positive")
        if not 0.0 < self.eps < 1.0:
            raise ValidationError("AgmonParams.eps must lie in (0,1)")
        if self.n < 0:
            raise ValidationError("AgmonParams.n must be nonnegative")


@dataclass(frozen=True)
class TimeBounds:
    t_min: float
    t_max: float

    def __post_init__(self):
        if not 0.0 <= self.t_min <= self.t_max:
            raise ValidationError("need 0 <= t_min <= t_max")


@dataclass(frozen=True)
class WeightBoundReport:
    """Per-mode gap between the truncated and the full concentration weight."""

    n: int
    eps: float
    min_gap: float
    argmin_y: float


def _trapz(values, h):
    return h * (np.sum(values) - 0.5 * (values[0] + values[-1]))


class QProfile:
    """Degeneracy coefficient with analytic or sampled evaluators.

    kinds: 'linear' (q=y), 'scaled-linear' (q=c*y), 'cubic-perturbed'
    (q = y + a*y^3 with min q' > 0), 'user-sampled' (monotone cubic
    interpolant of (y, q) samples).
    """

    def __init__(self, ell_minus, ell_plus, kind, q, q_prime,
                 q_second=None, q_third=None, smooth=True, params=None):
        if not (ell_minus > 0 and ell_plus > 0):
            raise ValidationError("ell_minus and ell_plus must be positive")
        self.ell_minus = float(ell_minus)
        self.ell_plus = float(ell_plus)
        self.kind = kind
        self.q = q
        self.q_prime = q_prime
        self.q_second = q_second if q_second is not None else (lambda y: np.zeros_like(np.asarray(y, float)))
        self.q_third = q_third if q_third is not None else (lambda y: np.zeros_like(np.asarray(y, float)))
        self.smooth = smooth
        self.params = dict(params or {})
        self._validate()

    # -- constructors ------------------------------------------------

    @classmethod
    def linear(cls, ell_minus=1.0, ell_plus=1.0):
        return cls(ell_minus, ell_plus, "linear",
                   q=lambda y: np.asarray(y, float) + 0.0,
                   q_prime=lambda y: np.ones_like(np.asarray(y, float)))

    @classmethod
    def scaled_linear(cls, c, ell_minus=1.0, ell_plus=1.0):
        if c <= 0:
            raise ValidationError("scaled-linear slope c must be positive")
        return cls(ell_minus, ell_plus, "scaled-linear",
                   q=lambda y: c * np.asarray(y, float),
                   q_prime=lambda y: np.full_like(np.asarray(y, float), c),
                   params={"c": float(c)})

    @classmethod
    def cubic_perturbed(cls, a, ell_minus=1.0, ell_plus=1.0):
        ell = max(ell_minus, ell_plus)
        if 1.0 + 3.0 * a * ell * ell <= 0.0:
            raise ValidationError(
                "cubic perturbation a=%g gives min q' <= 0 on the domain" % a)
        return cls(ell_minus, ell_plus, "cubic-perturbed",
                   q=lambda y: np.asarray(y, float) + a * np.asarray(y, float) ** 3,
                   q_prime=lambda y: 1.0 + 3.0 * a * np.asarray(y, float) ** 2,
                   q_second=lambda y: 6.0 * a * np.asarray(y, float),
                   q_third=lambda y: np.full_like(np.asarray(y, float), 6.0 * a),
                   params={"a": float(a)})

    @classmethod
    def from_samples(cls, y, qvals, ell_minus=None, ell_plus=None):
        from scipy.interpolate import PchipInterpolator

        y = np.asarray(y, float)
        qvals = np.asarray(qvals, float)
        if y.ndim != 1 or y.shape != qvals.shape or y.size < 4:
            raise ValidationError("need matching 1-D sample arrays, >= 4 points")
        if np.any(np.diff(y) <= 0):
            raise ValidationError("sample ordinates must be strictly increasing")
        if np.any(np.diff(qvals) <= 0):
            raise ValidationError("sampled q must be strictly increasing")
        if y[0] >= 0.0 or y[-1] <= 0.0:
            raise ValidationError("samples must straddle y=0")
        interp = PchipInterpolator(y, qvals)
        if abs(float(interp(0.0))) > 1e-12:
            raise ValidationError("sampled q must vanish at y=0")
        d1 = interp.derivative(1)
        d2 = interp.derivative(2)
        d3 = interp.derivative(3)
        return cls(ell_minus if ell_minus is not None else -y[0],
                   ell_plus if ell_plus is not None else y[-1],
                   "user-sampled",
                   q=lambda s: np.asarray(interp(s)),
                   q_prime=lambda s: np.asarray(d1(s)),
                   q_second=lambda s: np.asarray(d2(s)),
                   q_third=lambda s: np.asarray(d3(s)),
                   smooth=False,
                   params={"n_samples": int(y.size)})

    # -- validation and helpers --------------------------------------

    def _validate(self):
        if abs(float(self.q(0.0))) > 1e-12:
            raise ValidationError("q(0) must be 0")
        ygrid = self.domain_grid(DEFAULT_QUAD_POINTS + 1)
        qp = np.asarray(self.q_prime(ygrid), float)
        if np.min(qp) <= 0.0:
            raise ValidationError("min q' over the domain must be positive")
        qv = np.asarray(self.q(ygrid), float)
        if np.any(np.diff(qv) <= 0.0):
            raise ValidationError("q must be strictly increasing")

    def domain_grid(self, npts):
        return np.linspace(-self.ell_minus, self.ell_plus, npts)

    def check_domain(self, y):
        y = np.asarray(y, float)
        tol = 1e-12 * (self.ell_minus + self.ell_plus)
        if np.any(y < -self.ell_minus - tol) or np.any(y > self.ell_plus + tol):
            raise ValidationError("y outside [-ell_minus, ell_plus]")

    @property
    def qprime0(self):
        return float(self.q_prime(0.0))

    def q_antiderivative(self, y, quad_points=DEFAULT_QUAD_POINTS):
        """Integral of q from 0 to y (closed form for the analytic kinds)."""
        self.check_domain(y)
        y = np.asarray(y, float)
        if self.kind == "linear":
            return y * y / 2.0
        if self.kind == "scaled-linear":
            return self.params["c"] * y * y / 2.0
        if self.kind == "cubic-perturbed":
            return y * y / 2.0 + self.params["a"] * y ** 4 / 4.0
        return self._quad_from_zero(self.q, y, quad_points)

    def _quad_from_zero(self, f, y, quad_points):
        y = np.asarray(y, float)
        scalar = y.ndim == 0
        ys = np.atleast_1d(y)
        out = np.empty_like(ys)
        for i, yi in enumerate(ys):
            if yi == 0.0:
                out[i] = 0.0
                continue
            s = np.linspace(0.0, yi, quad_points + 1)
            out[i] = _trapz(np.asarray(f(s), float), s[1] - s[0])
        return float(out[0]) if scalar else out

    # -- scalar functionals ------------------------------------------

    def time_bounds(self, quad_points=DEFAULT_QUAD_POINTS):
        """Critical-time bracket from the two one-sided integrals of |q|."""
        if quad_points < 2:
            raise ValidationError("quad_points must be >= 2")
        if self.kind in ("linear", "scaled-linear"):
            pair = (self.ell_plus ** 2 / 2.0, self.ell_minus ** 2 / 2.0)
        else:
            i_plus = self._side_integral(+1, quad_points)
            i_minus = self._side_integral(-1, quad_points)
            coarse = (self._side_integral(+1, quad_points // 2),
                      self._side_integral(-1, quad_points // 2))
            for fine, c in zip((i_plus, i_minus), coarse):
                if abs(fine - c) > 1e-6 * (1.0 + abs(fine)):
                    raise ValidationError(
                        "quadrature for the time bounds did not converge")
            pair = (i_plus / self.qprime0, i_minus / self.qprime0)
        return TimeBounds(t_min=min(pair), t_max=max(pair))

    def _side_integral(self, side, quad_points):
        if side > 0:
            s = np.linspace(0.0, self.ell_plus, quad_points + 1)
        else:
            s = np.linspace(-self.ell_minus, 0.0, quad_points + 1)
        return _trapz(np.abs(np.asarray(self.q(s), float)), s[1] - s[0])

    def kappa(self, y, eps, quad_points=DEFAULT_QUAD_POINTS):
        """Concentration weight (1-eps)/sqrt(2) * integral of q from 0 to y."""
        if not 0.0 <= eps <= 1.0:
            raise ValidationError("eps must lie in [0,1]")
        return (1.0 - eps) / SQRT2 * self.q_antiderivative(y, quad_points)

    def agmon_weight(self, y, params: AgmonParams, quad_points=DEFAULT_QUAD_POINTS):
        """Truncated weight W: the part of n q^2 above sqrt(n)(E+eps), integrated."""
        self.check_domain(y)
        n, E, eps = params.n, params.E, params.eps

        def integrand(s):
            qs = np.asarray(self.q(s), float)
            body = n * qs * qs - np.sqrt(n) * (E + eps)
            return np.sqrt(np.maximum(body, 0.0))

        val = self._quad_from_zero(integrand, y, quad_points)
        return (1.0 - eps) / SQRT2 * np.abs(val)

    def weight_lower_bound_check(self, params: AgmonParams, grid):
        """Min over the grid of W_{n,eps/2}(y) - sqrt(n) * kappa_eps(y)."""
        grid = np.asarray(grid, float)
        self.check_domain(grid)
        half = AgmonParams(E=params.E, eps=params.eps / 2.0, n=params.n)
        w = np.array([self.agmon_weight(y, half) for y in grid])
        k = np.sqrt(params.n) * np.array([self.kappa(y, params.eps) for y in grid])
        gap = w - k
        i = int(np.argmin(gap))
        return WeightBoundReport(n=params.n, eps=params.eps,
                                 min_gap=float(gap[i]), argmin_y=float(grid[i]))


def weight_lower_bound_sweep(profile, E, eps, n_list, grid):
    """Run the gap check over an n range; the running min certifies a uniform
    lower constant (empirical stand-in for the unquantified C_eps)."""
    reports = [profile.weight_lower_bound_check(AgmonParams(E=E, eps=eps, n=n), grid)
               for n in n_list]
    overall = min(r.min_gap for r in reports)
    return reports, overall
