"""Space-time Carleman weights and numerical verification of the estimate.

The weight is phi(t,y) = theta(t) psi(y): theta blows up at the window
ends (so u e^{-sqrt(n) phi} vanishes there) and equals 1 on the middle
third; psi decreases toward the observed wall.  Two spatial weights are
glued at y=0 so each wall observes its own half.  The coefficient
fields Phi0, Phi1 must be positive for the inequality to close; their
certified margins and the n-threshold where the discrete fields clear
them are reported, never assumed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError

SQRT2 = math.sqrt(2.0)


def _smoothstep(x):
    """Quintic smoothstep: C^2, flat to second order at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)


def _smoothstep_d1(x):
    inside = (x > 0.0) & (x < 1.0)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30.0 * x ** 2 * (x - 1.0) ** 2, 0.0)


def _smoothstep_d2(x):
    inside = (x > 0.0) & (x < 1.0)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 60.0 * x * (x - 1.0) * (2.0 * x - 1.0), 0.0)


class ThetaWeight:
    """Time weight 1 + (1-chi)/((t-tau1)(tau2-t)) with a C^2 plateau bump.

    chi ramps 0->1 over [tau1+D/6, tau1+D/3], sits at 1 on the middle
    third, ramps back down over [tau2-D/3, tau2-D/6]; theta is exactly 1
    on the middle third and blows up like 1/((t-tau1)(tau2-t)) at the ends.
    """

    def __init__(self, tau1, tau2):
        if not 0.0 < tau1 < tau2:
            raise ValidationError("need 0 < tau1 < tau2")
        self.tau1 = float(tau1)
        self.tau2 = float(tau2)
        d = tau2 - tau1
        self._ramp = d / 6.0
        self._a0 = tau1 + d / 6.0
        self._a1 = tau1 + d / 3.0
        self._b1 = tau2 - d / 3.0
        self._b0 = tau2 - d / 6.0
        ts = tau1 + d * np.linspace(1e-6, 1.0 - 1e-6, 20001)
        th = self.theta(ts)
        self.C1 = float(np.max(np.abs(self.dtheta(ts)) / th ** 2))
        self.C2 = float(np.max(np.abs(self.d2theta(ts)) / th ** 3))

    @property
    def plateau(self):
        return (self._a1, self._b1)

    def _chi(self, t):
        t = np.asarray(t, float)
        up = _smoothstep((t - self._a0) / self._ramp)
        down = _smoothstep((self._b0 - t) / self._ramp)
        return np.where(t <= 0.5 * (self._a1 + self._b1), up, down)

    def _chi_d1(self, t):
        t = np.asarray(t, float)
        up = _smoothstep_d1((t - self._a0) / self._ramp) / self._ramp
        down = -_smoothstep_d1((self._b0 - t) / self._ramp) / self._ramp
        return np.where(t <= 0.5 * (self._a1 + self._b1), up, down)

    def _chi_d2(self, t):
        t = np.asarray(t, float)
        up = _smoothstep_d2((t - self._a0) / self._ramp) / self._ramp ** 2
        down = _smoothstep_d2((self._b0 - t) / self._ramp) / self._ramp ** 2
        return np.where(t <= 0.5 * (self._a1 + self._b1), up, down)

    def _g(self, t):
        t = np.asarray(t, float)
        return (t - self.tau1) * (self.tau2 - t)

    def theta(self, t):
        f = 1.0 - self._chi(t)
        return 1.0 + f / self._g(t)

    def dtheta(self, t):
        t = np.asarray(t, float)
        f = 1.0 - self._chi(t)
        fp = -self._chi_d1(t)
        g = self._g(t)
        gp = self.tau1 + self.tau2 - 2.0 * t
        return fp / g - f * gp / g ** 2

    def d2theta(self, t):
        t = np.asarray(t, float)
        f = 1.0 - self._chi(t)
        fp = -self._chi_d1(t)
        fpp = -self._chi_d2(t)
        g = self._g(t)
        gp = self.tau1 + self.tau2 - 2.0 * t
        return (fpp / g - 2.0 * fp * gp / g ** 2
                + f * (2.0 * gp ** 2 / g ** 3 + 2.0 / g ** 2))


def build_theta(tau1, tau2):
    return ThetaWeight(tau1, tau2)


@dataclass
class SpatialWeight:
    """Spatial factor psi with analytic derivatives up to fourth order."""

    form: str                 # 'integral' or 'quadratic'
    side: str                 # 'plus' (observe hi wall) or 'minus' (observe lo)
    y_lo: float
    y_hi: float
    psi: object
    dpsi: object
    d2psi: object
    d3psi: object
    d4psi: object
    eps_margin: float = np.nan
    params: dict = field(default_factory=dict)

    def support_grid(self, npts=801):
        return np.linspace(self.y_lo, self.y_hi, npts)


def _certify_margins(weight, profile, npts=2001):
    """Min over the support of the three positivity quantities."""
    y = weight.support_grid(npts)
    q = np.asarray(profile.q(y), float)
    qp = np.asarray(profile.q_prime(y), float)
    psi = weight.psi(y)
    d1 = weight.dpsi(y)
    d2 = weight.d2psi(y)
    m_psi = float(np.min(psi))
    m_phi0 = float(np.min(-2.0 * d1 ** 2 * d2 - q * q * qp / SQRT2))
    m_phi1 = float(np.min(-2.0 * d2 - SQRT2 * qp))
    return min(m_psi, m_phi0, m_phi1), (m_psi, m_phi0, m_phi1)


def integral_weight(profile, beta, eps0, delta, side, constant):
    """One-sided integral-form weight.

    Plus side (support [-delta, ell_plus], observe the hi wall):
        psi(y) = eps0 + beta * int_y^{ell_plus} (q + 3 eps0) + c_plus.
    Minus side (support [-ell_minus, delta], observe the lo wall):
        psi(y) = eps0 + beta * int_{-ell_minus}^y (-q + 3 eps0) + c_minus;
    the signed integrand agrees with |q| on y<=0 and keeps psi'' = -beta q'
    on the small overlap (0, delta] where |q|' would flip sign.
    """
    i_plus = profile.q_antiderivative(profile.ell_plus)
    i_minus = profile.q_antiderivative(-profile.ell_minus)

    if side == "plus":
        y_lo, y_hi = -delta, profile.ell_plus

        def psi(y):
            y = np.asarray(y, float)
            tail = i_plus - profile.q_antiderivative(y)
            return eps0 + beta * (tail + 3.0 * eps0 * (profile.ell_plus - y)) + constant

        def dpsi(y):
            return -beta * (np.asarray(profile.q(y), float) + 3.0 * eps0)
    else:
        y_lo, y_hi = -profile.ell_minus, delta

        def psi(y):
            y = np.asarray(y, float)
            ahead = -(profile.q_antiderivative(y) - i_minus)
            return eps0 + beta * (ahead + 3.0 * eps0 * (y + profile.ell_minus)) + constant

        def dpsi(y):
            return beta * (-np.asarray(profile.q(y), float) + 3.0 * eps0)

    def d2psi(y):
        return -beta * np.asarray(profile.q_prime(y), float)

    def d3psi(y):
        return -beta * np.asarray(profile.q_second(y), float)

    def d4psi(y):
        return -beta * np.asarray(profile.q_third(y), float)

    w = SpatialWeight(form="integral", side=side, y_lo=y_lo, y_hi=y_hi,
                      psi=psi, dpsi=dpsi, d2psi=d2psi, d3psi=d3psi, d4psi=d4psi,
                      params={"beta": beta, "eps0": eps0, "delta": delta,
                              "constant": constant})
    w.eps_margin, w.params["margins"] = _certify_margins(w, profile)
    return w


def quadratic_weight(profile, observe="hi"):
    """Concave quadratic weight for the fixed-mode estimate.

    psi1(eta) = -eta^2/2 +- 2 eta + 3 rescaled to the interval; the sign
    makes |psi'| >= c0 with the right orientation for the observed wall.
    """
    length = profile.ell_minus + profile.ell_plus
    sign = -1.0 if observe == "hi" else 1.0
    scale = 2.0 / length

    def eta(y):
        return (2.0 * np.asarray(y, float) + profile.ell_minus - profile.ell_plus) / length

    def psi(y):
        e = eta(y)
        return -e * e / 2.0 + sign * 2.0 * e + 3.0

    def dpsi(y):
        return (-eta(y) + sign * 2.0) * scale

    def d2psi(y):
        return np.full_like(np.asarray(y, float), -scale * scale)

    def zero(y):
        return np.zeros_like(np.asarray(y, float))

    c0 = min(scale * scale, scale, 0.5)
    return SpatialWeight(form="quadratic",
                         side="plus" if observe == "hi" else "minus",
                         y_lo=-profile.ell_minus, y_hi=profile.ell_plus,
                         psi=psi, dpsi=dpsi, d2psi=d2psi, d3psi=zero, d4psi=zero,
                         eps_margin=c0, params={"sign": sign, "c0": c0})


@dataclass
class WeightPair:
    theta: ThetaWeight
    plus: SpatialWeight
    minus: SpatialWeight
    beta: float
    eps0: float
    delta: float
    gluing_constant: float
    kappa: float
    eps_margin: float
    smoothness_flag: bool = False

    def psi_glued(self, y):
        y = np.asarray(y, float)
        return np.where(y >= 0.0, self.plus.psi(y), self.minus.psi(y))

    def phi(self, t, y):
        """Glued phi(t,y) = theta(t) psi(y); broadcasts t against y."""
        th = np.asarray(self.theta.theta(t), float)
        ps = self.psi_glued(y)
        return np.multiply.outer(th, ps) if th.ndim and ps.ndim else th * ps


def build_weight_pair(profile, kappa, tau1, tau2, beta_margin=0.1,
                      eps0_shrinks=60, beta_halvings=24):
    """Select beta > 1/sqrt(2) and eps0 > 0 for a target exponential cost kappa.

    Search: start at beta = 1/sqrt(2) + beta_margin; shrink eps0
    geometrically from q(min(ell))/4; if no eps0 works halve the beta
    margin and retry.  Fails naming the violated budget inequality.
    """
    bounds = profile.time_bounds()
    floor = profile.qprime0 / SQRT2 * bounds.t_max
    if not kappa > floor:
        raise ValidationError(
            "kappa=%.6g is below the attainable floor q'(0)/sqrt(2)*t_max=%.6g"
            % (kappa, floor))
    i_plus = profile.q_antiderivative(profile.ell_plus)
    i_minus = profile.q_antiderivative(-profile.ell_minus)
    len_plus, len_minus = profile.ell_plus, profile.ell_minus

    chosen = None
    margin = beta_margin
    for _ in range(beta_halvings):
        beta = 1.0 / SQRT2 + margin
        eps0 = float(profile.q(min(len_plus, len_minus))) / 4.0
        for _ in range(eps0_shrinks):
            budget = eps0 + beta * max(i_plus + 3.0 * eps0 * len_plus,
                                       i_minus + 3.0 * eps0 * len_minus)
            if budget < kappa:
                chosen = (beta, eps0)
                break
            eps0 *= 0.5
        if chosen:
            break
        margin *= 0.5
    if not chosen:
        raise ValidationError(
            "no (beta, eps0) satisfies eps0 + beta*max(int(q+3eps0), "
            "int(|q|+3eps0)) < kappa=%.6g within the search budget" % kappa)
    beta, eps0 = chosen

    delta = _delta_for(profile, eps0)
    c = beta * ((i_minus + 3.0 * eps0 * len_minus)
                - (i_plus + 3.0 * eps0 * len_plus))
    c_plus, c_minus = max(0.0, c), max(0.0, -c)
    plus = integral_weight(profile, beta, eps0, delta, "plus", c_plus)
    minus = integral_weight(profile, beta, eps0, delta, "minus", c_minus)
    theta = build_theta(tau1, tau2)

    glue_gap = abs(float(plus.psi(0.0)) - float(minus.psi(0.0)))
    if glue_gap > 1e-12 * (1.0 + kappa):
        raise NumericalError("gluing constants failed: psi jump %.3g" % glue_gap)
    pair = WeightPair(theta=theta, plus=plus, minus=minus, beta=beta, eps0=eps0,
                      delta=delta, gluing_constant=c, kappa=kappa,
                      eps_margin=min(plus.eps_margin, minus.eps_margin),
                      smoothness_flag=not profile.smooth)
    _check_phi_range(pair, profile)
    return pair


def _delta_for(profile, eps0):
    from scipy.optimize import brentq

    delta = min(profile.ell_minus, profile.ell_plus)
    hi = float(profile.q(delta))
    lo = float(-profile.q(-delta))
    if hi > eps0:
        delta = min(delta, brentq(lambda y: float(profile.q(y)) - eps0,
                                  0.0, delta, xtol=1e-14))
    if lo > eps0:
        delta = min(delta, brentq(lambda y: -float(profile.q(-y)) - eps0,
                                  0.0, min(profile.ell_minus, profile.ell_plus),
                                  xtol=1e-14))
    if delta <= 0.0:
        raise NumericalError("no positive delta with max(|q(-d)|, q(d)) <= eps0")
    return delta


def _check_phi_range(pair, profile, npts=801):
    y = profile.domain_grid(npts)
    psi = pair.psi_glued(y)
    if np.min(psi) < 0.0 or np.max(psi) > pair.kappa:
        raise NumericalError(
            "plateau weight range [%.6g, %.6g] escapes [0, kappa=%.6g]"
            % (float(np.min(psi)), float(np.max(psi)), pair.kappa))


def phi_coefficients(theta, weight, n, t, y, profile, scaling="refined", s=1.0):
    """Coefficient fields Phi0, Phi1 on the (t, y) grid.

    scaling='refined': the sqrt(n)-normalized fields whose positivity
    closes the large-n estimate (requires n >= 1).
    scaling='generic': the raw fields for the full weight s*theta*psi.
    """
    t = np.atleast_1d(np.asarray(t, float))
    y = np.atleast_1d(np.asarray(y, float))
    th = theta.theta(t)[:, None]
    thp = theta.dtheta(t)[:, None]
    thpp = theta.d2theta(t)[:, None]
    p1 = weight.dpsi(y)[None, :]
    p2 = weight.d2psi(y)[None, :]
    p4 = weight.d4psi(y)[None, :]
    ps = weight.psi(y)[None, :]
    q = np.asarray(profile.q(y), float)[None, :]
    qp = np.asarray(profile.q_prime(y), float)[None, :]

    if scaling == "refined":
        if n < 1:
            raise ValidationError("refined scaling needs n >= 1")
        phi0 = (-2.0 * (th * p1) ** 2 * (th * p2)
                - q * q * qp / SQRT2
                - thpp * ps / (2.0 * n)
                + th * p4 / (2.0 * n)
                + 2.0 * (thp * p1) * (th * p1) / math.sqrt(n))
        phi1 = -2.0 * th * p2 - SQRT2 * qp
        return phi0, phi1
    if scaling == "generic":
        fy = s * th * p1
        fyy = s * th * p2
        fyyyy = s * th * p4
        ftt = s * thpp * ps
        fty = s * thp * p1
        phi0 = (-2.0 * fy ** 2 * fyy - ftt / 2.0 + fyyyy / 2.0 + 2.0 * fty * fy
                - n ** 1.5 * q * q * qp / SQRT2)
        phi1 = -2.0 * fyy - math.sqrt(2.0 * n) * qp
        return phi0, phi1
    raise ValidationError("scaling must be 'refined' or 'generic'")


def positivity_threshold(pair, profile, n_grid=None, t_pts=160, y_pts=320):
    """Smallest scanned n with Phi0 >= (eps/2) theta^3 and Phi1 >= eps theta
    pointwise on both sides (and for every larger scanned n)."""
    if n_grid is None:
        n_grid = [4 ** k for k in range(1, 19)]
    eps = pair.eps_margin
    t = pair.theta.tau1 + (pair.theta.tau2 - pair.theta.tau1) * np.linspace(
        1e-5, 1.0 - 1e-5, t_pts)
    th = pair.theta.theta(t)[:, None]
    results = []
    for n in n_grid:
        ok = True
        for w in (pair.plus, pair.minus):
            y = w.support_grid(y_pts)
            phi0, phi1 = phi_coefficients(pair.theta, w, n, t, y, profile,
                                          scaling="refined")
            if np.any(phi0 < 0.5 * eps * th ** 3) or np.any(phi1 < eps * th):
                ok = False
                break
        results.append((n, ok))
    threshold = None
    for i, (n, ok) in enumerate(results):
        if ok and all(r[1] for r in results[i:]):
            threshold = n
            break
    return threshold, results


@dataclass
class CarlemanReport:
    n: int
    lhs: float
    boundary_term: float
    source_term: float
    constant: float
    end_slice_max: float
    m: int
    time_points: int

    def to_dict(self):
        return {"n": self.n, "lhs": self.lhs, "boundary_term": self.boundary_term,
                "source_term": self.source_term, "constant": self.constant,
                "end_slice_max": self.end_slice_max,
                "grid": {"m": self.m, "time_points": self.time_points}}


def verify_carleman(profile, pair, n, u_traj, times, grid, f_traj=None,
                    boundary_uy=None, end_tol=1e-14):
    """Smallest admissible constant in the weighted energy inequality.

    u_traj: (Nt, m) solution slices at `times` (strictly inside the
    window); f_traj: matching source slices or None; boundary_uy:
    (Nt, 2) wall derivatives of u, or None to difference one-sidedly.
    LHS integrates n^{3/2} theta^3 |w|^2 + sqrt(n) theta |w_y|^2 with
    w = u e^{-sqrt(n) phi}; RHS is sqrt(n) * (wall flux energy of w)
    plus the weighted source energy.
    """
    times = np.asarray(times, float)
    if times[0] <= pair.theta.tau1 or times[-1] >= pair.theta.tau2:
        raise ValidationError("times must lie strictly inside the window")
    m = grid.m
    if u_traj.shape != (times.size, m):
        raise ValidationError("u_traj shape mismatch")
    th = pair.theta.theta(times)
    psi = pair.psi_glued(grid.nodes)
    expw = np.exp(-math.sqrt(n) * np.outer(th, psi))
    w = u_traj * expw

    end_max = float(max(np.max(np.abs(w[0])), np.max(np.abs(w[-1]))))
    if end_max > end_tol:
        raise NumericalError(
            "end slices do not vanish (max |w| = %.3g): the window is too "
            "short for n=%d, widen [tau1, tau2] or increase n" % (end_max, n))

    h = grid.h
    if boundary_uy is None:
        uy_lo = (4.0 * u_traj[:, 0] - u_traj[:, 1]) / (2.0 * h)
        uy_hi = (u_traj[:, -2] - 4.0 * u_traj[:, -1]) / (2.0 * h)
    else:
        uy_lo, uy_hi = boundary_uy[:, 0], boundary_uy[:, 1]
    psi_lo = float(pair.minus.psi(grid.y_lo))
    psi_hi = float(pair.plus.psi(grid.y_hi))
    w_lo = uy_lo * np.exp(-math.sqrt(n) * th * psi_lo)
    w_hi = uy_hi * np.exp(-math.sqrt(n) * th * psi_hi)

    # w_y on the full node set: one-sided at the walls, central inside
    padded = np.zeros((times.size, m + 2), dtype=np.complex128)
    padded[:, 1:-1] = w
    wy_interior = (padded[:, 2:] - padded[:, :-2]) / (2.0 * h)
    wy_sq = np.abs(wy_interior) ** 2
    w_sq = np.abs(w) ** 2

    space_w = h * np.sum(w_sq, axis=1)
    wall_sq = np.abs(w_lo) ** 2 + np.abs(w_hi) ** 2
    space_wy = h * (np.sum(wy_sq, axis=1) + 0.5 * wall_sq)
    lhs_t = n ** 1.5 * th ** 3 * space_w + math.sqrt(n) * th * space_wy
    lhs = float(np.trapezoid(lhs_t, times))

    boundary_term = math.sqrt(n) * float(np.trapezoid(wall_sq, times))
    if f_traj is None:
        source_term = 0.0
    else:
        g = f_traj * expw
        source_term = float(np.trapezoid(h * np.sum(np.abs(g) ** 2, axis=1), times))
    rhs = boundary_term + source_term
    if rhs <= 0.0:
        constant = 0.0 if lhs == 0.0 else np.inf
    else:
        constant = lhs / rhs
    return CarlemanReport(n=n, lhs=lhs, boundary_term=boundary_term,
                          source_term=source_term, constant=constant,
                          end_slice_max=end_max, m=m, time_points=times.size)


def eigen_driven_verification(profile, pair, n, grid, time_points=400, seed=7):
    """Verify on the exact semidiscrete solution u(t) = e^{-lambda t} psi_h."""
    from .eigen import smallest_real_eigenpair
    from .operators import assemble_kn

    op = assemble_kn(profile, n, grid)
    pr = smallest_real_eigenpair(op, seed=seed)
    tau1, tau2 = pair.theta.tau1, pair.theta.tau2
    times = tau1 + (tau2 - tau1) * np.arange(1, time_points) / time_points
    amp = np.exp(-pr.value * times)
    u_traj = amp[:, None] * pr.vector[None, :]
    buy = np.empty((times.size, 2), dtype=np.complex128)
    buy[:, 0] = amp * pr.boundary_deriv_lo
    buy[:, 1] = amp * pr.boundary_deriv_hi
    return verify_carleman(profile, pair, n, u_traj, times, grid,
                           boundary_uy=buy)


def cutoff_pair(profile, delta, grid, u_slice, uy_slice=None):
    """One-sided cutoff u_+ = eta u with its commutator source.

    eta ramps 0->1 over [-delta, 0] (quintic), so the source
    f_+ = -eta'' u - 2 eta' u_y is supported in [-delta, 0].
    """
    y = grid.nodes
    h = grid.h
    x = (y + delta) / delta
    eta = _smoothstep(x)
    eta1 = _smoothstep_d1(x) / delta
    eta2 = _smoothstep_d2(x) / delta ** 2
    if uy_slice is None:
        padded = np.concatenate(([0.0], u_slice, [0.0]))
        uy_slice = (padded[2:] - padded[:-2]) / (2.0 * h)
    u_plus = eta * u_slice
    f_plus = -eta2 * u_slice - 2.0 * eta1 * uy_slice
    outside = (y < -delta) | (y > 0.0)
    support_ok = bool(np.all(np.abs(f_plus[outside]) == 0.0))
    return u_plus, f_plus, support_ok
