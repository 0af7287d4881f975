"""Mutual information rate of the Poisson channel and its parameter sensitivity.

The rate is ``E[phi(lambda)] - E[phi(lambda_hat)]`` with ``phi(z) = z ln z``.
The output term is an average over the stationary time since the last event,

    E[phi(lambda_hat)] = sum_j w a_j int_0^inf phi(m(tau, theta_j)) P(tau, theta_j) dtau,

so it follows from the boundary density and one integral per cell.

For telegraph input without dark current everything is explicit.  Rates are
scaled so that ``c = 1`` (``I(k1, k2, c) = c I(k1/c, k2/c, 1)``) and the
derivatives with respect to ``k1``, ``k2`` and ``c`` come from sensitivity
ODEs integrated next to the filter.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .core import DEFAULT_OPTIONS, BretpModel, phi, solve_flow
from .errors import InvalidParameters, LostNullcline, NoLowerBound, UnsupportedModel
from .models import RandomTelegraphParams
from .solver import BoundaryDensity, boundary_density


@dataclass
class MiRateResult:
    rate: float
    input_term: float
    output_term: float
    truncation_error_bound: float
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        return {"rate": self.rate, "input_term": self.input_term,
                "output_term": self.output_term,
                "truncation_error_bound": self.truncation_error_bound}


def dphi(z):
    z = np.asarray(z, dtype=float)
    return np.where(z > 0, np.log(np.where(z > 0, z, 1.0)) + 1.0, -np.inf)


# ---------------------------------------------------------------------------
# general models

def _output_integrals_analytic(model, theta, tail_eps):
    """``int phi(m) P`` per representative by composite Gauss-Legendre."""
    an = model.analytic
    floor = model.m_floor
    t_end = -np.log(tail_eps * 1e-4) / floor
    panels = max(200, int(np.ceil(t_end * 4)))
    edges = np.linspace(0.0, t_end, panels + 1)
    x, w = np.polynomial.legendre.leggauss(16)
    h = edges[1] - edges[0]
    t = (0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * h * x).ravel()
    wt = np.tile(0.5 * h * w, panels)
    th = theta[:, :1] if theta.shape[1] else np.zeros((theta.shape[0], 1))
    m = an.m(t[None, :], th)
    P = an.P(t[None, :], th)
    K = th.shape[0]
    P_end = np.broadcast_to(an.P(t_end, th[:, 0]), (K,))
    m_end = np.broadcast_to(an.m(t_end, th[:, 0]), (K,))
    J = np.broadcast_to((phi(m) * P) @ wt, (K,))
    J = J + phi(m_end) * P_end / np.maximum(m_end, 1e-300)
    return J, P_end, np.zeros_like(J)


def _output_integrals_ode(model, theta, opts):
    n0 = model.n0
    J = np.zeros(theta.shape[0])
    P_end = np.zeros_like(J)
    last = np.zeros_like(J)
    for k, th in enumerate(theta):
        x0 = model.extend(th if th.size else None)
        sol = solve_flow(model, x0, None, opts, with_J=True)
        y = sol.y[:, -1]
        lam = float(model.intensity(y[:n0]))
        tail = phi(lam) * y[n0] / lam if lam > 0 else 0.0
        J[k] = y[n0 + 1] + tail
        P_end[k] = y[n0]
        last[k] = abs(sol.y[n0 + 1, -1] - sol.y[n0 + 1, -2]) if sol.y.shape[1] > 1 else 0.0
    return J, P_end, last


def mi_rate(model: BretpModel, p0: BoundaryDensity = None, input_law=None, cells=200, reps=1,
            opts=DEFAULT_OPTIONS, method="auto") -> MiRateResult:
    """Mutual information rate from the boundary density.

    Parameters
    ----------
    model : BretpModel
        Exact filter of a Markov-modulated input.
    p0 : BoundaryDensity, optional
        Computed on ``cells`` cells with ``reps`` points per axis if absent.
    input_law : (values, probs), optional
        Stationary law of the input intensity; defaults to ``model.input_law``.
    """
    law = input_law if input_law is not None else model.input_law
    if law is None:
        raise UnsupportedModel(f"{model.name}: the law of the input intensity is unknown")
    vals, probs = (np.asarray(v, dtype=float) for v in law)
    input_term = float(probs @ phi(vals))
    if p0 is None:
        if model.n == 0:
            p0 = None
        else:
            p0, _ = boundary_density(model, cells, reps, opts=opts)
    if p0 is None:
        theta = np.zeros((1, 0))
        wts = np.array([model.mean_intensity])
    else:
        part = p0.partition
        reps_ = part.representatives()
        R = reps_.shape[1]
        theta = reps_.reshape(reps_.shape[0] * R, part.n)
        wts = np.repeat(p0.values * part.volume / R, R)
    an = model.analytic
    if method == "auto":
        method = "analytic" if (an.m is not None and an.P is not None and model.m_floor) else "ode"
    if method == "analytic":
        J, P_end, last = _output_integrals_analytic(model, theta, opts.tail_eps)
    else:
        J, P_end, last = _output_integrals_ode(model, theta, opts)
    output_term = float(wts @ J)
    lo, hi = model.acid_range
    sup_phi = max(abs(phi(lo)), abs(phi(hi)), np.exp(-1.0) if lo < np.exp(-1.0) < hi else 0.0)
    if model.m_floor:
        bound = float(wts @ (sup_phi * P_end / model.m_floor))
    else:
        warnings.warn(f"{model.name}: no positive lower bound on the intensity; "
                      "the truncation bound is the last-step increment", NoLowerBound)
        bound = float(wts @ last)
    rate = input_term - output_term
    return MiRateResult(rate, input_term, output_term, bound,
                        {"method": method, "fixed_point_residual": None if p0 is None else p0.residual})


# ---------------------------------------------------------------------------
# random telegraph, closed form

def _rt_check(p: RandomTelegraphParams):
    if p.lambda0 != 0:
        raise InvalidParameters("closed forms need lambda0 = 0")


def _rt_scaled(k1, k2):
    s = k1 + k2 + 1.0
    d = np.sqrt(s * s - 4.0 * k1)
    w1, w2 = 0.5 * (s - d), 0.5 * (s + d)
    dw = w2 - w1

    def pi(t):
        return w2 - dw / (1.0 + (1.0 - w1) / (w2 - 1.0) * np.exp(-dw * t))

    def P(t):
        return (np.exp(-w1 * t) * (w2 - 1.0) + np.exp(-w2 * t) * (1.0 - w1)) / dw

    return pi, P, w1


def _rt_unit_rate(k1, k2):
    """Rate at gain one: ``-k1/(k1+k2) int phi(pi) P dtau``."""
    pi, P, w1 = _rt_scaled(k1, k2)
    val, err = integrate.quad(lambda t: phi(pi(t)) * P(t), 0.0, np.inf, limit=500,
                              epsabs=1e-14, epsrel=1e-12)
    return -k1 / (k1 + k2) * val, err


def rt_closed_form_rate(p: RandomTelegraphParams) -> MiRateResult:
    """Telegraph rate by one quadrature of the explicit filter and survival."""
    _rt_check(p)
    c = p.c
    unit, err = _rt_unit_rate(p.k1 / c, p.k2 / c)
    rate = c * unit
    input_term = p.p_on * float(phi(c))
    return MiRateResult(rate, input_term, input_term - rate, c * err, {"method": "closed_form"})


def _horizon(k1, k2, tau_max=500.0):
    _, _, w1 = _rt_scaled(k1, k2)
    return float(min(tau_max, max(50.0, 40.0 / w1)))


def _sens_solve(rhs, y0, T):
    sol = integrate.solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=1e-11, atol=1e-14)
    return sol.y[:, -1]


def _d_unit(k1, k2, which, tau_max=500.0):
    """``d/dk_which`` of the rate at gain one."""
    s = k1 + k2 + 1.0
    rho0 = k1 / (k1 + k2)
    drho0 = k2 / (k1 + k2) ** 2 if which == 1 else -k1 / (k1 + k2) ** 2

    def rhs(t, y):
        rho, pi, rho1, pi1, J1 = y
        dpi1 = (1.0 - pi if which == 1 else -pi) - s * pi1 + 2.0 * pi * pi1
        return [-pi * rho, k1 - s * pi + pi * pi,
                -pi1 * rho - pi * rho1, dpi1,
                -float(dphi(pi)) * pi1 * rho - float(phi(pi)) * rho1]

    return _sens_solve(rhs, [rho0, 1.0, drho0, 0.0, 0.0], _horizon(k1, k2, tau_max))[4]


def rt_partial_derivatives(p: RandomTelegraphParams, tau_max=500.0):
    """``(dI/dk1, dI/dk2)`` at ``(k1, k2, c)``; gain scaling makes them equal to
    the unit-gain derivatives at ``(k1/c, k2/c)``."""
    _rt_check(p)
    a, b = p.k1 / p.c, p.k2 / p.c
    return _d_unit(a, b, 1, tau_max), _d_unit(a, b, 2, tau_max)


def gain_derivative(p: RandomTelegraphParams, tau_max=500.0) -> float:
    """``dI/dc`` at ``(k1, k2, c)``, equal to the value at ``(k1/c, k2/c, 1)``.

    At unit gain ``dI/dc = I - d/dc int phi(pi) rho`` where ``rho`` is the
    density of the time since the last event; the second term comes from the
    ``c``-sensitivity of the filter.
    """
    _rt_check(p)
    k1, k2 = p.k1 / p.c, p.k2 / p.c
    base = k1 / (k1 + k2)

    def rhs(t, y):
        rho, pi, rhoc, pic, Jc, J = y
        s = k1 + k2 + 1.0
        dpic = -pi - s * pic + pi * pi + 2.0 * pi * pic
        drho = -pi * rho
        drhoc = -pi * rho - pic * rho - pi * rhoc
        return [drho, k1 - s * pi + pi * pi, drhoc, dpic,
                float(dphi(pi)) * pic * rho + float(phi(pi)) * rhoc, float(phi(pi)) * rho]

    y = _sens_solve(rhs, [base, 1.0, base, 0.0, 0.0, 0.0], _horizon(k1, k2, tau_max))
    rate = -y[5]
    return rate - y[4]


def gain_limit(k1, k2):
    """Small-gain limit ``E[phi(X)] - phi(E[X])`` of the gain derivative."""
    q = k1 / (k1 + k2)
    return float(q * phi(1.0) + (1 - q) * phi(0.0) - phi(q))


# ---------------------------------------------------------------------------
# nullclines and convexity

def _partial(which, k1, k2, tau_max=500.0):
    return _d_unit(k1, k2, which, tau_max)


def _fd(fun, x, h):
    """Central difference with one Richardson step."""
    d1 = (fun(x + h) - fun(x - h)) / (2 * h)
    d2 = (fun(x + h / 2) - fun(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def _fd2(fun, x, h):
    s1 = (fun(x + h) - 2 * fun(x) + fun(x - h)) / h ** 2
    s2 = (fun(x + h / 2) - 2 * fun(x) + fun(x - h / 2)) / (h / 2) ** 2
    return (4 * s2 - s1) / 3


def second_partials(k1, k2, h=1e-3):
    """``(I_11, I_12)`` from differences of the first sensitivity."""
    d11 = _fd(lambda a: _partial(1, a, k2), k1, h)
    d12 = _fd(lambda b: _partial(1, k1, b), k2, h)
    return d11, d12


def nullcline_slope(k1, k2, h=1e-3):
    """``h'`` of the level curve of ``dI/dk1`` through ``(k1, k2)``."""
    d11, d12 = second_partials(k1, k2, h)
    return -d11 / d12


def convexity(k1, k2, h=1e-3):
    """Second derivative ``h''`` of the level curve of ``dI/dk1`` through ``(k1, k2)``."""
    d1 = lambda a, b: _partial(1, a, b)
    d11 = _fd(lambda a: d1(a, k2), k1, h)
    d12 = _fd(lambda b: d1(k1, b), k2, h)
    d111 = _fd2(lambda a: d1(a, k2), k1, h)
    d122 = _fd2(lambda b: d1(k1, b), k2, h)
    d112 = _fd(lambda b: _fd(lambda a: d1(a, b), k1, h), k2, h)
    return (2 * d11 * d112 / d12 ** 2 - d111 / d12 - d11 ** 2 * d122 / d12 ** 3)


def _bracket_root(fun, x0, lo=1e-4, hi=50.0, grow=1.3):
    """Bracket the sign change of ``fun`` nearest to ``x0`` by geometric expansion."""
    s0 = np.sign(fun(x0))
    a = b = x0
    for _ in range(60):
        a_new, b_new = max(lo, a / grow), min(hi, b * grow)
        if np.sign(fun(a_new)) != s0:
            return a_new, a
        if np.sign(fun(b_new)) != s0:
            return b, b_new
        if a_new == a and b_new == b:
            break
        a, b = a_new, b_new
    return None


def _solve_on(which, k1=None, k2=None, guess=1.0, tol=1e-12):
    """Root of ``dI/dk_which`` in the free coordinate (the one given as ``None``)."""
    if k2 is None:
        fun = lambda b: _partial(which, k1, b)
    else:
        fun = lambda a: _partial(which, a, k2)
    br = _bracket_root(fun, guess)
    if br is None:
        return None
    return brentq(fun, br[0], br[1], xtol=tol)


def diagonal_crossing(which=1, guess=0.3):
    """Point ``k`` where the nullcline of ``dI/dk_which`` meets ``k1 = k2``."""
    fun = lambda k: _partial(which, k, k)
    br = _bracket_root(fun, guess)
    if br is None:
        raise LostNullcline("no sign change along the diagonal")
    return brentq(fun, br[0], br[1], xtol=1e-12)


def trace_nullcline(which, start, span, steps=20, tol=1e-8, with_convexity=False):
    """Follow the nullcline ``dI/dk_which = 0`` at unit gain.

    The curve is parametrised by ``k1`` over ``span = (k1_min, k1_max)``;
    ``start`` is a nearby point whose ``k2`` seeds the first root search.
    Returns an array of ``(k1, k2)`` rows, and per-point ``h''`` values if
    ``with_convexity``.
    """
    k1s = np.linspace(span[0], span[1], steps)
    order = np.argsort(np.abs(k1s - start[0]))
    pts = {}
    guess = start[1]
    prev = None
    for i in order:
        k1 = k1s[i]
        g = pts[k1s[prev]] if prev is not None else guess
        k2 = _solve_on(which, k1=k1, k2=None, guess=g)
        if k2 is None or abs(_partial(which, k1, k2)) > tol:
            raise LostNullcline(f"lost the nullcline near k1 = {k1:.4g}")
        pts[k1] = k2
        prev = i
    line = np.array([[k, pts[k]] for k in k1s])
    if with_convexity:
        conv = np.array([convexity(a, b) for a, b in line])
        return line, conv
    return line


# ---------------------------------------------------------------------------
# phase plane

@dataclass
class PhasePlaneReport:
    k1: np.ndarray
    k2: np.ndarray
    rate: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    region: np.ndarray
    nullclines: dict = field(default_factory=dict)
    convexity: dict = field(default_factory=dict)
    optimum: dict = field(default_factory=dict)

    def rows(self):
        for i in range(self.rate.shape[0]):
            for j in range(self.rate.shape[1]):
                yield (self.k1[i], self.k2[j], self.rate[i, j], self.d1[i, j],
                       self.d2[i, j], self.region[i, j])


def region_label(d1, d2):
    if d1 > 0 and d2 < 0:
        return "A"
    if d1 > 0 and d2 > 0:
        return "B"
    if d1 < 0 and d2 > 0:
        return "C"
    return "-"


def constrained_optimum(r1, r2):
    """Maximiser of the unit-gain rate over ``0 < k1 <= r1, 0 < k2 <= r2``.

    The signs of the gradient at the corner decide whether the optimum is the
    corner itself or lies on one of the two upper edges.
    """
    d1, d2 = _d_unit(r1, r2, 1), _d_unit(r1, r2, 2)
    reg = region_label(d1, d2)
    if reg == "B":
        k1, k2, where = r1, r2, "corner"
    elif reg == "A":
        k2 = _solve_on(2, k1=r1, k2=None, guess=0.5 * r2)
        k1, where = r1, "k1 = r1"
    elif reg == "C":
        k1 = _solve_on(1, k1=None, k2=r2, guess=0.5 * r1)
        k2, where = r2, "k2 = r2"
    else:
        raise LostNullcline(f"unexpected gradient signs at ({r1}, {r2})")
    return {"r1": r1, "r2": r2, "region": reg, "k1": k1, "k2": k2, "boundary": where,
            "rate": _rt_unit_rate(k1, k2)[0]}


def phase_plane(k1_grid, k2_grid, constraint=None, nullcline_span=None) -> PhasePlaneReport:
    """Rate, gradient and region labels on a rectangular grid at unit gain."""
    k1_grid = np.atleast_1d(np.asarray(k1_grid, dtype=float))
    k2_grid = np.atleast_1d(np.asarray(k2_grid, dtype=float))
    shape = (k1_grid.size, k2_grid.size)
    rate, d1, d2 = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    region = np.empty(shape, dtype=object)
    for i, a in enumerate(k1_grid):
        for j, b in enumerate(k2_grid):
            rate[i, j] = _rt_unit_rate(a, b)[0]
            d1[i, j] = _d_unit(a, b, 1)
            d2[i, j] = _d_unit(a, b, 2)
            region[i, j] = region_label(d1[i, j], d2[i, j])
    rep = PhasePlaneReport(k1_grid, k2_grid, rate, d1, d2, region)
    if nullcline_span is not None:
        k = diagonal_crossing(1)
        rep.nullclines[1] = trace_nullcline(1, (k, k), nullcline_span)
    if constraint is not None:
        rep.optimum = constrained_optimum(*constraint)
    return rep
