"""Independent reference computations.

Nothing here imports the package's numerics: each oracle is written from
the defining equations with scipy primitives only.
"""

import math

import numpy as np
from scipy import integrate


def xlogx(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)


def telegraph_roots(k1, k2, c, lambda0=0.0):
    """Rest points of the filtered intensity from the quadratic's coefficients."""
    # On probability between events: pi' = k1 - (k1 + k2 + c) pi + c pi^2
    r = np.sort(np.roots([c, -(k1 + k2 + c), k1]).real)
    return lambda0 + c * r[0], lambda0 + c * r[1]


def telegraph_rate(k1, k2, c):
    """Information rate of a telegraph input without dark current.

    The On probability ``pi`` restarts at 1 after every event and follows the
    Snyder equation; the time since the last event has density
    ``c p_on P(tau)`` with ``P' = -c pi P``.
    """
    p_on = k1 / (k1 + k2)

    def rhs(t, y):
        pi, P, J = y
        return [k1 - (k1 + k2) * pi - c * pi * (1 - pi), -c * pi * P, float(xlogx(c * pi)) * P]

    w1 = telegraph_roots(k1, k2, c)[0]
    T = 60.0 / w1
    sol = integrate.solve_ivp(rhs, (0, T), [1.0, 1.0, 0.0], method="LSODA",
                              rtol=1e-12, atol=1e-14)
    J = sol.y[2, -1]
    # remaining tail: pi has settled at its rest point
    P_T = sol.y[1, -1]
    J += float(xlogx(w1)) * P_T / w1
    return p_on * float(xlogx(c)) - c * p_on * J


def poisson_anchor(mu, c=1.0):
    """``E[phi(c X)] - phi(c mu)`` for ``X ~ Poisson(mu)`` by direct summation."""
    total = 0.0
    k = 0
    while True:
        lp = -mu + k * math.log(mu) - math.lgamma(k + 1)
        term = math.exp(lp) * float(xlogx(c * k))
        total += term
        if k > mu and term < 1e-18:
            break
        k += 1
    return total - float(xlogx(c * mu))


def hawkes_moments(mu0, beta, alpha):
    """Stationary mean and variance from the generator
    ``L f = -alpha (l - mu0) f' + l (f(l + beta) - f(l))`` applied to ``l`` and ``l^2``."""
    m = alpha * mu0 / (alpha - beta)
    e2 = (2 * alpha * mu0 * m + beta * beta * m) / (2 * (alpha - beta))
    return m, e2 - m * m


def w1_histograms(edges_a, wa, edges_b, wb, n=200001):
    """Wasserstein-1 distance of two piecewise-uniform densities by quadrature of |F_a - F_b|."""
    lo = min(edges_a[0], edges_b[0])
    hi = max(edges_a[-1], edges_b[-1])
    x = np.linspace(lo, hi, n)
    Fa = np.interp(x, edges_a, np.concatenate([[0.0], np.cumsum(wa)]) / np.sum(wa))
    Fb = np.interp(x, edges_b, np.concatenate([[0.0], np.cumsum(wb)]) / np.sum(wb))
    return float(integrate.trapezoid(np.abs(Fa - Fb), x))


def central_difference(fun, x, h):
    return (fun(x + h) - fun(x - h)) / (2 * h)
