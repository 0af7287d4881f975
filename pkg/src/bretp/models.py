"""Concrete models: telegraph inputs, cycle inputs, Hawkes, Gamma filter, renewal.

Every constructor returns a :class:`~bretp.core.BretpModel`.  Closed forms
are wired into ``model.analytic`` whenever they exist; the numerical code
paths never require them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, stats
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.sparse.csgraph import connected_components

from .core import Analytic, BretpModel
from .errors import AllStatesZero, BretpError, InvalidParameters, Nonstationary

Z_FLOOR = 1e-8


def _positive(**kw):
    for k, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise InvalidParameters(f"{k} must be positive, got {v}")


# ---------------------------------------------------------------------------
# parameter records

@dataclass(frozen=True)
class RandomTelegraphParams:
    """Two-state input switching Off->On at ``k1`` and On->Off at ``k2``.

    The output intensity is ``lambda0`` in the Off state and
    ``lambda1 = lambda0 + c`` in the On state.
    """

    k1: float
    k2: float
    c: float = 1.0
    lambda0: float = 0.0

    def __post_init__(self):
        _positive(k1=self.k1, k2=self.k2, c=self.c)
        if not (np.isfinite(self.lambda0) and self.lambda0 >= 0):
            raise InvalidParameters(f"lambda0 must be nonnegative, got {self.lambda0}")

    @property
    def lambda1(self):
        return self.lambda0 + self.c

    @property
    def delta_lambda(self):
        return self.c

    @property
    def roots(self):
        """Equilibria ``(w1, w2)`` of the filter flow in intensity units."""
        s = self.k1 + self.k2 + self.c
        d = np.sqrt(s * s - 4.0 * self.k1 * self.c)
        return self.lambda0 + 0.5 * (s - d), self.lambda0 + 0.5 * (s + d)

    @property
    def omega(self):
        """Roots of ``k1/c - (k1/c + k2/c + 1) w + w^2``."""
        w1, w2 = self.roots
        return (w1 - self.lambda0) / self.c, (w2 - self.lambda0) / self.c

    @property
    def p_on(self):
        return self.k1 / (self.k1 + self.k2)

    @property
    def mean_intensity(self):
        return self.lambda0 + self.c * self.p_on

    def jump_map(self, x):
        l0, l1 = self.lambda0, self.lambda1
        return l0 + l1 - l0 * l1 / x

    def jump_map_inv(self, y):
        l0, l1 = self.lambda0, self.lambda1
        y = np.asarray(y, dtype=float)
        den = l0 + l1 - y
        with np.errstate(divide="ignore"):
            return np.where(den > 0, l0 * l1 / np.where(den > 0, den, 1.0), np.inf)

    @property
    def f_inf(self):
        """Lower end of the jump-statistic support, ``f(w1)``."""
        return float(self.jump_map(self.roots[0]))


@dataclass(frozen=True)
class DonsoffParams:
    """Cycle Off -> On1 -> On2 -> Off with rates ``alpha01, alpha11, alpha10``."""

    alpha01: float
    alpha11: float
    alpha10: float
    c: float = 1.0

    def __post_init__(self):
        _positive(alpha01=self.alpha01, alpha11=self.alpha11, alpha10=self.alpha10, c=self.c)

    @property
    def p_on(self):
        t_on = 1.0 / self.alpha11 + 1.0 / self.alpha10
        return t_on / (1.0 / self.alpha01 + t_on)


@dataclass(frozen=True)
class HawkesParams:
    """Exponential-kernel Hawkes process ``d lam = -alpha (lam - mu0) dt + beta dY``."""

    mu0: float
    beta: float
    alpha: float

    def __post_init__(self):
        if not (np.isfinite(self.mu0) and self.mu0 >= 0):
            raise InvalidParameters(f"mu0 must be nonnegative, got {self.mu0}")
        _positive(beta=self.beta, alpha=self.alpha)
        if self.alpha <= self.beta:
            raise Nonstationary(f"alpha={self.alpha} must exceed beta={self.beta}")

    @property
    def mean(self):
        return self.alpha * self.mu0 / (self.alpha - self.beta)

    @property
    def variance(self):
        a, b = self.alpha, self.beta
        return a * self.mu0 * b * b / (2.0 * (a - b) ** 2)

    @classmethod
    def from_moments(cls, alpha, mean, variance):
        """Solve the stationary mean/variance relations for ``(mu0, beta)``."""
        _positive(alpha=alpha, mean=mean, variance=variance)
        v, m = variance, mean
        beta = (-v + np.sqrt(v * v + 2.0 * m * v * alpha)) / m
        return cls(mu0=m * (alpha - beta) / alpha, beta=beta, alpha=alpha)

    @classmethod
    def from_input(cls, mu, sigma2, gamma, c=1.0):
        """Optimal linear filter for an input with mean ``mu``, autocovariance
        ``sigma2 exp(-gamma t)`` and gain ``c``."""
        _positive(mu=mu, sigma2=sigma2, gamma=gamma, c=c)
        beta = np.sqrt(gamma * gamma + 2.0 * c * gamma * sigma2 / mu) - gamma
        alpha = gamma + beta
        return cls(mu0=c * mu * gamma / alpha, beta=beta, alpha=alpha)


@dataclass(frozen=True)
class GammaFilterParams:
    """Assumed-density (Gamma) filter for a CIR or birth-death input."""

    mu: float
    sigma2: float
    gamma: float
    c: float = 1.0
    variant: str = "cir"

    def __post_init__(self):
        _positive(mu=self.mu, sigma2=self.sigma2, gamma=self.gamma, c=self.c)
        if self.variant not in ("cir", "birth-death"):
            raise InvalidParameters(f"unknown Gamma filter variant {self.variant!r}")


@dataclass(frozen=True)
class CtmcInput:
    """Finite continuous-time Markov chain driving a Poisson output."""

    states: tuple
    generator: np.ndarray
    lambda_map: np.ndarray

    def __init__(self, states, generator, lambda_map):
        Q = np.asarray(generator, dtype=float)
        lam = np.asarray(lambda_map, dtype=float)
        k = len(states)
        if Q.shape != (k, k) or lam.shape != (k,):
            raise InvalidParameters("generator and lambda_map must match the state list")
        off = Q - np.diag(np.diag(Q))
        if np.any(off < 0) or np.max(np.abs(Q.sum(1))) > 1e-12:
            raise InvalidParameters("generator needs nonnegative off-diagonals and zero row sums")
        if np.any(lam < 0):
            raise InvalidParameters("lambda_map must be nonnegative")
        if k > 1 and connected_components(off > 0, directed=True, connection="strong")[0] != 1:
            raise InvalidParameters("generator is not irreducible")
        object.__setattr__(self, "states", tuple(states))
        object.__setattr__(self, "generator", Q)
        object.__setattr__(self, "lambda_map", lam)

    def stationary(self):
        k = len(self.states)
        A = np.vstack([self.generator.T, np.ones(k)])
        b = np.zeros(k + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
        return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()

    @classmethod
    def telegraph(cls, p: RandomTelegraphParams):
        Q = [[-p.k1, p.k1], [p.k2, -p.k2]]
        return cls(("off", "on"), Q, [p.lambda0, p.lambda1])

    @classmethod
    def donsoff(cls, p: DonsoffParams):
        Q = [[-p.alpha01, p.alpha01, 0.0],
             [0.0, -p.alpha11, p.alpha11],
             [p.alpha10, 0.0, -p.alpha10]]
        return cls(("off", "on1", "on2"), Q, [0.0, p.c, p.c])


# ---------------------------------------------------------------------------
# random telegraph and dark current

def _logistic_forms(p: RandomTelegraphParams):
    w1, w2 = p.roots
    dw = w2 - w1

    def m(tau, theta):
        tau = np.asarray(tau, dtype=float)
        theta = np.asarray(theta, dtype=float)
        r = (theta - w1) / (w2 - theta)
        return w2 - dw / (1.0 + r * np.exp(-dw * tau))

    def P(tau, theta):
        tau = np.asarray(tau, dtype=float)
        return (np.exp(-w1 * tau) * (w2 - theta) + np.exp(-w2 * tau) * (theta - w1)) / dw

    def tau_m(level, theta):
        level = np.asarray(level, dtype=float)
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (level - w1) * (w2 - theta) / ((w2 - level) * (theta - w1))
            t = -np.log(np.where(ratio > 0, ratio, 1.0)) / dw
        return np.where(level >= theta, 0.0, np.where(level <= w1, np.inf, t))

    def int_P(t0, t1, theta):
        t0 = np.asarray(t0, dtype=float)
        t1 = np.asarray(t1, dtype=float)
        e = lambda w, t: np.where(np.isinf(t), 0.0, np.exp(-w * np.where(np.isinf(t), 0.0, t)))
        return ((w2 - theta) / (dw * w1) * (e(w1, t0) - e(w1, t1))
                + (theta - w1) / (dw * w2) * (e(w2, t0) - e(w2, t1)))

    return m, P, tau_m, int_P


def random_telegraph_model(p: RandomTelegraphParams) -> BretpModel:
    """Exact filter for telegraph input.

    Without dark current the post-jump state is always ``pi = 1`` so the
    statistic is empty (``n = 0``) and the state is the On probability.  With
    ``lambda0 > 0`` the state is the intensity itself and ``theta`` is its
    post-jump value (``n = n0 = 1``).
    """
    if p.lambda0 > 0:
        return dark_current_model(p)
    w1, w2 = p.roots
    c, k1, k2 = p.c, p.k1, p.k2
    m, P, tau_m, int_P = _logistic_forms(p)

    def flow(x):
        return np.array([k1 - (k1 + k2 + c) * x[0] + c * x[0] ** 2])

    def intensity(x):
        return c * x[0]

    def jump(x):
        return np.ones_like(np.asarray(x, dtype=float))

    analytic = Analytic(
        u=lambda tau, x0: (m(tau, c * x0[0]) / c)[None],
        P=lambda tau, theta=None: P(tau, c),
        m=lambda tau, theta=None: m(tau, c),
        tau_m=lambda level, theta=None: tau_m(level, c),
        int_P=lambda t0, t1, theta=None: int_P(t0, t1, c),
        m_inf=lambda theta=None: w1,
    )
    return BretpModel(
        name="random_telegraph", n0=1, n=0, flow=flow, jump_update=jump, intensity=intensity,
        reset=np.array([1.0]), support=np.zeros((0, 2)), mean_intensity=p.mean_intensity,
        acid_range=(w1, c), analytic=analytic,
        input_law=(np.array([0.0, c]), np.array([1 - p.p_on, p.p_on])), m_floor=w1,
        monotone_m=True, admissible=lambda x, s=0.0: (x[0] >= -s) & (x[0] <= 1 + s),
        clamp=lambda x: np.clip(x, 0.0, 1.0), kind="random_telegraph", params=asdict(p))


def dark_current_model(p: RandomTelegraphParams) -> BretpModel:
    """Telegraph input with ``lambda0 > 0``; state and statistic are the intensity."""
    if p.lambda0 <= 0:
        raise InvalidParameters("dark current needs lambda0 > 0")
    w1, w2 = p.roots
    dw = w2 - w1
    l0, l1 = p.lambda0, p.lambda1
    m, P, tau_m, int_P = _logistic_forms(p)
    f, finv = p.jump_map, p.jump_map_inv

    def flow(x):
        return np.array([(x[0] - w1) * (x[0] - w2)])

    def intensity(x):
        return x[0]

    def jump(x):
        return np.array([f(x[0])])

    def tau_g(level, theta):
        return tau_m(finv(level), theta)

    analytic = Analytic(
        u=lambda tau, x0: m(tau, x0[0])[None],
        P=P, m=m, g=lambda tau, theta: f(m(tau, theta)), tau_g=tau_g, tau_m=tau_m,
        int_P=int_P, m_inf=lambda theta=None: w1)
    direct = dict(zeq=w1, exponent=w1 / dw,
                  lnG_reg=lambda z: -(w2 / dw) * np.log(w2 - z),
                  negA_reg=lambda z: w2 - z, lam=lambda z: z, f=f, finv=finv,
                  lower=w1, upper=l1)
    return BretpModel(
        name="dark_current", n0=1, n=1, flow=flow, jump_update=jump, intensity=intensity,
        reset=np.zeros(0), support=np.array([[p.f_inf, l1]]), mean_intensity=p.mean_intensity,
        acid_range=(w1, l1), analytic=analytic,
        input_law=(np.array([l0, l1]), np.array([1 - p.p_on, p.p_on])), m_floor=w1,
        monotone_m=True, monotone_g=True,
        admissible=lambda x, s=0.0: (x[0] >= l0 - s) & (x[0] <= l1 + s),
        clamp=lambda x: np.clip(x, l0, l1), direct=direct, kind="dark_current",
        params=asdict(p))


# ---------------------------------------------------------------------------
# Double On Single Off

def donsoff_model(p: DonsoffParams, z_floor=Z_FLOOR) -> BretpModel:
    """Exact filter for the three-state cycle in coordinates ``(U, Z)``.

    ``Z`` is the posterior On probability and ``U`` the share of the first On
    state within it.  Jumps reset ``Z`` to 1 and keep ``U``.
    """
    a01, a11, a10, c = p.alpha01, p.alpha11, p.alpha10, p.c

    def flow(x):
        u, z = x[0], x[1]
        du = -a11 * u + a01 * (1 - z) * (1 - u) / z + a10 * u * (1 - u)
        dz = -c * (1 - z) * z + a01 * (1 - z) - a10 * (1 - u) * z
        return np.array([du, dz])

    def intensity(x):
        return c * x[1]

    def jump(x):
        x = np.asarray(x, dtype=float)
        return np.array([x[0], np.ones_like(x[1])])

    def admissible(x, s=0.0):
        return (x[0] >= -s) & (x[0] <= 1 + s) & (x[1] >= z_floor - s) & (x[1] <= 1 + s)

    def clamp(x):
        return np.array([np.clip(x[0], 0.0, 1.0), np.clip(x[1], z_floor, 1.0)])

    return BretpModel(
        name="donsoff", n0=2, n=1, flow=flow, jump_update=jump, intensity=intensity,
        reset=np.array([1.0]), support=np.array([[0.0, 1.0]]), mean_intensity=c * p.p_on,
        acid_range=(0.0, c), input_law=(np.array([0.0, c]), np.array([1 - p.p_on, p.p_on])),
        admissible=admissible, clamp=clamp, kind="donsoff", params=asdict(p))


def donsoff_equilibrium(p: DonsoffParams):
    """Fixed point ``(u*, z*)`` of the between-jump flow."""
    from scipy.optimize import fsolve
    model = donsoff_model(p)
    sol, info, ier, msg = fsolve(lambda y: model.flow(y), [0.5, 0.5], full_output=True,
                                 xtol=1e-13)
    if ier != 1:
        raise BretpError(f"equilibrium search failed: {msg}")
    return sol


# ---------------------------------------------------------------------------
# Hawkes

def gamma_quantile_width(mean, variance, q=0.999):
    """Quantile of the Gamma law with the given mean and variance."""
    return float(stats.gamma(a=mean * mean / variance, scale=variance / mean).ppf(q))


def hawkes_model(p: HawkesParams, width=None) -> BretpModel:
    """Hawkes process; the support ``(mu0 + beta, inf)`` is cut at
    ``mu0 + beta + width`` (default: 0.999 quantile of the Gamma law sharing
    the stationary mean and variance)."""
    mu0, beta, alpha = p.mu0, p.beta, p.alpha
    if width is None:
        width = gamma_quantile_width(p.mean, p.variance)
    lo = mu0 + beta
    hi = lo + width

    def m(tau, theta):
        return mu0 + np.exp(-alpha * np.asarray(tau, dtype=float)) * (np.asarray(theta) - mu0)

    def P(tau, theta):
        tau = np.asarray(tau, dtype=float)
        return np.exp(-mu0 * tau - (np.asarray(theta) - mu0) * (-np.expm1(-alpha * tau)) / alpha)

    def tau_m(level, theta):
        level = np.asarray(level, dtype=float)
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.log((theta - mu0) / np.where(level > mu0, level - mu0, 1.0)) / alpha
        return np.where(level >= theta, 0.0, np.where(level <= mu0, np.inf, t))

    analytic = Analytic(
        u=lambda tau, x0: m(tau, x0[0])[None],
        P=P, m=m, g=lambda tau, theta: m(tau, theta) + beta,
        tau_g=lambda level, theta: tau_m(np.asarray(level, dtype=float) - beta, theta),
        tau_m=tau_m, m_inf=lambda theta=None: mu0)
    direct = None
    if mu0 > 0:
        direct = dict(zeq=mu0, exponent=mu0 / alpha, lnG_reg=lambda z: z / alpha,
                      negA_reg=lambda z: alpha + 0.0 * z, lam=lambda z: z,
                      f=lambda z: z + beta, finv=lambda z: z - beta, lower=mu0, upper=hi + beta)
    return BretpModel(
        name="hawkes", n0=1, n=1,
        flow=lambda x: np.array([-alpha * (x[0] - mu0)]),
        jump_update=lambda x: np.array([x[0] + beta]),
        intensity=lambda x: x[0], reset=np.zeros(0), support=np.array([[lo, hi]]),
        mean_intensity=p.mean, acid_range=(mu0, hi + beta), analytic=analytic,
        m_floor=mu0 if mu0 > 0 else None, truncated=True, monotone_m=True, monotone_g=True,
        admissible=lambda x, s=0.0: x[0] >= mu0 - s, direct=direct, kind="hawkes",
        params=asdict(p))


# ---------------------------------------------------------------------------
# Gamma filter

def _gamma_drift(p: GammaFilterParams):
    mu, s2, g, c = p.mu, p.sigma2, p.gamma, p.c
    if p.variant == "cir":
        def ds(M, S):
            return -2.0 * g * (S - s2 / mu * M) - 2.0 * c * S * S / M
    else:
        def ds(M, S):
            return -g * (2.0 * S - M - mu) - 2.0 * c * S * S / M

    def flow(x):
        M, S = x[0], x[1]
        return np.array([-g * (M - mu) - c * S, ds(M, S)])
    return flow


def gamma_filter_equilibrium(p: GammaFilterParams):
    """Rest point of the between-jump flow of ``(M, S)``."""
    flow = _gamma_drift(p)
    smax = p.gamma * p.mu / p.c

    def h(S):
        M = p.mu - p.c * S / p.gamma
        return flow(np.array([M, S]))[1]

    S = brentq(h, smax * 1e-12, smax * (1 - 1e-12), xtol=1e-15)
    return np.array([p.mu - p.c * S / p.gamma, S])


def gamma_filter_jump(x):
    M, S = x[0], x[1]
    return np.array([M + S / M, S + S * S / (M * M)])


def _gamma_pilot(p: GammaFilterParams, chains=2000, horizon=60.0, dt=0.01, seed=20240611):
    """Post-jump (M, S) samples from a short fixed-step marginal simulation."""
    rng = np.random.default_rng(seed)
    flow = _gamma_drift(p)
    x = np.array([np.full(chains, p.mu), np.full(chains, p.sigma2)], dtype=float)
    ms, ss = [], []
    budget = rng.exponential(size=chains)
    acc = np.zeros(chains)
    for step in range(int(horizon / dt)):
        k1 = flow(x)
        k2 = flow(x + 0.5 * dt * k1)
        k3 = flow(x + 0.5 * dt * k2)
        k4 = flow(x + dt * k3)
        xn = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        acc += 0.5 * dt * p.c * (x[0] + xn[0])
        x = np.maximum(xn, 1e-12)
        hit = acc >= budget
        if hit.any():
            x[:, hit] = gamma_filter_jump(x[:, hit])
            acc[hit] = 0.0
            budget[hit] = rng.exponential(size=hit.sum())
            if step * dt > 10.0:
                ms.append(x[0, hit].copy())
                ss.append(x[1, hit].copy())
    return np.concatenate(ms), np.concatenate(ss)


def gamma_filter_model(p: GammaFilterParams, support=None, mass=0.995) -> BretpModel:
    """Gamma filter with ``theta = (M, S)`` at jumps and intensity ``c M``.

    The default box for ``theta`` starts at the flow rest point in ``M`` and
    ends at the ``mass`` quantile of the Gamma law with mean ``mu`` and
    variance ``sigma2``.  The ``S`` range comes from a seeded pilot
    simulation of post-jump states.
    """
    flow = _gamma_drift(p)
    eq = gamma_filter_equilibrium(p)
    if support is None:
        m_hi = gamma_quantile_width(p.mu, p.sigma2, mass)
        pm, ps = _gamma_pilot(p)
        keep = pm <= m_hi
        s_lo = 0.9 * float(ps[keep].min())
        s_hi = 1.1 * float(np.quantile(ps[keep], 0.999))
        support = np.array([[eq[0], m_hi], [s_lo, s_hi]])
    support = np.asarray(support, dtype=float)

    def admissible(x, s=0.0):
        return (x[0] > 0) & (x[1] > -s)

    def clamp(x):
        return np.array([np.maximum(x[0], 1e-12), np.maximum(x[1], 1e-12)])

    hi = p.c * max(support[0, 1] + support[1, 1] / support[0, 0], p.mu)
    return BretpModel(
        name="gamma_filter", n0=2, n=2, flow=flow, jump_update=gamma_filter_jump,
        intensity=lambda x: p.c * x[0], reset=np.zeros(0), support=support,
        mean_intensity=p.c * p.mu, acid_range=(p.c * eq[0], hi), truncated=True,
        admissible=admissible, clamp=clamp, kind="gamma_filter", params=asdict(p))


# ---------------------------------------------------------------------------
# generic finite-state input

def snyder_model(inp: CtmcInput) -> BretpModel:
    """Exact (Snyder) filter for a finite Markov-modulated Poisson process.

    States with positive intensity are listed first.  The coordinates are the
    conditional distribution ``u`` over those states (the last one eliminated),
    then, if zero-intensity states exist, the total probability ``Z`` of the
    positive states and the probabilities of all zero states but the last.
    Jumps keep ``u`` (reweighted by the intensities), set ``Z = 1`` and zero
    the rest, so ``theta = u``.
    """
    lam_all = inp.lambda_map
    nz = [i for i in range(len(lam_all)) if lam_all[i] > 0]
    zs = [i for i in range(len(lam_all)) if lam_all[i] == 0]
    if not nz:
        raise AllStatesZero("every state has zero intensity")
    order = nz + zs
    Q = inp.generator[np.ix_(order, order)]
    lam = lam_all[order]
    k_nz, k_z = len(nz), len(zs)
    n = k_nz - 1
    n0 = len(order) - 1

    def to_pi(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[1:]
        u = x[:n]
        u_full = np.concatenate([u, (1.0 - u.sum(0))[None]]) if n else np.ones((1,) + shape)
        if k_z:
            Z = x[n]
            pz = x[n + 1:]
            last = 1.0 - Z - pz.sum(0)
            return np.concatenate([Z * u_full, pz, last[None]]), u_full, Z
        return u_full, u_full, np.ones(shape)

    def intensity(x):
        pi, _, _ = to_pi(x)
        return np.tensordot(lam, pi, axes=1)

    def flow(x):
        pi, u_full, Z = to_pi(x)
        lh = np.tensordot(lam, pi, axes=1)
        dpi = np.tensordot(Q.T, pi, axes=1) - pi * (lam.reshape(-1, *([1] * (pi.ndim - 1))) - lh)
        out = []
        if k_z:
            dZ = dpi[:k_nz].sum(0)
            for i in range(n):
                out.append((dpi[i] - u_full[i] * dZ) / Z)
            out.append(dZ)
            for j in range(k_z - 1):
                out.append(dpi[k_nz + j])
        else:
            for i in range(n):
                out.append(dpi[i])
        return np.array(out).reshape(np.asarray(x).shape)

    def jump(x):
        x = np.asarray(x, dtype=float)
        _, u_full, _ = to_pi(x)
        w = lam[:k_nz].reshape(-1, *([1] * (u_full.ndim - 1))) * u_full
        w = w / w.sum(0)
        out = [w[i] for i in range(n)]
        if k_z:
            out.append(np.ones_like(w[0]))
            out.extend(np.zeros_like(w[0]) for _ in range(k_z - 1))
        return np.array(out).reshape(x.shape)

    def admissible(x, s=0.0):
        pi, _, _ = to_pi(x)
        return np.all(pi >= -s, axis=0) & np.all(pi <= 1 + s, axis=0)

    pi_stat = inp.stationary()
    mean = float(lam_all @ pi_stat)
    reset = np.array([1.0] + [0.0] * (k_z - 1)) if k_z else np.zeros(0)
    lo = float(lam_all.min()) if not k_z else 0.0
    distinct = np.unique(lam_all)
    return BretpModel(
        name="snyder", n0=n0, n=n, flow=flow, jump_update=jump, intensity=intensity,
        reset=reset, support=np.array([[0.0, 1.0]] * n).reshape(n, 2), mean_intensity=mean,
        acid_range=(lo, float(lam_all.max())), input_law=(lam_all.copy(), pi_stat),
        m_floor=float(lam_all.min()) if not k_z else None, point_mass=len(distinct) == 1,
        admissible=admissible, kind="ctmc",
        params=dict(states=list(inp.states), generator=inp.generator.tolist(),
                    lambda_map=lam_all.tolist()))


# ---------------------------------------------------------------------------
# renewal processes

def _check_differentiable(P, tau_max, n=4001):
    t = np.linspace(0.0, tau_max, n)
    v = np.array([P(x) for x in t], dtype=float)
    d = np.abs(np.diff(v))
    k = int(np.argmax(d))
    if d[k] < 1e-9:
        return
    # halve the bracket with the larger increment; a jump keeps its size
    a, b = t[k], t[k + 1]
    for _ in range(40):
        mid = 0.5 * (a + b)
        if abs(P(mid) - P(a)) >= abs(P(b) - P(mid)):
            b = mid
        else:
            a = mid
    if abs(P(b) - P(a)) > 0.25 * d[k]:
        raise InvalidParameters("survival function is not differentiable")


def renewal_model(survival: Callable, hazard: Optional[Callable] = None,
                  tau_max: float = 200.0, name="renewal", params=None,
                  mean_gap=None) -> BretpModel:
    """Renewal process with survival ``P``; the state is the age since the last event.

    ``P`` must have decayed below 1e-8 by ``tau_max``, which bounds the
    mean inter-event time integral; pass ``mean_gap`` when it is known.

    ``hazard`` defaults to ``-P'/P`` by central differences.
    """
    if abs(survival(0.0) - 1.0) > 1e-12:
        raise InvalidParameters("survival must equal 1 at tau = 0")
    grid = np.linspace(0.0, tau_max, 2001)
    vals = np.array([survival(t) for t in grid])
    if np.any(np.diff(vals) > 1e-12) or np.any(vals < -1e-12):
        raise InvalidParameters("survival must be nonincreasing and nonnegative")
    _check_differentiable(survival, tau_max)
    if hazard is None:
        def hazard(t, h=1e-6):
            t = np.asarray(t, dtype=float)
            lo = np.maximum(t - h, 0.0)
            dP = (np.vectorize(survival)(t + h) - np.vectorize(survival)(lo)) / (t + h - lo)
            return -dP / np.maximum(np.vectorize(survival)(t), 1e-300)
    hz = np.asarray(hazard(grid[vals > 1e-12]), dtype=float)
    if survival(tau_max) > 1e-8:
        raise InvalidParameters("survival must be negligible at tau_max")
    if mean_gap is None:
        mean_gap = integrate.quad(survival, 0.0, tau_max, limit=500)[0]
    const = np.ptp(hz) < 1e-9 * max(1.0, hz.max())
    lo, hi = float(hz.min()), float(hz.max())
    if const:
        lo, hi = lo * (1 - 1e-6) - 1e-12, hi * (1 + 1e-6) + 1e-12
    return BretpModel(
        name=name, n0=1, n=0,
        flow=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        jump_update=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        intensity=lambda x: np.asarray(hazard(np.asarray(x)[0]), dtype=float),
        reset=np.array([0.0]), support=np.zeros((0, 2)), mean_intensity=1.0 / mean_gap,
        acid_range=(lo, hi),
        analytic=Analytic(u=lambda tau, x0: (x0[0] + np.asarray(tau, dtype=float))[None],
                          P=lambda tau, theta=None: np.vectorize(survival)(tau),
                          m=lambda tau, theta=None: hazard(tau)),
        m_floor=lo if lo > 0 else None, point_mass=bool(const),
        admissible=lambda x, s=0.0: x[0] >= -s, kind="renewal", params=params or {})


def exponential_renewal(rate: float) -> BretpModel:
    _positive(rate=rate)
    return renewal_model(lambda t: float(np.exp(-rate * t)),
                         hazard=lambda t: np.full(np.shape(t), float(rate)),
                         tau_max=min(200.0, 50.0 / rate), params={"rate": rate})


def tabulated_renewal(tau: Sequence[float], surv: Sequence[float]) -> BretpModel:
    """Renewal model from a survival table with monotone cubic interpolation."""
    tau = np.asarray(tau, dtype=float)
    surv = np.asarray(surv, dtype=float)
    spline = PchipInterpolator(tau, surv, extrapolate=False)
    dspline = spline.derivative()
    tmax = tau[-1]

    def P(t):
        return float(np.nan_to_num(spline(min(t, tmax)), nan=0.0)) if t <= tmax else float(surv[-1])

    def hz(t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, tmax)
        return -dspline(t) / np.maximum(spline(t), 1e-300)

    return renewal_model(P, hazard=hz, tau_max=tmax,
                         params={"tau": tau.tolist(), "survival": surv.tolist()},
                         mean_gap=float(spline.integrate(0.0, tmax)))


# ---------------------------------------------------------------------------
# model files

def build_model(spec) -> BretpModel:
    """Build a model from ``{"type": ..., "params": {...}}``."""
    kind = spec.get("type")
    prm = dict(spec.get("params", {}))
    try:
        if kind == "random_telegraph":
            return random_telegraph_model(RandomTelegraphParams(**prm))
        if kind == "dark_current":
            return dark_current_model(RandomTelegraphParams(**prm))
        if kind == "donsoff":
            return donsoff_model(DonsoffParams(**prm))
        if kind == "hawkes":
            width = prm.pop("width", None)
            if {"mu", "sigma2", "gamma"} <= prm.keys():
                hp = HawkesParams.from_input(prm["mu"], prm["sigma2"], prm["gamma"], prm.get("c", 1.0))
            elif {"mean", "variance", "alpha"} <= prm.keys() and "beta" not in prm:
                hp = HawkesParams.from_moments(prm["alpha"], prm["mean"], prm["variance"])
            else:
                hp = HawkesParams(**prm)
            return hawkes_model(hp, width=width)
        if kind == "gamma_filter":
            support = prm.pop("support", None)
            return gamma_filter_model(GammaFilterParams(**prm), support=support)
        if kind == "ctmc":
            return snyder_model(CtmcInput(prm["states"], prm["generator"], prm["lambda_map"]))
        if kind == "renewal":
            if "rate" in prm:
                return exponential_renewal(prm["rate"])
            return tabulated_renewal(prm["tau"], prm["survival"])
    except TypeError as exc:
        raise InvalidParameters(str(exc)) from exc
    raise InvalidParameters(f"unknown model type {kind!r}")


def load_model(path) -> BretpModel:
    with open(Path(path)) as fh:
        return build_model(json.load(fh))
