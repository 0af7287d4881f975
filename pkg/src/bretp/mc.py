"""Monte Carlo reference: co-simulation, filter replay and marginal simulation.

Co-simulation draws the hidden input together with the events; marginal
simulation draws events from the conditional intensity alone.  Both are
seeded through ``numpy.random.SeedSequence`` and every replicate reseeds its
own stream, so results do not depend on thread scheduling.

Sojourns of models whose intensity decays between events (telegraph, dark
current, Hawkes) are drawn by thinning with the post-jump value as bound.
The Gamma filter intensity is not monotone, so its sojourns use the
inverse-transform method on the cumulative hazard.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, log, sqrt
from typing import Optional

import numba
import numpy as np
from scipy import integrate, linalg, stats
from scipy.optimize import brentq

from .core import DEFAULT_OPTIONS, BretpModel, phi
from .errors import FilterBlowup, InvalidParameters, SojournNotFound, UnsupportedModel
from .models import CtmcInput, HawkesParams
from .solver import AcidDistribution, _acid_edges


# ---------------------------------------------------------------------------
# records

@dataclass
class EventPath:
    jump_times: np.ndarray
    horizon: float
    seed: Optional[int] = None
    input_states: Optional[np.ndarray] = None
    input_switch_times: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None  # (K, n0) states at sample_times
    sample_times: Optional[np.ndarray] = None

    def __post_init__(self):
        self.jump_times = np.asarray(self.jump_times, dtype=float)
        if self.jump_times.size and (np.any(np.diff(self.jump_times) <= 0)
                                     or self.jump_times[0] < 0
                                     or self.jump_times[-1] > self.horizon):
            raise InvalidParameters("jump times must be strictly increasing within [0, T]")

    def counts(self, window, gap=0.0, start=0.0):
        """Event counts in consecutive windows of length ``window`` separated by ``gap``."""
        lefts = np.arange(start, self.horizon - window + 1e-12, window + gap)
        lo = np.searchsorted(self.jump_times, lefts, side="left")
        hi = np.searchsorted(self.jump_times, lefts + window, side="left")
        return hi - lo


@dataclass
class McSummary:
    sample_count: int
    burn_in: float
    estimates: dict = field(default_factory=dict)  # name -> (value, standard error)
    histogram: Optional[AcidDistribution] = None
    seed: Optional[int] = None

    def value(self, name):
        return self.estimates[name][0]

    def se(self, name):
        return self.estimates[name][1]

    def brackets(self, name, target, k=3.0):
        v, s = self.estimates[name]
        return abs(v - target) <= k * s

    def as_dict(self):
        return {"sample_count": self.sample_count, "burn_in": self.burn_in, "seed": self.seed,
                "estimates": {k: {"value": v, "se": s} for k, (v, s) in self.estimates.items()}}


@dataclass(frozen=True)
class BirthDeathInput:
    """Immigration-death input ``X`` with birth rate ``gamma mu``, death rate
    ``gamma X`` and output intensity ``c X``; stationary law Poisson(``mu``)."""

    mu: float
    gamma: float
    c: float = 1.0

    def anchor(self, kmax=None):
        """``E[phi(c X)] - phi(c mu)``, the rate of a perfect observer."""
        kmax = kmax or int(self.mu + 40 * sqrt(self.mu) + 50)
        k = np.arange(kmax + 1)
        pk = stats.poisson(self.mu).pmf(k)
        return float(pk @ phi(self.c * k) - phi(self.c * self.mu))


def _seeds(seed, count):
    return np.random.SeedSequence(seed).generate_state(count, dtype=np.uint32).astype(np.int64)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


# ---------------------------------------------------------------------------
# numba kernels: marginal simulation

@numba.njit(cache=True)
def _grow(a, n):
    if n < a.shape[0]:
        return a
    b = np.empty(2 * a.shape[0] + 16, dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@numba.njit(cache=True)
def _decay_m(kind, p, tau, theta):
    if kind == 0:  # logistic: p = (w1, w2, l0, l1)
        w1, w2 = p[0], p[1]
        dw = w2 - w1
        if theta <= w1:
            return theta
        r = (theta - w1) / (w2 - theta)
        return w2 - dw / (1.0 + r * exp(-dw * tau))
    # hawkes: p = (mu0, beta, alpha)
    return p[0] + (theta - p[0]) * exp(-p[2] * tau)


@numba.njit(cache=True)
def _decay_jump(kind, p, x):
    if kind == 0:
        l0, l1 = p[2], p[3]
        if l0 == 0.0:
            return l1
        return l0 + l1 - l0 * l1 / x
    return x + p[1]


@numba.njit(cache=True)
def _decay_path(kind, p, x0, T, seed, t0, dts):
    """Thinning for intensities that decay between events; ``x0`` is the
    intensity at time 0, samples are taken at ``t0 + k dts``."""
    np.random.seed(seed)
    ev = np.empty(1024)
    ne = 0
    ns_max = 0
    if dts > 0 and T > t0:
        ns_max = int((T - t0) / dts) + 1
    smp = np.empty(ns_max)
    ks = 0
    t = 0.0
    last = 0.0  # time of the last jump
    theta = x0
    while True:
        bound = _decay_m(kind, p, t - last, theta)
        if bound <= 0.0:
            t_new = T + 1.0
        else:
            t_new = t + np.random.exponential(1.0 / bound)
        stop = min(t_new, T)
        while ks < ns_max and t0 + ks * dts <= stop:
            smp[ks] = _decay_m(kind, p, t0 + ks * dts - last, theta)
            ks += 1
        if t_new > T:
            break
        t = t_new
        lam = _decay_m(kind, p, t - last, theta)
        if np.random.random() * bound <= lam:
            ev = _grow(ev, ne)
            ev[ne] = t
            ne += 1
            theta = _decay_jump(kind, p, lam)
            last = t
    return ev[:ne], smp[:ks]


@numba.njit(cache=True)
def _gamma_drift_nb(M, S, mu, s2, g, c, cir):
    dM = -g * (M - mu) - c * S
    if cir:
        dS = -2.0 * g * (S - s2 / mu * M) - 2.0 * c * S * S / M
    else:
        dS = -g * (2.0 * S - M - mu) - 2.0 * c * S * S / M
    return dM, dS


@numba.njit(cache=True)
def _gamma_step(M, S, h, mu, s2, g, c, cir):
    """RK4 step of ``(M, S)`` with the hazard increment ``int c M``."""
    m1, s1 = _gamma_drift_nb(M, S, mu, s2, g, c, cir)
    m2, s2_ = _gamma_drift_nb(M + 0.5 * h * m1, S + 0.5 * h * s1, mu, s2, g, c, cir)
    m3, s3 = _gamma_drift_nb(M + 0.5 * h * m2, S + 0.5 * h * s2_, mu, s2, g, c, cir)
    m4, s4 = _gamma_drift_nb(M + h * m3, S + h * s3, mu, s2, g, c, cir)
    Mn = M + h / 6.0 * (m1 + 2 * m2 + 2 * m3 + m4)
    Sn = S + h / 6.0 * (s1 + 2 * s2_ + 2 * s3 + s4)
    # cubic Hermite midpoint for the Simpson rule on the hazard
    me, _ = _gamma_drift_nb(Mn, Sn, mu, s2, g, c, cir)
    Mh = 0.5 * (M + Mn) + h / 8.0 * (m1 - me)
    dL = c * h / 6.0 * (M + 4.0 * Mh + Mn)
    return Mn, Sn, dL, Mh


@numba.njit(cache=True)
def _gamma_path(mu, s2, g, c, cir, M0, S0, T, seed, t0, dts, h):
    """Inverse-transform simulation of the Gamma filter; samples ``(M, S)``."""
    np.random.seed(seed)
    ev = np.empty(1024)
    ne = 0
    ns_max = 0
    if dts > 0 and T > t0:
        ns_max = int((T - t0) / dts) + 1
    smp = np.empty((ns_max, 2))
    ks = 0
    t = 0.0
    M, S = M0, S0
    E = np.random.exponential(1.0)
    L = 0.0
    while t < T:
        step = min(h, T - t)
        nxt = t0 + ks * dts
        if ks < ns_max and nxt - t < step:
            step = max(nxt - t, 0.0)
        if ks < ns_max and step == 0.0:
            smp[ks, 0] = M
            smp[ks, 1] = S
            ks += 1
            continue
        Mn, Sn, dL, _ = _gamma_step(M, S, step, mu, s2, g, c, cir)
        if L + dL >= E:
            frac = (E - L) / dL
            hs = frac * step
            Mn, Sn, dL, _ = _gamma_step(M, S, hs, mu, s2, g, c, cir)
            t += hs
            ev = _grow(ev, ne)
            ev[ne] = t
            ne += 1
            M = Mn + Sn / Mn
            S = Sn + Sn * Sn / (Mn * Mn)
            L = 0.0
            E = np.random.exponential(1.0)
        else:
            M, S = Mn, Sn
            L += dL
            t += step
    while ks < ns_max and t0 + ks * dts <= T:
        smp[ks, 0] = M
        smp[ks, 1] = S
        ks += 1
    return ev[:ne], smp[:ks]


# ---------------------------------------------------------------------------
# numba kernels: co-simulation

@numba.njit(cache=True)
def _pick(cum, u):
    k = 0
    while k < cum.shape[0] - 1 and u > cum[k]:
        k += 1
    return k


@numba.njit(cache=True)
def _ctmc_path(Q, lam, x0, T, seed):
    """Gillespie co-simulation of a finite input and its output events."""
    np.random.seed(seed)
    k = Q.shape[0]
    ev = np.empty(1024)
    ne = 0
    sw = np.empty(64)
    st = np.empty(64, dtype=np.int64)
    sw[0] = 0.0
    st[0] = x0
    nsw = 1
    x = x0
    t = 0.0
    while True:
        out = -Q[x, x]
        tot = out + lam[x]
        if tot <= 0:
            break
        t += np.random.exponential(1.0 / tot)
        if t > T:
            break
        u = np.random.random() * tot
        if u < lam[x]:
            ev = _grow(ev, ne)
            ev[ne] = t
            ne += 1
        else:
            u -= lam[x]
            acc = 0.0
            nx = x
            for j in range(k):
                if j == x:
                    continue
                acc += Q[x, j]
                if u <= acc:
                    nx = j
                    break
            x = nx
            if nsw >= sw.shape[0]:
                sw = _grow(sw, nsw)
                st2 = np.empty(sw.shape[0], dtype=np.int64)
                st2[:nsw] = st[:nsw]
                st = st2
            sw[nsw] = t
            st[nsw] = x
            nsw += 1
    return ev[:ne], sw[:nsw], st[:nsw]


@numba.njit(cache=True)
def _phi(z):
    return z * log(z) if z > 0 else 0.0


@numba.njit(cache=True)
def _snyder_rhs(pi, Q, lam, out):
    """Snyder drift ``Q^T pi - pi (lam - lam.pi)`` written into ``out``."""
    k = pi.shape[0]
    lh = 0.0
    for i in range(k):
        lh += lam[i] * pi[i]
    for i in range(k):
        s = 0.0
        for j in range(k):
            s += Q[j, i] * pi[j]
        out[i] = s - pi[i] * (lam[i] - lh)


@numba.njit(cache=True)
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@numba.njit(cache=True)
def _ctmc_mi(Q, lam, pi0, T, seed, hmax):
    """One replicate of the rate estimators for a finite input with the exact filter.

    Returns ``(liptser, llr)`` time averages over ``[0, T]``.
    """
    np.random.seed(seed)
    k = Q.shape[0]
    # stationary start of the input
    u = np.random.random()
    acc = 0.0
    x = k - 1
    for j in range(k):
        acc += pi0[j]
        if u <= acc:
            x = j
            break
    pi = pi0.copy()
    k1 = np.empty(k)
    k2 = np.empty(k)
    k3 = np.empty(k)
    k4 = np.empty(k)
    ke = np.empty(k)
    tmp = np.empty(k)
    pn = np.empty(k)
    t = 0.0
    lip = 0.0
    llr = 0.0
    while t < T:
        tot = -Q[x, x] + lam[x]
        dt = np.random.exponential(1.0 / tot) if tot > 0 else T
        tn = min(t + dt, T)
        h_all = tn - t
        n = max(1, int(h_all / hmax) + 1)
        h = h_all / n
        lamx = lam[x]
        for _ in range(n):
            lh0 = _dot(lam, pi)
            _snyder_rhs(pi, Q, lam, k1)
            for i in range(k):
                tmp[i] = pi[i] + 0.5 * h * k1[i]
            _snyder_rhs(tmp, Q, lam, k2)
            for i in range(k):
                tmp[i] = pi[i] + 0.5 * h * k2[i]
            _snyder_rhs(tmp, Q, lam, k3)
            for i in range(k):
                tmp[i] = pi[i] + h * k3[i]
            _snyder_rhs(tmp, Q, lam, k4)
            tot_p = 0.0
            for i in range(k):
                v = pi[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
                pn[i] = v if v > 0.0 else 0.0
                tot_p += pn[i]
            for i in range(k):
                pn[i] /= tot_p
            lh1 = _dot(lam, pn)
            _snyder_rhs(pn, Q, lam, ke)
            # Hermite midpoint of the filtered intensity
            lhm = 0.0
            for i in range(k):
                lhm += lam[i] * (0.5 * (pi[i] + pn[i]) + h / 8.0 * (k1[i] - ke[i]))
            lip += h * _phi(lamx) - h / 6.0 * (_phi(lh0) + 4.0 * _phi(lhm) + _phi(lh1))
            llr -= h * lamx - h / 6.0 * (lh0 + 4.0 * lhm + lh1)
            for i in range(k):
                pi[i] = pn[i]
        t = tn
        if t >= T:
            break
        u = np.random.random() * tot
        if u < lamx:
            lh = _dot(lam, pi)
            llr += log(lamx / lh)
            for i in range(k):
                pi[i] = lam[i] * pi[i] / lh
        else:
            u -= lamx
            acc = 0.0
            for j in range(k):
                if j == x:
                    continue
                acc += Q[x, j]
                if u <= acc:
                    x = j
                    break
    return lip / T, llr / T


@numba.njit(cache=True)
def _bd_mi(mu, gam, c, T, seed, mode, fp, hmax):
    """One replicate for birth-death input observed through an approximate filter.

    ``mode`` 0: Hawkes filter ``fp = (mu0, beta, alpha)``; ``mode`` 1/2: Gamma
    filter ``fp = (mu, sigma2, gamma, c)`` with CIR (1) or birth-death (2) drift.
    Returns ``(liptser, llr)`` time averages.
    """
    np.random.seed(seed)
    gx = np.array([-0.906179845938664, -0.538469310105683, 0.0,
                   0.538469310105683, 0.906179845938664])
    gw = np.array([0.236926885056189, 0.478628670499366, 0.568888888888889,
                   0.478628670499366, 0.236926885056189])
    x = np.random.poisson(mu)
    t = 0.0
    if mode == 0:
        mu0, beta, alpha = fp[0], fp[1], fp[2]
        lh = c * mu
    else:
        fm, fs2, fg, fc = fp[0], fp[1], fp[2], fp[3]
        M = fm
        S = fs2
        lh = fc * M
    lip = 0.0
    llr = 0.0
    while True:
        lam = c * x
        rb = gam * mu
        rd = gam * x
        tot = rb + rd + lam
        dt = np.random.exponential(1.0 / tot)
        tn = min(t + dt, T)
        h = tn - t
        if mode == 0:
            s = 0.0
            for q in range(5):
                ss = 0.5 * h * (1.0 + gx[q])
                s += gw[q] * _phi(mu0 + (lh - mu0) * exp(-alpha * ss))
            lip += _phi(lam) * h - 0.5 * h * s
            intlh = mu0 * h + (lh - mu0) * (1.0 - exp(-alpha * h)) / alpha
            llr -= lam * h - intlh
            lh = mu0 + (lh - mu0) * exp(-alpha * h)
        else:
            n = max(1, int(h / hmax) + 1)
            hh = h / n
            for _ in range(n):
                Mn, Sn, dL, Mh = _gamma_step(M, S, hh, fm, fs2, fg, fc, mode == 1)
                lip += _phi(lam) * hh - hh / 6.0 * (_phi(fc * M) + 4.0 * _phi(fc * Mh) + _phi(fc * Mn))
                llr -= lam * hh - dL
                M, S = Mn, Sn
            lh = fc * M
        t = tn
        if t >= T:
            break
        u = np.random.random() * tot
        if u < rb:
            x += 1
        elif u < rb + rd:
            x -= 1
        else:
            llr += log(lam / lh)
            if mode == 0:
                lh += beta
            else:
                M, S = M + S / M, S + S * S / (M * M)
                lh = fc * M
    return lip / T, llr / T


@numba.njit(cache=True, parallel=True)
def _bd_mi_batch(mu, gam, c, T, seeds, mode, fp, hmax):
    n = seeds.shape[0]
    a = np.empty(n)
    b = np.empty(n)
    for i in numba.prange(n):
        a[i], b[i] = _bd_mi(mu, gam, c, T, seeds[i], mode, fp, hmax)
    return a, b


@numba.njit(cache=True, parallel=True)
def _ctmc_mi_batch(Q, lam, pi0, T, seeds, hmax):
    n = seeds.shape[0]
    a = np.empty(n)
    b = np.empty(n)
    for i in numba.prange(n):
        a[i], b[i] = _ctmc_mi(Q, lam, pi0, T, seeds[i], hmax)
    return a, b


# ---------------------------------------------------------------------------
# co-simulation and replay

def simulate_mmpp(inp: CtmcInput, T, seed=0, x0=None) -> EventPath:
    """Exact co-simulation of a finite-state input and its output events.

    The input starts from its stationary law unless ``x0`` (a state index)
    is given.
    """
    if T <= 0:
        raise InvalidParameters("horizon must be positive")
    s = int(_seeds(seed, 1)[0])
    if x0 is None:
        rng = np.random.default_rng(s)
        x0 = int(rng.choice(len(inp.states), p=inp.stationary()))
    ev, sw, st = _ctmc_path(np.asarray(inp.generator, dtype=float),
                            np.asarray(inp.lambda_map, dtype=float), int(x0), float(T), s)
    return EventPath(ev, float(T), seed, st, sw)


@dataclass
class FilterPath:
    """Filter output on a grid; event times appear twice (left and right value)."""

    times: np.ndarray
    values: np.ndarray

    def time_average(self):
        dt = np.diff(self.times)
        return float(np.sum(0.5 * (self.values[1:] + self.values[:-1]) * dt) / (self.times[-1] - self.times[0]))


def _interval_grid(a, b, dt):
    n = max(1, int(np.ceil((b - a) / dt)))
    return np.linspace(a, b, n + 1)


def snyder_replay(events: EventPath, inp: CtmcInput, dt=0.1, pi0=None) -> FilterPath:
    """Exact filter for a finite input replayed on a given event stream.

    Between events the unnormalised posterior evolves with ``expm((Q^T - L) t)``;
    at an event it is reweighted by the intensities.
    """
    Q = np.asarray(inp.generator, dtype=float)
    lam = np.asarray(inp.lambda_map, dtype=float)
    A = Q.T - np.diag(lam)
    pi = inp.stationary() if pi0 is None else np.asarray(pi0, dtype=float)
    E_dt = linalg.expm(A * dt)
    times, vals = [], []
    bounds = np.concatenate([[0.0], events.jump_times, [events.horizon]])
    for k in range(len(bounds) - 1):
        a, b = bounds[k], bounds[k + 1]
        n = int((b - a) / dt)
        rho = pi.copy()
        ts = [a]
        vs = [lam @ pi]
        for j in range(n):
            rho = E_dt @ rho
            rho /= rho.sum()
            ts.append(a + (j + 1) * dt)
            vs.append(lam @ rho)
        rem = b - (a + n * dt)
        if rem > 0:
            rho = linalg.expm(A * rem) @ rho
            rho /= rho.sum()
            ts.append(b)
            vs.append(lam @ rho)
        times.extend(ts)
        vals.extend(vs)
        pi = np.clip(rho, 0.0, None)
        pi /= pi.sum()
        if k < len(bounds) - 2:
            lh = lam @ pi
            if lh <= 0:
                raise FilterBlowup(f"filter intensity vanishes at the event t = {b}")
            pi = lam * pi / lh
    return FilterPath(np.asarray(times), np.asarray(vals))


def _default_start(model: BretpModel):
    if model.n == 0:
        return model.extend(None)
    return model.extend(model.support.mean(1))


def _flow_grid(model, x0, ts, opts=DEFAULT_OPTIONS):
    """States of the between-jump flow at the times ``ts - ts[0]``."""
    tau = ts - ts[0]
    an = model.analytic
    if an.u is not None:
        return np.asarray(an.u(tau, x0)).reshape(model.n0, -1)
    if tau[-1] == 0:
        return np.asarray(x0, dtype=float)[:, None]

    def rhs(t, x):
        if model.clamp is not None:
            x = model.clamp(x)
        return model.flow(x)

    sol = integrate.solve_ivp(rhs, (0.0, tau[-1]), x0, method=opts.method, rtol=opts.rtol,
                              atol=opts.atol, t_eval=tau)
    return sol.y


def replay(events: EventPath, model: BretpModel, dt=0.1, x0=None) -> FilterPath:
    """Run a filter model on a given event stream."""
    x = _default_start(model) if x0 is None else np.asarray(x0, dtype=float)
    bounds = np.concatenate([[0.0], events.jump_times, [events.horizon]])
    times, vals = [], []
    for k in range(len(bounds) - 1):
        ts = _interval_grid(bounds[k], bounds[k + 1], dt)
        X = _flow_grid(model, x, ts)
        lam = np.asarray(model.intensity(X), dtype=float) * np.ones(len(ts))
        times.append(ts)
        vals.append(lam)
        x = X[:, -1]
        if k < len(bounds) - 2:
            x = model.post_jump(x)
    return FilterPath(np.concatenate(times), np.concatenate(vals))


def path_metric(events: EventPath, filter_a: BretpModel, filter_b: BretpModel, dt=0.05,
                x0_a=None, x0_b=None) -> float:
    """Time average of ``|lambda_A - lambda_B|`` over the horizon on one event stream."""
    a = replay(events, filter_a, dt, x0_a)
    b = replay(events, filter_b, dt, x0_b)
    if a.times.shape != b.times.shape or np.any(a.times != b.times):
        raise InvalidParameters("replays produced different grids")
    d = np.abs(a.values - b.values)
    return float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(a.times)) / events.horizon)


# ---------------------------------------------------------------------------
# marginal simulation

def _kernel_spec(model: BretpModel):
    """Kernel id and parameter vector for the families with compiled samplers."""
    p = model.params
    if model.kind in ("random_telegraph", "dark_current"):
        k1, k2, c, l0 = p["k1"], p["k2"], p.get("c", 1.0), p.get("lambda0", 0.0)
        s = k1 + k2 + c
        d = sqrt(s * s - 4 * k1 * c)
        return "decay", 0, np.array([l0 + 0.5 * (s - d), l0 + 0.5 * (s + d), l0, l0 + c])
    if model.kind == "hawkes":
        return "decay", 1, np.array([p["mu0"], p["beta"], p["alpha"]])
    if model.kind == "gamma_filter":
        return "gamma", int(p.get("variant", "cir") == "cir"), np.array(
            [p["mu"], p["sigma2"], p["gamma"], p.get("c", 1.0)])
    return None, None, None


def _state_to_intensity_start(model, lam0):
    """Full state whose intensity is ``lam0`` for one-dimensional models."""
    if model.kind == "random_telegraph":
        return np.array([lam0 / model.params.get("c", 1.0)])
    if model.kind in ("dark_current", "hawkes"):
        return np.array([lam0])
    raise UnsupportedModel("stationary starts from an ACID need a scalar intensity state")


def draw_from_acid(acid: AcidDistribution, rng):
    """Inverse-CDF sample with uniform spreading inside the chosen bin."""
    u = rng.random()
    cum = np.cumsum(acid.weights)
    k = min(int(np.searchsorted(cum, u * cum[-1])), len(acid.weights) - 1)
    return float(acid.edges[k] + rng.random() * acid.widths[k])


def default_burn_in(model: BretpModel):
    if model.m_floor:
        return 50.0 / model.m_floor
    return 100.0 / model.mean_intensity


def _generic_path(model, x0, T, rng, t0, dts, opts=DEFAULT_OPTIONS):
    """Inverse-transform sojourns for any model (Python, slow)."""
    n0 = model.n0
    ev, smp = [], []
    t = 0.0
    x = np.asarray(x0, dtype=float)
    next_s = t0
    tau_max = opts.tau_max
    while t < T:
        U = rng.random()
        an = model.analytic
        if an.P is not None and an.u is not None and model.n <= 1 and model.kind != "snyder":
            th = model.truncate(x)[0] if model.n else None
            Pf = lambda tau: float(an.P(tau, th)) if model.n else float(an.P(tau))
            span = tau_max
            tries = 0
            while Pf(span) > U:
                if not model.m_floor or tries > 10:
                    raise SojournNotFound(f"survival stays above {U:.3g} up to {span}")
                span *= 2.0
                tries += 1
            tau = brentq(lambda s: Pf(s) - U, 0.0, span, xtol=1e-13)
            end = min(t + tau, T)
            while dts > 0 and next_s <= end:
                smp.append(np.asarray(an.u(np.array([next_s - t]), x)).reshape(n0))
                next_s += dts
            xs = np.asarray(an.u(np.array([tau]), x)).reshape(n0)
        else:
            def rhs(s, y):
                xx = y[:n0]
                if model.clamp is not None:
                    xx = model.clamp(xx)
                return np.append(model.flow(xx), -float(model.intensity(xx)) * y[n0])

            def hit(s, y):
                return y[n0] - U
            hit.terminal = True
            hit.direction = -1
            sol = integrate.solve_ivp(rhs, (0.0, min(tau_max, T - t + 1e-9)), np.append(x, 1.0),
                                      method=opts.method, rtol=opts.rtol, atol=opts.atol,
                                      dense_output=True, events=hit)
            if sol.t_events[0].size:
                tau = float(sol.t_events[0][0])
            elif t + sol.t[-1] >= T:
                tau = T - t + 1.0
            else:
                raise SojournNotFound(f"survival stays above {U:.3g} up to tau_max")
            end = min(t + tau, T)
            while dts > 0 and next_s <= end:
                smp.append(sol.sol(next_s - t)[:n0])
                next_s += dts
            xs = sol.sol(min(tau, sol.t[-1]))[:n0]
        if t + tau > T:
            break
        t += tau
        ev.append(t)
        x = model.post_jump(xs)
    return np.asarray(ev), (np.asarray(smp).reshape(-1, n0) if smp else np.zeros((0, n0)))


def marginal_simulate(model: BretpModel, T, seed=0, theta0=None, x0=None, acid=None,
                      sample_start=None, sample_dt=0.0, gamma_step=0.005) -> EventPath:
    """Simulate the output process from its conditional intensity alone.

    The start is, in order of precedence, the full state ``x0``, the
    post-jump statistic ``theta0``, an intensity drawn from ``acid`` (a
    time-stationary start) or the centre of the support.  With
    ``sample_dt > 0`` the state is recorded at ``sample_start + k sample_dt``.
    """
    if T <= 0:
        raise InvalidParameters("horizon must be positive")
    s = int(_seeds(seed, 1)[0])
    rng = np.random.default_rng(s)
    if x0 is None:
        if theta0 is not None:
            x0 = model.extend(theta0)
        elif acid is not None:
            x0 = _state_to_intensity_start(model, draw_from_acid(acid, rng))
        else:
            x0 = _default_start(model)
    x0 = np.asarray(x0, dtype=float)
    t0 = 0.0 if sample_start is None else float(sample_start)
    kernel, kid, prm = _kernel_spec(model)
    if kernel == "decay":
        lam0 = float(model.intensity(x0))
        ev, smp = _decay_path(kid, prm, lam0, float(T), s, t0, float(sample_dt))
        if model.kind == "random_telegraph":
            smp = smp / model.params.get("c", 1.0)
        smp = smp[:, None]
    elif kernel == "gamma":
        ev, smp = _gamma_path(prm[0], prm[1], prm[2], prm[3], bool(kid), x0[0], x0[1], float(T),
                              s, t0, float(sample_dt), gamma_step)
    elif model.point_mass and model.n == 0:
        # constant intensity: a homogeneous Poisson stream
        lam0 = float(model.intensity(x0))
        ev = np.cumsum(rng.exponential(1.0 / lam0, size=int(lam0 * T + 10 * np.sqrt(lam0 * T) + 20)))
        while ev[-1] <= T:
            ev = np.append(ev, ev[-1] + np.cumsum(rng.exponential(1.0 / lam0, size=1000)))
        ev = ev[ev <= T]
        ns = int((T - t0) / sample_dt) + 1 if sample_dt > 0 and T > t0 else 0
        smp = np.repeat(x0[None, :], ns, axis=0)
    else:
        ev, smp = _generic_path(model, x0, float(T), rng, t0, float(sample_dt))
    times = t0 + sample_dt * np.arange(len(smp)) if sample_dt > 0 else None
    return EventPath(ev, float(T), seed, samples=smp, sample_times=times)


def empirical_acid(model: BretpModel, T, burn_in=None, sample_dt=1.0, seed=0, edges=None,
                   bins=1000, replicates=1, acid=None) -> AcidDistribution:
    """Histogram of the intensity at equispaced times after ``burn_in``."""
    burn_in = default_burn_in(model) if burn_in is None else burn_in
    if T <= burn_in:
        raise InvalidParameters("horizon must exceed the burn-in")
    edges = _acid_edges(model, edges, None, bins, None)
    seeds = _seeds(seed, replicates)
    vals = []
    for s in seeds:
        path = marginal_simulate(model, T, int(s), acid=acid, sample_start=burn_in, sample_dt=sample_dt)
        vals.append(np.asarray(model.intensity(path.samples.T), dtype=float))
    out = AcidDistribution.from_samples(np.concatenate(vals), edges)
    out.diagnostics.update({"burn_in": burn_in, "seed": seed, "replicates": replicates})
    return out


# ---------------------------------------------------------------------------
# rate estimates

def mc_mi_rate(source, T=200.0, replicates=1000, seed=0, filter_model: BretpModel = None,
               hmax=0.005) -> McSummary:
    """Time-average estimates of the information rate.

    ``source`` is a ``CtmcInput`` (observed through its exact filter) or a
    ``BirthDeathInput`` together with an approximate ``filter_model``
    (Hawkes or Gamma).  Two estimators are reported per replicate:
    ``liptser`` averages ``phi(lambda_t) - phi(lambda_hat_t)`` and ``llr``
    is the path log-likelihood ratio of the input intensity against the
    filter intensity divided by ``T``.  ``rate`` is the log-likelihood-ratio
    value, which stays correct for approximate filters.
    """
    seeds = _seeds(seed, replicates)
    if isinstance(source, CtmcInput):
        a, b = _ctmc_mi_batch(np.asarray(source.generator, dtype=float),
                              np.asarray(source.lambda_map, dtype=float),
                              source.stationary(), float(T), seeds, float(hmax))
    elif isinstance(source, BirthDeathInput):
        if filter_model is None:
            raise InvalidParameters("birth-death input needs a filter model")
        p = filter_model.params
        if filter_model.kind == "hawkes":
            mode, fp = 0, np.array([p["mu0"], p["beta"], p["alpha"]])
        elif filter_model.kind == "gamma_filter":
            mode = 1 if p.get("variant", "cir") == "cir" else 2
            fp = np.array([p["mu"], p["sigma2"], p["gamma"], p.get("c", 1.0)])
        else:
            raise UnsupportedModel(f"no co-simulation kernel for {filter_model.kind}")
        a, b = _bd_mi_batch(source.mu, source.gamma, source.c, float(T), seeds, mode, fp, float(hmax))
    else:
        raise UnsupportedModel(f"unsupported input {type(source).__name__}")
    est = {"rate": _mean_se(b), "llr": _mean_se(b), "liptser": _mean_se(a)}
    return McSummary(replicates, 0.0, est, None, seed)


# ---------------------------------------------------------------------------
# moment checks

def hawkes_input_link(p: HawkesParams):
    """``(c mu, c^2 sigma^2, gamma)`` of the input whose optimal linear filter is ``p``."""
    gam = p.alpha - p.beta
    cmu = p.alpha * p.mu0 / gam
    c2s2 = cmu * (p.alpha ** 2 - gam ** 2) / (2.0 * gam)
    return cmu, c2s2, gam


def window_variance(cmu, c2s2, gam, W):
    """Variance of the count over a window of length ``W`` at stationarity."""
    return cmu * W + 2.0 * c2s2 / gam * (W - (1.0 - np.exp(-gam * W)) / gam)


def _var_se(x):
    """Sample variance and its standard error from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    n = x.size
    v = x.var(ddof=1)
    m4 = np.mean((x - x.mean()) ** 4)
    return float(v), float(np.sqrt(max(m4 - v * v * (n - 3) / (n - 1), 0.0) / n))


def _increment_slope(a, b, dT):
    def stat(idx):
        return float((b[idx].var(ddof=1) - a[idx].var(ddof=1)) / dT)
    return stat


def _bootstrap_se(stat, n, seed, draws=400):
    rng = np.random.default_rng([int(seed), 7])
    vals = [stat(rng.integers(0, n, n)) for _ in range(draws)]
    return float(np.std(vals, ddof=1))


def moment_checks(model: BretpModel, T=50.0, replicates=2000, seed=0, burn_in=None,
                  sample_dt=1.0, acid=None) -> McSummary:
    """Count and filter moments against their closed forms.

    Counts are taken over ``[burn_in, burn_in + T]``.  For the Gamma filter
    the summary also holds ``E[S] + V[M]`` from states sampled every
    ``sample_dt`` after ``burn_in`` (standard error by jackknife over
    replicates).
    """
    burn_in = default_burn_in(model) if burn_in is None else burn_in
    horizon = burn_in + T
    seeds = _seeds(seed, replicates)
    counts = np.empty(replicates)
    half = np.empty(replicates)
    states = []
    for i, s in enumerate(seeds):
        want = model.kind == "gamma_filter"
        path = marginal_simulate(model, horizon, int(s), acid=acid,
                                 sample_start=burn_in if want else None,
                                 sample_dt=sample_dt if want else 0.0)
        counts[i] = np.sum(path.jump_times > burn_in)
        half[i] = np.sum((path.jump_times > burn_in) & (path.jump_times <= burn_in + 0.5 * T))
        if want:
            states.append(path.samples)
    est = {"mean_slope": _mean_se(counts / T)}
    v, vse = _var_se(counts)
    est["variance_slope"] = (v / T, vse / T)
    # the offset of Var N(T) - slope T is constant for large T, so the
    # increment between T/2 and T estimates the asymptotic slope
    inc = _increment_slope(half, counts, 0.5 * T)
    est["variance_slope_increment"] = (inc(np.arange(replicates)),
                                       _bootstrap_se(inc, replicates, seed))
    if model.kind == "hawkes":
        hp = HawkesParams(model.params["mu0"], model.params["beta"], model.params["alpha"])
        cmu, c2s2, gam = hawkes_input_link(hp)
        est["mean_slope_theory"] = (cmu, 0.0)
        est["variance_slope_theory"] = (cmu + 2 * c2s2 / gam, 0.0)
        est["variance_slope_window"] = (window_variance(cmu, c2s2, gam, T) / T, 0.0)
    elif model.kind == "gamma_filter":
        p = model.params
        per = np.array([[S.mean(), M.mean(), (M * M).mean()] for M, S in
                        (st.T for st in states)])
        n = len(per)

        def stat(rows):
            es, em, em2 = rows.mean(0)
            return es + em2 - em * em

        full = stat(per)
        jack = np.array([stat(np.delete(per, i, 0)) for i in range(n)])
        se = np.sqrt((n - 1) / n * np.sum((jack - jack.mean()) ** 2))
        est["es_plus_vm"] = (float(full), float(se))
        est["sigma2"] = (p["sigma2"], 0.0)
        c = p.get("c", 1.0)
        est["mean_slope_theory"] = (c * p["mu"], 0.0)
        est["variance_slope_theory"] = (c * p["mu"] + 2 * c * c * p["sigma2"] / p["gamma"], 0.0)
        est["variance_slope_window"] = (window_variance(c * p["mu"], c * c * p["sigma2"],
                                                        p["gamma"], T) / T, 0.0)
    elif model.point_mass:
        r = float(model.intensity(_default_start(model)))
        est["mean_slope_theory"] = (r, 0.0)
        est["variance_slope_theory"] = (r, 0.0)
        est["variance_slope_window"] = (r, 0.0)
    return McSummary(replicates, burn_in, est, None, seed)


def ks_window_test(path_a: EventPath, path_b: EventPath, window=10.0, gap=10.0):
    """Two-sample KS test on window counts of two event streams."""
    ca = path_a.counts(window, gap)
    cb = path_b.counts(window, gap)
    return stats.ks_2samp(ca, cb)
