"""Backward-recurrence-time parametrisation of self-exciting counting processes.

A model is a piecewise-deterministic Markov process: between events the state
``x`` follows ``dx/dtau = F(x)``, events arrive with intensity ``l(x)`` and at
an event the state jumps to ``f(x)``.  The first ``n`` components of the
post-jump state form the sufficient statistic ``theta``; the trailing
``n0 - n`` components always reset to fixed constants.  Given ``theta`` the
path between two events is deterministic, so the joint law of
(time since last event, theta) has density ``p0(theta) P(tau, theta)`` where
``dP/dtau = -m(tau, theta) P``.

All flows, intensities and jump maps act on arrays of shape ``(n0, ...)`` so
that many trajectories can be advanced at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import EventToleranceNotMet, NonFiniteState


def phi(z):
    """``z log z`` with the continuous extension ``phi(0) = 0``."""
    z = np.asarray(z, dtype=float)
    safe = np.where(z > 0, z, 1.0)
    out = np.where(z > 0, z * np.log(safe), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class OdeOptions:
    """Tolerances shared by every deterministic integration."""

    rtol: float = 1e-9
    atol: float = 1e-12
    event_tol: float = 1e-10
    tail_eps: float = 1e-10
    tau_max: float = 200.0
    substeps: int = 8
    slack: float = 1e-12
    method: str = "DOP853"


DEFAULT_OPTIONS = OdeOptions()


@dataclass(frozen=True)
class Analytic:
    """Optional closed forms.

    ``theta`` is passed as a scalar or array for ``n == 1`` and ignored for
    ``n == 0``.  ``tau_g(level, theta)`` and ``tau_m(level, theta)`` return the
    time at which the monotone decreasing ``g`` or ``m`` reaches ``level``:
    0 if it starts below, ``inf`` if it never gets there.
    """

    u: Optional[Callable] = None  # u(tau, x0) from an arbitrary state
    P: Optional[Callable] = None
    m: Optional[Callable] = None
    g: Optional[Callable] = None
    tau_g: Optional[Callable] = None
    tau_m: Optional[Callable] = None
    int_P: Optional[Callable] = None  # int_P(t0, t1, theta), t1 may be inf
    m_inf: Optional[Callable] = None


@dataclass(frozen=True)
class BretpModel:
    """Immutable description of a model in (tau, theta) form.

    Attributes
    ----------
    n0, n : int
        Dimension of the state and of the jump-time statistic.
    flow, jump_update, intensity : callable
        ``F``, ``f`` and ``l`` acting on arrays of shape ``(n0, ...)``.
    reset : ndarray
        Values of the trailing ``n0 - n`` components after every jump.
    support : ndarray, shape (n, 2)
        Box containing the support of ``p0``.  Unbounded coordinates are
        stored already truncated and flagged by ``truncated``.
    mean_intensity : float
        Stationary mean intensity, which fixes the normalisation of ``p0``.
    input_law : tuple of arrays, optional
        ``(values, probs)`` of the stationary input intensity, used for the
        input term of the information rate.
    m_floor : float, optional
        Uniform lower bound on ``m``.
    acid_range : tuple
        Interval that contains every value of the intensity.
    """

    name: str
    n0: int
    n: int
    flow: Callable
    jump_update: Callable
    intensity: Callable
    reset: np.ndarray
    support: np.ndarray
    mean_intensity: float
    acid_range: tuple
    analytic: Analytic = field(default_factory=Analytic)
    input_law: Optional[tuple] = None
    m_floor: Optional[float] = None
    truncated: bool = False
    monotone_m: bool = False
    monotone_g: bool = False
    point_mass: bool = False
    admissible: Optional[Callable] = None
    clamp: Optional[Callable] = None
    direct: Optional[dict] = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def extend(self, theta):
        """Map the statistic to the full post-jump state (Sigma)."""
        if self.n == 0:
            return np.array(self.reset, dtype=float)
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.n == self.n0:
            return theta.copy()
        tail = np.asarray(self.reset, dtype=float)
        if theta.ndim > 1:
            tail = np.broadcast_to(tail.reshape(-1, *([1] * (theta.ndim - 1))),
                                   (len(tail),) + theta.shape[1:])
        return np.concatenate([theta, tail])

    def truncate(self, x):
        """Map a full state to the statistic (Gamma)."""
        return np.asarray(x)[: self.n]

    def post_jump(self, x):
        """Jump target of a full state with the reset enforced exactly."""
        y = np.array(self.jump_update(np.asarray(x, dtype=float)), dtype=float)
        if self.n < self.n0:
            y[self.n:] = np.asarray(self.reset).reshape(-1, *([1] * (y.ndim - 1)))
        return y

    def with_support(self, support, truncated=None):
        support = np.atleast_2d(np.asarray(support, dtype=float))
        return replace(self, support=support,
                       truncated=self.truncated if truncated is None else truncated)


@dataclass
class FlowTrajectory:
    theta: np.ndarray
    tau: np.ndarray
    states: np.ndarray  # (n0, len(tau))
    events: list  # one array of crossing times per requested level
    survival: Optional[np.ndarray] = None

    @property
    def samples(self):
        return list(zip(self.tau, self.states.T))


@dataclass
class SurvivalCurve:
    theta: np.ndarray
    tau: np.ndarray
    P: np.ndarray

    @property
    def values(self):
        return list(zip(self.tau, self.P))


def _check_state(model, x, opts):
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"{model.name}: non-finite state {x}")
    if model.admissible is not None and not np.all(model.admissible(x, opts.slack)):
        raise NonFiniteState(f"{model.name}: state {x} left the admissible region")


def solve_flow(model, x0, tau_end=None, opts=DEFAULT_OPTIONS, with_J=False,
               with_Q=False, stop_tail=True):
    """Integrate the state together with the survival factor.

    The augmented vector is ``(x, P[, Q][, J])`` where ``Q = int P`` and
    ``J = int phi(m) P``.  Integration stops at ``tau_end`` (default
    ``opts.tau_max``) or, if ``stop_tail``, once ``P < opts.tail_eps``.
    Returns the ``solve_ivp`` result with a dense interpolant.
    """
    x0 = np.asarray(x0, dtype=float)
    n0 = model.n0
    tau_end = opts.tau_max if tau_end is None else float(tau_end)
    iq = n0 + 1
    ij = n0 + 1 + int(with_Q)

    def rhs(t, y):
        x = y[:n0]
        if model.clamp is not None:
            x = model.clamp(x)
        lam = float(model.intensity(x))
        out = np.empty_like(y)
        out[:n0] = model.flow(x)
        out[n0] = -lam * y[n0]
        if with_Q:
            out[iq] = y[n0]
        if with_J:
            out[ij] = phi(lam) * y[n0]
        return out

    y0 = np.concatenate([x0, [1.0], [0.0] * int(with_Q), [0.0] * int(with_J)])
    events = None
    if stop_tail:
        def tail(t, y):
            return y[n0] - opts.tail_eps
        tail.terminal = True
        tail.direction = -1
        events = tail
    sol = solve_ivp(rhs, (0.0, tau_end), y0, method=opts.method, rtol=opts.rtol,
                    atol=opts.atol, dense_output=True, events=events)
    if sol.status < 0:
        raise NonFiniteState(f"{model.name}: integrator failed: {sol.message}")
    _check_state(model, sol.y[:n0, -1], opts)
    return sol


def _fine_grid(t, substeps):
    if len(t) < 2:
        return np.asarray(t, dtype=float)
    sub = np.linspace(0.0, 1.0, substeps + 1)[:-1]
    grid = (t[:-1, None] + np.diff(t)[:, None] * sub[None, :]).ravel()
    return np.append(grid, t[-1])


def find_crossings(fun, grid, values=None, tol=1e-10):
    """Locate zeros of a scalar function of time between bracketing grid points."""
    if values is None:
        values = np.array([fun(t) for t in grid])
    s = np.sign(values)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    out = []
    for k in idx:
        try:
            out.append(brentq(fun, grid[k], grid[k + 1], xtol=tol, rtol=4 * np.finfo(float).eps))
        except ValueError as exc:
            raise EventToleranceNotMet(str(exc)) from exc
    exact = np.nonzero(values == 0)[0]
    out.extend(grid[exact])
    return np.sort(np.asarray(out, dtype=float))


def integrate_flow(model: BretpModel, theta, tau_max: float,
                   levels: Sequence[Callable] = (), opts=DEFAULT_OPTIONS) -> FlowTrajectory:
    """Integrate ``u(tau, Sigma(theta))`` on ``[0, tau_max]``.

    Parameters
    ----------
    levels : sequence of callables
        Each maps a state of shape ``(n0,)`` to a scalar; its sign changes are
        reported as crossing times refined to ``opts.event_tol``.
    """
    x0 = model.extend(theta)
    _check_state(model, x0, opts)
    if tau_max <= 0:
        return FlowTrajectory(np.atleast_1d(theta) if theta is not None else np.empty(0),
                              np.zeros(1), x0[:, None].copy(), [np.empty(0) for _ in levels],
                              np.ones(1))
    sol = solve_flow(model, x0, tau_max, opts, stop_tail=False)
    grid = _fine_grid(sol.t, opts.substeps)
    Y = sol.sol(grid)
    for k in range(0, Y.shape[1], max(1, Y.shape[1] // 64)):
        _check_state(model, Y[: model.n0, k], opts)
    events = []
    for h in levels:
        vals = np.array([h(Y[: model.n0, k]) for k in range(len(grid))])
        events.append(find_crossings(lambda t: h(sol.sol(t)[: model.n0]), grid, vals,
                                     opts.event_tol))
    th = np.atleast_1d(theta) if theta is not None else np.empty(0)
    return FlowTrajectory(th, sol.t, sol.y[: model.n0], events, sol.y[model.n0])


def flow_states(model: BretpModel, x0, tau, opts=DEFAULT_OPTIONS):
    """States at times ``tau`` starting from an arbitrary state ``x0``."""
    tau = np.asarray(tau, dtype=float)
    if model.analytic.u is not None:
        return np.asarray(model.analytic.u(tau, np.asarray(x0, dtype=float)))
    tmax = float(np.max(tau)) if tau.size else 0.0
    if tmax <= 0:
        return np.repeat(np.asarray(x0, float)[:, None], tau.size, axis=1).reshape(
            (model.n0,) + tau.shape)
    sol = solve_flow(model, x0, tmax, opts, stop_tail=False)
    return sol.sol(tau)[: model.n0]


def survival(model: BretpModel, theta, tau_max=None, opts=DEFAULT_OPTIONS) -> SurvivalCurve:
    """Solve ``dP/dtau = -m P`` from ``P(0) = 1``.

    Without ``tau_max`` the curve runs until ``P < opts.tail_eps`` or
    ``opts.tau_max``.
    """
    x0 = model.extend(theta)
    _check_state(model, x0, opts)
    sol = solve_flow(model, x0, tau_max, opts, stop_tail=tau_max is None)
    P = np.minimum.accumulate(np.clip(sol.y[model.n0], 0.0, 1.0))
    th = np.atleast_1d(theta) if theta is not None else np.empty(0)
    return SurvivalCurve(th, sol.t, P)


def conditional_intensity(model: BretpModel, theta, tau, opts=DEFAULT_OPTIONS):
    """``m(tau, theta) = l(u(tau, Sigma(theta)))``."""
    tau = np.asarray(tau, dtype=float)
    if model.analytic.m is not None:
        out = np.asarray(model.analytic.m(tau, theta), dtype=float)
    else:
        X = flow_states(model, model.extend(theta), tau.ravel(), opts)
        out = np.asarray(model.intensity(X), dtype=float).reshape(tau.shape)
    return out if out.ndim else float(out)


def jump_target(model: BretpModel, theta, tau, opts=DEFAULT_OPTIONS):
    """``g(tau, theta) = Gamma(f(u(tau, Sigma(theta))))``."""
    tau = np.asarray(tau, dtype=float)
    if model.analytic.g is not None:
        out = np.asarray(model.analytic.g(tau, theta), dtype=float)
        return out if out.ndim else float(out)
    X = flow_states(model, model.extend(theta), tau.ravel(), opts)
    G = model.truncate(model.post_jump(X))
    G = G.reshape((model.n,) + tau.shape)
    if model.n == 1:
        G = G[0]
        return G if G.ndim else float(G)
    return G
