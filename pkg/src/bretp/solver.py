"""Boundary density, ACID reconstruction and distribution comparison.

The boundary density ``p0`` is the fixed point of the inflow operator: the
mass arriving at ``theta`` equals the mass of all trajectories whose jump
target ``g(tau, theta')`` lands there.  On a partition with equal cell volume
``w`` this becomes ``a = I a`` with a left-stochastic matrix

    I[i, j] = sum_k P(tau_{k-1}, theta_j) - P(tau_k, theta_j),

the sum running over the time segments during which ``g(., theta_j)`` lies
in cell ``i``.  The ACID follows by pushing ``p0(theta) P(tau, theta)``
forward through ``m(tau, theta)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

from .core import DEFAULT_OPTIONS, BretpModel, _fine_grid, solve_flow
from .errors import (MassLeak, MeshTooCoarse, NotConverged, QuasiPositivityUnverified,
                     SingularKernel, SupportNotCovered, UnsupportedModel)

GL_X, GL_W = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------------------
# partition

@dataclass(frozen=True)
class Partition:
    """Regular grid of ``prod(counts)`` congruent boxes, ``r`` points per axis."""

    lower: np.ndarray
    upper: np.ndarray
    counts: tuple
    r: int = 1

    @classmethod
    def for_model(cls, model: BretpModel, cells=200, reps=1):
        if model.n == 0:
            return cls(np.zeros(0), np.zeros(0), (), 1)
        counts = (cells,) * model.n if np.isscalar(cells) else tuple(cells)
        return cls(model.support[:, 0].copy(), model.support[:, 1].copy(),
                   tuple(int(c) for c in counts), int(reps))

    @property
    def n(self):
        return len(self.counts)

    @property
    def size(self):
        return int(np.prod(self.counts)) if self.counts else 1

    @property
    def widths(self):
        return (self.upper - self.lower) / np.asarray(self.counts, dtype=float)

    @property
    def volume(self):
        return float(np.prod(self.widths)) if self.counts else 1.0

    def edges(self, axis=0):
        return np.linspace(self.lower[axis], self.upper[axis], self.counts[axis] + 1)

    def centers(self):
        """Cell centres, shape ``(size, n)``."""
        axes = [0.5 * (e[1:] + e[:-1]) for e in (self.edges(k) for k in range(self.n))]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1)

    def representatives(self):
        """Equidistant points inside every cell, shape ``(size, r**n, n)``."""
        if self.n == 0:
            return np.zeros((1, 1, 0))
        off = (np.arange(self.r) + 0.5) / self.r
        offs = np.stack([g.ravel() for g in np.meshgrid(*([off] * self.n), indexing="ij")], -1)
        low = self.centers() - 0.5 * self.widths
        return low[:, None, :] + offs[None, :, :] * self.widths

    def raw_index(self, points):
        """Per-axis cell index of ``points`` (shape ``(n, ...)``), clipped to
        ``[-1, count]`` so that values outside the box are recognisable."""
        pts = np.asarray(points, dtype=float)
        shape = (-1,) + (1,) * (pts.ndim - 1)
        k = np.floor((pts - self.lower.reshape(shape)) / self.widths.reshape(shape))
        hi = np.asarray(self.counts).reshape(shape)
        return np.clip(np.nan_to_num(k, nan=-1), -1, hi).astype(np.int64)

    def flat_index(self, raw):
        """Fold raw indices into the box and flatten (C order)."""
        hi = np.asarray(self.counts).reshape((-1,) + (1,) * (raw.ndim - 1)) - 1
        k = np.clip(raw, 0, hi)
        return np.ravel_multi_index(tuple(k), self.counts)

    def covers(self, support, rtol=1e-9):
        support = np.atleast_2d(support)
        scale = np.maximum(np.abs(support).max(1), 1.0) * rtol
        return bool(np.all(self.lower <= support[:, 0] + scale)
                    and np.all(self.upper >= support[:, 1] - scale))


# ---------------------------------------------------------------------------
# result records

@dataclass
class BoundaryMatrix:
    entries: object  # ndarray or scipy sparse matrix
    partition: Partition
    overflow: np.ndarray  # per column, mass folded in from outside the box
    crossing_log: Optional[list] = None
    method: str = ""

    @property
    def size(self):
        return self.entries.shape[0]

    def column_sums(self):
        return np.asarray(self.entries.sum(0)).ravel()

    def dense(self):
        return self.entries.toarray() if sparse.issparse(self.entries) else np.asarray(self.entries)


@dataclass
class BoundaryDensity:
    values: np.ndarray  # p0 per cell
    partition: Partition
    residual: float
    norm: float
    truncated_mass: float = 0.0
    quasi_positive: Optional[bool] = None
    iterations: int = 0

    @property
    def integral(self):
        return float(self.values.sum() * self.partition.volume)


@dataclass
class AcidDistribution:
    """Binned law of the conditional intensity at a typical time.

    ``weights`` are normalised to one; ``total_mass`` keeps the raw sum,
    which should be close to one when the reconstruction is consistent.
    Within a bin the mass is spread uniformly, so zero-width bins are atoms.
    """

    edges: np.ndarray
    weights: np.ndarray
    total_mass: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.weights = np.clip(np.asarray(self.weights, dtype=float), 0.0, None)
        s = self.weights.sum()
        if s > 0:
            self.weights = self.weights / s

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def density(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.widths > 0, self.weights / self.widths, np.inf * (self.weights > 0))

    @property
    def mean(self):
        return float(self.weights @ self.centers)

    @property
    def variance(self):
        second = self.weights @ (self.centers ** 2 + self.widths ** 2 / 12.0)
        return float(second - self.mean ** 2)

    def expect(self, fun, nodes=8):
        """Expectation of ``fun`` with uniform spreading inside each bin."""
        x, w = np.polynomial.legendre.leggauss(nodes)
        pts = self.centers[:, None] + 0.5 * self.widths[:, None] * x[None, :]
        return float(self.weights @ (fun(pts) @ w / 2.0))

    def cdf(self, x):
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        return np.interp(x, self.edges, cum)

    @classmethod
    def point_mass(cls, r):
        return cls(np.array([r, r], dtype=float), np.array([1.0]))

    @classmethod
    def from_samples(cls, samples, edges):
        samples = np.asarray(samples, dtype=float)
        edges = np.asarray(edges, dtype=float)
        idx = np.clip(np.searchsorted(edges, samples, side="right") - 1, 0, len(edges) - 2)
        w = np.bincount(idx, minlength=len(edges) - 1).astype(float)
        return cls(edges, w, 1.0, {"samples": int(samples.size)})


# ---------------------------------------------------------------------------
# boundary matrix

def _bisect_times(fun, a, b, target, tol, max_iter=80):
    """Vectorised bisection for ``fun(t) = target`` with ``fun(a) < target <= fun(b)``
    or the reverse; ``fun`` maps an array of times to an array of values."""
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    if a.size == 0:
        return a
    sa = np.sign(fun(a) - target)
    for _ in range(max_iter):
        if np.max(b - a) <= tol:
            break
        mid = 0.5 * (a + b)
        sm = np.sign(fun(mid) - target)
        left = sm == sa
        a = np.where(left, mid, a)
        b = np.where(left, b, mid)
    return 0.5 * (a + b)


def _segments_1d(sol, n0, scalar, grid, lower, width, count, tol):
    """Times at which ``scalar(state)`` crosses the edges of a 1-D grid.

    Returns ``(times, cells)``: ``cells[k]`` is the raw cell index (``-1`` or
    ``count`` outside) occupied on ``[times[k], times[k+1])``.
    """
    vals = scalar(sol.sol(grid)[:n0])
    raw = np.clip(np.floor((vals - lower) / width), -1, count).astype(np.int64)
    steps = np.nonzero(raw[1:] != raw[:-1])[0]
    if steps.size == 0:
        return np.array([0.0]), np.array([raw[0]])
    ks, edge_ids, entered = [], [], []
    for k in steps:
        c0, c1 = raw[k], raw[k + 1]
        if c1 > c0:
            for c in range(c0, c1):
                ks.append(k); edge_ids.append(c + 1); entered.append(c + 1)
        else:
            for c in range(c0, c1, -1):
                ks.append(k); edge_ids.append(c); entered.append(c - 1)
    ks = np.asarray(ks)
    levels = lower + width * np.asarray(edge_ids, dtype=float)

    def f(t):
        return scalar(sol.sol(t)[:n0])

    # bisection on all crossings at once, each against its own level
    a, b = grid[ks].copy(), grid[ks + 1].copy()
    fa = np.sign(vals[ks] - levels)
    for _ in range(80):
        if np.max(b - a) <= tol:
            break
        mid = 0.5 * (a + b)
        sm = np.sign(f(mid) - levels)
        left = sm == fa
        a = np.where(left, mid, a)
        b = np.where(left, b, mid)
    t = 0.5 * (a + b)
    # keep the chronological order within one grid step
    order = np.lexsort((t, ks))
    times = np.concatenate([[0.0], t[order]])
    cells = np.concatenate([[raw[0]], np.asarray(entered)[order]])
    return times, cells


def _matrix_analytic(model, part):
    P, tau_g = model.analytic.P, model.analytic.tau_g
    N, r = part.size, part.r
    reps = part.representatives()[..., 0].ravel()  # (N*r,)
    edges = part.edges(0)
    T = tau_g(edges[:, None], reps[None, :])
    PB = np.where(np.isinf(T), 0.0, P(np.where(np.isinf(T), 0.0, T), reps[None, :]))
    PB = np.clip(PB, 0.0, 1.0)
    PB[0] = 0.0  # everything below the box folds into the first cell
    overflow = 1.0 - PB[-1]
    PB[-1] = 1.0  # and everything above into the last
    I = np.clip(np.diff(PB, axis=0), 0.0, None).reshape(N, N, r).mean(2)
    return I, overflow.reshape(N, r).mean(1), None


def _matrix_scalar(model, part, opts, log):
    N, r = part.size, part.r
    reps = part.representatives()
    lower, width = part.lower[0], part.widths[0]
    n0 = model.n0
    I = np.zeros((N, N))
    overflow = np.zeros(N)
    crossing_log = [] if log else None

    def scalar(X):
        return model.truncate(model.post_jump(X))[0]

    for j in range(N):
        col_log = []
        for q in range(r):
            theta = reps[j, q]
            sol = solve_flow(model, model.extend(theta), None, opts)
            grid = _fine_grid(sol.t, opts.substeps)
            times, cells = _segments_1d(sol, n0, scalar, grid, lower, width, N, opts.event_tol)
            Pk = np.clip(sol.sol(times)[n0], 0.0, 1.0)
            Pk = np.minimum.accumulate(Pk)
            mass = Pk - np.append(Pk[1:], 0.0)  # tail mass stays with the last cell
            outside = (cells < 0) | (cells >= N)
            overflow[j] += mass[outside].sum() / r
            np.add.at(I[:, j], np.clip(cells, 0, N - 1), mass / r)
            if log:
                col_log.append((times, np.clip(cells, 0, N - 1)))
        if log:
            crossing_log.append(col_log)
    return I, overflow, crossing_log


def _rk4_batch(model, X, dt, extra=None):
    """One classical Runge-Kutta step for a batch of states with survival."""
    def F(x, P):
        if model.clamp is not None:
            x = model.clamp(x)
        return model.flow(x), -model.intensity(x) * P
    x, P = X
    k1x, k1p = F(x, P)
    k2x, k2p = F(x + 0.5 * dt * k1x, P + 0.5 * dt * k1p)
    k3x, k3p = F(x + 0.5 * dt * k2x, P + 0.5 * dt * k2p)
    k4x, k4p = F(x + dt * k3x, P + dt * k3p)
    xn = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    Pn = P + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    if model.clamp is not None:
        xn = model.clamp(xn)
    return xn, np.clip(Pn, 0.0, None)


class _RunLength:
    """Accumulate mass per (target, column) pair, flushing when the target changes."""

    def __init__(self, start, cols):
        self.cur = start.copy()
        self.acc = np.zeros(start.shape)
        self.cols = cols
        self.rows, self.cs, self.vals = [], [], []

    def add(self, target, mass):
        ch = target != self.cur
        if ch.any():
            self.rows.append(self.cur[ch]); self.cs.append(self.cols[ch]); self.vals.append(self.acc[ch])
            self.acc[ch] = 0.0
            self.cur[ch] = target[ch]
        self.acc += mass

    def finish(self, shape, scale):
        self.rows.append(self.cur); self.cs.append(self.cols); self.vals.append(self.acc)
        return sparse.coo_matrix((np.concatenate(self.vals) * scale,
                                  (np.concatenate(self.rows), np.concatenate(self.cs))),
                                 shape=shape).tocsr()


def _batched_trajectories(model, part, opts, dt, visitors):
    """Advance every representative with fixed-step RK4, calling each visitor
    with ``(x_mid, P_start, P_end, dt)`` after every step."""
    reps = part.representatives()
    R = reps.shape[1]
    theta = reps.reshape(reps.shape[0] * R, part.n).T
    x = model.extend(theta) if part.n else model.extend(None)[:, None]
    P = np.ones(x.shape[1])
    tau = 0.0
    while True:
        xn, Pn = _rk4_batch(model, (x, P), dt)
        xm = 0.5 * (x + xn)
        for v in visitors:
            v(xm, P, Pn, dt)
        x, P = xn, Pn
        tau += dt
        if P.max() < opts.tail_eps or tau >= opts.tau_max:
            break
    return x, P, R


def _matrix_batched(model, part, opts, dt):
    N = part.size
    reps = part.representatives()
    R = reps.shape[1]
    cols = np.repeat(np.arange(N), R)
    theta = reps.reshape(reps.shape[0] * reps.shape[1], part.n).T
    x0 = model.extend(theta)
    start = part.flat_index(part.raw_index(model.truncate(model.post_jump(x0))))
    rl = _RunLength(start, cols)
    outside = np.zeros(cols.size)

    def visit(xm, P, Pn, dt):
        raw = part.raw_index(model.truncate(model.post_jump(xm)))
        out = np.any((raw < 0) | (raw >= np.asarray(part.counts)[:, None]), axis=0)
        outside[:] += np.where(out, P - Pn, 0.0)
        rl.add(part.flat_index(raw), P - Pn)

    x, P, _ = _batched_trajectories(model, part, opts, dt, [visit])
    rl.acc += P  # tail mass stays with the final cell
    I = rl.finish((N, N), 1.0 / R)
    overflow = np.bincount(cols, outside, minlength=N) / R
    return I, overflow, None


def build_boundary_matrix(model: BretpModel, partition: Partition, method="auto",
                          opts=DEFAULT_OPTIONS, dt=0.01, log=False, mass_tol=1e-8) -> BoundaryMatrix:
    """Assemble the left-stochastic inflow matrix on ``partition``.

    ``method`` is ``"analytic"`` (closed-form crossing times, monotone ``g``),
    ``"ode"`` (adaptive integration with refined crossings, ``n == 1``) or
    ``"batched"`` (fixed-step RK4 over all representatives, any ``n``).
    ``"auto"`` picks the first that applies.
    """
    if model.n == 0:
        return BoundaryMatrix(np.ones((1, 1)), partition, np.zeros(1), None, "trivial")
    if partition.n != model.n:
        raise SupportNotCovered("partition dimension differs from the statistic dimension")
    if not partition.covers(model.support):
        raise SupportNotCovered(f"partition box does not contain the support {model.support.tolist()}")
    if method == "auto":
        if model.n == 1 and model.monotone_g and model.analytic.tau_g and model.analytic.P:
            method = "analytic"
        elif model.n == 1:
            method = "ode"
        else:
            method = "batched"
    if method == "analytic":
        I, overflow, clog = _matrix_analytic(model, partition)
    elif method == "ode":
        if model.n != 1:
            raise UnsupportedModel("the ode path handles one-dimensional statistics")
        I, overflow, clog = _matrix_scalar(model, partition, opts, log)
    elif method == "batched":
        I, overflow, clog = _matrix_batched(model, partition, opts, dt)
    else:
        raise ValueError(f"unknown method {method!r}")
    bm = BoundaryMatrix(I, partition, overflow, clog, method)
    sums = bm.column_sums()
    if np.any(sums < 1 - mass_tol):
        warnings.warn(f"boundary matrix columns lose up to {1 - sums.min():.3g} mass", MassLeak)
    return bm


# ---------------------------------------------------------------------------
# fixed point

def solve_boundary_density(I: BoundaryMatrix, L=15, norm=1.0, fp_tol=1e-8,
                           max_polish=20000) -> BoundaryDensity:
    """Fixed point of ``I`` by ``L`` squarings, scaled to ``sum(a) w = norm``.

    The iteration starts from the uniform vector, so ``I^(2^L)`` applied to it
    gives the averaged column.  Large sparse matrices use plain power
    iteration with the same number of effective steps.
    """
    part = I.partition
    w = part.volume
    N = I.size
    quasi = None
    if sparse.issparse(I.entries) and N > 3000:
        A = I.entries.tocsr()
        a = np.full(N, 1.0 / N)
        it = 0
        for it in range(1, 2 ** min(L, 20) + 1):
            an = A @ a
            an /= an.sum()
            done = np.abs(an - a).sum() < 0.1 * fp_tol
            a = an
            if done:
                break
        quasi = bool(np.all(a > 0)) or None
    else:
        M = I.dense().copy()
        it = L
        for _ in range(L):
            M = M @ M
            s = M.sum(0)
            M /= np.where(s > 0, s, 1.0)
        # a unique fixed point shows up as identical columns of the power
        quasi = bool(np.abs(M - M[:, :1]).sum(0).max() < 1e-6)
        if not quasi:
            warnings.warn("columns of the matrix power still differ", QuasiPositivityUnverified)
        a = M.mean(1)
        a /= a.sum()
        A = I.dense()
    resid = np.abs(A @ a - a).sum() / a.sum()
    k = 0
    while resid >= fp_tol and k < max_polish:
        a = A @ a
        a /= a.sum()
        resid = np.abs(A @ a - a).sum() / a.sum()
        k += 1
    if resid >= fp_tol:
        raise NotConverged(f"fixed-point residual {resid:.3g} after {L} squarings", residual=resid)
    a = np.clip(a, 0.0, None)
    a = a / (a.sum() * w) * norm
    trunc = float((a * I.overflow).sum() * w / norm) if norm else 0.0
    return BoundaryDensity(a, part, float(resid), float(norm), trunc, quasi, it + k)


def boundary_density(model: BretpModel, cells=200, reps=1, L=15, method="auto",
                     opts=DEFAULT_OPTIONS, dt=0.01):
    """Convenience wrapper: partition, matrix and fixed point in one call."""
    part = Partition.for_model(model, cells, reps)
    I = build_boundary_matrix(model, part, method=method, opts=opts, dt=dt)
    return solve_boundary_density(I, L=L, norm=model.mean_intensity), I


# ---------------------------------------------------------------------------
# ACID reconstruction

def _acid_edges(model, edges=None, dm=None, bins=1000, range_=None):
    if edges is not None:
        return np.asarray(edges, dtype=float)
    lo, hi = range_ if range_ is not None else model.acid_range
    if dm is not None:
        bins = max(1, int(np.ceil((hi - lo) / dm - 1e-9)))
        hi = lo + bins * dm
    return np.linspace(lo, hi, bins + 1)


def _rep_weights(p0: BoundaryDensity):
    part = p0.partition
    reps = part.representatives()
    R = reps.shape[1]
    wts = np.repeat(p0.values * part.volume / R, R)
    return reps.reshape(reps.shape[0] * R, part.n), wts


def _gl_integral(fun, a, b):
    """Gauss-Legendre integral of ``fun`` over ``[a, b]`` (broadcast arrays)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)[..., None]
    half = 0.5 * (b - a)[..., None]
    return (half[..., 0]) * (fun(mid + half * GL_X) @ GL_W)


def _acid_analytic(model, theta, wts, edges):
    an = model.analytic
    th = theta[:, 0] if theta.shape[1] else np.full(1, np.nan)
    # occupation of bin i is [tau_m(e_{i+1}), tau_m(e_i)]; fold outside values
    T = an.tau_m(edges[None, :], th[:, None])  # (K, B+1)
    T[:, 0] = np.inf
    T[:, -1] = 0.0
    t0, t1 = T[:, 1:], T[:, :-1]
    if an.int_P is not None:
        mass = an.int_P(t0, t1, th[:, None])
    else:
        floor = model.m_floor or 1e-3
        # cut the final infinite segment where P is negligible
        t_end = np.where(np.isinf(t1), t0 + 40.0 / floor, t1)
        t_beg = np.where(np.isinf(t0), t_end, t0)
        # bins wholly below the floor are never visited
        empty = np.isinf(t_beg)
        t_beg[empty] = t_end[empty] = 0.0
        mass = np.zeros_like(t_beg)
        # split long segments so 16 nodes resolve the exponential decay
        pieces = 8
        for k in range(pieces):
            a = t_beg + (t_end - t_beg) * k / pieces
            b = t_beg + (t_end - t_beg) * (k + 1) / pieces
            mass += _gl_integral(lambda t: an.P(t, th[:, None, None]), a, b)
    mass = np.where(np.isfinite(mass), mass, 0.0)
    return wts @ np.clip(mass, 0.0, None)


def _acid_ode(model, theta, wts, edges, opts):
    B = len(edges) - 1
    out = np.zeros(B)
    lower, width = edges[0], edges[1] - edges[0]
    n0 = model.n0
    uniform = np.allclose(np.diff(edges), width)
    if not uniform:
        raise UnsupportedModel("the ode path needs a uniform ACID mesh")

    def scalar(X):
        return np.asarray(model.intensity(X), dtype=float)

    for th, wt in zip(theta, wts):
        x0 = model.extend(th if th.size else None)
        sol = solve_flow(model, x0, None, opts, with_Q=True)
        grid = _fine_grid(sol.t, opts.substeps)
        times, cells = _segments_1d(sol, n0, scalar, grid, lower, width, B, opts.event_tol)
        Y = sol.sol(times)
        Q = Y[n0 + 1]
        end = sol.y[:, -1]
        lam_end = max(float(model.intensity(end[:n0])), 1e-300)
        q_end = end[n0 + 1] + end[n0] / lam_end  # tail at the frozen final rate
        mass = np.diff(np.append(Q, q_end))
        np.add.at(out, np.clip(cells, 0, B - 1), wt * mass)
    return out


def _acid_batched(model, p0, edges, opts, dt):
    part = p0.partition
    B = len(edges) - 1
    R = part.representatives().shape[1]
    N = part.size
    cols = np.repeat(np.arange(N), R)
    theta = part.representatives().reshape(N * R, part.n).T
    x0 = model.extend(theta) if part.n else model.extend(None)[:, None]
    start = np.clip(np.searchsorted(edges, model.intensity(x0), side="right") - 1, 0, B - 1)
    rl = _RunLength(np.atleast_1d(start), cols)

    def visit(xm, P, Pn, dt):
        b = np.clip(np.searchsorted(edges, model.intensity(xm), side="right") - 1, 0, B - 1)
        rl.add(b, 0.5 * dt * (P + Pn))

    x, P, _ = _batched_trajectories(model, part, opts, dt, [visit])
    rl.acc += P / np.maximum(model.intensity(x), 1e-300)
    A = rl.finish((B, N), 1.0 / R)
    return A @ (p0.values * part.volume)


def acid_pdf(model: BretpModel, p0: BoundaryDensity, edges=None, dm=None, bins=1000,
             range_=None, method="auto", opts=DEFAULT_OPTIONS, dt=0.01) -> AcidDistribution:
    """Bin weights ``p_i = sum_j w a_j int 1[m(tau, theta_j) in bin i] P dtau``.

    The mesh is given by ``edges``, by ``dm`` or by ``bins`` over
    ``range_`` (default ``model.acid_range``).  Mass outside the mesh is
    folded into the end bins.
    """
    edges = _acid_edges(model, edges, dm, bins, range_)
    theta, wts = _rep_weights(p0)
    if method == "auto":
        an = model.analytic
        if model.monotone_m and an.tau_m is not None and an.P is not None:
            method = "analytic"
        elif model.n <= 1:
            method = "ode"
        else:
            method = "batched"
    if method == "analytic":
        raw = _acid_analytic(model, theta, wts, edges)
    elif method == "ode":
        raw = _acid_ode(model, theta, wts, edges, opts)
    elif method == "batched":
        raw = _acid_batched(model, p0, edges, opts, dt)
    else:
        raise ValueError(f"unknown method {method!r}")
    total = float(raw.sum())
    acid = AcidDistribution(edges, raw, total,
                            {"method": method, "truncated_mass": p0.truncated_mass,
                             "fixed_point_residual": p0.residual})
    if acid.weights.max() > 0.5 and not model.point_mass:
        warnings.warn(f"one bin holds {acid.weights.max():.2f} of the mass", MeshTooCoarse)
    return acid


def acid(model: BretpModel, cells=200, reps=1, L=15, bins=1000, method="auto",
         opts=DEFAULT_OPTIONS, dt=0.01, edges=None):
    """Boundary density and ACID in one call."""
    p0, I = boundary_density(model, cells, reps, L, opts=opts, dt=dt)
    return acid_pdf(model, p0, edges=edges, bins=bins, method=method, opts=opts, dt=dt), p0, I


# ---------------------------------------------------------------------------
# direct method

def direct_fixed_point(model: BretpModel, grid=1000, L=20000, tol=1e-13, nodes=8):
    """Fixed point of ``p(z) = int K(z, z') p(z') dz'`` on the intensity axis.

    ``K(z, z') = l(z') G(z) / (-A(z) G(f(z')))`` for ``z' > f^{-1}(z)``, where
    ``A`` is the drift of the intensity and ``G' = -l G / A``.  ``G`` has an
    algebraic factor ``(z - z_eq)^e`` at the rest point ``z_eq``; the inner
    integral over ``z`` is taken in the variable ``(z - z_eq)^e`` to absorb
    it.  ``grid`` is an edge array or a bin count.
    """
    d = model.direct
    if d is None:
        raise UnsupportedModel(f"no direct-method kernel for {model.name}")
    zeq, e = d["zeq"], d["exponent"]
    if np.isscalar(grid):
        edges = np.linspace(d["lower"], d["upper"], int(grid) + 1)
    else:
        edges = np.asarray(grid, dtype=float)
    if edges[0] < zeq - 1e-14 or np.any(edges[1:] == zeq):
        raise SingularKernel(f"mesh contains the rest point {zeq}")
    N = len(edges) - 1
    h = np.diff(edges)
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    lam, f, finv, lnG, negA = d["lam"], d["f"], d["finv"], d["lnG_reg"], d["negA_reg"]

    def g2(zp):
        fz = f(zp)
        return lam(zp) * np.exp(-e * np.log(fz - zeq) - lnG(fz))

    def gl(a, b, fun):
        mid = 0.5 * (a + b)[..., None]
        half = 0.5 * (b - a)[..., None]
        return half[..., 0] * (fun(mid + half * gx) @ gw)

    full = gl(edges[:-1], edges[1:], g2)
    ua = (edges[:-1] - zeq) ** e
    ub = (edges[1:] - zeq) ** e
    u = 0.5 * (ua + ub)[:, None] + 0.5 * (ub - ua)[:, None] * gx
    wu = 0.5 * (ub - ua)[:, None] * gw
    z = zeq + u ** (1.0 / e)
    wz = wu * np.exp(lnG(z)) / negA(z) / e
    low = np.clip(finv(z), edges[0], edges[-1])
    jl = np.clip(np.searchsorted(edges, low, side="right") - 1, 0, N - 1)
    part = gl(low, edges[jl + 1], g2)
    # W[i, j] = sum_q wz[i, q] * (full[j] if j > jl else part if j == jl else 0) / h[j]
    W = np.zeros((N, N))
    J = np.arange(N)
    for q in range(nodes):
        mask = J[None, :] > jl[:, q, None]
        W += wz[:, q, None] * np.where(mask, full[None, :], 0.0)
        W[np.arange(N), jl[:, q]] += wz[:, q] * part[:, q]
    W /= h[None, :]
    p = np.full(N, 1.0 / N)
    eig = 1.0
    it = 0
    for it in range(1, L + 1):
        pn = W @ p
        eig = pn.sum()
        pn /= eig
        done = np.abs(pn - p).sum() < tol
        p = pn
        if done:
            break
    resid = float(np.abs(W @ p - p).sum())
    diag = {"eigenvalue": float(eig), "iterations": it, "residual": resid, "equilibrium": zeq,
            "edge_mass_at_equilibrium": float(p[0]), "method": "direct"}
    return AcidDistribution(edges, p, 1.0, diag)


# ---------------------------------------------------------------------------
# comparison

def _quantile_pieces(d: AcidDistribution):
    keep = d.weights > 0
    lefts = d.edges[:-1][keep]
    rights = d.edges[1:][keep]
    w = d.weights[keep]
    u = np.concatenate([[0.0], np.cumsum(w)])
    u[-1] = 1.0
    return u, lefts, rights, w


def _quantile(pieces, uq, ref):
    u, lefts, rights, w = pieces
    k = np.clip(np.searchsorted(u, ref, side="right") - 1, 0, len(w) - 1)
    frac = np.clip((uq - u[k]) / w[k], 0.0, 1.0)
    return lefts[k] + frac * (rights[k] - lefts[k])


def wasserstein1(a: AcidDistribution, b: AcidDistribution) -> float:
    """Exact W1 between two binned laws with uniform mass inside bins.

    Uses ``W1 = int_0^1 |Q_a(u) - Q_b(u)| du`` with piecewise-linear quantile
    functions, which also handles atoms (zero-width bins).
    """
    pa, pb = _quantile_pieces(a), _quantile_pieces(b)
    U = np.union1d(pa[0], pb[0])
    lo, hi = U[:-1], U[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    mid = 0.5 * (lo + hi)
    d0 = _quantile(pa, lo, mid) - _quantile(pb, lo, mid)
    d1 = _quantile(pa, hi, mid) - _quantile(pb, hi, mid)
    du = hi - lo
    same = d0 * d1 >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (d0 ** 2 + d1 ** 2) / (2.0 * np.abs(d0 - d1)) * du
    val = np.where(same, 0.5 * (np.abs(d0) + np.abs(d1)) * du, cross)
    return float(np.sum(val))
