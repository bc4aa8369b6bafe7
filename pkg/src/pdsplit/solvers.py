"""Accelerated primal-dual algorithms for ``min f(x) + g(y) s.t. Ax + By = b``.

Three step functions share one state layout:

* :func:`step_joint` updates ``(x, y)`` together with the fully implicit
  multiplier,
* :func:`step_split` updates ``x`` then ``y`` with a semi-implicit multiplier,
* :func:`step_nonseparable` is the joint step with no ``y`` block.

Each step returns the new :class:`SolverState` and a :class:`StepWorkspace`
holding the intermediate multipliers, which :func:`scheme_residual` uses to
check the discretized inclusions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import IterationTrace, energy_at, residual_row
from .problem import constraint_residual
from .schedules import ScheduleError, coeffs_at, validate_assumption1, validate_assumption2
from .subproblem import (
    NumericalFailure,
    assemble_joint,
    assemble_x_only,
    assemble_x_split,
    assemble_y_split,
    default_inner_tol,
    solve_composite,
)

__all__ = [
    "SolverState",
    "StepWorkspace",
    "InnerConfig",
    "init_state",
    "step_joint",
    "step_split",
    "step_nonseparable",
    "scheme_residual",
    "STEPS",
    "validate_for",
    "run",
]


@dataclass
class SolverState:
    k: int
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    Z: np.ndarray
    H: np.ndarray

    def Z_delta(self, sched):
        return sched.delta * self.Z + (1.0 - sched.delta * sched.gamma) * self.x

    def H_delta(self, sched):
        return sched.delta * self.H + (1.0 - sched.delta * sched.gamma) * self.y

    def copy(self):
        return SolverState(self.k, self.x.copy(), self.y.copy(), self.lam.copy(),
                           self.Z.copy(), self.H.copy())


@dataclass
class StepWorkspace:
    coeffs: object
    lambda_tilde: Optional[np.ndarray] = None
    lambda_tilde_1: Optional[np.ndarray] = None
    lambda_tilde_2: Optional[np.ndarray] = None
    lambda_bar: Optional[np.ndarray] = None
    lambda_hat: Optional[np.ndarray] = None
    x_tilde: Optional[np.ndarray] = None
    y_tilde: Optional[np.ndarray] = None
    inner_residuals: list = field(default_factory=list)
    inner_iterations: int = 0
    inner_converged: bool = True

    @property
    def inner_residual(self):
        return max(self.inner_residuals, default=0.0)


@dataclass(frozen=True)
class InnerConfig:
    """Inner-solve settings. ``tol=None`` means ``min(1e-8, 1/k^2)``."""

    tol: Optional[float] = None
    max_inner: int = 10_000

    def tol_at(self, k):
        return default_inner_tol(k) if self.tol is None else self.tol


def init_state(p, sched, x0=None, y0=None, lambda0=None):
    """``x_1 = x_0``, ``Z_1 = gamma x_0`` (same for y), ``lambda_1 = lambda_0``."""
    x0 = np.zeros(p.n_x) if x0 is None else np.array(x0, dtype=float)
    y0 = np.zeros(p.n_y) if y0 is None else np.array(y0, dtype=float)
    lambda0 = np.zeros(p.m) if lambda0 is None else np.array(lambda0, dtype=float)
    p.check_point(x0, y0, lambda0)
    return SolverState(1, x0, y0, lambda0, sched.gamma * x0, sched.gamma * y0)


def _solve(q, warm, inner, k, ws):
    res = solve_composite(q, warm, inner.tol_at(k), inner.max_inner)
    ws.inner_residuals.append(res.residual)
    ws.inner_iterations += res.iterations
    ws.inner_converged = ws.inner_converged and res.converged
    return res.solution


def _advance(sched, coeffs, x_old, x_new):
    """``Z_{k+1} = (gamma + 1/alpha) x_{k+1} - x_k / alpha`` and its delta blend."""
    inv_a = 1.0 / coeffs.alpha_k
    Z = (sched.gamma + inv_a) * x_new - inv_a * x_old
    Zd = sched.delta * Z + (1.0 - sched.delta * sched.gamma) * x_new
    return Z, Zd


def _lambda_update(p, coeffs, lam, Zd, Hd):
    return lam + coeffs.ab * (p.A.apply(Zd) + p.B.apply(Hd) - p.b)


def step_joint(p, sched, state, inner=InnerConfig()):
    c = coeffs_at(sched, state.k, p.mu_f, p.mu_g)
    ws = StepWorkspace(c)
    r = constraint_residual(p, state.x, state.y)
    ws.lambda_tilde = state.lam - sched.delta * c.beta_k * r
    ws.x_tilde = state.x + (state.Z - sched.gamma * state.x) / c.eta_f_k
    ws.y_tilde = state.y + (state.H - sched.gamma * state.y) / c.eta_g_k
    q = assemble_joint(p, c, ws.lambda_tilde, ws.x_tilde, ws.y_tilde)
    u = _solve(q, np.concatenate([state.x, state.y]), inner, state.k, ws)
    x1, y1 = u[:p.n_x], u[p.n_x:]
    Z1, Zd1 = _advance(sched, c, state.x, x1)
    H1, Hd1 = _advance(sched, c, state.y, y1)
    lam1 = _lambda_update(p, c, state.lam, Zd1, Hd1)
    ws.lambda_bar = ws.lambda_hat = lam1
    return SolverState(state.k + 1, x1, y1, lam1, Z1, H1), ws


def step_split(p, sched, state, inner=InnerConfig()):
    c = coeffs_at(sched, state.k, p.mu_f, p.mu_g)
    ws = StepWorkspace(c)
    r = constraint_residual(p, state.x, state.y)
    base = state.lam - sched.delta * c.beta_k * r
    ws.lambda_tilde_1 = base + sched.delta * c.ab * p.B.apply(state.H - sched.gamma * state.y)
    ws.x_tilde = state.x + (state.Z - sched.gamma * state.x) / c.eta_f_k
    qx = assemble_x_split(p, c, ws.lambda_tilde_1, ws.x_tilde, state.y)
    x1 = _solve(qx, state.x, inner, state.k, ws)
    Z1, Zd1 = _advance(sched, c, state.x, x1)

    ws.lambda_tilde_2 = base
    ws.y_tilde = state.y + (state.H - sched.gamma * state.y) / c.eta_g_k
    qy = assemble_y_split(p, c, ws.lambda_tilde_2, ws.y_tilde, x1)
    y1 = _solve(qy, state.y, inner, state.k, ws)
    H1, Hd1 = _advance(sched, c, state.y, y1)

    lam1 = _lambda_update(p, c, state.lam, Zd1, Hd1)
    ws.lambda_bar = _lambda_update(p, c, state.lam, Zd1, state.H_delta(sched))
    ws.lambda_hat = lam1
    return SolverState(state.k + 1, x1, y1, lam1, Z1, H1), ws


def step_nonseparable(p, sched, state, inner=InnerConfig()):
    if p.n_y != 0:
        raise ValueError("the non-separable step needs an instance without a y block")
    c = coeffs_at(sched, state.k, p.mu_f, p.mu_g)
    ws = StepWorkspace(c)
    ws.lambda_tilde = state.lam - sched.delta * c.beta_k * (p.A.apply(state.x) - p.b)
    ws.x_tilde = state.x + (state.Z - sched.gamma * state.x) / c.eta_f_k
    q = assemble_x_only(p, c, ws.lambda_tilde, ws.x_tilde)
    x1 = _solve(q, state.x, inner, state.k, ws)
    Z1, Zd1 = _advance(sched, c, state.x, x1)
    lam1 = state.lam + c.ab * (p.A.apply(Zd1) - p.b)
    ws.lambda_bar = ws.lambda_hat = lam1
    return SolverState(state.k + 1, x1, state.y.copy(), lam1, Z1, state.H.copy()), ws


STEPS = {"joint": step_joint, "split": step_split, "nonseparable": step_nonseparable}


def scheme_residual(p, sched, prev, nxt, ws):
    """Largest violation of the three discretized relations linking ``prev``
    and ``nxt``: the x inclusion, the y inclusion and the multiplier update."""
    c = ws.coeffs
    ab = c.ab
    Zd1 = nxt.Z_delta(sched)
    Hd1 = nxt.H_delta(sched)
    vx = (-(nxt.Z - prev.Z) / ab - p.A.adjoint(ws.lambda_bar) - c.epsilon_k * nxt.x
          + p.mu_f * (nxt.x - Zd1))
    rx = p.f.subdiff_distance(nxt.x, vx)
    ry = 0.0
    if p.n_y:
        vy = (-(nxt.H - prev.H) / ab - p.B.adjoint(ws.lambda_hat) - c.epsilon_k * nxt.y
              + p.mu_g * (nxt.y - Hd1))
        ry = p.g.subdiff_distance(nxt.y, vy)
    rl = float(np.linalg.norm((nxt.lam - prev.lam) / c.alpha_k
                              - c.beta_k * (p.A.apply(Zd1) + p.B.apply(Hd1) - p.b)))
    return max(rx, ry, rl)


def validate_for(algorithm, p, sched, horizon):
    """Schedule report for ``algorithm``: :func:`validate_assumption2` for the
    splitting algorithm, :func:`validate_assumption1` otherwise."""
    if algorithm == "split" and p.n_y:
        return validate_assumption2(sched, p.B.norm(), p.mu_g, horizon)
    return validate_assumption1(sched, horizon)


def _probe(p, sched, state, saddle, point, energy, t0):
    row, clamped = residual_row(p, state, saddle, point)
    if energy and saddle is not None:
        row["energy"] = energy_at(p, sched, state, saddle).total
    row["wall_ms"] = 1e3 * (time.perf_counter() - t0)
    return row, clamped


def run(algorithm, p, sched, max_iter, x0=None, y0=None, lambda0=None, *, saddle=None,
        point=None, stride=1, inner=InnerConfig(), feas_tol=None, obj_tol=None, energy=False,
        strict=False, callback=None):
    """Run ``algorithm`` for up to ``max_iter`` steps and record a trace.

    Parameters
    ----------
    algorithm : {"joint", "split", "nonseparable"}
    saddle : SaddlePoint, optional
        Reference solution for the residual columns and the energy.
    point : tuple of arrays, optional
        Target of ``dist_to_point``; defaults to the saddle's primal part.
    stride : int
        A row is recorded at ``k = 1``, every ``stride`` steps and at the end.
    feas_tol, obj_tol : float, optional
        Stop early at a recorded row meeting both given tolerances.
    strict : bool
        Raise :class:`ScheduleError` if the schedule fails its assumption
        over the horizon; otherwise the report is only stored in ``meta``.
    callback : callable, optional
        ``callback(prev, next, workspace)`` after every step.

    Returns
    -------
    IterationTrace
        With ``final_state`` set. A :class:`NumericalFailure` carries the
        index of the failing iteration.
    """
    if algorithm not in STEPS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if max_iter < 0 or stride < 1:
        raise ValueError("max_iter must be >= 0 and stride >= 1")
    step = STEPS[algorithm]
    report = validate_for(algorithm, p, sched, max(max_iter + 1, 2))
    if strict and not report.passed:
        raise ScheduleError("schedule fails its assumption:\n" + str(report))
    trace = IterationTrace(meta={"algorithm": algorithm, "schedule_valid": report.passed})
    state = init_state(p, sched, x0, y0, lambda0)
    t0 = time.perf_counter()
    row, clamped = _probe(p, sched, state, saddle, point, energy, t0)
    trace.append(row, clamped)
    inner_max = 0.0
    for _ in range(max_iter):
        k = state.k
        try:
            nxt, ws = step(p, sched, state, inner)
        except NumericalFailure as exc:
            raise NumericalFailure(f"iteration {k}: {exc}", iteration=k) from exc
        if not (np.all(np.isfinite(nxt.x)) and np.all(np.isfinite(nxt.y))
                and np.all(np.isfinite(nxt.lam))):
            raise NumericalFailure(f"iteration {k}: non-finite iterate", iteration=k)
        if callback is not None:
            callback(state, nxt, ws)
        state = nxt
        inner_max = max(inner_max, ws.inner_residual)
        last = state.k == max_iter + 1
        if (state.k - 1) % stride == 0 or last:
            row, clamped = _probe(p, sched, state, saddle, point, energy, t0)
            row["inner_residual"] = inner_max
            inner_max = 0.0
            trace.append(row, clamped)
            if feas_tol is not None or obj_tol is not None:
                ok = feas_tol is None or row["feasibility"] <= feas_tol
                ok = ok and (obj_tol is None or row["objective_residual"] <= obj_tol)
                if ok:
                    break
    trace.final_state = state
    return trace
