"""Reference methods: two-block ADMM, Chambolle-Pock and its accelerated variant.

ADMM doubles as the internal oracle: :func:`reference_solution` runs it to a
small KKT residual and returns a :class:`SaddlePoint`.

Chambolle-Pock runs on ``min_u F(K u) + G(u)``. For the reformulated
instances ``min f(x) + g(y) s.t. x - M y = b`` the encoding is ``K = M``,
``F = f(. + b)`` and ``G = g`` (see :func:`cp_problem_from_instance`).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .functions import ShiftedL1, ZeroFunction
from .diagnostics import IterationTrace, residual_row
from .problem import SaddlePoint, constraint_residual, kkt_residual, objective_value
from .subproblem import CompositeQuadratic, NumericalFailure, solve_composite

__all__ = [
    "BaselineConfig",
    "ADMMState",
    "CPProblem",
    "CPState",
    "admm_init",
    "admm_step",
    "cp_problem_from_instance",
    "cp_init",
    "cp_step",
    "cp_scvx_step",
    "reference_solution",
    "run_baseline",
]

METHODS = ("admm", "cp", "cp_scvx")


@dataclass(frozen=True)
class BaselineConfig:
    """Settings of one baseline.

    Parameters
    ----------
    method : {"admm", "cp", "cp_scvx"}
    rho : float
        ADMM penalty, or the dual step of Chambolle-Pock.
    tau : float, optional
        Primal step of Chambolle-Pock. Defaults to
        ``step_fraction / (rho ||K||^2)``.
    theta : float
        Extrapolation weight of plain Chambolle-Pock, in [0, 1].
    step_fraction : float
        Fraction of the largest stable step used when ``tau`` is omitted.
    gamma_cp : float, optional
        Acceleration modulus of the strongly convex variant. Defaults to the
        strong-convexity modulus of ``G``.
    prox_weight : float, optional
        Weight of the proximal term ``(s/2)||y - y_k||^2`` added to ADMM
        subproblems that do not reduce to a coordinate-wise prox. Defaults to
        ``1e-3 * rho * ||op||^2``.
    inner_tol : float
        Tolerance of ADMM subproblem solves.
    """

    method: str = "admm"
    rho: float = 1.0
    tau: Optional[float] = None
    theta: float = 1.0
    step_fraction: float = 0.999
    gamma_cp: Optional[float] = None
    prox_weight: Optional[float] = None
    inner_tol: float = 1e-12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown baseline method {self.method!r}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if not 0.0 < self.step_fraction < 1.0:
            raise ValueError("step_fraction must lie in (0, 1)")

    def to_dict(self):
        return {k: getattr(self, k) for k in ("method", "rho", "tau", "theta", "step_fraction",
                                              "gamma_cp", "prox_weight", "inner_tol")}

    @classmethod
    def from_dict(cls, doc):
        known = {"method", "rho", "tau", "theta", "step_fraction", "gamma_cp", "prox_weight", "inner_tol"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown baseline fields: {sorted(extra)}")
        return cls(**doc)


# -- ADMM ---------------------------------------------------------------------


@dataclass
class ADMMState:
    k: int
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    inner_residual: float = 0.0


def admm_init(p, x0=None, y0=None, lambda0=None):
    x0 = np.zeros(p.n_x) if x0 is None else np.array(x0, dtype=float)
    y0 = np.zeros(p.n_y) if y0 is None else np.array(y0, dtype=float)
    lambda0 = np.zeros(p.m) if lambda0 is None else np.array(lambda0, dtype=float)
    p.check_point(x0, y0, lambda0)
    return ADMMState(1, x0, y0, lambda0)


def _needs_prox_term(op):
    return op.gram_diagonal() is None or np.any(op.gram_diagonal() <= 0)


def _admm_block(fn, op, rhs, rho, current, cfg):
    """argmin fn(u) + rho/2 ||op u - rhs||^2 (+ proximal term if needed)."""
    s = 0.0
    if _needs_prox_term(op):
        s = cfg.prox_weight if cfg.prox_weight is not None else 1e-3 * rho * op.norm() ** 2
    lin = rho * op.adjoint(rhs) + s * current
    q = CompositeQuadratic((fn,), [(rho, (op,))], s, lin)
    res = solve_composite(q, current, cfg.inner_tol)
    return res.solution, res.residual


def admm_step(p, state, cfg=BaselineConfig()):
    """One sweep of scaled two-block ADMM: x, then y, then dual ascent."""
    if cfg.method != "admm":
        raise ValueError("admm_step needs method='admm'")
    rho = cfg.rho
    u = state.lam / rho
    x, rx = _admm_block(p.f, p.A, p.b - p.B.apply(state.y) - u, rho, state.x, cfg)
    y, ry = state.y, 0.0
    if p.n_y:
        y, ry = _admm_block(p.g, p.B, p.b - p.A.apply(x) - u, rho, state.y, cfg)
    lam = state.lam + rho * constraint_residual(p, x, y)
    return ADMMState(state.k + 1, x, y, lam, max(rx, ry))


# -- Chambolle-Pock -------------------------------------------------------------


@dataclass(frozen=True)
class CPProblem:
    """``min_u F(K u) + G(u)``."""

    K: object
    F: object
    G: object

    def __post_init__(self):
        if self.K.shape != (self.F.dimension, self.G.dimension):
            raise ValueError("K must map the G domain into the F domain")

    def objective(self, u):
        return self.F.value(self.K.apply(u)) + self.G.value(u)


def cp_problem_from_instance(p):
    """Encode ``min f(x) + g(y) s.t. x + B y = b`` as ``F(K y) + G(y)`` with
    ``K = -B``, ``F = f(. + b)``, ``G = g``."""
    if p.A.kind != "identity" or p.n_y == 0:
        raise ValueError("Chambolle-Pock encoding needs A = Identity and a y block")
    if not np.any(p.b):
        F = p.f
    elif isinstance(p.f, ShiftedL1):
        F = ShiftedL1(p.f.dimension, p.f.w, p.f.shift - p.b)
    elif isinstance(p.f, ZeroFunction):
        F = p.f
    else:
        raise ValueError("cannot absorb a nonzero right-hand side into this f")
    return CPProblem(-p.B, F, p.g)


@dataclass
class CPState:
    k: int
    u: np.ndarray
    u_bar: np.ndarray
    z: np.ndarray
    tau: float
    sigma: float
    theta: float


def _cp_steps(cp, cfg):
    sigma = cfg.rho
    tau = cfg.tau if cfg.tau is not None else cfg.step_fraction / (sigma * cp.K.norm() ** 2)
    if tau * sigma * cp.K.norm() ** 2 >= 1.0:
        raise ValueError("step sizes violate tau * sigma * ||K||^2 < 1")
    return tau, sigma


def cp_init(cp, cfg, u0=None, z0=None):
    tau, sigma = _cp_steps(cp, cfg)
    u0 = np.zeros(cp.G.dimension) if u0 is None else np.array(u0, dtype=float)
    z0 = np.zeros(cp.F.dimension) if z0 is None else np.array(z0, dtype=float)
    return CPState(1, u0, u0.copy(), z0, tau, sigma, cfg.theta)


def _dual_prox(F, v, sigma):
    """prox of sigma F* by the Moreau identity."""
    return v - sigma * F.prox(v / sigma, sigma)


def cp_step(cp, state, cfg):
    """Dual prox, primal prox, extrapolation with fixed steps."""
    if cfg.method != "cp":
        raise ValueError("cp_step needs method='cp'")
    z = _dual_prox(cp.F, state.z + state.sigma * cp.K.apply(state.u_bar), state.sigma)
    u = cp.G.prox(state.u - state.tau * cp.K.adjoint(z), 1.0 / state.tau)
    u_bar = u + state.theta * (u - state.u)
    return CPState(state.k + 1, u, u_bar, z, state.tau, state.sigma, state.theta)


def cp_scvx_step(cp, state, cfg):
    """Accelerated step for strongly convex ``G``:
    ``theta = 1/sqrt(1 + 2 g tau)``, ``tau <- theta tau``, ``sigma <- sigma/theta``."""
    if cfg.method != "cp_scvx":
        raise ValueError("cp_scvx_step needs method='cp_scvx'")
    g = cfg.gamma_cp if cfg.gamma_cp is not None else cp.G.strong_convexity
    if not g > 0:
        raise ValueError("the accelerated variant needs a strongly convex G")
    z = _dual_prox(cp.F, state.z + state.sigma * cp.K.apply(state.u_bar), state.sigma)
    u = cp.G.prox(state.u - state.tau * cp.K.adjoint(z), 1.0 / state.tau)
    theta = 1.0 / math.sqrt(1.0 + 2.0 * g * state.tau)
    u_bar = u + theta * (u - state.u)
    return CPState(state.k + 1, u, u_bar, z, theta * state.tau, state.sigma / theta, theta)


# -- oracle ---------------------------------------------------------------------


def reference_solution(p, tol=1e-8, max_iter=200_000, cfg=None, x0=None, y0=None, lambda0=None,
                       known_value=None, check_every=10):
    """High-accuracy saddle point by ADMM.

    Iterates until ``kkt_residual <= tol`` or ``max_iter`` sweeps. The result
    always carries its achieved residual; ``converged`` is False when the cap
    was hit. If ``known_value`` is given, ``converged`` also requires
    ``|phi_star - known_value| <= 10 * tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    cfg = cfg or BaselineConfig("admm", rho=1.0, inner_tol=min(1e-12, tol * 1e-2))
    st = admm_init(p, x0, y0, lambda0)
    best = None
    for it in range(1, max_iter + 1):
        st = admm_step(p, st, cfg)
        if it % check_every and it != max_iter:
            continue
        cand = SaddlePoint(st.x, st.y, st.lam, objective_value(p, st.x, st.y))
        cand.kkt = kkt_residual(p, cand)
        if best is None or cand.kkt < best.kkt:
            best = cand
        if cand.kkt <= tol:
            break
    best.converged = best.kkt <= tol
    if known_value is not None and abs(best.phi_star - known_value) > 10 * tol:
        best.converged = False
    return best


@dataclass
class _PrimalView:
    k: int
    x: np.ndarray
    y: np.ndarray


def run_baseline(p, cfg, max_iter, *, saddle=None, point=None, stride=1, x0=None, y0=None,
                 lambda0=None):
    """Run a baseline on ``p`` and record a trace with the solver schema.

    Chambolle-Pock variants work on :func:`cp_problem_from_instance`; their
    ``x`` is recovered as ``b - B y``.
    """
    if max_iter < 0 or stride < 1:
        raise ValueError("max_iter must be >= 0 and stride >= 1")
    trace = IterationTrace(meta={"algorithm": cfg.method})
    t0 = time.perf_counter()

    def record(view, inner=0.0):
        row, clamped = residual_row(p, view, saddle, point)
        row["inner_residual"] = inner
        row["wall_ms"] = 1e3 * (time.perf_counter() - t0)
        trace.append(row, clamped)

    if cfg.method == "admm":
        st = admm_init(p, x0, y0, lambda0)
        record(st)
        for _ in range(max_iter):
            st = admm_step(p, st, cfg)
            if (st.k - 1) % stride == 0 or st.k == max_iter + 1:
                record(st, st.inner_residual)
        trace.final_state = st
        return trace

    cp = cp_problem_from_instance(p)
    step = cp_step if cfg.method == "cp" else cp_scvx_step
    st = cp_init(cp, cfg, y0)

    def view(s):
        return _PrimalView(s.k, p.b - p.B.apply(s.u), s.u)

    record(view(st))
    for _ in range(max_iter):
        st = step(cp, st, cfg)
        if not np.all(np.isfinite(st.u)):
            raise NumericalFailure(f"iteration {st.k - 1}: non-finite iterate", iteration=st.k - 1)
        if (st.k - 1) % stride == 0 or st.k == max_iter + 1:
            record(view(st))
    trace.final_state = st
    return trace
