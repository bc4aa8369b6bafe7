"""Per-iteration argmin subproblems.

Each outer step minimizes

    h(u) + 1/2 <u, Q u> - <c, u>

over a (possibly two-block) variable ``u``, where ``h`` is blockwise
proximable and ``Q = sum_i sigma_i G_i^T G_i + diag(shift)``. Each ``G_i`` is a
row of block operators, so ``G_i u = sum_j G_ij u_j``.

When ``Q`` folds to a diagonal matrix the minimizer is a coordinate-wise prox
and is returned exactly. When ``Q`` is a positive diagonal plus one low-rank
term ``sigma G^T G`` with few rows, a semismooth Newton method is run on the
dual in the row space of ``G``. Otherwise an accelerated proximal gradient
method with function-value restart is run from a warm start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NumericalFailure",
    "CompositeQuadratic",
    "SubproblemResult",
    "solve_composite",
    "assemble_joint",
    "assemble_x_split",
    "assemble_y_split",
    "assemble_x_only",
    "default_inner_tol",
]


class NumericalFailure(ArithmeticError):
    """NaN or Inf appeared in an iterate."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


def default_inner_tol(k):
    return min(1e-8, 1.0 / float(k) ** 2)


@dataclass
class CompositeQuadratic:
    """Data of ``h(u) + 1/2 <u,Qu> - <c,u>``.

    ``proxable`` holds one function per block; ``quad_terms`` is a list of
    ``(sigma, (G_1, ..., G_nb))``; ``diag_shift`` is a scalar or one entry
    per coordinate.
    """

    proxable: tuple
    quad_terms: list
    diag_shift: object
    linear: np.ndarray
    lipschitz: float = None

    def __post_init__(self):
        self.sizes = tuple(fn.dimension for fn in self.proxable)
        self.offsets = np.cumsum((0,) + self.sizes)
        n = int(self.offsets[-1])
        self.linear = np.asarray(self.linear, dtype=float)
        if self.linear.shape != (n,):
            raise ValueError(f"linear term has shape {self.linear.shape}, expected ({n},)")
        shift = np.asarray(self.diag_shift, dtype=float)
        self.shift = np.broadcast_to(shift, (n,)) if shift.ndim == 0 else shift
        if self.shift.shape != (n,) or np.any(self.shift < 0):
            raise ValueError("diag_shift must be nonnegative with one entry per coordinate")
        for sigma, ops in self.quad_terms:
            if sigma < 0 or len(ops) != len(self.sizes):
                raise ValueError("quad term needs sigma >= 0 and one operator per block")
            for op, size in zip(ops, self.sizes):
                if op.cols != size or op.rows != ops[0].rows:
                    raise ValueError("quad term operator shapes do not match the blocks")
        if self.lipschitz is None:
            self.lipschitz = self._lipschitz_bound()

    @property
    def dimension(self):
        return int(self.offsets[-1])

    def _lipschitz_bound(self):
        total = float(np.max(self.shift)) if self.dimension else 0.0
        for sigma, ops in self.quad_terms:
            total += sigma * sum(op.norm() ** 2 for op in ops)
        return total

    def blocks(self, u):
        return [u[self.offsets[j]:self.offsets[j + 1]] for j in range(len(self.sizes))]

    def folded_diagonal(self):
        """Diagonal of Q if every quad term folds to a diagonal, else None."""
        diag = np.array(self.shift, dtype=float)
        for sigma, ops in self.quad_terms:
            nonzero = [j for j, op in enumerate(ops) if op.kind != "zero"]
            if len(nonzero) > 1:
                return None
            for j in nonzero:
                gd = ops[j].gram_diagonal()
                if gd is None:
                    return None
                diag[self.offsets[j]:self.offsets[j + 1]] += sigma * gd
        return diag

    def q_apply(self, u):
        out = self.shift * u
        parts = self.blocks(u)
        for sigma, ops in self.quad_terms:
            gu = None
            for op, part in zip(ops, parts):
                if op.kind == "zero":
                    continue
                t = op.apply(part)
                gu = t if gu is None else gu + t
            if gu is None:
                continue
            for j, op in enumerate(ops):
                if op.kind != "zero":
                    out[self.offsets[j]:self.offsets[j + 1]] += sigma * op.adjoint(gu)
        return out

    def prox(self, v, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.empty_like(v)
        for j, fn in enumerate(self.proxable):
            sl = slice(self.offsets[j], self.offsets[j + 1])
            r = rho if rho.ndim == 0 else rho[sl]
            out[sl] = fn.prox(v[sl], r)
        return out

    def h_value(self, u):
        return sum(fn.value(part) for fn, part in zip(self.proxable, self.blocks(u)))

    def objective(self, u, qu=None):
        if qu is None:
            qu = self.q_apply(u)
        return self.h_value(u) + 0.5 * float(np.dot(u, qu)) - float(np.dot(self.linear, u))

    def dense_term(self, max_rows):
        """``(sigma, G)`` with ``G`` as a dense matrix when there is exactly
        one quad term with at most ``max_rows`` rows, else None."""
        if len(self.quad_terms) != 1:
            return None
        sigma, ops = self.quad_terms[0]
        if ops[0].rows > max_rows or sigma <= 0:
            return None
        mats = [op.matrix if op.kind == "dense" else op.to_dense() for op in ops]
        G = mats[0] if len(mats) == 1 else np.hstack(mats)
        return sigma, G

    def prox_derivative(self, v, rho):
        out = np.empty_like(v)
        for j, fn in enumerate(self.proxable):
            sl = slice(self.offsets[j], self.offsets[j + 1])
            out[sl] = fn.prox_derivative(v[sl], rho[sl])
        return out

    def gradient_mapping(self, u, qu=None):
        """Norm of ``L (u - prox_{h/L}(u - grad/L))`` at ``u``."""
        if qu is None:
            qu = self.q_apply(u)
        L = self.lipschitz
        p = self.prox(u - (qu - self.linear) / L, L)
        return float(L * np.linalg.norm(u - p))


@dataclass
class SubproblemResult:
    solution: np.ndarray
    residual: float
    iterations: int
    converged: bool
    fast_path: bool


def _check_finite(u, it):
    if not np.all(np.isfinite(u)):
        raise NumericalFailure("non-finite value in inner iterate", it)


NEWTON_MAX_ROWS = 512
# residuals below this many ulps of the magnitude of the terms are rounding noise
ROUNDING_FLOOR = 1e3 * np.finfo(float).eps


def _dual_newton(q, sigma, G, warm_start, tol, max_iter=50):
    """Semismooth Newton on the dual of ``h(u) + 1/2 u^T D u - c^T u
    + sigma/2 ||G u||^2`` with ``D = diag(shift) > 0``.

    The dual variable ``v`` replaces ``sigma G u``; for fixed ``v`` the
    minimizing ``u(v) = prox_{h,D}(D^{-1}(c - G^T v))`` is exact, and
    ``v`` solves ``G u(v) - v/sigma = 0``. Returns ``(u, residual, iters)``
    where the residual is ``||G^T (sigma G u - v)||``, the distance from the
    subdifferential inclusion of the primal problem. ``u`` is None on failure.
    """
    D = q.shift
    c = q.linear
    inv_s = 1.0 / sigma

    def primal(v):
        arg = (c - G.T @ v) / D
        return arg, q.prox(arg, D)

    def dual_value(v, u):
        return (q.h_value(u) + 0.5 * float(np.dot(u, D * u)) - float(np.dot(c - G.T @ v, u))
                - 0.5 * inv_s * float(np.dot(v, v)))

    v = sigma * (G @ warm_start)
    arg, u = primal(v)
    psi = dual_value(v, u)
    residual = math.inf
    for it in range(1, max_iter + 1):
        F = G @ u - inv_s * v
        Gtv = G.T @ v
        residual = float(np.linalg.norm(G.T @ (sigma * F)))
        scale = float(np.linalg.norm(c) + np.linalg.norm(D * u) + np.linalg.norm(Gtv))
        if residual <= max(tol * (1.0 + float(np.linalg.norm(u))), ROUNDING_FLOOR * scale):
            return u, residual, it
        w = q.prox_derivative(arg, D) / D
        active = np.flatnonzero(w)
        GJ = G[:, active]
        H = (GJ * w[active]) @ GJ.T
        H[np.diag_indices_from(H)] += inv_s
        d = np.linalg.solve(H, F)
        slope = float(np.dot(F, d))
        f_norm = float(np.linalg.norm(F))
        t = 1.0
        while True:
            v_new = v + t * d
            arg_new, u_new = primal(v_new)
            psi_new = dual_value(v_new, u_new)
            # near the solution dual increases drop below the rounding level
            # of psi, so a sufficient decrease of ||F|| is also accepted
            if psi_new >= psi + 1e-4 * t * slope or t < 1e-10:
                break
            if np.linalg.norm(G @ u_new - inv_s * v_new) <= (1.0 - 1e-4 * t) * f_norm:
                break
            t *= 0.5
        if t < 1e-10:
            return None, residual, it
        v, arg, u, psi = v_new, arg_new, u_new, psi_new
    return None, residual, max_iter


def solve_composite(q, warm_start=None, tol=1e-8, max_inner=10_000):
    """Minimize ``h(u) + 1/2<u,Qu> - <c,u>``.

    Returns a :class:`SubproblemResult`. If ``max_inner`` runs out before the
    gradient-mapping norm drops below ``tol * (1 + ||u||)`` the last point is
    returned with ``converged=False``; the caller decides what to do. The
    tolerance is floored at the rounding level of the terms of the objective.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    diag = q.folded_diagonal()
    if diag is not None and np.all(diag > 0):
        u = q.prox(q.linear / diag, diag)
        _check_finite(u, 0)
        return SubproblemResult(u, 0.0, 0, True, True)

    n = q.dimension
    warm = np.zeros(n) if warm_start is None else np.asarray(warm_start, dtype=float)
    if n and np.all(q.shift > 0):
        term = q.dense_term(NEWTON_MAX_ROWS)
        if term is not None:
            u, residual, iters = _dual_newton(q, term[0], term[1], warm, tol)
            if u is not None:
                _check_finite(u, iters)
                return SubproblemResult(u, residual, iters, True, False)

    L = q.lipschitz
    if not L > 0:
        raise ValueError("subproblem has no curvature; a positive diag_shift is required")
    mu = float(np.min(q.shift)) if n else 0.0
    if mu > 0:
        ratio = math.sqrt(mu / L)
        momentum_const = (1.0 - ratio) / (1.0 + ratio)
    else:
        momentum_const = None
    c = q.linear

    u = np.zeros(n) if warm_start is None else np.array(warm_start, dtype=float)
    if u.shape != (n,):
        raise ValueError("warm start has the wrong length")
    _check_finite(u, 0)
    qu = q.q_apply(u)
    fu = q.objective(u, qu)
    y, qy = u, qu
    u_prev, qu_prev = u, qu
    t = 1.0
    residual = math.inf
    it = 0
    for it in range(1, max_inner + 1):
        z = q.prox(y - (qy - c) / L, L)
        _check_finite(z, it)
        qz = q.q_apply(z)
        fz = q.objective(z, qz)
        # a step taken from y = u is a plain prox-gradient step, which cannot
        # increase the objective except by rounding; always accept it
        if fz <= fu or y is u:
            u_prev, qu_prev = u, qu
            u, qu, fu = z, qz, fz
            if momentum_const is None:
                t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                beta = (t - 1.0) / t_next
                t = t_next
            else:
                beta = momentum_const
            if beta == 0.0:
                y, qy = u, qu
            else:
                y = u + beta * (u - u_prev)
                qy = qu + beta * (qu - qu_prev)
            residual = q.gradient_mapping(u, qu)
        else:
            # restart: drop momentum, next step is a plain prox-gradient step from u
            t = 1.0
            y, qy = u, qu
            u_prev, qu_prev = u, qu
            continue
        scale = float(np.linalg.norm(c) + np.linalg.norm(qu))
        if residual <= max(tol * (1.0 + float(np.linalg.norm(u))), ROUNDING_FLOOR * scale):
            return SubproblemResult(u, residual, it, True, False)
    return SubproblemResult(u, residual, it, False, False)


# -- assembly for the outer algorithms ----------------------------------------


def _shifts(coeffs, eta):
    return eta / coeffs.ab + coeffs.epsilon_k


def assemble_joint(p, coeffs, lambda_tilde, x_tilde, y_tilde):
    """Joint (x, y) subproblem of the implicit-multiplier step.

    Minimizes ``L_theta(x, y, lambda_tilde) + eta_f/(2ab)||x - x_tilde||^2
    + eta_g/(2ab)||y - y_tilde||^2 + eps/2 (||x||^2 + ||y||^2)``.
    """
    th = coeffs.theta_k
    rhs = th * p.b - lambda_tilde
    wf = coeffs.eta_f_k / coeffs.ab
    wg = coeffs.eta_g_k / coeffs.ab
    lin = np.concatenate([p.A.adjoint(rhs) + wf * x_tilde, p.B.adjoint(rhs) + wg * y_tilde])
    shift = np.concatenate([np.full(p.n_x, wf + coeffs.epsilon_k), np.full(p.n_y, wg + coeffs.epsilon_k)])
    return CompositeQuadratic((p.f, p.g), [(th, (p.A, p.B))], shift, lin)


def assemble_x_split(p, coeffs, lambda_tilde_1, x_tilde, y_k):
    """x subproblem with ``y`` frozen at ``y_k``."""
    th = coeffs.theta_k
    wf = coeffs.eta_f_k / coeffs.ab
    rhs = th * (p.b - p.B.apply(y_k)) - lambda_tilde_1
    lin = p.A.adjoint(rhs) + wf * x_tilde
    return CompositeQuadratic((p.f,), [(th, (p.A,))], wf + coeffs.epsilon_k, lin)


def assemble_y_split(p, coeffs, lambda_tilde_2, y_tilde, x_next):
    """y subproblem with ``x`` frozen at ``x_next``."""
    th = coeffs.theta_k
    wg = coeffs.eta_g_k / coeffs.ab
    rhs = th * (p.b - p.A.apply(x_next)) - lambda_tilde_2
    lin = p.B.adjoint(rhs) + wg * y_tilde
    return CompositeQuadratic((p.g,), [(th, (p.B,))], wg + coeffs.epsilon_k, lin)


def assemble_x_only(p, coeffs, lambda_tilde, x_tilde):
    """Single-block subproblem of the non-separable algorithm."""
    th = coeffs.theta_k
    wf = coeffs.eta_f_k / coeffs.ab
    lin = p.A.adjoint(th * p.b - lambda_tilde) + wf * x_tilde
    return CompositeQuadratic((p.f,), [(th, (p.A,))], wf + coeffs.epsilon_k, lin)
