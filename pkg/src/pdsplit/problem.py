"""Problem data: ``min f(x) + g(y)  s.t.  Ax + By = b``.

A zero-dimensional ``y`` block (``g.dimension == 0``) encodes the
non-separable problem ``min f(x) s.t. Ax = b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .functions import ProxFunction, ZeroFunction, function_from_dict
from .operators import LinearOperator, Zero, operator_from_dict

__all__ = [
    "ProblemInstance",
    "SaddlePoint",
    "lagrangian_value",
    "augmented_lagrangian_value",
    "objective_value",
    "constraint_residual",
    "kkt_residual",
]


@dataclass(frozen=True)
class ProblemInstance:
    f: ProxFunction
    g: ProxFunction
    A: LinearOperator
    B: LinearOperator
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "b", b)
        m = b.shape[0]
        if self.A.shape != (m, self.f.dimension):
            raise ValueError(f"A has shape {self.A.shape}, expected {(m, self.f.dimension)}")
        if self.B.shape != (m, self.g.dimension):
            raise ValueError(f"B has shape {self.B.shape}, expected {(m, self.g.dimension)}")

    @classmethod
    def nonseparable(cls, f, A, b):
        b = np.asarray(b, dtype=float)
        return cls(f, ZeroFunction(0), A, Zero(b.size, 0), b)

    @property
    def n_x(self):
        return self.f.dimension

    @property
    def n_y(self):
        return self.g.dimension

    @property
    def m(self):
        return self.b.shape[0]

    @property
    def mu_f(self):
        return self.f.strong_convexity

    @property
    def mu_g(self):
        return self.g.strong_convexity

    @property
    def is_separable(self):
        return self.n_y > 0

    def check_point(self, x, y, lam=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != (self.n_x,) or y.shape != (self.n_y,):
            raise ValueError(f"point dimensions {x.shape}, {y.shape} do not match ({self.n_x},), ({self.n_y},)")
        if lam is None:
            return x, y
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.m,):
            raise ValueError(f"multiplier has shape {lam.shape}, expected ({self.m},)")
        return x, y, lam

    def to_dict(self):
        return {"f": self.f.to_dict(), "g": self.g.to_dict(), "A": self.A.to_dict(),
                "B": self.B.to_dict(), "b": self.b.tolist()}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc):
        return cls(function_from_dict(doc["f"]), function_from_dict(doc["g"]),
                   operator_from_dict(doc["A"]), operator_from_dict(doc["B"]),
                   np.asarray(doc["b"], dtype=float))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class SaddlePoint:
    x_star: np.ndarray
    y_star: np.ndarray
    lambda_star: np.ndarray
    phi_star: float
    kkt: float = float("nan")
    converged: bool = True

    def to_dict(self):
        return {"x_star": self.x_star.tolist(), "y_star": self.y_star.tolist(),
                "lambda_star": self.lambda_star.tolist(), "phi_star": self.phi_star,
                "kkt": self.kkt, "converged": self.converged}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["x_star"], dtype=float), np.asarray(doc["y_star"], dtype=float),
                   np.asarray(doc["lambda_star"], dtype=float), float(doc["phi_star"]),
                   float(doc.get("kkt", float("nan"))), bool(doc.get("converged", True)))


def constraint_residual(p, x, y):
    return p.A.apply(x) + p.B.apply(y) - p.b


def objective_value(p, x, y):
    x, y = p.check_point(x, y)
    return p.f.value(x) + p.g.value(y)


def lagrangian_value(p, x, y, lam):
    x, y, lam = p.check_point(x, y, lam)
    return p.f.value(x) + p.g.value(y) + float(np.dot(lam, constraint_residual(p, x, y)))


def augmented_lagrangian_value(p, x, y, lam, theta):
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    r = constraint_residual(p, *p.check_point(x, y))
    return lagrangian_value(p, x, y, lam) + 0.5 * theta * float(np.dot(r, r))


def kkt_residual(p, s):
    """Max of feasibility and the two stationarity distances at a saddle candidate."""
    x, y, lam = p.check_point(s.x_star, s.y_star, s.lambda_star)
    feas = float(np.linalg.norm(constraint_residual(p, x, y)))
    dx = p.f.subdiff_distance(x, -p.A.adjoint(lam))
    dy = p.g.subdiff_distance(y, -p.B.adjoint(lam)) if p.n_y else 0.0
    return max(feas, dx, dy)
