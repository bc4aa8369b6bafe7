"""Separable proximable functions.

All variants are real valued and act coordinate-wise, so ``prox`` accepts
either a scalar or a per-coordinate vector of positive weights ``rho``.
``prox(v, rho)`` returns ``argmin_u f(u) + (rho/2) ||u - v||^2``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ProxFunction",
    "ZeroFunction",
    "L1",
    "SquaredL2",
    "ElasticNet",
    "ShiftedL1",
    "soft_threshold",
    "prox",
    "function_from_dict",
]


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _check_rho(rho):
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(~(rho_arr > 0)):
        raise ValueError(f"prox weight must be positive, got {rho!r}")
    return rho


def _l1_subdiff_distance(x, v, w, tol=0.0):
    """Per-coordinate distance from ``v`` to the subdifferential of w|.| at x.

    At zeros the subdifferential is the interval [-w, w]; elsewhere it is the
    single point w*sign(x).
    """
    at_kink = np.abs(x) <= tol
    d_kink = np.maximum(np.abs(v) - w, 0.0)
    d_smooth = np.abs(v - w * np.sign(x))
    return np.where(at_kink, d_kink, d_smooth)


class ProxFunction:
    kind = "abstract"
    strong_convexity = 0.0

    def __init__(self, dimension):
        self.dimension = int(dimension)
        if self.dimension < 0:
            raise ValueError("dimension must be nonnegative")

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dimension,):
            raise ValueError(f"{self.kind}: expected length {self.dimension}, got shape {v.shape}")
        return v

    def value(self, x):
        raise NotImplementedError

    def prox(self, v, rho):
        v = self._check(v)
        _check_rho(rho)
        return self._prox(v, rho)

    def prox_derivative(self, v, rho):
        """Diagonal of a generalized Jacobian of ``v -> prox(v, rho)``."""
        v = self._check(v)
        _check_rho(rho)
        return np.broadcast_to(np.asarray(self._prox_derivative(v, rho), dtype=float), v.shape)

    def subdiff_distance(self, x, v):
        """Euclidean distance from ``v`` to the subdifferential at ``x``."""
        x = self._check(x)
        v = self._check(v)
        return float(np.linalg.norm(self._subdiff_gap(x, v)))

    def __call__(self, x):
        return self.value(x)

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dimension})"


class ZeroFunction(ProxFunction):
    kind = "zero"

    def value(self, x):
        return 0.0

    def _prox(self, v, rho):
        return v.copy()

    def _prox_derivative(self, v, rho):
        return 1.0

    def _subdiff_gap(self, x, v):
        return v

    def to_dict(self):
        return {"kind": "zero", "dimension": self.dimension}


class L1(ProxFunction):
    """``w * ||x||_1``."""

    kind = "l1"

    def __init__(self, dimension, w):
        super().__init__(dimension)
        if not w > 0:
            raise ValueError("L1 weight must be positive")
        self.w = float(w)

    def value(self, x):
        return self.w * float(np.sum(np.abs(x)))

    def _prox(self, v, rho):
        return soft_threshold(v, self.w / rho)

    def _prox_derivative(self, v, rho):
        return (np.abs(v) > self.w / rho).astype(float)

    def _subdiff_gap(self, x, v):
        return _l1_subdiff_distance(x, v, self.w)

    def to_dict(self):
        return {"kind": "l1", "dimension": self.dimension, "w": self.w}


class SquaredL2(ProxFunction):
    """``(mu/2) * ||x||^2``."""

    kind = "squared_l2"

    def __init__(self, dimension, mu):
        super().__init__(dimension)
        if not mu > 0:
            raise ValueError("SquaredL2 weight must be positive")
        self.mu = float(mu)
        self.strong_convexity = self.mu

    def value(self, x):
        return 0.5 * self.mu * float(np.dot(x, x))

    def _prox(self, v, rho):
        return (rho / (self.mu + rho)) * v

    def _prox_derivative(self, v, rho):
        return rho / (self.mu + rho)

    def _subdiff_gap(self, x, v):
        return v - self.mu * x

    def to_dict(self):
        return {"kind": "squared_l2", "dimension": self.dimension, "mu": self.mu}


class ElasticNet(ProxFunction):
    """``w * ||x||_1 + (mu/2) * ||x||^2``."""

    kind = "elastic_net"

    def __init__(self, dimension, w, mu):
        super().__init__(dimension)
        if not (w > 0 and mu > 0):
            raise ValueError("ElasticNet weights must be positive")
        self.w = float(w)
        self.mu = float(mu)
        self.strong_convexity = self.mu

    def value(self, x):
        return self.w * float(np.sum(np.abs(x))) + 0.5 * self.mu * float(np.dot(x, x))

    def _prox(self, v, rho):
        return (rho / (self.mu + rho)) * soft_threshold(v, self.w / rho)

    def _prox_derivative(self, v, rho):
        return (rho / (self.mu + rho)) * (np.abs(v) > self.w / rho)

    def _subdiff_gap(self, x, v):
        return _l1_subdiff_distance(x, v - self.mu * x, self.w)

    def to_dict(self):
        return {"kind": "elastic_net", "dimension": self.dimension, "w": self.w, "mu": self.mu}


class ShiftedL1(ProxFunction):
    """``w * ||x - c||_1``."""

    kind = "shifted_l1"

    def __init__(self, dimension, w, shift):
        super().__init__(dimension)
        if not w > 0:
            raise ValueError("ShiftedL1 weight must be positive")
        self.w = float(w)
        self.shift = self._check(shift).copy()

    def value(self, x):
        return self.w * float(np.sum(np.abs(np.asarray(x) - self.shift)))

    def _prox(self, v, rho):
        return self.shift + soft_threshold(v - self.shift, self.w / rho)

    def _prox_derivative(self, v, rho):
        return (np.abs(v - self.shift) > self.w / rho).astype(float)

    def _subdiff_gap(self, x, v):
        return _l1_subdiff_distance(x - self.shift, v, self.w)

    def to_dict(self):
        return {"kind": "shifted_l1", "dimension": self.dimension, "w": self.w,
                "shift": self.shift.tolist()}


def prox(fn, v, rho):
    return fn.prox(v, rho)


def function_from_dict(doc):
    kind = doc["kind"]
    dim = doc["dimension"]
    if kind == "zero":
        return ZeroFunction(dim)
    if kind == "l1":
        return L1(dim, doc["w"])
    if kind == "squared_l2":
        return SquaredL2(dim, doc["mu"])
    if kind == "elastic_net":
        return ElasticNet(dim, doc["w"], doc["mu"])
    if kind == "shifted_l1":
        return ShiftedL1(dim, doc["w"], doc["shift"])
    raise ValueError(f"unknown function kind {kind!r}")
