"""Linear operators used for the coupling constraint ``Ax + By = b``.

Four kinds are supported: dense matrices, diagonals, the identity and the
zero map. Every operator knows its shape, its adjoint and its 2-norm.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "LinearOperator",
    "Dense",
    "Diagonal",
    "Identity",
    "Zero",
    "apply",
    "adjoint_apply",
    "operator_norm",
    "power_iteration_norm",
]


def _vector(v, n, what):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != n:
        raise ValueError(f"{what}: expected a vector of length {n}, got shape {v.shape}")
    return v


def power_iteration_norm(matrix, rtol=1e-10, max_iter=10_000):
    """Largest singular value of ``matrix`` by power iteration on M^T M.

    The start vector is the normalized all-ones vector so that repeated calls
    give identical answers.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[1]
    if n == 0 or matrix.shape[0] == 0:
        return 0.0
    v = np.ones(n) / np.sqrt(n)
    sigma = 0.0
    for _ in range(max_iter):
        w = matrix.T @ (matrix @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            # all-ones start can be orthogonal to the row space; retry once
            # from a fixed non-symmetric vector before declaring zero
            if sigma == 0.0 and np.any(matrix):
                v = np.arange(1, n + 1, dtype=float)
                v /= np.linalg.norm(v)
                w = matrix.T @ (matrix @ v)
                nrm = np.linalg.norm(w)
            if nrm == 0.0:
                return 0.0
        new_sigma = np.sqrt(nrm)
        v = w / nrm
        if abs(new_sigma - sigma) <= rtol * new_sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    return float(np.linalg.norm(matrix @ v))


class LinearOperator:
    """Base class; subclasses fill in ``shape`` and the three maps."""

    kind = "abstract"
    shape: tuple[int, int]

    @property
    def rows(self):
        return self.shape[0]

    @property
    def cols(self):
        return self.shape[1]

    def apply(self, v):
        return self._apply(_vector(v, self.cols, f"{self.kind}.apply"))

    def adjoint(self, u):
        return self._adjoint(_vector(u, self.rows, f"{self.kind}.adjoint"))

    def norm(self):
        return self._norm()

    def gram_diagonal(self):
        """Diagonal of ``G^T G`` when that matrix is diagonal, else ``None``."""
        return None

    def to_dense(self):
        return np.column_stack([self._apply(e) for e in np.eye(self.cols)]) if self.cols else np.zeros(self.shape)

    def scaled(self, factor):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def __neg__(self):
        return self.scaled(-1.0)

    def __repr__(self):
        return f"{type(self).__name__}{self.shape}"


class Dense(LinearOperator):
    kind = "dense"

    def __init__(self, matrix, cached_norm=None):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("Dense operator needs a 2-D matrix")
        self.matrix = matrix
        self.shape = matrix.shape
        self._cached_norm = cached_norm

    def _apply(self, v):
        return self.matrix @ v

    def _adjoint(self, u):
        return self.matrix.T @ u

    def _norm(self):
        if self._cached_norm is None:
            self._cached_norm = power_iteration_norm(self.matrix)
        return self._cached_norm

    @property
    def cached_norm(self):
        return self._cached_norm

    def to_dense(self):
        return self.matrix.copy()

    def scaled(self, factor):
        nrm = None if self._cached_norm is None else abs(factor) * self._cached_norm
        return Dense(factor * self.matrix, cached_norm=nrm)

    def to_dict(self):
        return {"kind": "dense", "matrix": self.matrix.tolist()}


class Diagonal(LinearOperator):
    kind = "diagonal"

    def __init__(self, diag):
        diag = np.array(diag, dtype=float)
        if diag.ndim != 1:
            raise ValueError("Diagonal operator needs a 1-D vector")
        self.diag = diag
        self.shape = (diag.size, diag.size)

    def _apply(self, v):
        return self.diag * v

    _adjoint = _apply

    def _norm(self):
        return float(np.max(np.abs(self.diag))) if self.diag.size else 0.0

    cached_norm = property(_norm)

    def gram_diagonal(self):
        return self.diag * self.diag

    def to_dense(self):
        return np.diag(self.diag)

    def scaled(self, factor):
        return Diagonal(factor * self.diag)

    def to_dict(self):
        return {"kind": "diagonal", "diag": self.diag.tolist()}


class Identity(LinearOperator):
    kind = "identity"

    def __init__(self, n):
        self.shape = (int(n), int(n))

    def _apply(self, v):
        return v.copy()

    _adjoint = _apply

    def _norm(self):
        return 1.0 if self.shape[0] else 0.0

    cached_norm = property(_norm)

    def gram_diagonal(self):
        return np.ones(self.cols)

    def to_dense(self):
        return np.eye(self.cols)

    def scaled(self, factor):
        return Diagonal(np.full(self.cols, float(factor)))

    def to_dict(self):
        return {"kind": "identity", "n": self.cols}


class Zero(LinearOperator):
    kind = "zero"

    def __init__(self, m, n):
        self.shape = (int(m), int(n))

    def _apply(self, v):
        return np.zeros(self.rows)

    def _adjoint(self, u):
        return np.zeros(self.cols)

    def _norm(self):
        return 0.0

    cached_norm = property(_norm)

    def gram_diagonal(self):
        return np.zeros(self.cols)

    def to_dense(self):
        return np.zeros(self.shape)

    def scaled(self, factor):
        return self

    def to_dict(self):
        return {"kind": "zero", "m": self.rows, "n": self.cols}


def operator_from_dict(doc):
    kind = doc["kind"]
    if kind == "dense":
        return Dense(doc["matrix"])
    if kind == "diagonal":
        return Diagonal(doc["diag"])
    if kind == "identity":
        return Identity(doc["n"])
    if kind == "zero":
        return Zero(doc["m"], doc["n"])
    raise ValueError(f"unknown operator kind {kind!r}")


def apply(op, v):
    return op.apply(v)


def adjoint_apply(op, u):
    return op.adjoint(u)


def operator_norm(op):
    """Largest singular value; exact except for ``Dense`` (power iteration)."""
    return op.norm()
