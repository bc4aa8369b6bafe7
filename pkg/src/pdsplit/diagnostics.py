"""Energy function, residual metrics, one-step energy checks and rate fits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .problem import constraint_residual, lagrangian_value, objective_value

__all__ = [
    "FIELDS",
    "EnergyBreakdown",
    "EnergyCheck",
    "IterationTrace",
    "InsufficientData",
    "RateFit",
    "energy_at",
    "split_augmentation",
    "check_energy_step",
    "residual_row",
    "fit_rate",
]

FIELDS = ("k", "objective_residual", "feasibility", "lagrangian_gap", "iterate_norm",
          "dist_to_point", "energy", "inner_residual", "wall_ms")

# negative Lagrangian gaps down to this (relative) size are rounding and get clamped
GAP_CLAMP = 1e-10


class InsufficientData(ValueError):
    """Fewer than the required number of usable rows for a rate fit."""


@dataclass(frozen=True)
class EnergyBreakdown:
    I1: float
    I2: float
    I3: float
    I4: float

    @property
    def total(self):
        return self.I1 + self.I2 + self.I3 + self.I4


def energy_at(p, sched, state, saddle):
    """Energy of ``state`` (at its own index ``k``) relative to ``saddle``.

    ``I1 = delta^2 beta_k (L(x,y,lam*) - L* + eps_k/2 (|x|^2 + |y|^2))``,
    ``I2 = 1/2 |Z^d - x*|^2 + 1/2 |H^d - y*|^2``,
    ``I3 = (delta gamma - 1)/2 (|x - x*|^2 + |y - y*|^2)``,
    ``I4 = delta/2 |lam - lam*|^2``.
    """
    d, g = sched.delta, sched.gamma
    k = state.k
    beta = sched.beta(k)
    eps = sched.epsilon(k)
    xs, ys, ls = saddle.x_star, saddle.y_star, saddle.lambda_star
    gap = lagrangian_value(p, state.x, state.y, ls) - lagrangian_value(p, xs, ys, ls)
    sq = float(np.dot(state.x, state.x) + np.dot(state.y, state.y))
    I1 = d * d * beta * (gap + 0.5 * eps * sq)
    Zd = d * state.Z + (1.0 - d * g) * state.x
    Hd = d * state.H + (1.0 - d * g) * state.y
    I2 = 0.5 * float(np.sum((Zd - xs) ** 2) + np.sum((Hd - ys) ** 2))
    I3 = 0.5 * (d * g - 1.0) * float(np.sum((state.x - xs) ** 2) + np.sum((state.y - ys) ** 2))
    I4 = 0.5 * d * float(np.sum((state.lam - ls) ** 2))
    return EnergyBreakdown(I1, I2, I3, I4)


def split_augmentation(p, sched, state, saddle):
    """``delta alpha_k^2 beta_k^2 / 2 * |B(H^d_k - y*)|^2``, the extra term of
    the Lyapunov quantity of the splitting algorithm."""
    k = state.k
    ab = sched.alpha(k) * sched.beta(k)
    Hd = sched.delta * state.H + (1.0 - sched.delta * sched.gamma) * state.y
    r = p.B.apply(Hd - saddle.y_star)
    return 0.5 * sched.delta * ab * ab * float(np.dot(r, r))


@dataclass(frozen=True)
class EnergyCheck:
    passed: bool
    increase: float
    bound: float
    slack: float

    @property
    def margin(self):
        """Room left below the allowed increase; negative on failure."""
        return self.bound + self.slack - self.increase


def check_energy_step(p, sched, prev, nxt, saddle, algorithm, E1=1.0, inner_residual=0.0):
    """Check one step of the energy inequality.

    ``prev`` and ``nxt`` are consecutive solver states. For the joint and
    non-separable algorithms the bare energy is checked; for the splitting
    algorithm the energy plus :func:`split_augmentation`. The allowed increase
    is ``delta alpha_k beta_k eps_k / 2 (|x*|^2 + |y*|^2)`` plus a slack of
    ``1e-9 max(1, E_1) + 10 inner_residual (1 + |state|)``.
    """
    if algorithm not in ("joint", "split", "nonseparable"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    e0 = energy_at(p, sched, prev, saddle).total
    e1 = energy_at(p, sched, nxt, saddle).total
    if algorithm == "split":
        e0 += split_augmentation(p, sched, prev, saddle)
        e1 += split_augmentation(p, sched, nxt, saddle)
    k = prev.k
    xs, ys = saddle.x_star, saddle.y_star
    bound = 0.5 * sched.delta * sched.alpha(k) * sched.beta(k) * sched.epsilon(k) * float(
        np.dot(xs, xs) + np.dot(ys, ys))
    size = math.sqrt(float(np.dot(nxt.x, nxt.x) + np.dot(nxt.y, nxt.y) + np.dot(nxt.lam, nxt.lam)))
    slack = 1e-9 * max(1.0, E1) + 10.0 * inner_residual * (1.0 + size)
    inc = e1 - e0
    return EnergyCheck(inc <= bound + slack, inc, bound, slack)


def residual_row(p, state, saddle=None, point=None):
    """Trace fields of ``state``.

    Without a saddle the objective residual and Lagrangian gap are NaN.
    ``point`` is the target of ``dist_to_point`` and defaults to the saddle's
    primal part. Returns ``(row, clamped)`` where ``clamped`` tells whether a
    tiny negative Lagrangian gap was set to zero.
    """
    x, y = state.x, state.y
    nan = float("nan")
    row = {"k": int(state.k)}
    phi = objective_value(p, x, y)
    row["feasibility"] = float(np.linalg.norm(constraint_residual(p, x, y)))
    row["iterate_norm"] = math.sqrt(float(np.dot(x, x) + np.dot(y, y)))
    clamped = False
    if saddle is not None:
        row["objective_residual"] = abs(phi - saddle.phi_star)
        gap = lagrangian_value(p, x, y, saddle.lambda_star) - lagrangian_value(
            p, saddle.x_star, saddle.y_star, saddle.lambda_star)
        if -GAP_CLAMP * max(1.0, abs(saddle.phi_star)) <= gap < 0.0:
            gap, clamped = 0.0, True
        row["lagrangian_gap"] = gap
    else:
        row["objective_residual"] = nan
        row["lagrangian_gap"] = nan
    if point is None and saddle is not None:
        point = (saddle.x_star, saddle.y_star)
    if point is not None:
        dx, dy = x - point[0], y - point[1]
        row["dist_to_point"] = math.sqrt(float(np.dot(dx, dx) + np.dot(dy, dy)))
    else:
        row["dist_to_point"] = nan
    row["energy"] = nan
    row["inner_residual"] = 0.0
    row["wall_ms"] = nan
    row["objective"] = phi
    return row, clamped


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class IterationTrace:
    """Rows of per-iteration metrics with the fixed CSV schema :data:`FIELDS`.

    ``objective`` (the raw objective value) and the clamped-gap flags are
    kept in memory only. ``final_state`` holds the last solver state when the
    trace comes from a run.
    """

    rows: list = field(default_factory=list)
    clamped: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    final_state: object = None

    def append(self, row, clamped=False):
        if self.rows and row["k"] <= self.rows[-1]["k"]:
            raise ValueError("trace rows must have strictly increasing k")
        self.rows.append(row)
        if clamped:
            self.clamped.append(row["k"])

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([r.get(name, float("nan")) for r in self.rows], dtype=float)

    @property
    def last(self):
        return self.rows[-1]

    def to_csv_text(self, timing=False):
        """CSV text. The ``wall_ms`` column is left empty unless ``timing``,
        so traces of identical runs are byte-identical."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS)
        for r in self.rows:
            w.writerow([_fmt(r.get(f)) if (f != "wall_ms" or timing) else "" for f in FIELDS])
        return buf.getvalue()

    def write_csv(self, path, timing=False):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text(timing))

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read())

    @classmethod
    def from_csv_text(cls, text):
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV") from None
        if tuple(header) != FIELDS:
            raise ValueError(f"CSV header does not match the trace schema: {header}")
        tr = cls()
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(FIELDS):
                raise ValueError(f"line {lineno}: expected {len(FIELDS)} fields, got {len(rec)}")
            try:
                row = {"k": int(rec[0])}
                for name, val in zip(FIELDS[1:], rec[1:]):
                    row[name] = float(val) if val != "" else float("nan")
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            tr.append(row)
        return tr


class RateFit(NamedTuple):
    slope: float
    r_squared: float
    n_used: int


def fit_rate(trace, field_name, k_window, min_rows=10):
    """Least-squares slope of ``log(field)`` against ``log(k)`` on the rows
    with ``k_lo <= k <= k_hi``. Rows with nonpositive or missing values are
    skipped; fewer than ``min_rows`` usable rows raise :class:`InsufficientData`."""
    if field_name not in FIELDS or field_name == "k":
        raise ValueError(f"unknown trace field {field_name!r}")
    k_lo, k_hi = k_window
    k = trace.column("k")
    v = trace.column(field_name)
    use = (k >= k_lo) & (k <= k_hi) & np.isfinite(v) & (v > 0)
    n = int(use.sum())
    if n < min_rows:
        raise InsufficientData(f"{n} usable rows of {field_name!r} in k in [{k_lo}, {k_hi}], need {min_rows}")
    lx = np.log(k[use])
    ly = np.log(v[use])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    # a field that is constant up to rounding is fitted exactly by slope 0
    flat = np.ptp(ly) <= 8 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(ly))))
    r2 = 1.0 if flat else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return RateFit(float(slope), r2, n)
