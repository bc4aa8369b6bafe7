"""Parameter schedules (gamma, delta, alpha_k, beta_k, epsilon_k) and their checks.

The step size ``alpha_k``, time scale ``beta_k`` and Tikhonov weight
``epsilon_k`` are sequences indexed from ``k = 1``. Validators inspect a finite
horizon only, so asymptotic conditions (summability, divergence) are reported
as heuristic verdicts rather than proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "SequenceFamily",
    "ParameterSchedule",
    "StepCoefficients",
    "ScheduleError",
    "ValidationReport",
    "coeffs_at",
    "validate_assumption1",
    "validate_assumption2",
    "validate_epsilon_conditions",
    "convex_rate_schedule",
    "strongly_convex_rate_schedule",
    "tikhonov_schedule",
]

SLACK = 1e-12


class ScheduleError(ValueError):
    """Raised when a schedule produces a nonpositive alpha_k or beta_k."""


@dataclass(frozen=True)
class SequenceFamily:
    """A sequence ``k -> value`` for ``k >= 1``.

    ``form`` is one of ``powerlaw`` (``c * k**p``), ``constant`` (``c``),
    ``scaledsquare`` (``c * k**2``) or ``custom`` (explicit ``table`` of
    ``{k: value}`` entries, with ``fallback`` used elsewhere).
    """

    form: str
    c: float = 1.0
    p: float = 0.0
    table: Optional[dict] = None
    fallback: Optional["SequenceFamily"] = None

    def __post_init__(self):
        if self.form not in ("powerlaw", "constant", "scaledsquare", "custom"):
            raise ValueError(f"unknown sequence form {self.form!r}")
        if self.form == "custom":
            if self.table is None:
                raise ValueError("custom sequence needs a table")
            if self.fallback is None:
                object.__setattr__(self, "fallback", SequenceFamily("constant", 0.0))

    @classmethod
    def powerlaw(cls, c, p):
        return cls("powerlaw", float(c), float(p))

    @classmethod
    def constant(cls, c):
        return cls("constant", float(c))

    @classmethod
    def scaled_square(cls, c):
        return cls("scaledsquare", float(c))

    def __call__(self, k):
        if self.form == "powerlaw":
            return self.c * float(k) ** self.p if self.p != 0 else self.c
        if self.form == "constant":
            return self.c
        if self.form == "scaledsquare":
            return self.c * float(k) ** 2
        if k in self.table:
            return float(self.table[k])
        return self.fallback(k)

    def values(self, K):
        """Evaluations at ``k = 1..K`` as an array."""
        k = np.arange(1, K + 1, dtype=float)
        if self.form == "powerlaw":
            return self.c * k ** self.p if self.p != 0 else np.full(K, self.c)
        if self.form == "constant":
            return np.full(K, self.c)
        if self.form == "scaledsquare":
            return self.c * k ** 2
        return np.array([self(int(i)) for i in range(1, K + 1)])

    def to_dict(self):
        if self.form == "custom":
            return {"form": "custom", "table": {str(k): v for k, v in self.table.items()},
                    "fallback": self.fallback.to_dict()}
        doc = {"form": self.form, "c": self.c}
        if self.form == "powerlaw":
            doc["p"] = self.p
        return doc

    @classmethod
    def from_dict(cls, doc):
        form = doc["form"]
        if form == "custom":
            table = {int(k): float(v) for k, v in doc["table"].items()}
            fallback = cls.from_dict(doc["fallback"]) if "fallback" in doc else None
            return cls("custom", table=table, fallback=fallback)
        if form == "powerlaw":
            return cls.powerlaw(doc["c"], doc["p"])
        if form == "constant":
            return cls.constant(doc["c"])
        if form == "scaledsquare":
            return cls.scaled_square(doc["c"])
        raise ValueError(f"unknown sequence form {form!r}")


@dataclass(frozen=True)
class ParameterSchedule:
    gamma: float
    delta: float
    alpha: SequenceFamily
    beta: SequenceFamily
    epsilon: SequenceFamily

    def __post_init__(self):
        if not (self.gamma > 0 and self.delta > 0):
            raise ValueError("gamma and delta must be positive")

    def to_dict(self):
        return {"gamma": self.gamma, "delta": self.delta, "alpha": self.alpha.to_dict(),
                "beta": self.beta.to_dict(), "epsilon": self.epsilon.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        return cls(float(doc["gamma"]), float(doc["delta"]),
                   SequenceFamily.from_dict(doc["alpha"]),
                   SequenceFamily.from_dict(doc["beta"]),
                   SequenceFamily.from_dict(doc["epsilon"]))

    def with_epsilon(self, epsilon):
        return ParameterSchedule(self.gamma, self.delta, self.alpha, self.beta, epsilon)


@dataclass(frozen=True)
class StepCoefficients:
    alpha_k: float
    beta_k: float
    epsilon_k: float
    theta_k: float
    eta_f_k: float
    eta_g_k: float

    @property
    def ab(self):
        return self.alpha_k * self.beta_k


def coeffs_at(s, k, mu_f=0.0, mu_g=0.0):
    """Per-step coefficients at iteration ``k``.

    ``theta_k = (alpha_k + delta) beta_k`` and
    ``eta_k = gamma + 1/alpha_k + mu delta beta_k`` for each block.
    """
    if k < 1:
        raise ValueError("k starts at 1")
    a = s.alpha(k)
    bt = s.beta(k)
    if not (a > 0 and bt > 0) or not (math.isfinite(a) and math.isfinite(bt)):
        raise ScheduleError(f"alpha_k={a}, beta_k={bt} at k={k}; both must be positive and finite")
    e = s.epsilon(k)
    base = s.gamma + 1.0 / a
    return StepCoefficients(
        alpha_k=a,
        beta_k=bt,
        epsilon_k=e,
        theta_k=(a + s.delta) * bt,
        eta_f_k=base + mu_f * s.delta * bt,
        eta_g_k=base + mu_g * s.delta * bt,
    )


# -- validation -------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    first_violation: Optional[int] = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def violations(self):
        return [c for c in self.checks if not c.passed]

    def add(self, name, ok, first=None, detail=""):
        self.checks.append(Check(name, bool(ok), first, detail))

    def merge(self, other):
        self.checks.extend(other.checks)
        self.values.update(other.values)
        self.notes.extend(other.notes)
        return self

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "first_violation": c.first_violation,
                        "detail": c.detail} for c in self.checks],
            "values": self.values,
            "notes": self.notes,
        }

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "ok  " if c.passed else "FAIL"
            where = "" if c.first_violation is None else f" (first violation at k={c.first_violation})"
            lines.append(f"[{status}] {c.name}{where}{': ' + c.detail if c.detail else ''}")
        for key, val in self.values.items():
            lines.append(f"       {key} = {val}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        return "\n".join(lines)


def _first_true(mask, offset=1):
    idx = np.flatnonzero(mask)
    return int(idx[0]) + offset if idx.size else None


def validate_assumption1(s, K):
    """Check ``delta*gamma >= 1``, positivity, monotone beta and
    ``delta*beta_{k+1} <= delta*beta_k + alpha_k*beta_k`` for k < K."""
    if K < 2:
        raise ValueError("horizon must be at least 2")
    rep = ValidationReport()
    dg = s.delta * s.gamma - 1.0
    rep.add("delta*gamma - 1 >= 0", dg >= -SLACK, detail=f"delta*gamma - 1 = {dg:.6g}")
    a = s.alpha.values(K)
    bt = s.beta.values(K)
    rep.add("alpha_k > 0", np.all(a > 0), _first_true(~(a > 0)))
    rep.add("beta_k > 0", np.all(bt > 0), _first_true(~(bt > 0)))
    inc = np.diff(bt)
    rep.add("beta nondecreasing", np.all(inc >= -SLACK), _first_true(inc < -SLACK))
    gap = s.delta * bt[1:] - (s.delta * bt[:-1] + a[:-1] * bt[:-1])
    rep.add("delta*beta_{k+1} <= delta*beta_k + alpha_k*beta_k", np.all(gap <= SLACK),
            _first_true(gap > SLACK), detail=f"max gap {gap.max():.3g}")
    rep.values["max_assumption1_gap"] = float(gap.max())
    if not bt[-1] > bt[0]:
        rep.notes.append("beta does not grow over the horizon; beta_k -> infinity is not evidenced")
    return rep


def validate_assumption2(s, normB, mu_g, K):
    """Assumption-1 checks plus
    ``||B||^2 (a_{k+1}^2 b_{k+1}^2 - a_k^2 b_k^2) <= a_k b_k mu_g``."""
    rep = validate_assumption1(s, K)
    ab = s.alpha.values(K) * s.beta.values(K)
    lhs = normB ** 2 * (ab[1:] ** 2 - ab[:-1] ** 2)
    rhs = ab[:-1] * mu_g
    # relative part of the slack absorbs rounding when the two sides tie exactly
    tol = SLACK + SLACK * np.maximum(np.abs(lhs), np.abs(rhs))
    bad = lhs - rhs > tol
    rep.add("||B||^2 (a_{k+1}^2 b_{k+1}^2 - a_k^2 b_k^2) <= a_k b_k mu_g", not bad.any(),
            _first_true(bad), detail=f"max excess {float(np.max(lhs - rhs)):.3g}")
    return rep


def _tail_exponent(terms):
    """Local power-law exponent of a positive sequence over its second half."""
    K = terms.size
    lo = K // 2
    if terms[-1] <= 0 or terms[lo - 1] <= 0:
        return math.inf
    return -math.log(terms[-1] / terms[lo - 1]) / math.log(K / lo)


def _summable_verdict(terms):
    if np.all(terms == 0):
        return True, math.inf
    p = _tail_exponent(terms)
    return p > 1.0 + 1e-3, p


def validate_epsilon_conditions(s, K, mode="rate"):
    """Conditions on epsilon_k for the rate results (``mode="rate"``) or the
    minimal-norm convergence results (``mode="strong"``).

    Summability is judged from the power-law exponent of the tail terms over
    ``[K/2, K]``: exponent > 1 counts as summable.
    """
    if K < 2:
        raise ValueError("horizon must be at least 2")
    if mode not in ("rate", "strong"):
        raise ValueError("mode must be 'rate' or 'strong'")
    rep = ValidationReport()
    a = s.alpha.values(K)
    bt = s.beta.values(K)
    e = s.epsilon.values(K)
    rep.add("epsilon_k >= 0", np.all(e >= 0), _first_true(e < 0))
    inc = np.diff(e)
    rep.add("epsilon nonincreasing", np.all(inc <= SLACK), _first_true(inc > SLACK))

    abe = a * bt * e
    ok, p = _summable_verdict(abe)
    rep.values["partial_sum_alpha_beta_eps"] = float(abe.sum())
    rep.values["tail_exponent_alpha_beta_eps"] = p
    if mode == "rate":
        rep.add("sum alpha_k beta_k eps_k < inf (heuristic)", ok, detail=f"tail exponent {p:.3g}")
        if not (bt[-1] * e[-1] > bt[K // 2 - 1] * e[K // 2 - 1]):
            rep.notes.append("beta_k*eps_k does not grow: minimal-norm convergence is not covered by this schedule")
        return rep

    ae = a * e
    ok2, p2 = _summable_verdict(ae)
    rep.values["partial_sum_alpha_eps"] = float(ae.sum())
    rep.values["tail_exponent_alpha_eps"] = p2
    rep.add("sum alpha_k eps_k < inf (heuristic)", ok2, detail=f"tail exponent {p2:.3g}")
    be_end = float(bt[-1] * e[-1])
    be_mid = float(bt[K // 2 - 1] * e[K // 2 - 1])
    rep.values["beta_eps_at_K"] = be_end
    rep.values["beta_eps_at_K/2"] = be_mid
    rep.add("beta_k eps_k -> inf (heuristic)", be_end > be_mid,
            detail=f"beta*eps: {be_mid:.3g} at K/2, {be_end:.3g} at K")
    if not ok:
        rep.notes.append("sum alpha_k beta_k eps_k appears divergent: the O(1/beta_k) rate results do not apply")
    return rep


# -- ready-made families ------------------------------------------------------


def convex_rate_schedule(gamma=2.0, delta=0.6):
    """``beta_k = k``, ``alpha_k = 1/k``, ``eps_k = 1/k^3``."""
    return ParameterSchedule(gamma, delta, SequenceFamily.powerlaw(1.0, -1.0),
                             SequenceFamily.powerlaw(1.0, 1.0), SequenceFamily.powerlaw(1.0, -3.0))


def strongly_convex_rate_schedule(mu_g, normB, gamma=3.4, delta=0.3):
    """``beta_k = mu_g k^2 / (3 ||B||^2)``, ``alpha_k = 1/k``,
    ``eps_k = 1 / (alpha_k beta_k k^3)``."""
    if not (mu_g > 0 and normB > 0):
        raise ValueError("needs mu_g > 0 and ||B|| > 0")
    c = mu_g / (3.0 * normB ** 2)
    # alpha_k beta_k k^3 = c k^4
    return ParameterSchedule(gamma, delta, SequenceFamily.powerlaw(1.0, -1.0),
                             SequenceFamily.scaled_square(c), SequenceFamily.powerlaw(1.0 / c, -4.0))


def tikhonov_schedule(gamma=2.0, delta=0.7, eps_c=1.0, eps_p=-0.5):
    """``beta_k = k``, ``alpha_k = 1/k``, ``eps_k = eps_c * k^eps_p``."""
    eps = SequenceFamily.powerlaw(eps_c, eps_p) if eps_c else SequenceFamily.constant(0.0)
    return ParameterSchedule(gamma, delta, SequenceFamily.powerlaw(1.0, -1.0),
                             SequenceFamily.powerlaw(1.0, 1.0), eps)
