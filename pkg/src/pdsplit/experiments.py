"""Instance generators and the experiment runner.

A config document (JSON) lists instances and algorithms; every
(instance, algorithm) pair is one cell producing one trace CSV. All
randomness derives from the config seed: instance ``i`` draws from
``SeedSequence(seed, spawn_key=(i,))`` unless it fixes its own seed.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .baselines import METHODS, BaselineConfig, reference_solution, run_baseline
from .diagnostics import InsufficientData, fit_rate
from .functions import L1, ElasticNet, ShiftedL1
from .operators import Dense, Diagonal, Identity
from .problem import ProblemInstance, SaddlePoint, kkt_residual
from .schedules import (
    ParameterSchedule,
    convex_rate_schedule,
    strongly_convex_rate_schedule,
    tikhonov_schedule,
    validate_epsilon_conditions,
)
from .solvers import STEPS, InnerConfig, run, validate_for

__all__ = [
    "ConfigError",
    "LadConfig",
    "L1L1Config",
    "gen_lad_instance",
    "gen_l1l1_instance",
    "l1l1_start",
    "l1l1_saddle",
    "instance_seed",
    "build_instance",
    "build_schedule",
    "run_experiment",
    "CORRELATION_NOTE",
]

ALGORITHMS = tuple(STEPS) + METHODS

CORRELATION_NOTE = ("correlated columns: a random half of the columns j is replaced by "
                    "col_j' + 0.1 * N(0, 1) for a random partner j' from the other half, "
                    "before row normalization")


class ConfigError(ValueError):
    """Malformed experiment config; the message names the offending field."""


@dataclass(frozen=True)
class LadConfig:
    """Least-absolute-deviation regression with an l1 (``mu_l2 = 0``) or
    elastic-net (``mu_l2 > 0``) penalty."""

    m: int = 60
    n: int = 600
    lambda_l1: float = 0.2
    mu_l2: float = 0.0
    density: float = 0.1
    noise_var: float = 1e-4
    correlated: bool = False
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.m < self.n):
            raise ValueError("needs 0 < m < n")
        if not self.lambda_l1 > 0:
            raise ValueError("lambda_l1 must be positive")
        if self.mu_l2 < 0:
            raise ValueError("mu_l2 must be nonnegative")
        if not 0 < self.density <= 1:
            raise ValueError("density must lie in (0, 1]")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")


def gen_lad_instance(cfg):
    """Reformulated LAD instance ``min |x - b|_1 + r(y) s.t. x - M y = 0``.

    Returns ``(problem, ground_truth)``. ``M`` has standard normal entries
    and unit-norm rows; the ground truth has ``ceil(density n)`` standard
    normal entries at uniform random positions; ``b = M truth + noise``.
    """
    rng = np.random.default_rng(cfg.seed)
    m, n = cfg.m, cfg.n
    M = rng.standard_normal((m, n))
    if cfg.correlated:
        cols = rng.permutation(n)
        half = n // 2
        replaced, pool = cols[:half], cols[half:]
        partners = rng.choice(pool, size=half, replace=True)
        M[:, replaced] = M[:, partners] + 0.1 * rng.standard_normal((m, half))
    M /= np.linalg.norm(M, axis=1, keepdims=True)
    nnz = int(math.ceil(cfg.density * n))
    truth = np.zeros(n)
    support = rng.choice(n, size=nnz, replace=False)
    truth[support] = rng.standard_normal(nnz)
    b = M @ truth + math.sqrt(cfg.noise_var) * rng.standard_normal(m)
    g = ElasticNet(n, cfg.lambda_l1, cfg.mu_l2) if cfg.mu_l2 > 0 else L1(n, cfg.lambda_l1)
    p = ProblemInstance(ShiftedL1(m, 1.0, b), g, Identity(m), Dense(-M), np.zeros(m))
    return p, truth


@dataclass(frozen=True)
class L1L1Config:
    """``min lambda |y|_1 + |x - d 1|_1 s.t. x - diag(p, q, r) y = 0``.

    ``epsilon_mode`` is ``"none"`` or ``("strong", c, exponent)`` and selects
    the Tikhonov weight ``c k^exponent`` of the matching schedule.
    """

    p: float = 2.0
    q: float = 3.0
    r: float = 1.0
    lambda_l1: float = 3.0
    d: float = 2.0
    epsilon_mode: object = ("strong", 1.0, -0.5)

    def __post_init__(self):
        if not (self.p and self.q and self.r):
            raise ValueError("p, q and r must be nonzero")
        if not self.lambda_l1 > 0:
            raise ValueError("lambda_l1 must be positive")
        mode = self.epsilon_mode
        if isinstance(mode, list):
            object.__setattr__(self, "epsilon_mode", tuple(mode))
            mode = self.epsilon_mode
        if mode != "none" and not (isinstance(mode, tuple) and len(mode) == 3 and mode[0] == "strong"):
            raise ValueError("epsilon_mode must be 'none' or ('strong', c, exponent)")

    @property
    def diag(self):
        return np.array([self.p, self.q, self.r], dtype=float)

    def schedule(self, gamma=2.0, delta=0.7):
        """``alpha_k = 1/k``, ``beta_k = k`` with the configured epsilon."""
        if self.epsilon_mode == "none":
            return tikhonov_schedule(gamma, delta, eps_c=0.0)
        _, c, e = self.epsilon_mode
        return tikhonov_schedule(gamma, delta, eps_c=c, eps_p=e)


def gen_l1l1_instance(cfg):
    return ProblemInstance(ShiftedL1(3, 1.0, np.full(3, cfg.d)), L1(3, cfg.lambda_l1),
                           Identity(3), Diagonal(-cfg.diag), np.zeros(3))


def l1l1_start(cfg):
    """The start ``y0 = (-0.5, 0.5, 1)``, ``x0 = M y0``, ``lambda0 = 0``."""
    y0 = np.array([-0.5, 0.5, 1.0])
    return cfg.diag * y0, y0, np.zeros(3)


def l1l1_saddle(cfg):
    """The all-zero primal point with multiplier ``1``.

    It is a saddle point whenever ``d > 0`` and ``|p|, |q|, |r| <= lambda``;
    the caller should confirm with :func:`kkt_residual`.
    """
    s = SaddlePoint(np.zeros(3), np.zeros(3), np.ones(3), 3.0 * abs(cfg.d))
    s.kkt = kkt_residual(gen_l1l1_instance(cfg), s)
    s.converged = s.kkt <= 1e-12
    return s


# -- config handling ----------------------------------------------------------------


def instance_seed(seed, index):
    """64-bit seed of instance ``index`` under the config seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _fields(doc, cls, where, skip=("generator", "name")):
    allowed = set(cls.__dataclass_fields__)
    kw = {}
    for key, val in doc.items():
        if key in skip:
            continue
        if key not in allowed:
            raise ConfigError(f"{where}.{key}: unknown field")
        kw[key] = val
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_instance(doc, index, seed, where="instances"):
    """Return ``(name, problem, extras)``; ``extras`` carries the generator
    config, the start point, a known saddle and the distance target."""
    where = f"{where}[{index}]"
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    gen = doc.get("generator")
    name = doc.get("name", f"instance{index}")
    if gen == "lad":
        doc = dict(doc)
        doc.setdefault("seed", instance_seed(seed, index))
        cfg = _fields(doc, LadConfig, where)
        p, truth = gen_lad_instance(cfg)
        return name, p, {"config": asdict(cfg), "truth": truth, "start": None, "saddle": None,
                         "point": None, "notes": [CORRELATION_NOTE] if cfg.correlated else []}
    if gen == "l1l1":
        cfg = _fields(doc, L1L1Config, where)
        p = gen_l1l1_instance(cfg)
        sd = l1l1_saddle(cfg)
        return name, p, {"config": asdict(cfg), "l1l1": cfg, "start": l1l1_start(cfg),
                         "saddle": sd if sd.converged else None,
                         "point": (np.zeros(3), np.zeros(3)), "notes": []}
    if gen == "file":
        path = doc.get("path")
        try:
            with open(path) as fh:
                p = ProblemInstance.from_json(fh.read())
        except (OSError, TypeError) as exc:
            raise ConfigError(f"{where}.path: cannot read instance file {path!r}: {exc}") from None
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{where}.path: invalid instance document: {exc}") from None
        return name, p, {"config": {"path": path}, "start": None, "saddle": None, "point": None,
                         "notes": []}
    raise ConfigError(f"{where}.generator: unknown generator {gen!r}")


def build_schedule(doc, p, extras, where):
    """Schedule from a full document or a preset name."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    preset = doc.get("preset")
    try:
        if preset is None:
            return ParameterSchedule.from_dict(doc)
        opts = {k: v for k, v in doc.items() if k != "preset"}
        if preset == "convex_rate":
            return convex_rate_schedule(**opts)
        if preset == "strongly_convex_rate":
            return strongly_convex_rate_schedule(p.mu_g, p.B.norm(), **opts)
        if preset == "tikhonov":
            return tikhonov_schedule(**opts)
        if preset == "example2":
            cfg = extras.get("l1l1")
            if cfg is None:
                raise ValueError("preset 'example2' needs an l1l1 instance")
            return cfg.schedule(**opts)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.preset: unknown preset {preset!r}")


def _check_algorithm(doc, j):
    where = f"algorithms[{j}]"
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    name = doc.get("name")
    if name not in ALGORITHMS:
        raise ConfigError(f"{where}.name: unknown algorithm {name!r}")
    budget = doc.get("budget", {})
    if not isinstance(budget, dict) or not isinstance(budget.get("max_iter"), int) or budget["max_iter"] < 0:
        raise ConfigError(f"{where}.budget.max_iter: a nonnegative integer is required")
    only = doc.get("instances")
    if only is not None and not (isinstance(only, list) and all(isinstance(n, str) for n in only)):
        raise ConfigError(f"{where}.instances: expected a list of instance names")
    stride = doc.get("stride", 1)
    if not isinstance(stride, int) or stride < 1:
        raise ConfigError(f"{where}.stride: a positive integer is required")
    if name in STEPS and "schedule" not in doc:
        raise ConfigError(f"{where}.schedule: required for {name}")
    if name in METHODS:
        bdoc = dict(doc.get("baseline", {}))
        bdoc["method"] = name
        try:
            BaselineConfig.from_dict(bdoc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.baseline: {exc}") from None


def validate_config(config):
    if not isinstance(config, dict):
        raise ConfigError("config: expected an object")
    for key in ("instances", "algorithms"):
        if not isinstance(config.get(key, []), list):
            raise ConfigError(f"{key}: expected a list")
    seed = config.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: a nonnegative integer is required")
    for j, alg in enumerate(config.get("algorithms", [])):
        _check_algorithm(alg, j)


def _label(alg, j, used):
    label = alg.get("label", alg["name"])
    if label in used:
        label = f"{label}{j}"
    used.add(label)
    return label


def _rates(trace):
    K = int(trace.last["k"])
    out = {}
    for fld in ("feasibility", "objective_residual", "lagrangian_gap"):
        try:
            fit = fit_rate(trace, fld, (max(1, K // 100), K))
            out[fld] = {"slope": fit.slope, "r_squared": fit.r_squared, "rows": fit.n_used}
        except InsufficientData:
            out[fld] = None
    return out


def _finite(v):
    return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v


def _run_cell(cell, out_dir, timing, oracle):
    name, p, extras, alg, label, cell_seed = cell
    algo = alg["name"]
    budget = alg["budget"]
    stride = alg.get("stride", 1)
    start = extras["start"] or (None, None, None)
    saddle = oracle
    summary = {"instance": name, "algorithm": algo, "label": label, "cell_seed": cell_seed,
               "max_iter": budget["max_iter"]}
    t0 = time.perf_counter()
    try:
        if algo in STEPS:
            sched = build_schedule(alg["schedule"], p, extras, f"{label}.schedule")
            summary["schedule"] = sched.to_dict()
            horizon = max(budget["max_iter"] + 1, 2)
            rep = validate_for(algo, p, sched, horizon)
            rep.merge(validate_epsilon_conditions(sched, horizon, alg.get("epsilon_mode", "rate")))
            summary["validation"] = rep.to_dict()
            inner = InnerConfig(alg.get("inner_tol"), alg.get("max_inner", 10_000))
            trace = run(algo, p, sched, budget["max_iter"], *start, saddle=saddle,
                        point=extras["point"], stride=stride, inner=inner,
                        feas_tol=budget.get("feas_tol"), obj_tol=budget.get("obj_tol"),
                        energy=bool(alg.get("energy", False)))
        else:
            bdoc = dict(alg.get("baseline", {}))
            bdoc["method"] = algo
            cfg = BaselineConfig.from_dict(bdoc)
            summary["baseline"] = cfg.to_dict()
            trace = run_baseline(p, cfg, budget["max_iter"], saddle=saddle, point=extras["point"],
                                 stride=stride, x0=start[0], y0=start[1], lambda0=start[2])
        fname = f"{name}__{label}.csv"
        trace.write_csv(os.path.join(out_dir, fname), timing=timing)
        last = trace.last
        summary.update({
            "status": "ok",
            "csv": fname,
            "rows": len(trace),
            "final": {f: _finite(last.get(f)) for f in ("k", "objective", "objective_residual",
                                                        "feasibility", "lagrangian_gap",
                                                        "iterate_norm", "dist_to_point")},
            "rates": _rates(trace) if saddle is not None else None,
            "clamped_gap_rows": len(trace.clamped),
        })
    except Exception as exc:  # a failing cell must not abort the others
        summary.update({"status": "failed", "error": f"{type(exc).__name__}: {exc}",
                        "iteration": getattr(exc, "iteration", None)})
    summary["wall_seconds"] = time.perf_counter() - t0
    return summary


def run_experiment(config, output_dir=None, threads=1, seed=None):
    """Run every (instance, algorithm) cell of ``config``.

    Writes one CSV per cell and ``summary.json`` into the output directory
    and returns the summary. Raises :class:`ConfigError` on malformed configs;
    failures inside a cell are recorded in its summary entry instead.
    """
    validate_config(config)
    seed = int(config.get("seed", 0) if seed is None else seed)
    out_dir = output_dir or config.get("output_dir", "results")
    timing = bool(config.get("timing", False))
    oracle_tol = float(config.get("oracle_tol", 1e-10))
    os.makedirs(out_dir, exist_ok=True)

    instances = []
    for i, doc in enumerate(config.get("instances", [])):
        name, p, extras = build_instance(doc, i, seed)
        saddle = extras["saddle"]
        if saddle is None and config.get("algorithms"):
            saddle = reference_solution(p, oracle_tol)
        instances.append((name, p, extras, saddle))
    # schedules are parsed up front so that config errors surface before any run
    cells = []
    used = set()
    labels = [_label(alg, j, used) for j, alg in enumerate(config.get("algorithms", []))]
    for i, (name, p, extras, saddle) in enumerate(instances):
        for j, alg in enumerate(config.get("algorithms", [])):
            if "instances" in alg and name not in alg["instances"]:
                continue
            if alg["name"] in STEPS:
                build_schedule(alg["schedule"], p, extras, f"algorithms[{j}].schedule")
            cell_seed = instance_seed(seed, 1_000_003 * (i + 1) + j)
            cells.append(((name, p, extras, alg, labels[j], cell_seed), saddle))

    def work(item):
        cell, saddle = item
        return _run_cell(cell, out_dir, timing, saddle)

    if threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]

    summary = {
        "seed": seed,
        "output_dir": out_dir,
        "instances": [{"name": name, "config": _jsonable(extras["config"]), "notes": extras["notes"],
                       "oracle": None if s is None else {"phi_star": s.phi_star, "kkt": s.kkt,
                                                         "converged": s.converged}}
                      for name, p, extras, s in instances],
        "cells": results,
        "ok": all(r["status"] == "ok" for r in results),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
    return summary


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj
