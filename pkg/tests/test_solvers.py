import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdsplit import (Dense, ElasticNet, Identity, L1, ProblemInstance, SaddlePoint, ShiftedL1,
                     ZeroFunction)
from pdsplit import subproblem as sp
from pdsplit.problem import kkt_residual
from pdsplit.schedules import (ParameterSchedule, ScheduleError, SequenceFamily,
                               convex_rate_schedule, strongly_convex_rate_schedule,
                               tikhonov_schedule)
from pdsplit.solvers import (STEPS, InnerConfig, SolverState, init_state, run, scheme_residual,
                             step_joint, step_nonseparable, step_split)

from conftest import l1l1_case, planted_instance, random_schedule

EXACT = InnerConfig(tol=1e-12)


def scalar_instance():
    """f = g = 0, A = B = I(1), b = 0."""
    return ProblemInstance(ZeroFunction(1), ZeroFunction(1), Identity(1), Identity(1), np.zeros(1))


def unit_schedule(gamma=2.0, delta=0.6):
    """alpha = beta = 1 and eps = 0 at every k."""
    one = SequenceFamily.constant(1.0)
    return ParameterSchedule(gamma, delta, one, one, SequenceFamily.constant(0.0))


def solve2(a11, a12, a21, a22, r1, r2):
    det = a11 * a22 - a12 * a21
    return (r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det


def test_init_state_zero_start():
    _, p = l1l1_case(1)
    s = init_state(p, tikhonov_schedule())
    assert s.k == 1 and not s.Z.any() and not s.H.any()


def test_init_state_example_start():
    cfg, p = l1l1_case(1)
    s = init_state(p, tikhonov_schedule(2.0, 0.7), y0=[-0.5, 0.5, 1.0])
    assert np.array_equal(s.H, [-1.0, 1.0, 2.0])


def test_init_state_at_saddle_blends_to_saddle(rng):
    p, sd = planted_instance(rng)
    sched = random_schedule(rng)
    s = init_state(p, sched, sd.x_star, sd.y_star, sd.lambda_star)
    assert np.allclose(s.Z_delta(sched), sd.x_star, atol=1e-14)
    assert np.allclose(s.H_delta(sched), sd.y_star, atol=1e-14)


def test_init_state_dimension_error():
    _, p = l1l1_case(1)
    with pytest.raises(ValueError):
        init_state(p, tikhonov_schedule(), x0=np.zeros(2))


@pytest.mark.oracle
def test_joint_scalar_step_against_2x2_solve():
    p = scalar_instance()
    sched = unit_schedule()
    s = SolverState(1, np.ones(1), np.ones(1), np.zeros(1), np.full(1, 2.0), np.full(1, 2.0))
    nxt, ws = step_joint(p, sched, s)
    # lambda~ = 0 - 0.6*1*(1+1) ; centers stay at 1 since Z = gamma x
    lt = -1.2
    th, w = 1.6, 3.0
    x, y = solve2(th + w, th, th, th + w, w - lt, w - lt)
    assert abs(nxt.x[0] - x) <= 1e-10 and abs(nxt.y[0] - y) <= 1e-10
    Z = 3.0 * x - 1.0
    H = 3.0 * y - 1.0
    lam = 0.0 + (0.6 * Z - 0.2 * x) + (0.6 * H - 0.2 * y)
    assert abs(nxt.lam[0] - lam) <= 1e-10
    assert ws.lambda_tilde[0] == pytest.approx(lt)


@pytest.mark.oracle
def test_split_scalar_step_against_hand_algebra():
    p = scalar_instance()
    sched = unit_schedule()
    s = SolverState(1, np.ones(1), np.ones(1), np.zeros(1), np.full(1, 2.0), np.full(1, 2.0))
    nxt, ws = step_split(p, sched, s)
    th, w, lt = 1.6, 3.0, -1.2
    # x-step with y frozen at 1: lt + th (x + 1) + w (x - 1) = 0
    x = (w - lt - th * 1.0) / (th + w)
    # y-step with x frozen at the new x
    y = (w - lt - th * x) / (th + w)
    assert abs(nxt.x[0] - x) <= 1e-12 and abs(nxt.y[0] - y) <= 1e-12
    lam_bar = (0.6 * (3 * x - 1) - 0.2 * x) + (0.6 * 2.0 - 0.2 * 1.0)
    assert abs(ws.lambda_bar[0] - lam_bar) <= 1e-12
    assert ws.lambda_hat is nxt.lam


@pytest.mark.oracle
def test_nonseparable_scalar_step():
    p = ProblemInstance.nonseparable(ZeroFunction(1), Identity(1), np.ones(1))
    sched = convex_rate_schedule(2.0, 0.6)  # alpha = beta = eps = 1 at k = 1
    s = init_state(p, sched, np.zeros(1), None, np.zeros(1))
    nxt, ws = step_nonseparable(p, sched, s)
    # lambda~ = 0.6; 0.6 + 1.6 (x - 1) + 3 x + 1 x = 0
    x = (1.6 - 0.6) / (1.6 + 3.0 + 1.0)
    assert abs(nxt.x[0] - x) <= 1e-12
    Zd = 0.6 * (3.0 * x) - 0.2 * x
    assert abs(nxt.lam[0] - (Zd - 1.0)) <= 1e-12


def test_nonseparable_rejects_y_block():
    _, p = l1l1_case(1)
    with pytest.raises(ValueError):
        step_nonseparable(p, tikhonov_schedule(), init_state(p, tikhonov_schedule()))


def test_z_identity_bitwise(rng):
    p, _ = planted_instance(rng)
    sched = random_schedule(rng)
    s = init_state(p, sched, rng.standard_normal(p.n_x), rng.standard_normal(p.n_y), rng.standard_normal(p.m))
    for step in (step_joint, step_split):
        nxt, ws = step(p, sched, s)
        inv_a = 1.0 / ws.coeffs.alpha_k
        assert np.array_equal(nxt.Z, (sched.gamma + inv_a) * nxt.x - inv_a * s.x)
        assert np.array_equal(nxt.H, (sched.gamma + inv_a) * nxt.y - inv_a * s.y)


def test_lambda_update_identity_bitwise(rng):
    p, _ = planted_instance(rng)
    sched = random_schedule(rng)
    s = init_state(p, sched, rng.standard_normal(p.n_x), rng.standard_normal(p.n_y), rng.standard_normal(p.m))
    for _ in range(5):
        for step in (step_joint, step_split):
            nxt, ws = step(p, sched, s)
            c = ws.coeffs
            want = s.lam + c.ab * (p.A.apply(nxt.Z_delta(sched)) + p.B.apply(nxt.H_delta(sched)) - p.b)
            assert np.array_equal(nxt.lam, want)
            rel = (nxt.lam - s.lam) / c.alpha_k - c.beta_k * (
                p.A.apply(nxt.Z_delta(sched)) + p.B.apply(nxt.H_delta(sched)) - p.b)
            assert np.linalg.norm(rel) <= 1e-12 * max(1.0, np.linalg.norm(nxt.lam))
        s = nxt


@pytest.mark.parametrize("algorithm", ["joint", "split"])
def test_saddle_is_fixed_point(rng, algorithm):
    for _ in range(10):
        p, sd = planted_instance(rng)
        assert sd.kkt <= 1e-12
        sched = random_schedule(rng)
        s = init_state(p, sched, sd.x_star, sd.y_star, sd.lambda_star)
        for _ in range(3):
            nxt, _ = STEPS[algorithm](p, sched, s, EXACT)
            assert np.linalg.norm(nxt.x - s.x) <= 10 * EXACT.tol
            assert np.linalg.norm(nxt.y - s.y) <= 10 * EXACT.tol
            assert np.linalg.norm(nxt.lam - s.lam) <= 1e-9
            s = nxt


def test_nonseparable_saddle_fixed_point():
    # min |x - 1|_1 s.t. x = 2 has x* = 2, -lambda* in d|.-1|(2) = {1}
    p = ProblemInstance.nonseparable(ShiftedL1(1, 1.0, [1.0]), Identity(1), np.full(1, 2.0))
    sd = SaddlePoint(np.full(1, 2.0), np.zeros(0), np.full(1, -1.0), 1.0)
    assert kkt_residual(p, sd) == 0.0
    sched = tikhonov_schedule(2.0, 0.7, eps_c=0.0)
    s = init_state(p, sched, sd.x_star, None, sd.lambda_star)
    for _ in range(5):
        nxt, _ = step_nonseparable(p, sched, s, EXACT)
        assert np.linalg.norm(nxt.x - s.x) <= 10 * EXACT.tol
        s = nxt


def _degenerate(rng, m=4):
    return ProblemInstance.nonseparable(ElasticNet(m, 0.5, 0.3), Dense(rng.standard_normal((m, m))),
                                        rng.standard_normal(m))


def test_degenerate_block_all_three_agree(rng):
    p = _degenerate(rng)
    sched = convex_rate_schedule(2.0, 0.6)
    x0, l0 = rng.standard_normal(4), rng.standard_normal(4)
    states = {a: init_state(p, sched, x0, None, l0) for a in STEPS}
    for _ in range(100):
        states = {a: STEPS[a](p, sched, states[a])[0] for a in STEPS}
        ref = states["joint"]
        for a in ("split", "nonseparable"):
            assert np.array_equal(states[a].x, ref.x)
            assert np.array_equal(states[a].lam, ref.lam)


def test_scheme_residual_small_on_fast_path(rng):
    for _ in range(5):
        m = 4
        p = ProblemInstance(ShiftedL1(m, 1.0, rng.standard_normal(m)), L1(m, 0.5), Identity(m),
                            _diag_op(rng, m), np.zeros(m))
        sched = random_schedule(rng)
        s = init_state(p, sched, rng.standard_normal(m), rng.standard_normal(m), rng.standard_normal(m))
        for _ in range(50):
            nxt, ws = step_split(p, sched, s)
            assert ws.inner_residual == 0.0
            assert scheme_residual(p, sched, s, nxt, ws) <= 1e-8
            s = nxt


def _diag_op(rng, m):
    from pdsplit import Diagonal
    return Diagonal(rng.uniform(0.5, 2.0, m))


def test_truncated_inner_solve_tracks_inner_residual(rng, monkeypatch):
    monkeypatch.setattr(sp, "NEWTON_MAX_ROWS", -1)
    ratios = []
    for _ in range(6):
        m, n = 5, 8
        p = ProblemInstance(ShiftedL1(m, 1.0, rng.standard_normal(m)), L1(n, 0.3), Identity(m),
                            Dense(-rng.standard_normal((m, n))), np.zeros(m))
        sched = convex_rate_schedule()
        s = init_state(p, sched, rng.standard_normal(m), rng.standard_normal(n), rng.standard_normal(m))
        for algorithm in ("joint", "split"):
            nxt, ws = STEPS[algorithm](p, sched, s, InnerConfig(tol=1e-14, max_inner=1))
            assert not ws.inner_converged
            ratios.append(scheme_residual(p, sched, s, nxt, ws) / ws.inner_residual)
    ratios = np.array(ratios)
    assert np.all((ratios > 0.1) & (ratios < 10.0))


def test_run_zero_iterations():
    cfg, p = l1l1_case(1)
    tr = run("split", p, cfg.schedule(), 0)
    assert len(tr) == 1 and tr.rows[0]["k"] == 1


def test_run_deterministic(rng):
    p, sd = planted_instance(rng)
    sched = random_schedule(rng)
    x0 = rng.standard_normal(p.n_x)
    a = run("joint", p, sched, 50, x0, saddle=sd, stride=7, energy=True)
    b = run("joint", p, sched, 50, x0, saddle=sd, stride=7, energy=True)
    assert a.to_csv_text() == b.to_csv_text()
    assert [r["k"] for r in a.rows] == [1, 8, 15, 22, 29, 36, 43, 50, 51]


def test_run_early_stop():
    cfg, p = l1l1_case(1)
    from pdsplit.experiments import l1l1_saddle, l1l1_start
    tr = run("split", p, cfg.schedule(), 10_000, *l1l1_start(cfg), saddle=l1l1_saddle(cfg),
             feas_tol=1e-2, obj_tol=1e-1)
    assert tr.last["k"] < 10_001
    assert tr.last["feasibility"] <= 1e-2


def test_run_strict_schedule_check():
    cfg, p = l1l1_case(1)
    bad = ParameterSchedule(1.0, 0.5, SequenceFamily.powerlaw(1, -1), SequenceFamily.powerlaw(1, 1),
                            SequenceFamily.constant(0.0))
    with pytest.raises(ScheduleError):
        run("joint", p, bad, 5, strict=True)
    assert run("joint", p, bad, 5).meta["schedule_valid"] is False


def test_run_argument_errors():
    cfg, p = l1l1_case(1)
    with pytest.raises(ValueError):
        run("newton", p, cfg.schedule(), 5)
    with pytest.raises(ValueError):
        run("split", p, cfg.schedule(), -1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_stops_on_bad_coefficient():
    p = ProblemInstance(ZeroFunction(1), ZeroFunction(1), Identity(1), Identity(1), np.zeros(1))
    # beta is infinite from k = 3 on
    sched = ParameterSchedule(2.0, 0.6, SequenceFamily.constant(1.0),
                              SequenceFamily("custom", table={1: 1.0, 2: 1.0},
                                             fallback=SequenceFamily.constant(float("inf"))),
                              SequenceFamily.constant(0.0))
    with pytest.raises(ScheduleError, match="k=3"):
        run("joint", p, sched, 5)


def test_run_reports_failing_iteration(monkeypatch):
    from pdsplit import solvers
    p = scalar_instance()
    real = solvers.solve_composite
    calls = []

    def flaky(q, *a, **kw):
        calls.append(1)
        if len(calls) == 4:
            raise sp.NumericalFailure("non-finite iterate", iteration=0)
        return real(q, *a, **kw)

    monkeypatch.setattr(solvers, "solve_composite", flaky)
    with pytest.raises(sp.NumericalFailure) as info:
        run("joint", p, unit_schedule(), 10)
    assert info.value.iteration == 4


def test_strongly_convex_trajectory_tail():
    """With a strongly convex regularizer, beta_k |y_{k+1} - y_k|^2 decays."""
    from pdsplit.experiments import LadConfig, gen_lad_instance
    p, _ = gen_lad_instance(LadConfig(m=20, n=120, mu_l2=0.2, seed=3))
    sched = strongly_convex_rate_schedule(p.mu_g, p.B.norm())
    vals = {}

    def cb(prev, nxt, ws):
        vals[prev.k] = ws.coeffs.beta_k * float(np.sum((nxt.y - prev.y) ** 2))

    K = 2000
    run("split", p, sched, K, callback=cb)
    tail = max(v for k, v in vals.items() if k >= K // 2)
    assert tail < vals[10]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["joint", "split"]))
def test_scheme_residual_bounded_by_inner_accuracy(seed, algorithm):
    r = np.random.default_rng(seed)
    p, _ = planted_instance(r)
    sched = random_schedule(r)
    s = init_state(p, sched, r.standard_normal(p.n_x), r.standard_normal(p.n_y), r.standard_normal(p.m))
    for _ in range(20):
        nxt, ws = STEPS[algorithm](p, sched, s, InnerConfig(tol=1e-10))
        assert scheme_residual(p, sched, s, nxt, ws) <= max(1e-8, 10 * ws.inner_residual)
        s = nxt
