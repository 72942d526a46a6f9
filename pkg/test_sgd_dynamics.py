import numpy as np
import pytest
from pydantic import ValidationError

from estimators.schemas import EstimatorConfig
from landscapes.builtin import (
    MemorizationDrift,
    QuadraticTracking,
    SeparablePolynomial,
    SymmetricDoubleWell,
)
from markov_noise.chains import TiltedFlip, flip
from markov_noise.core import averaged_grads
from sgd_dynamics.core import (
    run,
    run_batch,
    sgd_step,
    single_scale_batch,
    single_scale_run,
    validate_schedule,
)
from sgd_dynamics.ode import (
    max_dt,
    ode_flow,
    reduced_slow_gradient,
    reduced_slow_gradient_batch,
)
from sgd_dynamics.schemas import (
    ConstantSchedule,
    DecreasingSchedule,
    TwoScaleState,
)
from utils.errors import (
    DimensionMismatchError,
    NonFiniteIterateError,
    ParamOutOfRangeError,
)

# (x - 1)^2, шум не влияет
PARABOLA = [[1.0, -2.0, 1.0]]


def _tracking_error(rec, L):
    lam = L.branches_batch(rec.y)[:, 0, 0]
    return np.abs(rec.x[:, 0] - lam)


# ---------- validate_schedule ----------


def test_harmonic_schedule_report():
    rep = validate_schedule(DecreasingSchedule(c_a=1, c_b=1, q=1, p=1.5))
    assert rep.timescale_separated
    # сумма b_n при p = 1.5 сходится
    assert not rep.robbins_monro
    assert any("b_n converges" in r for r in rep.reasons)


def test_robbins_monro_schedule():
    rep = validate_schedule(DecreasingSchedule(c_a=1, c_b=1, q=0.6, p=0.9))
    assert rep.robbins_monro and rep.timescale_separated
    assert rep.reasons == []


def test_slow_decay_violates_square_summability():
    rep = validate_schedule(DecreasingSchedule(c_a=1, c_b=1, q=0.4, p=0.9))
    assert not rep.robbins_monro
    assert any("a_n^2 diverges" in r for r in rep.reasons)


def test_constant_schedule_report():
    rep = validate_schedule(ConstantSchedule(a=0.01, epsilon=0.1))
    assert (rep.robbins_monro, rep.timescale_separated) == (False, True)


def test_schedule_steps():
    assert ConstantSchedule(a=0.01, epsilon=0.1).steps(7) == pytest.approx(
        (0.01, 0.001)
    )
    s = DecreasingSchedule(c_a=1.0, c_b=2.0, q=1.0, p=1.5)
    assert s.steps(3) == pytest.approx((0.25, 0.25))


def test_constant_schedule_bounds():
    with pytest.raises(ValidationError):
        ConstantSchedule(a=0.01, epsilon=1.0)
    with pytest.raises(ValidationError):
        ConstantSchedule(a=0.0, epsilon=0.1)


# ---------- sgd_step ----------


def test_averaged_step_at_critical_point_keeps_state(rng):
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    y = np.array([2.0])
    st = TwoScaleState(x=L.branches(y)[0], y=y, noise_state=1, n=5)
    s = ConstantSchedule(a=0.1, epsilon=0.1)
    for mode in ("averaged_full", "averaged_frozen"):
        nxt = sgd_step(st, L, C, s, mode, rng)
        assert nxt.n == 6
        assert nxt.x == pytest.approx(st.x, abs=1e-14)
        assert nxt.y == pytest.approx(st.y, abs=1e-14)
        assert nxt.noise_state == 1


def test_instantaneous_step_moves_noise_and_counter(rng):
    L, C = QuadraticTracking(epsilon=0.1), flip(1.0)
    st = TwoScaleState(x=np.array([0.0]), y=np.array([0.0]))
    s = ConstantSchedule(a=0.1, epsilon=0.1)
    nxt = sgd_step(st, L, C, s, "instantaneous", rng)
    # flip(1) всегда меняет состояние: z = +1, grad1 = 2*(0 - 1 - 0)
    assert nxt.noise_state == 1
    assert nxt.x == pytest.approx([0.2])
    assert nxt.y == pytest.approx([-0.02])
    assert nxt.n == 1


def test_unknown_mode(rng):
    L, C = QuadraticTracking(), flip(0.5)
    st = TwoScaleState(x=np.zeros(1), y=np.zeros(1))
    with pytest.raises(ParamOutOfRangeError):
        sgd_step(st, L, C, ConstantSchedule(a=0.1, epsilon=0.1), "adam", rng)


def test_step_divergence_guard(rng):
    L, C = SeparablePolynomial(PARABOLA), flip(0.5)
    st = TwoScaleState(x=np.array([1e8]), y=np.zeros(0))
    with pytest.raises(NonFiniteIterateError):
        sgd_step(
            st,
            L,
            C,
            ConstantSchedule(a=1.5, epsilon=0.1),
            "averaged_full",
            rng,
        )


# ---------- run ----------


@pytest.mark.parametrize("mode", ["instantaneous", "averaged_full"])
def test_parabola_closed_form(mode):
    L, C = SeparablePolynomial(PARABOLA), flip(0.5)
    s = ConstantSchedule(a=0.1, epsilon=0.1)
    rec = run(L, C, s, mode, [3.0], None, 20, seed=1)
    expected = 1.0 + 2.0 * 0.8 ** np.arange(21)
    assert rec.x[:, 0] == pytest.approx(expected, rel=1e-12)
    assert rec.loss == pytest.approx((expected - 1.0) ** 2, rel=1e-10)


def test_record_counts():
    L, C = QuadraticTracking(), flip(0.5)
    s = ConstantSchedule(a=0.01, epsilon=0.1)
    rec = run(L, C, s, "instantaneous", [0.0], [0.0], 10, thin=1, seed=3)
    assert len(rec) == 11
    assert rec.n.tolist() == list(range(11))
    rec = run(L, C, s, "instantaneous", [0.0], [0.0], 10, thin=3, seed=3)
    assert rec.n.tolist() == [0, 3, 6, 9]
    assert rec.x.shape == (4, 1) and rec.y.shape == (4, 1)
    assert rec.loss.shape == rec.noise_state.shape == (4,)


def test_identical_seeds_identical_records():
    L, C = MemorizationDrift(epsilon=0.05), TiltedFlip()
    s = ConstantSchedule(a=0.01, epsilon=0.05)
    a = run(L, C, s, "instantaneous", [1.0], [0.0], 2000, thin=7, seed=11)
    b = run(L, C, s, "instantaneous", [1.0], [0.0], 2000, thin=7, seed=11)
    c = run(L, C, s, "instantaneous", [1.0], [0.0], 2000, thin=7, seed=12)
    for field in ("n", "x", "y", "loss", "noise_state"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    assert not np.array_equal(a.noise_state, c.noise_state)


def test_record_csv(tmp_path):
    L, C = QuadraticTracking(), flip(0.5)
    rec = run(
        L, C, ConstantSchedule(a=0.01, epsilon=0.1), "instantaneous",
        [0.0], [1.0], 5, seed=0,
    )
    path = rec.to_csv(tmp_path / "traj.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "n,x0,y0,loss,noise_state"
    assert len(lines) == 7
    assert lines[1].startswith("0,0.0,1.0,")


def test_run_reports_divergence_with_partial_record():
    L, C = SeparablePolynomial(PARABOLA), flip(0.5)
    s = ConstantSchedule(a=1.5, epsilon=0.1)
    with pytest.raises(NonFiniteIterateError) as exc:
        run(L, C, s, "averaged_full", [3.0], None, 100, seed=0)
    # |x_n - 1| = 2^(n+1): порог 1e8 пройден на шаге 26
    assert exc.value.fields["n"] == 26
    assert exc.value.record.n[-1] == 25
    assert len(exc.value.record) == 26


def test_batch_freezes_only_diverged_replica():
    L, C = SeparablePolynomial(PARABOLA), flip(0.5)
    s = ConstantSchedule(a=1.5, epsilon=0.1)
    stable, blown = run_batch(
        L,
        C,
        s,
        "averaged_full",
        np.array([[1.0], [3.0]]),
        np.zeros((2, 0)),
        100,
        rngs=[0, 1],
    )
    assert stable.diverged_at is None and len(stable) == 101
    assert blown.diverged_at == 26 and len(blown) == 26


def test_batch_replica_matches_single_run():
    L, C = QuadraticTracking(epsilon=0.05), flip(0.3)
    s = ConstantSchedule(a=0.01, epsilon=0.05)
    seeds = [5, 6, 7]
    batch = run_batch(
        L,
        C,
        s,
        "instantaneous",
        np.ones((3, 1)),
        np.zeros((3, 1)),
        5000,
        rngs=seeds,
        thin=10,
        seeds=seeds,
    )
    single = run(
        L, C, s, "instantaneous", [1.0], [0.0], 5000, thin=10, seed=6
    )
    assert np.array_equal(batch[1].x, single.x)
    assert np.array_equal(batch[1].noise_state, single.noise_state)
    assert batch[1].seed == 6


def test_estimator_needs_instantaneous_mode():
    L, C = QuadraticTracking(), flip(0.5)
    est = EstimatorConfig(kind="smoothed_gaussian", delta=0.1)
    with pytest.raises(ParamOutOfRangeError):
        run(
            L, C, ConstantSchedule(a=0.01, epsilon=0.1), "averaged_full",
            [0.0], [0.0], 10, seed=0, estimator=est,
        )


def test_quadratic_tracking_instantaneous():
    L, C = QuadraticTracking(epsilon=0.05), flip(0.5)
    s = ConstantSchedule(a=0.01, epsilon=0.05)
    rec = run(L, C, s, "instantaneous", [0.0], [0.0], 100_000, seed=2024)
    tail = rec.n >= 90_000
    branch = L.branches_batch(rec.y[tail])[:, 0, 0]
    assert abs(rec.x[tail, 0].mean() - branch.mean()) < 0.02


def test_decreasing_schedule_tracks_branch_averaged():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    s = DecreasingSchedule(c_a=0.5, c_b=0.5, q=1.0, p=1.5)
    rec = run(L, C, s, "averaged_full", [1.0], [0.0], 10_000, seed=0)
    a_final = s.steps(10_000)[0]
    err = _tracking_error(rec, L)[rec.n >= 1000]
    assert np.median(err) < 10 * a_final


def test_decreasing_schedule_tracks_branch_instantaneous():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    s = DecreasingSchedule(c_a=0.5, c_b=0.5, q=1.0, p=1.5)
    rec = run(L, C, s, "instantaneous", [1.0], [0.0], 10_000, seed=8)
    a_final = s.steps(10_000)[0]
    err = _tracking_error(rec, L)[rec.n >= 1000]
    assert np.median(err) < 10 * np.sqrt(a_final)


@pytest.mark.slow
def test_decreasing_schedule_long_run_matches_flow():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    s = DecreasingSchedule(c_a=0.5, c_b=0.5, q=1.0, p=1.5)
    n = 1_000_000
    rec = run(L, C, s, "instantaneous", [1.0], [0.0], n, thin=100, seed=4)
    assert _tracking_error(rec, L)[-1] < 1e-2
    err = _tracking_error(rec, L)[rec.n >= n // 10]
    assert np.median(err) < 10 * np.sqrt(s.steps(n)[0])


def test_memorization_drift_tracking_and_reduced_gradient():
    L, C = MemorizationDrift(epsilon=0.05), TiltedFlip()
    s = DecreasingSchedule(c_a=0.2, c_b=0.01, q=1.0, p=1.5)
    y0 = np.array([0.0])
    x0 = L.branches(y0)[1]
    n = 10_000
    rec = run(L, C, s, "instantaneous", x0, y0, n, seed=17)
    lam = L.branches_batch(rec.y)[:, 1, 0]
    tail = rec.n >= n // 10
    err = np.abs(rec.x[:, 0] - lam)[tail]
    assert np.median(err) < 10 * s.steps(n)[0]

    # усреднённые по блокам приращения y сонаправлены с
    # -grad phi(lambda_2(y), y)
    b = np.array([s.steps(k)[1] for k in rec.n[:-1]])
    inc = np.diff(rec.y[:, 0]) / b
    g = reduced_slow_gradient_batch(
        L, C, rec.y[:-1], np.ones(len(rec) - 1, dtype=int)
    )[:, 0]
    block = 100
    tail = slice(n // 10, n)
    inc_b = inc[tail].reshape(-1, block).mean(axis=1)
    g_b = g[tail].reshape(-1, block).mean(axis=1)
    for w in np.split(np.arange(inc_b.size), 9):
        cos = np.dot(inc_b[w], -g_b[w]) / (
            np.linalg.norm(inc_b[w]) * np.linalg.norm(g_b[w])
        )
        assert cos > 0.9


def test_reduced_gradient_single_point():
    L, C = MemorizationDrift(epsilon=0.05), TiltedFlip()
    y = np.array([1.0])
    x = L.branches(y)[1]
    _, g2 = averaged_grads(L, C, x, y, "frozen")
    assert reduced_slow_gradient(L, C, y, 1) == pytest.approx(0.05 * g2)


def test_estimator_run_stays_near_branch():
    L, C = QuadraticTracking(epsilon=0.05), flip(0.5)
    s = ConstantSchedule(a=0.0005, epsilon=0.05)
    est = EstimatorConfig(kind="smoothed_gaussian", delta=0.5)
    exact = run(L, C, s, "instantaneous", [0.0], [0.0], 40_000, seed=21)
    noisy = run(
        L, C, s, "instantaneous", [0.0], [0.0], 40_000, seed=21, estimator=est
    )
    tail = exact.n >= 10_000
    e_exact = _tracking_error(exact, L)[tail].mean()
    e_noisy = _tracking_error(noisy, L)[tail].mean()
    assert e_noisy < 5 * e_exact


def test_descent_in_averaged_mode():
    L, C = MemorizationDrift(epsilon=0.1), TiltedFlip()
    a = 0.01
    s = ConstantSchedule(a=a, epsilon=0.1)
    rec = run(L, C, s, "averaged_full", [0.5], [1.0], 2000)
    g1, g2 = averaged_grads(L, C, [0.5], [1.0], "full")
    bound = L.curvature_bound * a**2 * (g1 @ g1 + (0.1 * g2) @ (0.1 * g2))
    assert np.all(np.diff(rec.loss) <= bound + 1e-15)
    assert rec.loss[-1] < rec.loss[0]


# ---------- single_scale_run ----------


def test_single_scale_needs_x_only_landscape():
    with pytest.raises(DimensionMismatchError):
        single_scale_run(QuadraticTracking(), 0.01, 1.0, [0.0], 10, seed=0)


def test_single_scale_noiseless_descent():
    L = SeparablePolynomial(PARABOLA)
    rec = single_scale_run(L, 0.1, 0.0, [3.0], 30, seed=0)
    assert rec.x[:, 0] == pytest.approx(
        1.0 + 2.0 * 0.8 ** np.arange(31), rel=1e-12
    )
    assert rec.mode == "single_scale"


def test_single_scale_stationary_variance():
    # V = x^2: x <- (1 - 2a) x - a*sigma*xi, дисперсия a*sigma^2/(4 - 4a)
    L = SeparablePolynomial([[0.0, 0.0, 1.0]])
    a, sigma = 0.05, 1.0
    recs = single_scale_batch(
        L, a, sigma, np.zeros((20, 1)), 20_000, rngs=range(20), thin=5
    )
    xs = np.concatenate([r.x[r.n >= 1000, 0] for r in recs])
    expected = a * sigma**2 / (4 - 4 * a)
    assert xs.var() == pytest.approx(expected, rel=0.05)


def test_single_scale_symmetric_well_short():
    L = SymmetricDoubleWell(depth=0.0075, width=0.1)
    recs = single_scale_batch(
        L,
        0.005,
        1.0,
        np.full((16, 1), 0.1),
        600_000,
        rngs=range(16),
        thin=10,
    )
    fractions = [np.mean(r.x[:, 0] > 0) for r in recs]
    assert abs(np.median(fractions) - 0.5) < 0.06


@pytest.mark.slow
def test_single_scale_symmetric_well_acceptance():
    L = SymmetricDoubleWell(depth=0.0075, width=0.1)
    recs = single_scale_batch(
        L, 0.005, 1.0, np.full((10, 1), 0.1), 10_000_000, rngs=range(10),
        thin=100,
    )
    fractions = [np.mean(r.x[:, 0] > 0) for r in recs]
    assert abs(np.median(fractions) - 0.5) < 0.02


# ---------- ode_flow ----------


def test_flow_stays_at_equilibrium():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    y0 = np.array([1.0])
    traj = ode_flow(L, C, L.branches(y0)[0], y0, None, 1.0, 1e-3)
    assert traj.drift_norm.max() < 1e-10
    assert traj.x[-1] == pytest.approx(traj.x[0], abs=1e-12)


def test_flow_matches_exponential():
    L, C = SeparablePolynomial(PARABOLA), flip(0.5)
    traj = ode_flow(L, C, [3.0], None, None, 1.0, 1e-3)
    exact = 1.0 + 2.0 * np.exp(-2.0 * traj.t)
    assert np.max(np.abs(traj.x[:, 0] / exact - 1.0)) < 1e-6
    assert traj.t[-1] == pytest.approx(1.0)


def test_flow_dt_halving():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    coarse = ode_flow(L, C, [1.0], [0.5], None, 2.0, 2e-3)
    fine = ode_flow(L, C, [1.0], [0.5], None, 2.0, 1e-3)
    end_c = np.concatenate([coarse.x[-1], coarse.y[-1]])
    end_f = np.concatenate([fine.x[-1], fine.y[-1]])
    assert np.max(np.abs(end_c - end_f)) < 1e-6


def test_flow_rejects_large_dt():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    with pytest.raises(ParamOutOfRangeError):
        ode_flow(L, C, [1.0], [0.5], None, 1.0, 2 * max_dt(L))


def test_flow_epsilon_override():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    a = ode_flow(L, C, [1.0], [0.5], 0.2, 1.0, 1e-3)
    b = ode_flow(L.with_epsilon(0.2), C, [1.0], [0.5], None, 1.0, 1e-3)
    assert np.array_equal(a.y, b.y)


def test_sgd_deviation_from_flow_shrinks_with_step():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    deviations = []
    for a in (0.02, 0.01, 0.005):
        n = int(round(10.0 / a))
        rec = run(
            L, C, ConstantSchedule(a=a, epsilon=0.1), "averaged_full",
            [1.0], [0.5], n,
        )
        flow = ode_flow(L, C, [1.0], [0.5], None, 10.0, a / 8, record_every=8)
        assert flow.x.shape == rec.x.shape
        dev = max(
            np.max(np.abs(rec.x - flow.x)), np.max(np.abs(rec.y - flow.y))
        )
        deviations.append(dev)
    assert deviations[0] > deviations[1] > deviations[2]
