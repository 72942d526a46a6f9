import numpy as np
import pytest

from landscapes.builtin import (
    MemorizationDrift,
    QuadraticTracking,
    SeparablePolynomial,
)
from markov_noise.chains import (
    FixedChain,
    SoftmaxChain,
    TiltedFlip,
    flip,
    iid,
    random_chain,
    two_rate,
)
from markov_noise.core import (
    averaged_grads,
    averaged_loss,
    noise_step,
    stationary_batch,
    stationary_distribution,
    step_states,
)
from markov_noise.registry import make_chain
from utils.errors import (
    DimensionMismatchError,
    NotDifferentiableError,
    NotIrreducibleError,
    UnknownNameError,
)
from utils.seeding import spawn_rngs


def _replica_occupancy(C, k, R=1000, steps=10_000, burn=100, seed=0):
    """Частоты состояний по R независимым копиям цепи."""
    rng = np.random.default_rng(seed)
    X, Y = np.zeros((R, 1)), np.zeros((R, 0))
    states = rng.integers(0, k, size=R)
    counts = np.zeros((R, k))
    for n in range(steps + burn):
        states = step_states(C, X, Y, states, rng.random(R))
        if n >= burn:
            counts[np.arange(R), states] += 1
    return counts / steps


# ---------- noise_step ----------


def test_identity_kernel_keeps_state(rng):
    C = FixedChain(np.eye(3))
    for s in range(3):
        assert noise_step(C, [0.0], [], s, rng) == s


def test_iid_rows_give_iid_samples(rng):
    C = iid([0.2, 0.8])
    draws = [noise_step(C, [0.0], [], 0, rng) for _ in range(20_000)]
    assert abs(np.mean(draws) - 0.8) < 0.015


def test_flip_rate(rng):
    C = flip(0.3)
    state, flips = 0, 0
    for _ in range(100_000):
        nxt = noise_step(C, [0.0], [], state, rng)
        flips += nxt != state
        state = nxt
    assert abs(flips / 100_000 - 0.3) < 0.005


def test_batch_step_matches_single_step():
    C = random_chain(4, seed=2)
    g1, g2 = np.random.default_rng(5), np.random.default_rng(5)
    states = np.array([0, 1, 2, 3])
    single = [noise_step(C, [0.0], [], int(s), g1) for s in states]
    batch = step_states(
        C, np.zeros((4, 1)), np.zeros((4, 0)), states, g2.random(4)
    )
    assert batch.tolist() == single


# ---------- stationary ----------


def test_stationary_closed_forms():
    ds = FixedChain([[0.2, 0.8, 0.0], [0.3, 0.2, 0.5], [0.5, 0.0, 0.5]])
    assert stationary_distribution(ds, [0.0], []).weights == pytest.approx(
        (1 / 3, 1 / 3, 1 / 3)
    )
    tr = stationary_distribution(two_rate(0.3, 0.1), [0.0], [])
    assert tr.weights == pytest.approx((0.25, 0.75))


def test_random_chain_residual_and_occupancy():
    C = random_chain(5, seed=11)
    pi = stationary_distribution(C, [0.0], []).array
    assert np.max(np.abs(pi @ C.matrix - pi)) < 1e-10
    occ = _replica_occupancy(C, 5)
    mean = occ.mean(axis=0)
    sigma = occ.std(axis=0) / np.sqrt(occ.shape[0])
    assert np.all(np.abs(mean - pi) < 4 * sigma + 1e-4)


def test_large_chain_uses_power_iteration():
    C = random_chain(250, seed=4)
    pi = stationary_distribution(C, [0.0], []).array
    assert np.max(np.abs(pi @ C.matrix - pi)) < 1e-10


def test_reducible_chain_is_rejected():
    C = FixedChain([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NotIrreducibleError):
        stationary_distribution(C, [0.0], [])


def test_builtins_residual_on_grid():
    chains = [
        TiltedFlip(length=0.7, stickiness=0.3),
        SoftmaxChain(
            [0.0, 0.5, -0.5],
            [[1.0], [0.0], [-1.0]],
            [[0.5], [0.0], [0.2]],
        ),
    ]
    for C in chains:
        for x in np.linspace(-2, 2, 9):
            for y in np.linspace(-2, 2, 5):
                P = C.kernel([x], [y])
                pi = stationary_distribution(C, [x], [y]).array
                assert np.max(np.abs(pi @ P - pi)) < 1e-10


def test_stationary_batch_matches_single():
    C = TiltedFlip()
    X = np.linspace(-1, 1, 7)[:, None]
    pis = stationary_batch(C.kernel_batch(X, np.zeros((7, 0))))
    for i, x in enumerate(X[:, 0]):
        single = stationary_distribution(C, [x], []).array
        assert pis[i] == pytest.approx(single, abs=1e-14)


# ---------- averaged loss / grads ----------


def test_averaged_loss_degenerate_cases():
    L = SeparablePolynomial([[1.0, 2.0, 3.0]])
    C = FixedChain([[0.5, 0.5], [0.5, 0.5]])
    expected = L.eval([0.7], None)
    assert averaged_loss(L, C, [0.7], None) == pytest.approx(expected)
    Q = QuadraticTracking(epsilon=0.1, c=1.0)
    x, y = 0.4, -1.3
    assert averaged_loss(Q, flip(0.5), [x], [y]) == pytest.approx(
        (x - 0.1 * y) ** 2 + 1.0
    )


def test_averaged_loss_matches_ergodic_average():
    Q = QuadraticTracking(epsilon=0.1)
    C = two_rate(0.3, 0.1)
    x, y = 0.2, 0.5
    occ = _replica_occupancy(C, 2, R=500, steps=2_000, seed=3)
    f = np.array([Q.eval([x], [y], z) for z in range(2)])
    per_run = occ @ f
    sigma = per_run.std() / np.sqrt(per_run.size)
    assert abs(per_run.mean() - averaged_loss(Q, C, [x], [y])) < 3 * sigma


def test_arity_mismatch():
    with pytest.raises(DimensionMismatchError):
        averaged_loss(
            QuadraticTracking(epsilon=0.1), random_chain(3, 0), [0], [0]
        )


def test_frozen_equals_full_for_fixed_kernel():
    Q = QuadraticTracking(epsilon=0.1)
    fr = averaged_grads(Q, flip(0.2), [0.3], [1.0], "frozen")
    fu = averaged_grads(Q, flip(0.2), [0.3], [1.0], "full")
    assert np.array_equal(fr[0], fu[0]) and np.array_equal(fr[1], fu[1])


def _fd_phi(L, C, x, y, h=1e-5):
    def phi(a, b):
        return averaged_loss(L, C, [a], [b])

    gx = (phi(x + h, y) - phi(x - h, y)) / (2 * h)
    gy = (phi(x, y + h) - phi(x, y - h)) / (2 * h)
    # вторая компонента в соглашении d/du
    return np.array([gx, gy / L.epsilon])


@pytest.mark.parametrize(
    "L, C",
    [
        (
            MemorizationDrift(epsilon=0.1),
            TiltedFlip(length=1.0, stickiness=0.4),
        ),
        (
            QuadraticTracking(epsilon=0.2),
            SoftmaxChain([0.1, -0.1], [[0.8], [-0.3]], [[0.5], [-0.4]]),
        ),
    ],
)
def test_full_mode_matches_fd_of_averaged_loss(L, C):
    rng = np.random.default_rng(8)
    for _ in range(10):
        x, y = rng.uniform(-1.5, 1.5), rng.uniform(-2, 2)
        g1, g2 = averaged_grads(L, C, [x], [y], "full")
        g = np.concatenate([g1, g2])
        fd = _fd_phi(L, C, x, y)
        assert np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1.0) < 1e-6


def test_frozen_and_full_differ_by_the_correction():
    L = MemorizationDrift(epsilon=0.1)
    C = TiltedFlip()
    x, y, h = 0.6, 2.0, 1e-5
    fr = np.concatenate(averaged_grads(L, C, [x], [y], "frozen"))
    fu = np.concatenate(averaged_grads(L, C, [x], [y], "full"))
    assert abs(fu[0] - fr[0]) > 1e-3
    f = np.array([L.eval([x], [y], z) for z in range(2)])
    dpi = (
        stationary_distribution(C, [x + h], []).array
        - stationary_distribution(C, [x - h], []).array
    ) / (2 * h)
    assert fu[0] - fr[0] == pytest.approx(dpi @ f, rel=1e-6)


class _NoDerivative(TiltedFlip):
    def kernel_derivatives_batch(self, X, Y):
        return None


class _Rough(TiltedFlip):
    differentiable = False


def test_fd_fallback_and_non_differentiable():
    L = MemorizationDrift(epsilon=0.1)
    exact = averaged_grads(L, TiltedFlip(), [0.3], [1.0], "full")
    approx = averaged_grads(L, _NoDerivative(), [0.3], [1.0], "full")
    assert approx[0] == pytest.approx(exact[0], rel=1e-6)
    assert approx[1] == pytest.approx(exact[1], rel=1e-6)
    with pytest.raises(NotDifferentiableError):
        averaged_grads(L, _Rough(), [0.3], [1.0], "full")
    averaged_grads(L, _Rough(), [0.3], [1.0], "frozen")


def test_registry():
    assert make_chain("two_rate", {"alpha": 0.3, "beta": 0.1}).n_states == 2
    assert make_chain("tilted_flip", {}).name == "tilted_flip"
    with pytest.raises(UnknownNameError):
        make_chain("nope", {})


def test_replica_streams_are_disjoint():
    a, b = spawn_rngs(1, 2)
    assert a.random() != b.random()
