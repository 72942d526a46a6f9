import math

import numpy as np
import pytest
from pydantic import ValidationError

from landscapes.base import fd_check
from landscapes.builtin import (
    FOLD_U,
    CurvatureAsymmetricWell,
    MemorizationDrift,
    QuadraticTracking,
    SeparablePolynomial,
    SymmetricDoubleWell,
)
from landscapes.registry import make_landscape
from markov_noise.chains import FixedChain, TiltedFlip, flip
from markov_noise.core import averaged_grads, averaged_loss_batch
from sgd_dynamics.ode import (
    reduced_slow_gradient,
    reduced_slow_gradient_batch,
)
from utils.errors import (
    DimensionMismatchError,
    NoBranchMetadataError,
    ParamOutOfRangeError,
    UnknownNameError,
)


def builtins():
    return [
        QuadraticTracking(epsilon=0.1),
        SymmetricDoubleWell(),
        CurvatureAsymmetricWell(),
        CurvatureAsymmetricWell(barrier=0.0125),
        MemorizationDrift(epsilon=0.05),
        SeparablePolynomial([[0, 0, 1], [0, 0, 3]]),
        SeparablePolynomial([[0, 0, 0, 0, 1]], noise_shift=0.5),
    ]


# ---------- eval / grad ----------


def test_quadratic_tracking_values():
    L = QuadraticTracking(epsilon=0.1, c=1.0)
    assert L.eval([0.0], [0.0], 1) == 1.0
    assert L.eval([1.0], [1.0], 0) == pytest.approx(3.61)
    # x = c*z + epsilon*y: точный минимум
    assert L.eval([1.0 + 0.1 * 2.0], [2.0], 1) == pytest.approx(0.0)
    assert L.grad1([1.2], [2.0], 1) == pytest.approx([0.0], abs=1e-12)


def test_dimension_mismatch():
    L = QuadraticTracking(epsilon=0.1)
    with pytest.raises(DimensionMismatchError):
        L.eval([0.0, 1.0], [0.0], 0)
    with pytest.raises(DimensionMismatchError):
        L.grad2([0.0], [0.0, 1.0], 0)


def test_epsilon_range():
    with pytest.raises(ParamOutOfRangeError):
        QuadraticTracking(epsilon=0.5)


def test_x_only_landscape_accepts_missing_y():
    L = SymmetricDoubleWell()
    assert L.eval([0.0], None) == 1.0
    assert L.grad2([0.3], None).shape == (0,)


# ---------- fd_check ----------


@pytest.mark.parametrize("L", builtins(), ids=lambda L: L.name)
def test_fd_check_all_builtins(L):
    assert fd_check(L, 100, 1e-5, rng=1) < 1e-6


def test_fd_check_is_exact_for_quadratics():
    assert fd_check(QuadraticTracking(epsilon=0.1), 100, 1e-3) < 1e-10
    sep = SeparablePolynomial([[0, 0, 1], [0, 0, 3]])
    assert fd_check(sep, 100, 1e-3) < 1e-10


class _BrokenQuadratic(QuadraticTracking):
    def _g1(self, x, u, z):
        return super()._g1(x, u, z) + 0.1


def test_fd_check_detects_corrupted_gradient():
    assert fd_check(_BrokenQuadratic(epsilon=0.1), 50, 1e-5) > 1e-2


def test_fd_check_rejects_bad_step():
    with pytest.raises(ParamOutOfRangeError):
        fd_check(SymmetricDoubleWell(), 10, 0.1)


# ---------- branches ----------


@pytest.mark.parametrize(
    "L, C",
    [
        (QuadraticTracking(epsilon=0.1), flip(0.3)),
        (SymmetricDoubleWell(), FixedChain([[1.0]])),
        (CurvatureAsymmetricWell(), FixedChain([[1.0]])),
        (MemorizationDrift(epsilon=0.05), TiltedFlip()),
    ],
    ids=lambda v: getattr(v, "name", ""),
)
def test_branches_are_averaged_critical_points(L, C):
    rng = np.random.default_rng(0)
    for _ in range(20):
        _, Y = L.sample_box(1, rng)
        y = Y[0]
        for lam in L.branches(y):
            if np.any(np.isnan(lam)):
                continue
            g1, _ = averaged_grads(L, C, lam, y, mode="frozen")
            assert np.linalg.norm(g1) < 1e-8


def test_no_branch_metadata():
    with pytest.raises(NoBranchMetadataError):
        SeparablePolynomial([[0, 1]]).branches(None)


def test_memorization_branches_closed_form():
    L = MemorizationDrift(epsilon=0.05)
    lam = L.branches([0.0])
    assert lam[:, 0] == pytest.approx([-1.0, 1.0])
    u = np.linspace(-0.35, 0.35, 15)
    br = L.branches_batch(u[:, None] / L.epsilon)
    for j in range(2):
        x = br[:, j, 0]
        assert np.abs(x**3 - x - u).max() < 1e-12
    # за складкой верхняя ветвь пропадает, нижняя: единственный корень
    far = L.branches([-0.5 / L.epsilon])
    assert np.isnan(far[1, 0])
    x = far[0, 0]
    assert x**3 - x + 0.5 == pytest.approx(0.0, abs=1e-12)
    assert L.folds == pytest.approx(
        (-FOLD_U / 0.05, FOLD_U / 0.05)
    )
    assert FOLD_U == pytest.approx(2 / (3 * math.sqrt(3)))


def test_memorization_slow_minima_off_argmin():
    L, C = MemorizationDrift(epsilon=0.05), TiltedFlip()
    mins = L.slow_minima
    assert [m.branch for m in mins] == [0, 1]
    assert mins[0].y[0] == pytest.approx(-mins[1].y[0], rel=1e-9)
    grid = np.linspace(L.box[0][0], L.box[1][0], 4001)
    for m in mins:
        u = L.epsilon * abs(m.y[0])
        # за складкой, на дальнем склоне холма
        assert L.ridge_center < u < L.ridge_center + 4 * L.ridge_width
        assert m.x == pytest.approx(L.branches(m.y)[m.branch], abs=1e-12)
        assert m.curvature > 0
        g = reduced_slow_gradient(L, C, m.y, m.branch)
        assert abs(g[0]) < 1e-8
        # по обе стороны градиент выталкивает обратно к минимуму
        h = 1e-3 / L.epsilon
        left = reduced_slow_gradient(L, C, m.y - h, m.branch)[0]
        right = reduced_slow_gradient(L, C, m.y + h, m.branch)[0]
        assert left < 0 < right
        phi = averaged_loss_batch(
            L, C, grid[:, None], np.repeat(m.y[None, :], grid.size, axis=0)
        )
        x_star = grid[np.argmin(phi)]
        assert np.sign(x_star) != np.sign(m.x[0])
        assert abs(x_star - m.x[0]) > 1.0


def test_no_slow_minima_inside_folds():
    # внутри складок приведённый градиент не обращается в ноль
    L, C = MemorizationDrift(epsilon=0.05), TiltedFlip()
    y = np.linspace(-0.38, 0.38, 201)[:, None] / L.epsilon
    for branch, sign in ((0, -1.0), (1, 1.0)):
        g = reduced_slow_gradient_batch(
            L, C, y, np.full(y.shape[0], branch)
        )[:, 0]
        assert np.all(sign * g > 0)


def test_flat_ridge_leaves_no_slow_minima():
    assert MemorizationDrift(epsilon=0.05, ridge_height=0.0).slow_minima == ()
    with pytest.raises(ParamOutOfRangeError):
        MemorizationDrift(epsilon=0.05, ridge_center=0.3)


def test_quadratic_tracking_reduced_function_is_flat():
    L, C = QuadraticTracking(epsilon=0.1), flip(0.5)
    assert L.slow_minima == ()
    y = np.linspace(-20.0, 20.0, 9)[:, None]
    g = reduced_slow_gradient_batch(L, C, y, np.zeros(9, dtype=int))
    assert np.abs(g).max() < 1e-12


def test_double_well_minima():
    mins = SymmetricDoubleWell(depth=2.0).minima
    assert [m.location[0] for m in mins] == [-1.0, 1.0]
    assert [m.eigenvalues[0] for m in mins] == [16.0, 16.0]


def test_narrow_double_well():
    L = SymmetricDoubleWell(depth=0.0075, width=0.1)
    assert [m.location[0] for m in L.minima] == [-0.1, 0.1]
    assert L.minima[0].eigenvalues[0] == pytest.approx(6.0)
    assert L.eval([0.0], None) == pytest.approx(0.0075)
    assert L.eval([0.1], None) == pytest.approx(0.0, abs=1e-15)
    assert fd_check(L) < 1e-6


def test_asymmetric_well_is_c2_with_equal_depths():
    L = CurvatureAsymmetricWell(c1=2.0, c2=8.0, barrier=0.25)
    assert L.potential(np.array([L.m1, L.m2])).tolist() == [0.0, 0.0]
    assert [m.eigenvalues[0] for m in L.minima] == [2.0, 8.0]
    for edge, inner, outer in (
        (L.lo, L._cap(0.0), L._p1(L.lo)),
        (L.hi, L._cap(L.hi - L.lo), L._p2(L.hi)),
    ):
        assert inner == pytest.approx(outer, abs=1e-12)
    assert L._dcap(0.0) == pytest.approx(L.c1 * (L.lo - L.m1), abs=1e-10)
    assert L._d2cap(0.0) == pytest.approx(L.c1, abs=1e-8)
    assert L._d2cap(L.hi - L.lo) == pytest.approx(L.c2, abs=1e-8)
    assert 0.0 < L.barrier_height < 0.3


# ---------- epsilon scaling ----------


@pytest.mark.parametrize(
    "L",
    [QuadraticTracking(epsilon=0.1), MemorizationDrift(epsilon=0.1)],
    ids=lambda L: L.name,
)
def test_epsilon_scaling(L):
    rng = np.random.default_rng(3)
    c = 2.0
    other = L.with_epsilon(L.epsilon * c)
    for _ in range(20):
        x, y = rng.normal(size=1), rng.normal(size=1)
        z = int(rng.integers(0, 2))
        assert L.eval(x, c * y, z) == pytest.approx(
            other.eval(x, y, z), rel=1e-12, abs=1e-12
        )


# ---------- registry ----------


def test_registry_builds_and_validates():
    L = make_landscape("quadratic_tracking", {"epsilon": 0.05, "c": 2.0})
    assert isinstance(L, QuadraticTracking) and L.c == 2.0
    with pytest.raises(ValidationError) as err:
        make_landscape("memorization_drift", {})
    assert "epsilon" in str(err.value)
    with pytest.raises(UnknownNameError):
        make_landscape("banana", {})
