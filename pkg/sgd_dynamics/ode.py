"""
Опорный медленно-быстрый поток
    dx/dt = -grad_x phi(x, y),  dy/dt = -epsilon * G2(x, y),
где G2: вторая компонента averaged_grads (производная по u = epsilon*y).
Интегрируется RK4 с фиксированным шагом, чтобы результат был
воспроизводим побитно.
"""

import logging
from typing import Optional

import numpy as np

from landscapes.base import Landscape
from markov_noise.chains import ControlledChain
from markov_noise.core import Mode, averaged_grads_batch
from utils.errors import NonFiniteIterateError, ParamOutOfRangeError
from .schemas import OdeTrajectory

logger = logging.getLogger(__name__)

# dt не больше DT_FACTOR / curvature_bound ландшафта
DT_FACTOR = 1e-2


def max_dt(L: Landscape) -> float:
    return DT_FACTOR / L.curvature_bound


def _drift(L, C, mode, X, Y):
    g1, g2 = averaged_grads_batch(L, C, X, Y, mode)
    return -g1, -L.epsilon * g2


def ode_flow(
    L: Landscape,
    C: ControlledChain,
    x0,
    y0,
    epsilon: Optional[float],
    T: float,
    dt: float,
    mode: Mode = "full",
    record_every: int = 1,
) -> OdeTrajectory:
    if epsilon is not None and epsilon != L.epsilon:
        L = L.with_epsilon(epsilon)
    if T <= 0:
        raise ParamOutOfRangeError(name="T", value=T, allowed="> 0")
    if not 0.0 < dt <= max_dt(L) * (1.0 + 1e-12):
        raise ParamOutOfRangeError(
            name="dt", value=dt, allowed=f"(0, {max_dt(L):.3e}]"
        )
    n_steps = int(np.ceil(T / dt - 1e-9))
    X = L._as_vec(x0, L.dim_x, "x")[None, :].copy()
    Y = L._as_vec(y0, L.dim_y, "y")[None, :].copy()

    ts, xs, ys, norms = [], [], [], []

    def keep(k, dx, dy):
        ts.append(k * dt)
        xs.append(X[0].copy())
        ys.append(Y[0].copy())
        norms.append(float(np.sqrt((dx * dx).sum() + (dy * dy).sum())))

    k1x, k1y = _drift(L, C, mode, X, Y)
    keep(0, k1x, k1y)
    for k in range(1, n_steps + 1):
        h = dt / 2
        k2x, k2y = _drift(L, C, mode, X + h * k1x, Y + h * k1y)
        k3x, k3y = _drift(L, C, mode, X + h * k2x, Y + h * k2y)
        k4x, k4y = _drift(L, C, mode, X + dt * k3x, Y + dt * k3y)
        X = X + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        Y = Y + dt / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
            raise NonFiniteIterateError(n=k)
        k1x, k1y = _drift(L, C, mode, X, Y)
        if k % record_every == 0 or k == n_steps:
            keep(k, k1x, k1y)

    logger.debug("[sgd] ode_flow %d RK4 steps, dt=%g", n_steps, dt)
    return OdeTrajectory(
        t=np.asarray(ts),
        x=np.asarray(xs),
        y=np.asarray(ys),
        drift_norm=np.asarray(norms),
    )


def reduced_slow_gradient_batch(
    L: Landscape,
    C: ControlledChain,
    Y: np.ndarray,
    branch: np.ndarray,
    mode: Mode = "frozen",
) -> np.ndarray:
    """
    Градиент по y приведённой медленной функции phi(lambda_i(y), y):
    по теореме Данскина это epsilon*G2 в точке (lambda_i(y), y).
    NaN там, где ветви нет.
    """
    lam = L.branches_batch(Y)  # (n, m, s)
    idx = np.asarray(branch, dtype=np.int64)
    X = lam[np.arange(Y.shape[0]), idx]
    out = np.full(Y.shape, np.nan)
    ok = np.all(np.isfinite(X), axis=1)
    if ok.any():
        _, g2 = averaged_grads_batch(L, C, X[ok], Y[ok], mode)
        out[ok] = L.epsilon * g2
    return out


def reduced_slow_gradient(
    L: Landscape, C: ControlledChain, y, branch: int, mode: Mode = "frozen"
) -> np.ndarray:
    Y = L._as_vec(y, L.dim_y, "y")[None, :]
    return reduced_slow_gradient_batch(L, C, Y, np.array([branch]), mode)[0]
