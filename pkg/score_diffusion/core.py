"""
Одномерная диффузионная модель на гауссовых данных: прямой процесс
Орнштейна-Уленбека, условная и маргинальная score-функции в замкнутом
виде, обучение аффинной по x модели SGD и обратная генерация.

Обратный снос берётся как upsilon*Y + score(Y, T - t) с маргинальной
score-функцией: при генерации X(0) неизвестен.
"""

import logging
from typing import Callable, Optional, Union

import numpy as np

from sgd_dynamics.core import Schedule
from utils.errors import (
    DegenerateVarianceError,
    NonFiniteIterateError,
    ParamOutOfRangeError,
)
from utils.seeding import make_rng
from .schemas import OUParams, ScoreModel, TrainingResult

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _check_time(p: OUParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t > p.T * (1 + 1e-12)):
        raise ParamOutOfRangeError(
            name="t", value=t, allowed=f"(0, {p.T}]"
        )
    return t


def conditional_var(upsilon: float, t) -> np.ndarray:
    # (1 - exp(-2*upsilon*t))/(2*upsilon), точно при малых t
    return -np.expm1(-2.0 * upsilon * np.asarray(t, float)) / (2 * upsilon)


def ou_conditional(p: OUParams, x0: ArrayLike, t) -> tuple:
    t = _check_time(p, t)
    mean = np.asarray(x0, dtype=float) * np.exp(-p.upsilon * t)
    return mean, conditional_var(p.upsilon, t)


def marginal(p: OUParams, t) -> tuple:
    """Закон X(t) при X(0) ~ N(data_mean, data_var)."""
    t = np.asarray(t, dtype=float)
    decay = np.exp(-p.upsilon * t)
    mean = p.data_mean * decay
    var = p.data_var * decay**2 + conditional_var(p.upsilon, t)
    return mean, var


def analytic_score(mean, var, x):
    """(mean - x)/var: градиент логарифма гауссовой плотности."""
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise DegenerateVarianceError(var=float(np.min(var)))
    mean = np.asarray(mean, dtype=float)
    return (mean - np.asarray(x, dtype=float)) / var


def marginal_score(p: OUParams, x, t):
    mean, var = marginal(p, t)
    return analytic_score(mean, var, x)


def optimal_coefficients(p: OUParams, knots) -> tuple:
    """Точные (slope, intercept) маргинальной score в узлах."""
    mean, var = marginal(p, np.asarray(knots, dtype=float))
    return -1.0 / var, mean / var


def optimal_model(p: OUParams, knots) -> ScoreModel:
    slopes, intercepts = optimal_coefficients(p, knots)
    return ScoreModel(np.asarray(knots, float), slopes, intercepts)


def forward_simulate(
    p: OUParams,
    x0: ArrayLike,
    rng,
    noise: bool = True,
    thin: int = 1,
) -> np.ndarray:
    """
    Эйлер-Маруяма X_{k+1} = X_k - upsilon*X_k*dt + sqrt(dt)*xi_k.
    x0: число или вектор стартов; путь (..., n_steps/thin + 1).
    На шаг расходуется по одному нормальному на путь.
    """
    rng = make_rng(rng)
    x = np.array(x0, dtype=float, ndmin=1)
    out = [x.copy()]
    sq = np.sqrt(p.dt)
    for k in range(1, p.n_steps + 1):
        x = x - p.upsilon * x * p.dt
        if noise:
            x = x + sq * rng.standard_normal(x.shape)
        if k % thin == 0:
            out.append(x.copy())
    path = np.stack(out, axis=-1)
    return path[0] if np.ndim(x0) == 0 else path


def reverse_simulate(
    p: OUParams,
    score: Callable[[np.ndarray, float], np.ndarray],
    xT: ArrayLike,
    rng,
    noise: bool = True,
    thin: Optional[int] = None,
) -> np.ndarray:
    """
    dY = (upsilon*Y + score(Y, T - t)) dt + dW на [0, T] от Y(0) = xT.
    Без thin возвращает только Y(T); иначе путь с шагом thin.
    """
    rng = make_rng(rng)
    y = np.array(xT, dtype=float, ndmin=1)
    out = [y.copy()] if thin else None
    sq = np.sqrt(p.dt)
    n = p.n_steps
    for k in range(n):
        # T - t_k in [dt, T]: score не вызывается в t = 0
        drift = p.upsilon * y + score(y, p.T - k * p.dt)
        y = y + drift * p.dt
        if noise:
            y = y + sq * rng.standard_normal(y.shape)
        if not np.all(np.isfinite(y)):
            raise NonFiniteIterateError(n=k + 1)
        if thin and (k + 1) % thin == 0:
            out.append(y.copy())
    if thin:
        path = np.stack(out, axis=-1)
        return path[0] if np.ndim(xT) == 0 else path
    return y[0] if np.ndim(xT) == 0 else y


def sample_prior(p: OUParams, n: int, rng) -> np.ndarray:
    """Старты обратного процесса из маргинального закона X(T)."""
    mean, var = marginal(p, p.T)
    return make_rng(rng).normal(float(mean), float(np.sqrt(var)), size=n)


def score_training_run(
    p: OUParams,
    model: ScoreModel,
    schedule: Schedule,
    n_iters: int,
    batch: int,
    rng,
    tail_fraction: float = 0.5,
) -> TrainingResult:
    """
    SGD по эмпирической квадратичной ошибке |s(X_t, t) - zeta|^2 с
    t, равномерным по узлам. Шаг a_n берётся из schedule. Поток на
    итерацию: batch нормальных X(0), batch индексов узлов, batch
    нормальных для X(t).
    """
    if batch < 1:
        raise ParamOutOfRangeError(name="batch", value=batch, allowed=">= 1")
    if n_iters < 0:
        raise ParamOutOfRangeError(
            name="n_iters", value=n_iters, allowed=">= 0"
        )
    if not 0.0 < tail_fraction <= 1.0:
        raise ParamOutOfRangeError(
            name="tail_fraction", value=tail_fraction, allowed="(0, 1]"
        )
    if n_iters == 0:
        return TrainingResult(model, model, np.zeros(0))

    rng = make_rng(rng)
    knots = model.time_grid
    _check_time(p, knots)
    K = knots.size
    decay = np.exp(-p.upsilon * knots)
    cvar = conditional_var(p.upsilon, knots)
    csd = np.sqrt(cvar)
    sd0 = np.sqrt(p.data_var)

    slopes = model.slopes.copy()
    intercepts = model.intercepts.copy()
    tail_start = n_iters - max(1, int(round(tail_fraction * n_iters)))
    sum_s = np.zeros(K)
    sum_i = np.zeros(K)
    losses = np.empty(n_iters)

    for n in range(n_iters):
        x0 = p.data_mean + sd0 * rng.standard_normal(batch)
        k = rng.integers(0, K, size=batch)
        mean = x0 * decay[k]
        xt = mean + csd[k] * rng.standard_normal(batch)
        zeta = (mean - xt) / cvar[k]
        resid = slopes[k] * xt + intercepts[k] - zeta
        losses[n] = np.mean(resid**2)
        g_s = 2.0 * np.bincount(k, weights=resid * xt, minlength=K) / batch
        g_i = 2.0 * np.bincount(k, weights=resid, minlength=K) / batch
        a_n = schedule.steps(n)[0]
        slopes -= a_n * g_s
        intercepts -= a_n * g_i
        if not np.all(np.isfinite(slopes) & np.isfinite(intercepts)):
            raise NonFiniteIterateError(n=n + 1)
        if n >= tail_start:
            sum_s += slopes
            sum_i += intercepts

    count = n_iters - tail_start
    logger.info(
        "[diffusion] trained %d knots for %d iterations", K, n_iters
    )
    return TrainingResult(
        model=ScoreModel(knots, slopes, intercepts),
        averaged=ScoreModel(knots, sum_s / count, sum_i / count),
        loss_trace=losses,
    )


def sample_summary(samples: np.ndarray) -> dict:
    s = np.asarray(samples, dtype=float)
    return {
        "n": int(s.size),
        "mean": float(s.mean()),
        "var": float(s.var(ddof=1)),
    }
