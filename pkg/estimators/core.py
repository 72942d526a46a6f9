"""
Оценки градиента по одному вычислению функции при марковском шуме.

Шум продвигается ядром в возмущённой точке x + delta*xi. Для одной
оценки поток расходуется так: сначала xi (s чисел), затем одно
равномерное на шаг шума.
"""

import logging
from typing import Literal, Optional, Sequence

import numpy as np

from landscapes.base import Landscape
from markov_noise.chains import ControlledChain
from markov_noise.core import (
    averaged_grads,
    noise_step,
    stationary_batch,
    stationary_distribution,
    step_states,
)
from measures.core import draw_indices, inverse_cdf
from utils.errors import ParamOutOfRangeError
from utils.seeding import make_rng
from .schemas import BiasCurve, EstimatorConfig, VarianceScaling

logger = logging.getLogger(__name__)

# реплик за один проход estimate_batch
_CHUNK = 200_000


def draw_perturbation(
    kind: str, rng: np.random.Generator, shape
) -> np.ndarray:
    if kind == "smoothed_gaussian":
        return rng.standard_normal(shape)
    # радемахеровские +-1
    return rng.integers(0, 2, size=shape) * 2.0 - 1.0


def direction(
    kind: str, f_val: np.ndarray, xi: np.ndarray, delta: float
) -> np.ndarray:
    """f*xi/delta (Гаусс) или f/(delta*xi_i) (SPSA); строки: реплики."""
    if kind == "smoothed_gaussian":
        return f_val[:, None] * xi / delta
    return f_val[:, None] / (delta * xi)


def clip_rows(g: np.ndarray, clip_norm: float) -> np.ndarray:
    if not np.isfinite(clip_norm):
        return g
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    scale = np.minimum(1.0, clip_norm / np.maximum(norm, 1e-300))
    return g * scale


def perturbed_grad_batch(
    L: Landscape,
    C: ControlledChain,
    X: np.ndarray,
    Y: np.ndarray,
    states: np.ndarray,
    xi: np.ndarray,
    u: np.ndarray,
    cfg: EstimatorConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Шаг оценщика для стопки реплик внутри SGD: xi (R, m, s), u (R, m).
    Шум каждой реплики продвигается m раз, оценки усредняются.
    """
    total = np.zeros_like(X)
    for j in range(xi.shape[1]):
        Xp = X + cfg.delta * xi[:, j]
        states = step_states(C, Xp, Y, states, u[:, j])
        f_val = L.eval_batch(Xp, Y, states)
        g = direction(cfg.kind, f_val, xi[:, j], cfg.delta)
        total += clip_rows(g, cfg.clip_norm)
    return total / xi.shape[1], states


def _single(
    L: Landscape,
    C: ControlledChain,
    x,
    y_fixed,
    cfg: EstimatorConfig,
    noise_state: int,
    rng,
) -> tuple[np.ndarray, int]:
    rng = make_rng(rng)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.asarray(y_fixed if y_fixed is not None else [], dtype=float)
    xi = draw_perturbation(cfg.kind, rng, x.size)
    xp = x + cfg.delta * xi
    state = noise_step(C, xp, y, noise_state, rng)
    f_val = np.array([L.eval(xp, y, state)])
    g = direction(cfg.kind, f_val, xi[None, :], cfg.delta)
    return clip_rows(g, cfg.clip_norm)[0], state


def smoothed_grad_estimate(
    L, C, x, y_fixed, cfg: EstimatorConfig, noise_state: int, rng
) -> tuple[np.ndarray, int]:
    if cfg.kind != "smoothed_gaussian":
        raise ParamOutOfRangeError(
            name="kind", value=cfg.kind, allowed="smoothed_gaussian"
        )
    return _single(L, C, x, y_fixed, cfg, noise_state, rng)


def spsa_grad_estimate(
    L, C, x, y_fixed, cfg: EstimatorConfig, noise_state: int, rng
) -> tuple[np.ndarray, int]:
    if cfg.kind != "spsa_rademacher":
        raise ParamOutOfRangeError(
            name="kind", value=cfg.kind, allowed="spsa_rademacher"
        )
    return _single(L, C, x, y_fixed, cfg, noise_state, rng)


def averaged_estimate(
    L,
    C,
    x,
    y_fixed,
    cfg: EstimatorConfig,
    noise_state: int,
    rng,
    m: Optional[int] = None,
) -> tuple[np.ndarray, int]:
    """Среднее m последовательных оценок; шум продвигается всё время."""
    m = cfg.batch if m is None else m
    if m < 1:
        raise ParamOutOfRangeError(name="m", value=m, allowed=">= 1")
    rng = make_rng(rng)
    total = None
    state = noise_state
    for _ in range(m):
        g, state = _single(L, C, x, y_fixed, cfg, state, rng)
        total = g if total is None else total + g
    return total / m, state


def averaged_estimate_batch(
    L: Landscape,
    C: ControlledChain,
    x,
    y_fixed,
    cfg: EstimatorConfig,
    reps: int,
    rng,
    m: Optional[int] = None,
    states: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    averaged_estimate для reps независимых цепей сразу: (reps, s).
    Без states цепи стартуют из стационарного закона ядра в точке x.
    На каждом из m шагов: xi (reps, s), затем одно равномерное на цепь.
    """
    m = cfg.batch if m is None else m
    if m < 1:
        raise ParamOutOfRangeError(name="m", value=m, allowed=">= 1")
    rng = make_rng(rng)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.asarray(y_fixed if y_fixed is not None else [], dtype=float)
    X = np.broadcast_to(x, (reps, x.size))
    Y = np.broadcast_to(y, (reps, y.size))
    if states is None:
        pi = stationary_distribution(C, x, y).array
        states = draw_indices(inverse_cdf(pi), rng.random(reps))
    total = np.zeros((reps, x.size))
    for _ in range(m):
        xi = draw_perturbation(cfg.kind, rng, (reps, x.size))
        u = rng.random(reps)
        g, states = perturbed_grad_batch(
            L, C, X, Y, states, xi[:, None, :], u[:, None], cfg
        )
        total += g
    return total / m, states


def estimate_batch(
    L: Landscape,
    C: ControlledChain,
    x,
    y_fixed,
    cfg: EstimatorConfig,
    n: int,
    rng,
) -> np.ndarray:
    """
    n независимых оценок (n, s). Шум каждой реплики берётся из
    стационарного закона ядра в возмущённой точке x + delta*xi.
    """
    rng = make_rng(rng)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.asarray(y_fixed if y_fixed is not None else [], dtype=float)
    out = np.empty((n, x.size))
    done = 0
    while done < n:
        b = min(_CHUNK, n - done)
        xi = draw_perturbation(cfg.kind, rng, (b, x.size))
        u = rng.random(b)
        Xp = x + cfg.delta * xi
        Y = np.broadcast_to(y, (b, y.size))
        pi = stationary_batch(C.kernel_batch(Xp, Y))
        cum = np.cumsum(pi, axis=1)
        z = np.minimum((cum <= u[:, None]).sum(axis=1), C.n_states - 1)
        f_val = L.eval_batch(Xp, Y, z)
        g = direction(cfg.kind, f_val, xi, cfg.delta)
        out[done : done + b] = clip_rows(g, cfg.clip_norm)
        done += b
    return out


def _loglog_slope(grid: np.ndarray, values: np.ndarray) -> float:
    if np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(grid), np.log(values), 1)[0])


def bias_curve(
    kind: str,
    L: Landscape,
    C: ControlledChain,
    x,
    y_fixed,
    deltas: Sequence[float],
    batch: int,
    rng,
    clip_norm: float = float("inf"),
) -> BiasCurve:
    """
    Смещение ||E[оценка] - grad_x phi(x)|| для каждого delta против
    точного градиента усреднённой потери (mode=full).
    """
    rng = make_rng(rng)
    truth = averaged_grads(L, C, x, y_fixed, "full")[0]
    bias, var, sig = [], [], []
    for d in deltas:
        cfg = EstimatorConfig(kind=kind, delta=d, clip_norm=clip_norm)
        g = estimate_batch(L, C, x, y_fixed, cfg, batch, rng)
        v = float(g.var(axis=0, ddof=1).sum())
        bias.append(float(np.linalg.norm(g.mean(axis=0) - truth)))
        var.append(v)
        sig.append(float(np.sqrt(v / batch)))
    deltas = np.asarray(deltas, dtype=float)
    bias = np.asarray(bias)
    logger.info(
        "[estimators] bias curve %s over %d deltas", kind, deltas.size
    )
    return BiasCurve(
        deltas=deltas,
        bias_norm=bias,
        variance=np.asarray(var),
        mc_sigma=np.asarray(sig),
        slope=_loglog_slope(deltas, bias),
        truth=truth,
    )


def variance_scaling(
    L: Landscape,
    C: ControlledChain,
    x,
    y_fixed,
    cfg: EstimatorConfig,
    rng,
    ms: Optional[Sequence[int]] = None,
    deltas: Optional[Sequence[float]] = None,
    reps: int = 2_000,
    noise: Literal["chain", "iid"] = "chain",
) -> VarianceScaling:
    """
    Дисперсия усреднённой по m оценки по сетке m (при cfg.delta) или
    по сетке delta (при m = cfg.batch) и наклон в log-log.
    noise="chain": reps независимых цепей, m оценок подряд вдоль
    каждой (averaged_estimate_batch). noise="iid": шум каждой оценки
    из стационарного закона, как в estimate_batch.
    """
    if (ms is None) == (deltas is None):
        raise ParamOutOfRangeError(
            name="grid", value="ms/deltas", allowed="exactly one of them"
        )
    rng = make_rng(rng)
    if ms is not None:
        grid = np.asarray(ms, dtype=float)
        cfgs = [(int(m), cfg) for m in ms]
        axis = "m"
    else:
        grid = np.asarray(deltas, dtype=float)
        cfgs = [
            (cfg.batch, cfg.model_copy(update={"delta": float(d)}))
            for d in deltas
        ]
        axis = "delta"

    variances = []
    for m, c in cfgs:
        if noise == "chain":
            means, _ = averaged_estimate_batch(
                L, C, x, y_fixed, c, reps, rng, m=m
            )
        else:
            g = estimate_batch(L, C, x, y_fixed, c, reps * m, rng)
            means = g.reshape(reps, m, -1).mean(axis=1)
        variances.append(float(means.var(axis=0, ddof=1).sum()))
    variances = np.asarray(variances)
    return VarianceScaling(
        axis=axis,
        grid=grid,
        variance=variances,
        slope=_loglog_slope(grid, variances),
    )
