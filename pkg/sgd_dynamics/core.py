"""
Двухмасштабный SGD с марковским шумом и одномасштабный SGD.

Реплики (разные seed одной точки развёртки) идут одной стопкой
массивов (R, s); у каждой реплики свой генератор. Случайные числа
тянутся блоками по BLOCK шагов, для каждой реплики по очереди:
BLOCK*m равномерных, затем BLOCK*m*s возмущений оценщика (если он
задан); у одномасштабного SGD: BLOCK*s нормальных.
"""

import logging
from typing import Optional, Sequence, Union

import numpy as np

from estimators.core import draw_perturbation, perturbed_grad_batch
from estimators.schemas import EstimatorConfig
from landscapes.base import Landscape
from markov_noise.chains import ControlledChain
from markov_noise.core import (
    _check_arity,
    averaged_grads_batch,
    averaged_loss_batch,
    step_states,
)
from utils.errors import (
    DimensionMismatchError,
    NonFiniteIterateError,
    ParamOutOfRangeError,
)
from utils.seeding import make_rng
from .schemas import (
    ConstantSchedule,
    DecreasingSchedule,
    Mode,
    ScheduleReport,
    TrajectoryRecord,
    TwoScaleState,
)

logger = logging.getLogger(__name__)

BLOCK = 4096
DIVERGENCE_LIMIT = 1e8

Schedule = Union[ConstantSchedule, DecreasingSchedule]


def validate_schedule(s: Schedule) -> ScheduleReport:
    """Признаки рядов по показателям; постоянный шаг не Роббинс-Монро."""
    if isinstance(s, ConstantSchedule):
        return ScheduleReport(
            robbins_monro=False,
            timescale_separated=s.epsilon < 1.0,
            reasons=["constant steps: sum of a_n^2 diverges"],
        )

    reasons = []
    if s.q > 1.0:
        reasons.append(f"sum of a_n converges (q={s.q} > 1)")
    if s.q <= 0.5:
        reasons.append(f"sum of a_n^2 diverges (q={s.q} <= 0.5)")
    if s.p > 1.0:
        reasons.append(f"sum of b_n converges (p={s.p} > 1)")
    if s.p <= 0.5:
        reasons.append(f"sum of b_n^2 diverges (p={s.p} <= 0.5)")
    robbins_monro = not reasons
    separated = s.p > s.q
    if not separated:
        reasons.append(f"b_n is not o(a_n) (p={s.p} <= q={s.q})")
    return ScheduleReport(
        robbins_monro=robbins_monro,
        timescale_separated=separated,
        reasons=reasons,
    )


def _check_mode(mode: str) -> None:
    if mode not in ("instantaneous", "averaged_full", "averaged_frozen"):
        raise ParamOutOfRangeError(
            name="mode",
            value=mode,
            allowed="instantaneous | averaged_full | averaged_frozen",
        )


def _advance(
    L: Landscape,
    C: ControlledChain,
    schedule: Schedule,
    mode: str,
    X: np.ndarray,
    Y: np.ndarray,
    Z: np.ndarray,
    n: int,
    u: Optional[np.ndarray],
    xi: Optional[np.ndarray],
    estimator: Optional[EstimatorConfig],
):
    """Один шаг всех реплик; x и y обновляются из старых значений."""
    a_n, b_n = schedule.steps(n)
    if mode == "instantaneous":
        if estimator is None:
            Z = step_states(C, X, Y, Z, u[:, 0])
            g1 = L.grad1_batch(X, Y, Z)
        else:
            g1, Z = perturbed_grad_batch(L, C, X, Y, Z, xi, u, estimator)
        g2 = L.grad2_batch(X, Y, Z)
    else:
        g1, g2 = averaged_grads_batch(L, C, X, Y, mode[len("averaged_") :])
    return X - a_n * g1, Y - b_n * g2, Z


def _exceeds(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    size = np.sqrt((X * X).sum(axis=1)) + np.sqrt((Y * Y).sum(axis=1))
    # NaN тоже считается расхождением
    return ~(size <= DIVERGENCE_LIMIT)


def sgd_step(
    st: TwoScaleState,
    L: Landscape,
    C: ControlledChain,
    s: Schedule,
    mode: Mode,
    rng,
    estimator: Optional[EstimatorConfig] = None,
) -> TwoScaleState:
    _check_mode(mode)
    _check_arity(L, C)
    X = L._as_vec(st.x, L.dim_x, "x")[None, :]
    Y = L._as_vec(st.y, L.dim_y, "y")[None, :]
    Z = np.array([st.noise_state])
    u = xi = None
    if mode == "instantaneous":
        rng = make_rng(rng)
        m = estimator.batch if estimator is not None else 1
        u = rng.random((1, m))
        if estimator is not None:
            xi = draw_perturbation(estimator.kind, rng, (1, m, L.dim_x))
    Xn, Yn, Z = _advance(L, C, s, mode, X, Y, Z, st.n, u, xi, estimator)
    if _exceeds(Xn, Yn)[0]:
        raise NonFiniteIterateError(n=st.n + 1, state=st)
    return TwoScaleState(
        x=Xn[0], y=Yn[0], noise_state=int(Z[0]), n=st.n + 1
    )


def _draw_block(rngs, b, m, s, estimator):
    us, xis = [], []
    for rng in rngs:
        us.append(rng.random((b, m)))
        if estimator is not None:
            xis.append(draw_perturbation(estimator.kind, rng, (b, m, s)))
    U = np.stack(us, axis=1)  # (b, R, m)
    XI = np.stack(xis, axis=1) if estimator is not None else None
    return U, XI


class _Recorder:
    """Копит прореженные состояния всех реплик."""

    def __init__(self):
        self.n, self.x, self.y, self.z = [], [], [], []

    def add(self, n, X, Y, Z):
        self.n.append(n)
        self.x.append(X.copy())
        self.y.append(Y.copy())
        self.z.append(Z.copy())

    def arrays(self):
        return (
            np.asarray(self.n, dtype=np.int64),
            np.stack(self.x, axis=1),  # (R, records, s)
            np.stack(self.y, axis=1),
            np.stack(self.z, axis=1),
        )


def _check_run_args(n_steps: int, thin: int) -> None:
    if n_steps < 1:
        raise ParamOutOfRangeError(
            name="n_steps", value=n_steps, allowed=">= 1"
        )
    if thin < 1:
        raise ParamOutOfRangeError(name="thin", value=thin, allowed=">= 1")


def _records(
    rec: _Recorder,
    diverged_at: np.ndarray,
    losses,
    common: dict,
    seeds: Sequence,
) -> list[TrajectoryRecord]:
    ns, xs, ys, zs = rec.arrays()
    out = []
    for i in range(xs.shape[0]):
        d = int(diverged_at[i])
        keep = ns < d if d >= 0 else np.ones(ns.size, dtype=bool)
        out.append(
            TrajectoryRecord(
                n=ns[keep],
                x=xs[i][keep],
                y=ys[i][keep],
                loss=losses(xs[i][keep], ys[i][keep]),
                noise_state=zs[i][keep],
                seed=seeds[i],
                diverged_at=d if d >= 0 else None,
                **common,
            )
        )
    return out


def _seed_labels(rngs, seeds) -> list:
    if seeds is not None:
        return list(seeds)
    return [None] * len(rngs)


def run_batch(
    L: Landscape,
    C: ControlledChain,
    schedule: Schedule,
    mode: Mode,
    X0: np.ndarray,
    Y0: np.ndarray,
    n_steps: int,
    rngs: Sequence,
    thin: int = 1,
    estimator: Optional[EstimatorConfig] = None,
    noise_states: Optional[np.ndarray] = None,
    seeds: Optional[Sequence[int]] = None,
) -> list[TrajectoryRecord]:
    """
    R независимых реплик одним проходом. Разошедшаяся реплика
    замораживается, её запись обрезается до шага расхождения
    (diverged_at); остальные доходят до конца.
    """
    _check_mode(mode)
    _check_arity(L, C)
    _check_run_args(n_steps, thin)
    if estimator is not None and mode != "instantaneous":
        raise ParamOutOfRangeError(
            name="estimator", value=mode, allowed="mode=instantaneous"
        )
    rngs = [make_rng(r) for r in rngs]
    X = np.array(X0, dtype=float).reshape(len(rngs), L.dim_x)
    Y = np.array(Y0, dtype=float).reshape(len(rngs), L.dim_y)
    Z = (
        np.zeros(len(rngs), dtype=np.int64)
        if noise_states is None
        else np.asarray(noise_states, dtype=np.int64)
    )
    m = estimator.batch if estimator is not None else 1
    alive = np.ones(len(rngs), dtype=bool)
    diverged_at = np.full(len(rngs), -1, dtype=np.int64)

    rec = _Recorder()
    rec.add(0, X, Y, Z)
    done = 0
    while done < n_steps:
        b = min(BLOCK, n_steps - done)
        U = XI = None
        if mode == "instantaneous":
            U, XI = _draw_block(rngs, b, m, L.dim_x, estimator)
        for j in range(b):
            n = done + j
            Xn, Yn, Zn = _advance(
                L,
                C,
                schedule,
                mode,
                X,
                Y,
                Z,
                n,
                None if U is None else U[j],
                None if XI is None else XI[j],
                estimator,
            )
            bad = _exceeds(Xn, Yn) & alive
            if bad.any():
                diverged_at[bad] = n + 1
                alive &= ~bad
            if not alive.all():
                Xn[~alive] = X[~alive]
                Yn[~alive] = Y[~alive]
                Zn[~alive] = Z[~alive]
            X, Y, Z = Xn, Yn, Zn
            if (n + 1) % thin == 0:
                rec.add(n + 1, X, Y, Z)
        done += b

    if not alive.all():
        logger.info(
            "[sgd] %d of %d replicas diverged",
            int((~alive).sum()),
            alive.size,
        )
    common = dict(
        landscape=L.name,
        chain=C.name,
        schedule=schedule.model_dump(),
        mode=mode,
        thin=thin,
    )
    return _records(
        rec,
        diverged_at,
        lambda xs, ys: averaged_loss_batch(L, C, xs, ys),
        common,
        _seed_labels(rngs, seeds),
    )


def run(
    L: Landscape,
    C: ControlledChain,
    schedule: Schedule,
    mode: Mode,
    x0,
    y0,
    n_steps: int,
    thin: int = 1,
    seed=None,
    estimator: Optional[EstimatorConfig] = None,
    noise_state: int = 0,
) -> TrajectoryRecord:
    """
    Один запуск. При расхождении поднимает NonFiniteIterateError с
    частичной записью в .record.
    """
    x0 = L._as_vec(x0, L.dim_x, "x")
    y0 = L._as_vec(y0, L.dim_y, "y")
    label = seed if isinstance(seed, (int, np.integer)) else None
    (record,) = run_batch(
        L,
        C,
        schedule,
        mode,
        x0[None, :],
        y0[None, :],
        n_steps,
        [make_rng(seed)],
        thin=thin,
        estimator=estimator,
        noise_states=np.array([noise_state]),
        seeds=[label],
    )
    if record.diverged_at is not None:
        raise NonFiniteIterateError(
            n=record.diverged_at, record=record, state=record.final_state
        )
    return record


def single_scale_batch(
    L: Landscape,
    a: float,
    noise_sigma: float,
    X0: np.ndarray,
    n_steps: int,
    rngs: Sequence,
    thin: int = 1,
    seeds: Optional[Sequence[int]] = None,
) -> list[TrajectoryRecord]:
    """x <- x - a*(grad V(x) + sigma*xi), xi ~ N(0, I), для R реплик."""
    if L.dim_y != 0:
        raise DimensionMismatchError(
            what="y of a single-scale landscape", expected=0, got=L.dim_y
        )
    if a <= 0:
        raise ParamOutOfRangeError(name="a", value=a, allowed="> 0")
    if noise_sigma < 0:
        raise ParamOutOfRangeError(
            name="noise_sigma", value=noise_sigma, allowed=">= 0"
        )
    _check_run_args(n_steps, thin)
    rngs = [make_rng(r) for r in rngs]
    R, s = len(rngs), L.dim_x
    X = np.array(X0, dtype=float).reshape(R, s)
    Y = np.zeros((R, 0))
    Z = np.zeros(R, dtype=np.int64)
    alive = np.ones(R, dtype=bool)
    diverged_at = np.full(R, -1, dtype=np.int64)

    rec = _Recorder()
    rec.add(0, X, Y, Z)
    done = 0
    while done < n_steps:
        b = min(BLOCK, n_steps - done)
        XI = np.stack([rng.standard_normal((b, s)) for rng in rngs], axis=1)
        for j in range(b):
            n = done + j
            Xn = X - a * (L.grad1_batch(X, Y, Z) + noise_sigma * XI[j])
            bad = _exceeds(Xn, Y) & alive
            if bad.any():
                diverged_at[bad] = n + 1
                alive &= ~bad
            if not alive.all():
                Xn[~alive] = X[~alive]
            X = Xn
            if (n + 1) % thin == 0:
                rec.add(n + 1, X, Y, Z)
        done += b

    common = dict(
        landscape=L.name,
        chain="none",
        schedule={"kind": "constant", "a": a, "noise_sigma": noise_sigma},
        mode="single_scale",
        thin=thin,
    )
    return _records(
        rec,
        diverged_at,
        lambda xs, ys: L.eval_batch(
            xs, ys, np.zeros(xs.shape[0], dtype=np.int64)
        ),
        common,
        _seed_labels(rngs, seeds),
    )


def single_scale_run(
    L: Landscape,
    a: float,
    noise_sigma: float,
    x0,
    n_steps: int,
    seed=None,
    thin: int = 1,
) -> TrajectoryRecord:
    x0 = L._as_vec(x0, L.dim_x, "x")
    label = seed if isinstance(seed, (int, np.integer)) else None
    (record,) = single_scale_batch(
        L,
        a,
        noise_sigma,
        x0[None, :],
        n_steps,
        [make_rng(seed)],
        thin=thin,
        seeds=[label],
    )
    if record.diverged_at is not None:
        raise NonFiniteIterateError(
            n=record.diverged_at, record=record, state=record.final_state
        )
    return record
