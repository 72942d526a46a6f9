"""
Мерозначная цепь поколений: mu_{n+1} = эмпирическая мера N выборок из
a*mu0 + (1-a)*mu_n. При a = 0 дираковские меры поглощающие, а вес любой
точки носителя является мартингалом.
"""

import itertools
import logging
from typing import Optional

import numpy as np
from scipy.linalg import solve
from scipy.special import comb
from scipy.stats import multinomial

from measures.core import (
    _from_array,
    dirac,
    dirac_index,
    draw_indices,
    entropy_of,
    inverse_cdf,
    mix_weights,
)
from measures.schemas import DiscreteMeasure
from utils.errors import (
    Mu0NotRepresentableError,
    NotImplementedForPositiveAError,
    ParamOutOfRangeError,
    StateSpaceTooLargeError,
    SupportMismatchError,
)
from utils.seeding import make_rng
from .schemas import AbsorptionReport, DegenerationProfile, GenChainConfig

logger = logging.getLogger(__name__)

# плотная (I - Q) размера states^2: 5000 состояний ~ 200 МБ
MAX_ORACLE_STATES = 5_000
MIN_REPLICATIONS = 1_000
# сколько выборок за раз держим в памяти в check_barycenter
_CHUNK_DRAWS = 1_000_000


def _mixed(w0: np.ndarray, w: np.ndarray, a: float) -> np.ndarray:
    if a == 0.0:
        return w
    if a == 1.0:
        return w0
    return mix_weights(w0, w, a)


def _step(
    w0: np.ndarray, w: np.ndarray, a: float, N: int, rng: np.random.Generator
) -> np.ndarray:
    # ровно N равномерных на шаг
    idx = draw_indices(inverse_cdf(_mixed(w0, w, a)), rng.random(N))
    return np.bincount(idx, minlength=w.size) / N


def _is_absorbing(w0: np.ndarray, i: int, a: float, tol: float) -> bool:
    # delta_i поглощает, только если mix(mu0, delta_i, a) = delta_i
    return a == 0.0 or w0[i] >= 1.0 - tol


def chain_step(
    mu_n: DiscreteMeasure, cfg: GenChainConfig, rng
) -> DiscreteMeasure:
    if mu_n.support_size != cfg.mu0.support_size:
        raise SupportMismatchError(
            left=cfg.mu0.support_size, right=mu_n.support_size
        )
    w = _step(cfg.mu0.array, mu_n.array, cfg.a, cfg.N, make_rng(rng))
    return _from_array(w, cfg.mu0.labels)


def run_until_absorbed(cfg: GenChainConfig, rng) -> AbsorptionReport:
    rng = make_rng(rng)
    w0 = cfg.mu0.array
    w = w0.copy()
    trace = [entropy_of(w)]
    visits = 0
    absorbed_at: Optional[int] = None
    steps: Optional[int] = None

    i = dirac_index(w, cfg.dirac_tol)
    if i is not None and _is_absorbing(w0, i, cfg.a, cfg.dirac_tol):
        absorbed_at, steps = i, 0
    else:
        for n in range(1, cfg.max_steps + 1):
            w = _step(w0, w, cfg.a, cfg.N, rng)
            trace.append(entropy_of(w))
            i = dirac_index(w, cfg.dirac_tol)
            if i is None:
                continue
            if _is_absorbing(w0, i, cfg.a, cfg.dirac_tol):
                absorbed_at, steps = i, n
                break
            visits += 1

    report = AbsorptionReport(
        absorbed=absorbed_at is not None,
        absorbing_index=absorbed_at,
        steps_to_absorb=steps,
        entropy_trace=np.asarray(trace),
        final_measure=_from_array(w, cfg.mu0.labels),
        dirac_visits=visits,
    )
    logger.debug(
        "[genchain] absorbed=%s index=%s steps=%s",
        report.absorbed,
        absorbed_at,
        steps,
    )
    return report


def _compositions(N: int, k: int) -> np.ndarray:
    """Все векторы счётчиков (m_0..m_{k-1}) с суммой N (звёзды и черты)."""
    rows = []
    for bars in itertools.combinations(range(N + k - 1), k - 1):
        edges = (-1,) + bars + (N + k - 1,)
        rows.append([edges[j + 1] - edges[j] - 1 for j in range(k)])
    return np.asarray(rows, dtype=np.int64)


def absorption_oracle(cfg: GenChainConfig) -> DiscreteMeasure:
    """
    Точные вероятности поглощения в delta_i из mu0 при a = 0.
    Строит полную матрицу переходов по эмпирическим мерам с
    мультиномиальными вероятностями и решает (I - Q) B = R.
    """
    if cfg.a != 0.0:
        raise NotImplementedForPositiveAError(a=cfg.a)
    k, N = cfg.mu0.support_size, cfg.N
    n_states = int(comb(N + k - 1, k - 1, exact=True))
    if n_states > MAX_ORACLE_STATES:
        raise StateSpaceTooLargeError(
            states=n_states, limit=MAX_ORACLE_STATES
        )

    scaled = N * cfg.mu0.array
    start = np.rint(scaled)
    if np.any(np.abs(scaled - start) > 1e-9) or start.sum() != N:
        raise Mu0NotRepresentableError(N=N)
    start = start.astype(np.int64)

    i0 = dirac_index(cfg.mu0.array, cfg.dirac_tol)
    if i0 is not None:
        return dirac(i0, k)

    states = _compositions(N, k)
    is_absorbing = states.max(axis=1) == N
    absorbing = np.flatnonzero(is_absorbing)
    transient = np.flatnonzero(~is_absorbing)
    # индекс точки носителя для каждого поглощающего состояния
    target_index = states[absorbing].argmax(axis=1)

    # сразу I - Q, без отдельных P и единичной матрицы
    A = np.empty((transient.size, transient.size))
    R = np.empty((transient.size, absorbing.size))
    for r, s in enumerate(transient):
        row = multinomial.pmf(states, n=N, p=states[s] / N)
        A[r] = -row[transient]
        R[r] = row[absorbing]
    A[np.diag_indices_from(A)] += 1.0
    B = solve(A, R, overwrite_a=True, overwrite_b=True)

    row = np.flatnonzero((states[transient] == start).all(axis=1))[0]
    probs = np.zeros(k)
    probs[target_index] = np.clip(B[row], 0.0, None)
    logger.debug("[genchain] oracle solved over %d states", n_states)
    return _from_array(probs / probs.sum(), cfg.mu0.labels)


def check_barycenter(
    mu: DiscreteMeasure,
    cfg: GenChainConfig,
    replications: int,
    rng,
) -> float:
    """
    max_i |E_MC[mu_{n+1}(i) | mu_n = mu] - mix(mu0, mu, a)(i)|.
    Средний вес по всем повторам равен доле индекса среди всех
    replications*N выборок, поэтому считаем его одним bincount.
    """
    if replications < MIN_REPLICATIONS:
        raise ParamOutOfRangeError(
            name="replications",
            value=replications,
            allowed=f">= {MIN_REPLICATIONS}",
        )
    if mu.support_size != cfg.mu0.support_size:
        raise SupportMismatchError(
            left=cfg.mu0.support_size, right=mu.support_size
        )
    rng = make_rng(rng)
    target = _mixed(cfg.mu0.array, mu.array, cfg.a)
    cum = inverse_cdf(target)

    counts = np.zeros(mu.support_size, dtype=np.int64)
    total = replications * cfg.N
    done = 0
    while done < total:
        m = min(_CHUNK_DRAWS, total - done)
        idx = draw_indices(cum, rng.random(m))
        counts += np.bincount(idx, minlength=mu.support_size)
        done += m
    mean = counts / total
    return float(np.max(np.abs(mean - target)))


def degeneration_profile(
    cfg: GenChainConfig, n_steps: int, window: int, rng
) -> DegenerationProfile:
    """Средние энтропия и TV до mu0 по последним `window` шагам."""
    if not 1 <= window <= n_steps:
        raise ParamOutOfRangeError(
            name="window", value=window, allowed=f"[1, {n_steps}]"
        )
    rng = make_rng(rng)
    w0 = cfg.mu0.array
    w = w0.copy()
    ent = np.empty(n_steps)
    tv = np.empty(n_steps)
    for n in range(n_steps):
        w = _step(w0, w, cfg.a, cfg.N, rng)
        ent[n] = entropy_of(w)
        tv[n] = 0.5 * np.abs(w - w0).sum()
    return DegenerationProfile(
        mean_entropy=float(ent[-window:].mean()),
        mean_tv_to_mu0=float(tv[-window:].mean()),
        window=window,
        entropy_trace=ent,
    )
