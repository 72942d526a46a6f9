"""
Анализ траекторий: отслеживание ветвей lambda_i(y), эпизоды
запоминания, заселённость окрестностей минимумов, веса Хванга и
эмпирическая оценка потенциала.
"""

import logging
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from landscapes.base import Landscape, Minimum
from sgd_dynamics.schemas import TrajectoryRecord
from utils.errors import (
    DimensionMismatchError,
    EmptyBinsError,
    NoBranchMetadataError,
    NonPositiveEigenvalueError,
    OverlappingRegionsError,
    ParamOutOfRangeError,
)
from .schemas import (
    MemorizationEvent,
    OccupationStats,
    PotentialEstimate,
    Region,
    TrackingError,
    TransitionStats,
)

logger = logging.getLogger(__name__)

# метка записи вне всех регионов
UNASSIGNED = -1


# ---------- отслеживание ветвей ----------


def tracking_error(tr: TrajectoryRecord, L: Landscape) -> TrackingError:
    """min_i ||x_n - lambda_i(y_n)|| и номер ближайшей ветви."""
    if not L.has_branches:
        raise NoBranchMetadataError(name=L.name)
    lam = L.branches_batch(tr.y)  # (n, m, s)
    dist = np.linalg.norm(tr.x[:, None, :] - lam, axis=2)
    dist = np.where(np.isnan(dist), np.inf, dist)
    branch = np.argmin(dist, axis=1)
    err = dist[np.arange(dist.shape[0]), branch]
    return TrackingError(error=err, branch=branch, n=tr.n)


def _runs(mask: np.ndarray, labels: np.ndarray) -> list[tuple[int, int]]:
    """Максимальные отрезки [i, j] с mask и постоянной меткой."""
    size = mask.size
    if size == 0:
        return []
    cut = np.ones(size, dtype=bool)
    cut[1:] = (mask[1:] != mask[:-1]) | (labels[1:] != labels[:-1])
    starts = np.flatnonzero(cut)
    ends = np.append(starts[1:] - 1, size - 1)
    keep = mask[starts]
    return list(zip(starts[keep].tolist(), ends[keep].tolist()))


def detect_memorization(
    tr: TrajectoryRecord, L: Landscape, tol: float, min_len: int
) -> list[MemorizationEvent]:
    if tol <= 0:
        raise ParamOutOfRangeError(name="tol", value=tol, allowed="> 0")
    if min_len < 2:
        raise ParamOutOfRangeError(
            name="min_len", value=min_len, allowed=">= 2"
        )
    te = tracking_error(tr, L)
    events = []
    for i, j in _runs(te.error < tol, te.branch):
        if j - i + 1 < min_len:
            continue
        events.append(
            MemorizationEvent(
                branch_index=int(te.branch[i]),
                start_n=int(tr.n[i]),
                end_n=int(tr.n[j]),
                length=j - i + 1,
                mean_tracking_error=float(te.error[i : j + 1].mean()),
                y_drift=float(np.linalg.norm(tr.y[j] - tr.y[i])),
            )
        )
    logger.debug("[diagnostics] %d memorization events", len(events))
    return events


def memorized_fraction(
    events: Sequence[MemorizationEvent], tr: TrajectoryRecord
) -> float:
    """Доля записей траектории, попавших в эпизоды запоминания."""
    if len(tr) == 0:
        return 0.0
    return sum(e.length for e in events) / len(tr)


def mean_event_length(events: Sequence[MemorizationEvent]) -> float:
    # в шагах итерации, не в записях
    if not events:
        return 0.0
    return float(np.mean([e.end_n - e.start_n for e in events]))


# ---------- регионы и заселённость ----------


def check_regions(regions: Sequence[Region]) -> None:
    for (i, r1), (j, r2) in combinations(enumerate(regions), 2):
        if len(r1.center) != len(r2.center):
            raise DimensionMismatchError(
                what=f"region {j} center",
                expected=len(r1.center),
                got=len(r2.center),
            )
        dist = np.linalg.norm(np.subtract(r1.center, r2.center))
        # шары, касающиеся в одной точке, допустимы
        if dist < r1.radius + r2.radius - 1e-12:
            raise OverlappingRegionsError(i=i, j=j)


def assign_regions(x: np.ndarray, regions: Sequence[Region]) -> np.ndarray:
    """Номер региона для каждой строки x или UNASSIGNED."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    out = np.full(x.shape[0], UNASSIGNED, dtype=np.int64)
    for k, reg in enumerate(regions):
        if len(reg.center) != x.shape[1]:
            raise DimensionMismatchError(
                what=f"region {k} center",
                expected=x.shape[1],
                got=len(reg.center),
            )
        inside = np.linalg.norm(x - np.asarray(reg.center), axis=1)
        # на общей границе двух шаров побеждает первый
        out[(inside <= reg.radius) & (out == UNASSIGNED)] = k
    return out


def _collapse(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Последовательность посещённых регионов без повторов и шаги смен."""
    idx = np.flatnonzero(labels != UNASSIGNED)
    if idx.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    seq = labels[idx]
    keep = np.concatenate([[True], seq[1:] != seq[:-1]])
    return seq[keep], idx[keep]


def occupation_measure(
    tr: TrajectoryRecord, regions: Sequence[Region]
) -> OccupationStats:
    check_regions(regions)
    labels = assign_regions(tr.x, regions)
    K = len(regions)
    total = max(labels.size, 1)
    counts = np.bincount(labels[labels >= 0], minlength=K)
    fractions = counts / total
    assigned = counts.sum()
    normalized = counts / assigned if assigned else np.zeros(K)

    dwell = [[] for _ in range(K)]
    for i, j in _runs(labels != UNASSIGNED, labels):
        dwell[int(labels[i])].append((j - i + 1) * tr.thin)

    trans = np.zeros((K, K), dtype=np.int64)
    seq, _ = _collapse(labels)
    for a, b in zip(seq[:-1], seq[1:]):
        trans[a, b] += 1

    return OccupationStats(
        regions=list(regions),
        fractions=fractions.tolist(),
        normalized=normalized.tolist(),
        unassigned=float(1.0 - fractions.sum()),
        dwell_times=dwell,
        transitions=trans.tolist(),
    )


def critical_region_fraction(
    tr: TrajectoryRecord, regions: Sequence[Region]
) -> float:
    """Доля времени в окрестностях всех минимумов вместе."""
    return float(sum(occupation_measure(tr, regions).fractions))


def transition_stats(
    tr: TrajectoryRecord, regions: Sequence[Region]
) -> TransitionStats:
    """
    Смены региона по сжатой последовательности посещений: пребывание
    вне регионов не обрывает текущий регион. Отличает частые
    переключения с помощью сноса от экспоненциально редких прыжков
    через барьер под действием шума.
    """
    occ = occupation_measure(tr, regions)
    seq, at = _collapse(assign_regions(tr.x, regions))
    switches = max(int(seq.size) - 1, 0)
    steps = int(tr.n[-1] - tr.n[0]) if len(tr) else 0
    per_million = switches * 1e6 / steps if steps > 0 else 0.0
    gaps = np.diff(tr.n[at[1:]]).tolist() if switches > 1 else []
    return TransitionStats(
        mean_dwell=[
            float(np.mean(d)) if d else None for d in occ.dwell_times
        ],
        median_dwell=[
            float(np.median(d)) if d else None for d in occ.dwell_times
        ],
        switches=switches,
        switches_per_million=per_million,
        gaps=[int(g) for g in gaps],
    )


def default_regions(minima: Sequence[Minimum]) -> list[Region]:
    """Шары радиуса 1/4 минимального расстояния между минимумами."""
    if len(minima) < 2:
        raise ParamOutOfRangeError(
            name="minima", value=len(minima), allowed=">= 2"
        )
    locs = [np.asarray(m.location, dtype=float) for m in minima]
    d = min(np.linalg.norm(p - q) for p, q in combinations(locs, 2))
    return [
        Region(center=tuple(p.tolist()), radius=0.25 * d, label=str(k))
        for k, p in enumerate(locs)
    ]


def basin_regions(L: Landscape) -> list[Region]:
    """
    Для одномерных двухъямных ландшафтов: шары от каждого минимума до
    точки барьера, касающиеся друг друга.
    """
    if L.dim_x != 1 or len(L.minima) != 2:
        raise DimensionMismatchError(
            what="basin regions", expected="1-D, 2 minima", got=L.name
        )
    barrier = float(getattr(L, "barrier_point", 0.0))
    regions = []
    for k, m in enumerate(L.minima):
        c = float(m.location[0])
        regions.append(
            Region(center=(c,), radius=abs(c - barrier), label=str(k))
        )
    return regions


# ---------- предсказания Гиббса и Хванга ----------


def hwang_weights(curvature_eigenvalues: Sequence[Sequence[float]]):
    """w_k ~ (prod_j Lambda_j^k)^(-1/2), нормированные к 1."""
    logs = []
    for k, eigs in enumerate(curvature_eigenvalues):
        eigs = np.asarray(eigs, dtype=float)
        bad = eigs[eigs <= 0]
        if bad.size:
            raise NonPositiveEigenvalueError(value=float(bad[0]), k=k)
        logs.append(-0.5 * np.log(eigs).sum())
    logs = np.asarray(logs)
    # через логарифмы: произведения собственных чисел могут быть огромны
    w = np.exp(logs - logs.max())
    return w / w.sum()


def _potential_1d(L: Landscape, v: np.ndarray) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return L.eval_batch(
        v[:, None], np.zeros((v.size, 0)), np.zeros(v.size, dtype=np.int64)
    )


def gibbs_region_masses(
    L: Landscape, regions: Sequence[Region], temperature: float
) -> np.ndarray:
    """
    Квадратура exp(-V/temperature) по каждому региону, в долях массы
    всего box. Только одномерные ландшафты без медленной переменной.
    """
    if L.dim_x != 1 or L.dim_y != 0:
        raise DimensionMismatchError(
            what="quadrature landscape", expected="x-only 1-D", got=L.name
        )
    if temperature <= 0:
        raise ParamOutOfRangeError(
            name="temperature", value=temperature, allowed="> 0"
        )
    check_regions(regions)
    lo, hi = float(L.box[0][0]), float(L.box[1][0])
    centers = [float(r.center[0]) for r in regions]
    # сдвиг на минимум V по сетке, чтобы exp не уходил в 0
    v_min = float(_potential_1d(L, np.linspace(lo, hi, 4001)).min())

    def density(v):
        return float(np.exp(-(_potential_1d(L, v)[0] - v_min) / temperature))

    def mass(a, b, points):
        inner = [p for p in points if a < p < b]
        val, _ = integrate.quad(density, a, b, points=inner or None, limit=400)
        return val

    total = mass(lo, hi, centers)
    masses = np.array(
        [
            mass(max(c - r.radius, lo), min(c + r.radius, hi), [c])
            for c, r in zip(centers, regions)
        ]
    )
    return masses / total


# ---------- эмпирический потенциал ----------


def potential_estimate(
    tr: TrajectoryRecord,
    bins,
    scale: Optional[float] = None,
    coord: int = 0,
) -> PotentialEstimate:
    """
    Гистограмма координаты x[coord] -> V_hat = -scale*log(p), min = 0.
    scale по умолчанию: шаг a из расписания записи. Пустые бины
    дают NaN.
    """
    if scale is None:
        scale = float(tr.schedule.get("a", 1.0))
    counts, edges = np.histogram(tr.x[:, coord], bins=bins)
    if counts.sum() == 0:
        raise EmptyBinsError()
    freq = counts / counts.sum()
    with np.errstate(divide="ignore"):
        nlf = np.where(counts > 0, -np.log(freq), np.nan)
    nlf = nlf - np.nanmin(nlf)
    return PotentialEstimate(
        edges=edges,
        counts=counts,
        neg_log_freq=nlf,
        v_hat=scale * nlf,
        scale=scale,
    )
