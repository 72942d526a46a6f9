from typing import Optional, Sequence

import numpy as np
from scipy.special import entr

from utils.errors import (
    IndexOutOfRangeError,
    NegativeWeightError,
    ParamOutOfRangeError,
    SupportMismatchError,
    ZeroMassError,
)
from .schemas import DiscreteMeasure, SUM_TOL


def new_measure(
    weights: Sequence[float], labels: Optional[Sequence[str]] = None
) -> DiscreteMeasure:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0:
        raise ZeroMassError()
    for i, v in enumerate(w):
        if v < 0 or not np.isfinite(v):
            raise NegativeWeightError(index=i, value=float(v))
    total = w.sum()
    if total <= 0:
        raise ZeroMassError()
    return _from_array(w / total, labels)


def _from_array(
    w: np.ndarray, labels: Optional[Sequence[str]] = None
) -> DiscreteMeasure:
    return DiscreteMeasure(
        support_size=int(w.size),
        weights=tuple(float(v) for v in w),
        labels=tuple(labels) if labels is not None else None,
    )


def dirac(index: int, support_size: int) -> DiscreteMeasure:
    if not 0 <= index < support_size:
        raise IndexOutOfRangeError(index=index, size=support_size)
    w = np.zeros(support_size)
    w[index] = 1.0
    return _from_array(w)


def uniform(support_size: int) -> DiscreteMeasure:
    return new_measure(np.ones(support_size))


def _check_same_support(mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    if mu.support_size != nu.support_size:
        raise SupportMismatchError(left=mu.support_size, right=nu.support_size)


def inverse_cdf(weights: np.ndarray) -> np.ndarray:
    """
    Кумулятивные веса для обратного преобразования: последний
    положительный вес доводится до ровно 1.0, чтобы u < 1 никогда не
    попал в хвост с нулевыми весами.
    """
    cum = np.cumsum(weights)
    last = int(np.flatnonzero(weights > 0)[-1])
    cum[last:] = 1.0
    return cum


def draw_indices(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, cum.size - 1)


def sample(
    mu: DiscreteMeasure, n: int, rng: np.random.Generator
) -> np.ndarray:
    """
    n i.i.d. индексов из mu. Расход потока: ровно n равномерных
    чисел (rng.random(n)), обратное преобразование CDF.
    """
    if n < 1:
        raise ParamOutOfRangeError(name="n", value=n, allowed=">= 1")
    return draw_indices(inverse_cdf(mu.array), rng.random(n))


def empirical_fit(
    samples: Sequence[int], support_size: int
) -> DiscreteMeasure:
    s = np.asarray(samples, dtype=np.int64).ravel()
    if s.size == 0:
        raise ParamOutOfRangeError(
            name="samples", value="[]", allowed="nonempty"
        )
    bad = (s < 0) | (s >= support_size)
    if np.any(bad):
        raise IndexOutOfRangeError(
            index=int(s[np.argmax(bad)]), size=support_size
        )
    counts = np.bincount(s, minlength=support_size)
    return _from_array(counts / s.size)


def mix_weights(w0: np.ndarray, wn: np.ndarray, a: float) -> np.ndarray:
    w = a * w0 + (1.0 - a) * wn
    drift = abs(w.sum() - 1.0)
    if drift > SUM_TOL:
        w = w / w.sum()
    return w


def mix(
    mu0: DiscreteMeasure, mun: DiscreteMeasure, a: float
) -> DiscreteMeasure:
    _check_same_support(mu0, mun)
    if not 0.0 <= a <= 1.0:
        raise ParamOutOfRangeError(name="a", value=a, allowed="[0, 1]")
    # концы отрезка: точно, без арифметики
    if a == 0.0:
        return mun
    if a == 1.0:
        return mu0
    return _from_array(mix_weights(mu0.array, mun.array, a), mu0.labels)


def tv_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    _check_same_support(mu, nu)
    d = 0.5 * float(np.abs(mu.array - nu.array).sum())
    return min(max(d, 0.0), 1.0)


def entropy(mu: DiscreteMeasure) -> float:
    # entr(0) = 0, то есть 0*log 0 := 0
    return float(entr(mu.array).sum())


def entropy_of(weights: np.ndarray) -> float:
    return float(entr(weights).sum())


def is_dirac(mu: DiscreteMeasure, tol: float) -> Optional[int]:
    if not 0.0 < tol < 0.5:
        raise ParamOutOfRangeError(name="tol", value=tol, allowed="(0, 0.5)")
    return dirac_index(mu.array, tol)


def dirac_index(weights: np.ndarray, tol: float) -> Optional[int]:
    i = int(np.argmax(weights))
    if weights[i] >= 1.0 - tol:
        return i
    return None


def to_csv_row(mu: DiscreteMeasure) -> list:
    """Строка `support_size, w0, w1, ...`."""
    return [mu.support_size, *mu.weights]


def from_csv_row(row: Sequence) -> DiscreteMeasure:
    k = int(row[0])
    w = [float(v) for v in row[1:]]
    if len(w) != k:
        raise SupportMismatchError(left=k, right=len(w))
    return new_measure(w)
