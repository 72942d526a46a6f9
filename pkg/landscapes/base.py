"""
Базовый класс стилизованных функций потерь f(x, u, z), u = epsilon*y.

Публичные eval/grad1/grad2 работают с одной точкой и проверяют
размерности; *_batch принимают массивы (n, s), (n, r) и индексы шума
(n,) и используются горячими циклами sgd и оценщиков.
grad2: это производная по второму аргументу u в точке u = epsilon*y,
множитель epsilon в обновлении y даёт шаг b = epsilon*a.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np

from utils.errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    NoBranchMetadataError,
    ParamOutOfRangeError,
)
from utils.seeding import make_rng


@dataclass(frozen=True)
class Minimum:
    location: np.ndarray
    eigenvalues: np.ndarray
    value: float = 0.0


@dataclass(frozen=True)
class SlowMinimum:
    """
    Изолированный локальный минимум y приведённой функции
    phi(lambda_branch(y), y); x = lambda_branch(y), curvature: вторая
    производная приведённой функции по y.
    """

    y: np.ndarray
    branch: int
    x: np.ndarray
    curvature: float


class Landscape(ABC):
    name = "landscape"

    def __init__(
        self,
        dim_x: int,
        dim_y: int,
        epsilon: float,
        noise_values,
        box: tuple[np.ndarray, np.ndarray],
        curvature_bound: float,
    ):
        if not 0.0 < epsilon < 0.5:
            raise ParamOutOfRangeError(
                name="epsilon", value=epsilon, allowed="(0, 0.5)"
            )
        self.dim_x = dim_x
        self.dim_y = dim_y
        self.epsilon = float(epsilon)
        self.noise_values = np.asarray(noise_values, dtype=float)
        lo, hi = box
        self.box = (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        self.curvature_bound = float(curvature_bound)

    # ---- то, что реализуют конкретные ландшафты ----

    @abstractmethod
    def _f(self, x: np.ndarray, u: np.ndarray, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _g1(self, x: np.ndarray, u: np.ndarray, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _g2(self, x: np.ndarray, u: np.ndarray, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def params(self) -> dict[str, Any]:
        """Аргументы конструктора (для манифеста и with_epsilon)."""

    # ---- метаданные минимумов ----

    @property
    def has_branches(self) -> bool:
        return False

    def branches_batch(self, y: np.ndarray) -> np.ndarray:
        """lambda_i(y) для каждой строки y: (n, m, s), NaN вне ветви."""
        raise NoBranchMetadataError(name=self.name)

    def branches(self, y) -> np.ndarray:
        y = self._as_vec(y, self.dim_y, "y")
        return self.branches_batch(y[None, :])[0]

    @property
    def minima(self) -> tuple[Minimum, ...]:
        return ()

    @property
    def slow_minima(self) -> tuple[SlowMinimum, ...]:
        return ()

    @property
    def folds(self) -> tuple[float, ...]:
        return ()

    # ---- публичный интерфейс ----

    @property
    def n_noise(self) -> int:
        return int(self.noise_values.size)

    def with_epsilon(self, epsilon: float) -> "Landscape":
        return type(self)(**{**self.params(), "epsilon": epsilon})

    def _as_vec(self, v, dim: int, what: str) -> np.ndarray:
        if v is None and dim == 0:
            return np.zeros(0)
        arr = np.asarray(v, dtype=float).ravel()
        if arr.size != dim:
            raise DimensionMismatchError(what=what, expected=dim, got=arr.size)
        return arr

    def _point(self, x, y, z):
        x = self._as_vec(x, self.dim_x, "x")
        y = self._as_vec(y, self.dim_y, "y")
        if not 0 <= int(z) < self.n_noise:
            raise IndexOutOfRangeError(index=int(z), size=self.n_noise)
        zv = self.noise_values[[int(z)]]
        return x[None, :], self.epsilon * y[None, :], zv

    def eval(self, x, y, z: int = 0) -> float:
        return float(self._f(*self._point(x, y, z))[0])

    def grad1(self, x, y, z: int = 0) -> np.ndarray:
        return self._g1(*self._point(x, y, z))[0]

    def grad2(self, x, y, z: int = 0) -> np.ndarray:
        return self._g2(*self._point(x, y, z))[0]

    def eval_batch(self, x, y, z) -> np.ndarray:
        return self._f(x, self.epsilon * y, self.noise_values[z])

    def grad1_batch(self, x, y, z) -> np.ndarray:
        return self._g1(x, self.epsilon * y, self.noise_values[z])

    def grad2_batch(self, x, y, z) -> np.ndarray:
        return self._g2(x, self.epsilon * y, self.noise_values[z])

    def sample_box(self, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.box
        pts = make_rng(rng).uniform(lo, hi, size=(n, lo.size))
        return pts[:, : self.dim_x], pts[:, self.dim_x :]

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def fd_check(
    L: Landscape, n_points: int = 100, h: float = 1e-5, rng=0
) -> float:
    """
    Максимальная относительная ошибка аналитических grad1/grad2 против
    центральных разностей eval в n_points случайных точках box.
    Разность по y делится на epsilon, потому что grad2: это d/du.
    """
    if not 1e-8 < h < 1e-2:
        raise ParamOutOfRangeError(name="h", value=h, allowed="(1e-8, 1e-2)")
    rng = make_rng(rng)
    X, Y = L.sample_box(n_points, rng)
    Z = rng.integers(0, L.n_noise, size=n_points)

    g = np.hstack([L.grad1_batch(X, Y, Z), L.grad2_batch(X, Y, Z)])
    g_fd = np.empty_like(g)
    for j in range(L.dim_x):
        e = np.zeros(L.dim_x)
        e[j] = h
        g_fd[:, j] = (
            L.eval_batch(X + e, Y, Z) - L.eval_batch(X - e, Y, Z)
        ) / (2 * h)
    for j in range(L.dim_y):
        e = np.zeros(L.dim_y)
        e[j] = h
        g_fd[:, L.dim_x + j] = (
            L.eval_batch(X, Y + e, Z) - L.eval_batch(X, Y - e, Z)
        ) / (2 * h * L.epsilon)

    err = np.linalg.norm(g - g_fd, axis=1)
    scale = np.maximum(np.linalg.norm(g_fd, axis=1), 1.0)
    return float(np.max(err / scale))
