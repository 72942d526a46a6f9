from dataclasses import dataclass
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.errors import ParamOutOfRangeError


class OUParams(BaseModel):
    """dX = -upsilon*X dt + dW, X(0) ~ N(data_mean, data_var)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    upsilon: float = Field(default=1.0, gt=0.0)
    T: float = Field(default=1.0, gt=0.0)
    dt: float = Field(default=1e-3, gt=0.0)
    data_mean: float = 0.0
    data_var: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _check_dt(self):
        if self.dt > self.T / 10:
            raise ValueError(f"dt={self.dt} must be <= T/10={self.T / 10}")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class ScoreModel:
    """
    s(x, t) = slope(t)*x + intercept(t), кусочно-линейно между узлами;
    вне [t_0, t_K] берутся крайние значения.
    """

    time_grid: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.time_grid, dtype=float)
        if grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise ParamOutOfRangeError(
                name="time_grid",
                value=grid.tolist(),
                allowed=">= 2 strictly increasing knots in (0, T]",
            )
        for name in ("slopes", "intercepts"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != grid.shape or not np.all(np.isfinite(arr)):
                raise ParamOutOfRangeError(
                    name=name, value=arr.shape, allowed="finite, one per knot"
                )
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "time_grid", grid)

    @classmethod
    def zeros(cls, knots: Sequence[float]) -> "ScoreModel":
        k = len(knots)
        return cls(np.asarray(knots, float), np.zeros(k), np.zeros(k))

    def coefficients(self, t: float) -> tuple[float, float]:
        return (
            float(np.interp(t, self.time_grid, self.slopes)),
            float(np.interp(t, self.time_grid, self.intercepts)),
        )

    def __call__(self, x, t: float):
        slope, intercept = self.coefficients(t)
        return slope * np.asarray(x, dtype=float) + intercept


@dataclass(frozen=True)
class TrainingResult:
    # последняя итерация и хвостовое (Поляк-Рупперт) среднее
    model: ScoreModel
    averaged: ScoreModel
    loss_trace: np.ndarray
