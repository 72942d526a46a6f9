from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Region(BaseModel):
    """Замкнутый шар ||x - center|| <= radius вокруг минимума."""

    model_config = ConfigDict(frozen=True)

    center: tuple[float, ...]
    radius: float = Field(gt=0.0)
    label: Optional[str] = None


class MemorizationEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    branch_index: int = Field(ge=0)
    start_n: int = Field(ge=0)
    end_n: int
    # число записей (после прореживания)
    length: int = Field(ge=2)
    mean_tracking_error: float = Field(ge=0.0)
    y_drift: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _order(self):
        if self.end_n <= self.start_n:
            raise ValueError("end_n must be > start_n")
        return self


class OccupationStats(BaseModel):
    regions: list[Region]
    fractions: list[float]
    # доли среди попавших хоть в один регион
    normalized: list[float]
    unassigned: float = Field(ge=0.0, le=1.0)
    dwell_times: list[list[int]]
    # transitions[i][j]: сколько раз i сменился на j
    transitions: list[list[int]]

    @model_validator(mode="after")
    def _fractions(self):
        if any(f < 0 or f > 1 for f in self.fractions):
            raise ValueError("visit fractions must lie in [0, 1]")
        if sum(self.fractions) > 1 + 1e-12:
            raise ValueError("visit fractions sum above 1")
        return self


class TransitionStats(BaseModel):
    mean_dwell: list[Optional[float]]
    median_dwell: list[Optional[float]]
    switches: int = Field(ge=0)
    switches_per_million: float = Field(ge=0.0)
    # шаги между последовательными сменами региона
    gaps: list[int] = []


@dataclass(frozen=True)
class PotentialEstimate:
    """
    Эмпирическая гиббсовская инверсия гистограммы: V_hat = -scale*log(p).
    Для изотропного аддитивного шума single_scale_run при
    scale = a*sigma^2/2 это сам V с точностью до константы; в общем
    случае это не функция действия.
    """

    edges: np.ndarray
    counts: np.ndarray
    # NaN в пустых бинах
    neg_log_freq: np.ndarray
    v_hat: np.ndarray
    scale: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def populated(self) -> np.ndarray:
        return self.counts > 0


@dataclass(frozen=True)
class TrackingError:
    error: np.ndarray
    branch: np.ndarray
    n: np.ndarray = field(repr=False)
