from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


# clip_norm = inf отключает обрезку (для измерения смещения)
class EstimatorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["smoothed_gaussian", "spsa_rademacher"]
    delta: float = Field(gt=0.0, lt=1.0)
    clip_norm: float = Field(default=1e3, gt=0.0)
    batch: int = Field(default=1, ge=1)


@dataclass(frozen=True)
class BiasCurve:
    deltas: np.ndarray
    bias_norm: np.ndarray
    variance: np.ndarray
    mc_sigma: np.ndarray
    slope: float
    truth: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class VarianceScaling:
    axis: str  # "m" или "delta"
    grid: np.ndarray
    variance: np.ndarray
    slope: float
