from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from measures.schemas import DiscreteMeasure


# a: доля свежих данных mu0 в смеси; N: размер выборки поколения
class GenChainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu0: DiscreteMeasure
    a: float = Field(ge=0.0, le=1.0)
    N: int = Field(ge=1)
    max_steps: int = Field(default=100_000, ge=1)
    dirac_tol: float = Field(default=1e-9, gt=0.0, lt=0.5)


@dataclass(frozen=True)
class AbsorptionReport:
    absorbed: bool
    absorbing_index: Optional[int]
    steps_to_absorb: Optional[int]
    entropy_trace: np.ndarray
    final_measure: DiscreteMeasure
    # сколько раз цепь побывала в (не поглощающей) дираковской мере
    dirac_visits: int = 0

    @property
    def final_entropy(self) -> float:
        return float(self.entropy_trace[-1])

    @property
    def steps(self) -> int:
        return int(self.entropy_trace.size - 1)


@dataclass(frozen=True)
class DegenerationProfile:
    mean_entropy: float
    mean_tv_to_mu0: float
    window: int
    entropy_trace: np.ndarray = field(repr=False)
