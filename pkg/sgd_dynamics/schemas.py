from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from utils.csvio import write_csv

Mode = Literal["instantaneous", "averaged_full", "averaged_frozen"]


class ConstantSchedule(BaseModel):
    """a_n = a, b_n = epsilon*a."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["constant"] = "constant"
    a: float = Field(gt=0.0)
    epsilon: float = Field(gt=0.0, lt=1.0)

    def steps(self, n: int) -> tuple[float, float]:
        return self.a, self.epsilon * self.a


class DecreasingSchedule(BaseModel):
    """
    a_n = c_a/(n+1)^q, b_n = c_b/(n+1)^p. Показатели здесь не
    ограничиваются: условия Роббинса-Монро проверяет validate_schedule.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["decreasing"] = "decreasing"
    c_a: float = Field(gt=0.0)
    c_b: float = Field(gt=0.0)
    q: float = Field(gt=0.0)
    p: float = Field(gt=0.0)

    def steps(self, n: int) -> tuple[float, float]:
        m = float(n + 1)
        return self.c_a / m**self.q, self.c_b / m**self.p


StepSchedule = Annotated[
    Union[ConstantSchedule, DecreasingSchedule],
    Field(discriminator="kind"),
]


class ScheduleReport(BaseModel):
    robbins_monro: bool
    timescale_separated: bool
    reasons: list[str] = []


@dataclass(frozen=True)
class TwoScaleState:
    x: np.ndarray
    y: np.ndarray
    noise_state: int = 0
    n: int = 0


@dataclass
class TrajectoryRecord:
    """Прореженная траектория одного запуска; n строго возрастает."""

    landscape: str
    chain: str
    schedule: dict[str, Any]
    mode: str
    thin: int
    seed: Optional[int]
    n: np.ndarray
    x: np.ndarray  # (records, s)
    y: np.ndarray  # (records, r)
    loss: np.ndarray
    noise_state: np.ndarray
    # шаг, на котором сработал ограничитель расхождения
    diverged_at: Optional[int] = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.n.size)

    @property
    def final_state(self) -> TwoScaleState:
        return TwoScaleState(
            x=self.x[-1].copy(),
            y=self.y[-1].copy(),
            noise_state=int(self.noise_state[-1]),
            n=int(self.n[-1]),
        )

    def header(self) -> list[str]:
        xs = [f"x{j}" for j in range(self.x.shape[1])]
        ys = [f"y{j}" for j in range(self.y.shape[1])]
        return ["n", *xs, *ys, "loss", "noise_state"]

    def rows(self):
        for i in range(len(self)):
            yield [
                int(self.n[i]),
                *self.x[i].tolist(),
                *self.y[i].tolist(),
                float(self.loss[i]),
                int(self.noise_state[i]),
            ]

    def to_csv(self, path: Path) -> Path:
        return write_csv(path, self.header(), self.rows())

    def window_mask(
        self, start: int, stop: Optional[int] = None
    ) -> np.ndarray:
        """Записи с шагами n в [start, stop)."""
        stop = int(self.n[-1]) + 1 if stop is None else stop
        return (self.n >= start) & (self.n < stop)


@dataclass(frozen=True)
class OdeTrajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    drift_norm: np.ndarray
