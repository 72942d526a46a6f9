from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# допуск на сумму весов
SUM_TOL = 1e-12


class DiscreteMeasure(BaseModel):
    """Вероятностная мера на {0..k-1}; опционально с таблицей меток."""

    model_config = ConfigDict(frozen=True)

    support_size: int = Field(ge=1)
    weights: tuple[float, ...]
    labels: Optional[tuple[str, ...]] = None

    @model_validator(mode="after")
    def _check(self):
        if len(self.weights) != self.support_size:
            raise ValueError(
                f"expected {self.support_size} weights, "
                f"got {len(self.weights)}"
            )
        if self.labels is not None and len(self.labels) != self.support_size:
            raise ValueError("labels must match support_size")
        w = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and >= 0")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        return self

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def label(self, index: int) -> str:
        if self.labels is None:
            return str(index)
        return self.labels[index]
