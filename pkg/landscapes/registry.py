from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from utils.errors import UnknownNameError
from .base import Landscape
from .builtin import (
    FOLD_U,
    CurvatureAsymmetricWell,
    MemorizationDrift,
    QuadraticTracking,
    SeparablePolynomial,
    SymmetricDoubleWell,
)


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid")


class QuadraticTrackingParams(_Params):
    epsilon: float = Field(gt=0, lt=0.5)
    c: float = 1.0
    noise_mean: float = 0.0


class SymmetricDoubleWellParams(_Params):
    depth: float = Field(default=1.0, gt=0)
    epsilon: float = Field(default=0.1, gt=0, lt=0.5)
    width: float = Field(default=1.0, gt=0)


class CurvatureAsymmetricWellParams(_Params):
    c1: float = Field(default=2.0, gt=0)
    c2: float = Field(default=8.0, gt=0)
    barrier: float = Field(default=0.25, gt=0)
    cap_fraction: float = Field(default=0.25, gt=0, lt=1)
    epsilon: float = Field(default=0.1, gt=0, lt=0.5)


class MemorizationDriftParams(_Params):
    epsilon: float = Field(gt=0, lt=0.5)
    beta: float = Field(default=8.0, gt=0)
    length: float = Field(default=1.0, gt=0)
    ridge_center: float = Field(default=0.5, gt=FOLD_U)
    ridge_height: float = Field(default=0.6, ge=0)
    ridge_width: float = Field(default=0.03, gt=0)


class SeparablePolynomialParams(_Params):
    coefficients: list[list[float]] = Field(min_length=1)
    noise_shift: float = 0.0
    epsilon: float = Field(default=0.1, gt=0, lt=0.5)
    half_width: float = Field(default=2.0, gt=0)


LANDSCAPES: dict[str, tuple[type[Landscape], type[BaseModel]]] = {
    "quadratic_tracking": (QuadraticTracking, QuadraticTrackingParams),
    "symmetric_double_well": (SymmetricDoubleWell, SymmetricDoubleWellParams),
    "curvature_asymmetric_well": (
        CurvatureAsymmetricWell,
        CurvatureAsymmetricWellParams,
    ),
    "memorization_drift": (MemorizationDrift, MemorizationDriftParams),
    "separable_polynomial": (SeparablePolynomial, SeparablePolynomialParams),
}


def landscape_params_model(name: str) -> type[BaseModel]:
    if name not in LANDSCAPES:
        raise UnknownNameError(kind="landscape", name=name)
    return LANDSCAPES[name][1]


def make_landscape(
    name: str, params: Optional[dict[str, Any]] = None
) -> Landscape:
    """Ландшафт по имени; параметры проверяет pydantic-модель."""
    model = landscape_params_model(name)
    cls = LANDSCAPES[name][0]
    checked = model(**(params or {}))
    return cls(**checked.model_dump())
