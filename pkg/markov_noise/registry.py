from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from utils.errors import UnknownNameError
from .chains import (
    ControlledChain,
    FixedChain,
    SoftmaxChain,
    TiltedFlip,
    flip,
    iid,
    random_chain,
    two_rate,
)


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FixedParams(_Params):
    matrix: list[list[float]] = Field(min_length=1)


class FlipParams(_Params):
    p: float = Field(default=0.5, gt=0, le=1)


class TwoRateParams(_Params):
    alpha: float = Field(gt=0, le=1)
    beta: float = Field(gt=0, le=1)


class IidParams(_Params):
    weights: list[float] = Field(min_length=1)


class RandomParams(_Params):
    k: int = Field(ge=1)
    seed: int = Field(default=0, ge=0)


class TiltedFlipParams(_Params):
    length: float = Field(default=1.0, gt=0)
    stickiness: float = Field(default=0.5, ge=0, lt=1)


class SoftmaxParams(_Params):
    bias: list[float] = Field(min_length=1)
    wx: list[list[float]]
    wy: Optional[list[list[float]]] = None
    stickiness: float = Field(default=0.5, ge=0, lt=1)


CHAINS: dict[str, tuple[Any, type[BaseModel]]] = {
    "fixed": (FixedChain, FixedParams),
    "flip": (flip, FlipParams),
    "two_rate": (two_rate, TwoRateParams),
    "iid": (iid, IidParams),
    "random": (random_chain, RandomParams),
    "tilted_flip": (TiltedFlip, TiltedFlipParams),
    "softmax": (SoftmaxChain, SoftmaxParams),
}


def chain_params_model(name: str) -> type[BaseModel]:
    if name not in CHAINS:
        raise UnknownNameError(kind="chain", name=name)
    return CHAINS[name][1]


def make_chain(
    name: str, params: Optional[dict[str, Any]] = None
) -> ControlledChain:
    model = chain_params_model(name)
    factory = CHAINS[name][0]
    return factory(**model(**(params or {})).model_dump())
