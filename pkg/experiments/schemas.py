from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from estimators.schemas import EstimatorConfig
from score_diffusion.schemas import OUParams
from sgd_dynamics.schemas import Mode, StepSchedule
from utils.seeding import MAX_SEED


class _Section(BaseModel):
    # inf в JSON как Infinity: clip_norm = inf должен пережить манифест
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")


class LandscapeSection(_Section):
    name: str
    params: dict[str, Any] = {}


class ChainSection(_Section):
    name: str
    params: dict[str, Any] = {}


class RegionSection(_Section):
    center: list[float] = Field(min_length=1)
    radius: float = Field(gt=0.0)


# ---------- параметры экспериментов ----------


class CollapseParams(_Section):
    mu0: list[float] = Field(min_length=2)
    N: int = Field(ge=1)
    a: list[float] = Field(min_length=1)
    runs: int = Field(default=1000, ge=1)
    max_steps: int = Field(default=100_000, ge=1)
    # окно для средней энтропии в режиме вырождения
    entropy_window: int = Field(default=1000, ge=1)
    entropy_threshold: float = Field(default=0.1, ge=0.0)
    oracle: bool = True

    @model_validator(mode="after")
    def _a_range(self):
        if any(not 0.0 <= a <= 1.0 for a in self.a):
            raise ValueError("every a must lie in [0, 1]")
        return self


class BarycenterParams(_Section):
    mu0: list[float] = Field(min_length=2)
    N: int = Field(ge=1)
    a: float = Field(default=0.0, ge=0.0, le=1.0)
    states: int = Field(default=5, ge=1)
    replications: int = Field(default=100_000, ge=1000)


class TwoScaleParams(_Section):
    landscape: LandscapeSection
    chain: ChainSection
    schedule: StepSchedule
    modes: list[Mode] = Field(default=["instantaneous"], min_length=1)
    x0: list[float]
    y0: list[float]
    n_steps: int = Field(ge=1)
    thin: int = Field(default=1, ge=1)
    replicas: int = Field(default=1, ge=1)
    estimator: Optional[EstimatorConfig] = None
    # последняя декада: записи с n >= tail_start*n_steps
    tail_start: float = Field(default=0.9, ge=0.0, lt=1.0)
    write_trajectories: bool = True
    # горизонт опорного потока; None: без сравнения с ODE
    ode_horizon: Optional[float] = Field(default=None, gt=0.0)


class HwangParams(_Section):
    landscape: LandscapeSection
    steps: list[float] = Field(min_length=1)
    sigma: float = Field(default=1.0, gt=0.0)
    x0: list[float]
    n_steps: int = Field(ge=1)
    thin: int = Field(default=100, ge=1)
    replicas: int = Field(default=10, ge=1)
    regions: Literal["basin", "default"] = "basin"

    @model_validator(mode="after")
    def _positive_steps(self):
        if any(a <= 0 for a in self.steps):
            raise ValueError("steps must be > 0")
        return self


class MemorizeParams(_Section):
    landscape: LandscapeSection = LandscapeSection(name="memorization_drift")
    chain: ChainSection = ChainSection(name="tilted_flip")
    a: float = Field(gt=0.0)
    epsilon: float = Field(gt=0.0, lt=0.5)
    epsilons: list[float] = Field(min_length=1)
    # развёртка по шагу при фиксированном epsilon/a
    steps: list[float] = Field(min_length=1)
    n_steps: int = Field(ge=1)
    thin: int = Field(default=10, ge=1)
    replicas: int = Field(default=20, ge=1)
    tol: float = Field(default=0.05, gt=0.0)
    min_len: int = Field(default=100, ge=2)
    regions: list[RegionSection] = [
        RegionSection(center=[-0.9], radius=0.5),
        RegionSection(center=[0.9], radius=0.5),
    ]

    @model_validator(mode="after")
    def _ranges(self):
        if any(not 0.0 < e < 0.5 for e in self.epsilons):
            raise ValueError("epsilons must lie in (0, 0.5)")
        ratio = self.epsilon / self.a
        if any(not 0.0 < ratio * a < 0.5 for a in self.steps):
            raise ValueError("epsilon/a * steps must stay in (0, 0.5)")
        return self


class EstimatorBiasParams(_Section):
    landscape: LandscapeSection
    chain: ChainSection
    kinds: list[Literal["smoothed_gaussian", "spsa_rademacher"]] = Field(
        default=["smoothed_gaussian", "spsa_rademacher"], min_length=1
    )
    x: list[float]
    y: Optional[list[float]] = None
    deltas: list[float] = Field(min_length=2)
    batch: int = Field(default=200_000, ge=2)
    clip_norm: float = Field(default=float("inf"), gt=0.0)
    ms: list[int] = Field(default=[1, 10, 100], min_length=2)
    reps: int = Field(default=2000, ge=2)

    @model_validator(mode="after")
    def _grids(self):
        if any(not 0.0 < d < 1.0 for d in self.deltas):
            raise ValueError("deltas must lie in (0, 1)")
        if any(m < 1 for m in self.ms):
            raise ValueError("ms must be >= 1")
        return self


class DiffusionParams(_Section):
    process: OUParams = OUParams()
    knots: list[float] = Field(min_length=2)
    step: float = Field(default=0.01, gt=0.0)
    n_iters: int = Field(ge=0)
    batch: int = Field(default=256, ge=1)
    tail_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    n_samples: int = Field(default=100_000, ge=2)
    # каждая loss_every-я итерация в loss_trace.csv
    loss_every: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def _knots(self):
        k = self.knots
        if k[0] <= 0 or k[-1] > self.process.T:
            raise ValueError("knots must lie in (0, T]")
        if any(b <= a for a, b in zip(k, k[1:])):
            raise ValueError("knots must be strictly increasing")
        return self


# ---------- корень конфига ----------


class _Experiment(_Section):
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    workers: int = Field(default=1, ge=1)
    output_dir: Optional[Path] = None


class CollapseConfig(_Experiment):
    experiment: Literal["collapse"]
    params: CollapseParams


class BarycenterConfig(_Experiment):
    experiment: Literal["barycenter-check"]
    params: BarycenterParams


class TwoScaleConfig(_Experiment):
    experiment: Literal["two-scale"]
    params: TwoScaleParams


class HwangConfig(_Experiment):
    experiment: Literal["hwang"]
    params: HwangParams


class MemorizeConfig(_Experiment):
    experiment: Literal["memorize"]
    params: MemorizeParams


class EstimatorBiasConfig(_Experiment):
    experiment: Literal["estimator-bias"]
    params: EstimatorBiasParams


class DiffusionConfig(_Experiment):
    experiment: Literal["diffusion"]
    params: DiffusionParams


EXPERIMENTS: dict[str, type[_Experiment]] = {
    "collapse": CollapseConfig,
    "barycenter-check": BarycenterConfig,
    "two-scale": TwoScaleConfig,
    "hwang": HwangConfig,
    "memorize": MemorizeConfig,
    "estimator-bias": EstimatorBiasConfig,
    "diffusion": DiffusionConfig,
}

ExperimentConfig = _Experiment


class ValidationReport(BaseModel):
    experiment: Optional[str] = None
    errors: list[str] = []
    warnings: list[str] = []
    schedules: dict[str, Any] = {}

    @property
    def ok(self) -> bool:
        return not self.errors
