"""
场景与流演化配置的Pydantic模式
"""

from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from app.config import settings
from app.core.exceptions import CFLViolationException, ConfigurationException

DEFAULT_PERELMAN_BOUND = 50.0


class FlowScheme(str, Enum):
    """时间积分格式"""
    RK4 = "rk4"
    IMEX = "imex"


class FlowConfig(BaseModel):
    """流演化配置"""
    dt: float = Field(..., gt=0, description="时间步长")
    t_max: float = Field(..., gt=0, description="终止时间")
    grid_points: Optional[int] = Field(None, ge=9, description="τ网格点数，缺省时按维数取默认值")
    scheme: FlowScheme = Field(FlowScheme.RK4, description="时间积分格式")
    sample_every: int = Field(1, ge=1, description="廉价监测量的采样间隔(步)")
    expensive_every: int = Field(10, ge=1, description="昂贵监测量的采样间隔(步)")
    sample_dt: Optional[float] = Field(None, gt=0, description="廉价监测量的采样间隔(流时间)")
    expensive_dt: Optional[float] = Field(None, gt=0, description="昂贵监测量的采样间隔(流时间)")
    cfl_safety: float = Field(default_factory=lambda: settings.cfl_safety, gt=0, le=1.0)
    sectors: int = Field(default_factory=lambda: settings.sectors, ge=1, description="Fourier扇区截断")
    seed: int = Field(default_factory=lambda: settings.default_seed, description="随机种子")
    monitor_points: int = Field(33, ge=3, description="正性监测的τ子采样点数")
    perelman_bound: float = Field(DEFAULT_PERELMAN_BOUND, gt=0, description="Perelman监测量的夹具常数")

    @model_validator(mode="after")
    def check_horizon(self) -> "FlowConfig":
        if self.dt > self.t_max:
            raise ValueError(f"时间步长 dt={self.dt} 大于终止时间 t_max={self.t_max}")
        return self

    @property
    def total_steps(self) -> int:
        return max(1, int(round(self.t_max / self.dt)))

    def cadence(self) -> Tuple[int, int]:
        """(廉价采样步数, 昂贵采样步数)，后者取前者的整数倍"""
        cheap = self.sample_every
        if self.sample_dt is not None:
            cheap = max(1, int(round(self.sample_dt / self.dt)))
        expensive = self.expensive_every
        if self.expensive_dt is not None:
            expensive = max(1, int(round(self.expensive_dt / self.dt)))
        expensive = max(cheap, int(round(expensive / cheap)) * cheap)
        return cheap, expensive

    def check_cfl(self, limit: float) -> None:
        """dt 必须不超过给定的稳定性上界"""
        if self.dt > limit:
            raise CFLViolationException(
                f"时间步长违反CFL约束: dt={self.dt:.3e} > limit={limit:.3e} "
                f"(scheme={self.scheme.value}, safety={self.cfl_safety})"
            )


SCENARIO_KEYS = (
    "name", "fixture", "profile", "n", "grid_points", "scheme", "dt", "t_max",
    "sample_every", "expensive_every", "sample_dt", "expensive_dt", "cfl_safety",
    "sectors", "seed", "out",
)

FLOW_KEYS = (
    "grid_points", "scheme", "dt", "t_max", "sample_every", "expensive_every",
    "sample_dt", "expensive_dt", "cfl_safety", "sectors", "seed",
)


class Scenario(BaseModel):
    """一次流演化运行的完整描述"""
    name: str = Field(..., min_length=1, description="场景名称")
    n: Optional[int] = Field(None, ge=1, le=2, description="复维数")
    fixture: Optional[str] = Field(None, description="命名夹具")
    profile: Optional[Path] = Field(None, description="初始剖面文件")
    flow: FlowConfig
    out: Optional[Path] = Field(None, description="输出目录")

    @model_validator(mode="after")
    def check_source(self) -> "Scenario":
        if (self.fixture is None) == (self.profile is None):
            raise ValueError("场景必须且只能指定 fixture 或 profile 之一")
        if self.profile is not None and not self.profile.is_file():
            raise ValueError(f"剖面文件不存在: {self.profile}")
        return self

    @property
    def seed(self) -> int:
        return self.flow.seed

    @classmethod
    def from_mapping(cls, values: Dict[str, str], base_dir: Optional[Path] = None) -> "Scenario":
        """由扁平 key = value 映射构造，相对路径以场景文件目录为基准"""
        unknown = sorted(set(values) - set(SCENARIO_KEYS))
        if unknown:
            raise ConfigurationException(f"未知的场景键: {', '.join(unknown)}")

        flow = {key: values[key] for key in FLOW_KEYS if key in values}
        if "fixture" in values and ("dt" not in flow or "t_max" not in flow):
            from app.services.fixtures import fixture_flow_defaults

            defaults = fixture_flow_defaults(values["fixture"])
            flow = {**defaults, **flow}

        fields: Dict[str, object] = {"name": values.get("name", "scenario"), "flow": flow}
        for key in ("n", "fixture"):
            if key in values:
                fields[key] = values[key]
        for key in ("profile", "out"):
            if key in values:
                path = Path(values[key])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                fields[key] = path

        try:
            return cls.model_validate(fields)
        except ValueError as exc:
            raise ConfigurationException(f"场景配置无效: {exc}") from exc
