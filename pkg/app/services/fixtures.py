"""
内置夹具：Fubini–Study 剖面与扰动剖面及其默认流配置
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from app.core.exceptions import ConfigurationException
from app.services.geometry import MomentumProfile, fubini_study_profile, perturbed_profile


@dataclass(frozen=True)
class FixtureSpec:
    """命名夹具：维数、扰动幅度与默认流配置"""
    name: str
    n: int
    amplitude: float
    grid_points: int
    flow: Dict[str, Any] = field(default_factory=dict)


FIXTURES: Dict[str, FixtureSpec] = {
    "fs-p1": FixtureSpec(
        "fs-p1", n=1, amplitude=0.0, grid_points=97,
        flow={"dt": 2.5e-4, "t_max": 1.0, "sample_dt": 0.01, "expensive_dt": 0.25},
    ),
    # 幅度 0.8 对应剖面最大值提高 20%，初始双截面曲率为正
    "perturbed-p1": FixtureSpec(
        "perturbed-p1", n=1, amplitude=0.8, grid_points=97,
        flow={"dt": 2.5e-4, "t_max": 20.0, "sample_dt": 0.01, "expensive_dt": 0.1},
    ),
    "fs-p2": FixtureSpec(
        "fs-p2", n=2, amplitude=0.0, grid_points=65,
        flow={"dt": 5e-4, "t_max": 1.0, "sample_dt": 0.01, "expensive_dt": 0.25},
    ),
    "perturbed-p2": FixtureSpec(
        "perturbed-p2", n=2, amplitude=0.4, grid_points=65,
        flow={"dt": 5e-4, "t_max": 10.0, "sample_dt": 0.01, "expensive_dt": 0.2},
    ),
}


def fixture_names() -> List[str]:
    return sorted(FIXTURES)


def get_fixture(name: str) -> FixtureSpec:
    try:
        return FIXTURES[name]
    except KeyError:
        raise ConfigurationException(
            f"未知夹具: {name}，可选: {', '.join(fixture_names())}"
        ) from None


def fixture_flow_defaults(name: str) -> Dict[str, Any]:
    """夹具的默认流配置，场景文件中的键优先"""
    spec = get_fixture(name)
    return {"grid_points": spec.grid_points, **spec.flow}


def load_fixture(name: str, grid_points: Optional[int] = None) -> MomentumProfile:
    spec = get_fixture(name)
    m = grid_points or spec.grid_points
    if spec.amplitude == 0.0:
        profile = fubini_study_profile(spec.n, m)
    else:
        profile = perturbed_profile(spec.n, spec.amplitude, m, label=name)
    return profile.with_theta(profile.theta, label=name)
