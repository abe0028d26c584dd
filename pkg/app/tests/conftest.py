"""
测试配置和fixtures
"""

from pathlib import Path
from typing import Callable

import numpy as np
import pytest
from click.testing import CliRunner

from app.core.concurrency import ParallelRunner
from app.core.data_export import data_exporter
from app.core.logging import setup_logging
from app.services.geometry import (
    MomentumProfile,
    fubini_study_profile,
    perturbed_profile,
)


@pytest.fixture(scope="session", autouse=True)
def quiet_logging():
    """测试期间只输出警告以上的日志，不写日志文件"""
    setup_logging(level="WARNING", to_file=False)
    yield


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)


@pytest.fixture
def serial_runner() -> ParallelRunner:
    """单线程执行器，便于复现"""
    return ParallelRunner(max_workers=1)


@pytest.fixture
def fs_p1() -> MomentumProfile:
    return fubini_study_profile(1, 65)


@pytest.fixture
def fs_p2() -> MomentumProfile:
    return fubini_study_profile(2, 33)


@pytest.fixture
def perturbed_p1() -> MomentumProfile:
    """剖面最大值提高 20% 的 P¹ 度量"""
    return perturbed_profile(1, 0.8, 65)


@pytest.fixture
def perturbed_p2() -> MomentumProfile:
    return perturbed_profile(2, 0.4, 33)


@pytest.fixture
def cli_runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def profile_file(tmp_path: Path, perturbed_p1: MomentumProfile) -> Path:
    """写出到临时目录的剖面文件"""
    return data_exporter.write_profile(perturbed_p1, tmp_path / "perturbed.txt")


@pytest.fixture
def scenario_file(tmp_path: Path) -> Callable[..., Path]:
    """按键值写出场景文件的工厂"""

    def _write(name: str = "scenario", **values) -> Path:
        lines = ["# 测试场景", f"name = {name}"]
        lines.extend(f"{key} = {value}" for key, value in values.items())
        path = tmp_path / f"{name}.scenario"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write


# 测试数据工厂
class TestDataFactory:
    """测试数据工厂"""

    @staticmethod
    def short_flow(**kwargs):
        """短时域的流配置"""
        from app.schemas.scenario import FlowConfig

        data = {"dt": 1e-3, "t_max": 0.05, "grid_points": 33, "sample_every": 5,
                "expensive_every": 25, "sectors": 3}
        data.update(kwargs)
        return FlowConfig(**data)


@pytest.fixture
def test_data_factory():
    """测试数据工厂fixture"""
    return TestDataFactory
