"""
运行驱动与验收套件测试
"""

import filecmp
import json

import pytest

from app.core.data_export import SERIES_COLUMNS, read_series
from app.core.exceptions import ConfigurationException
from app.services.fixtures import fixture_flow_defaults, fixture_names, get_fixture, load_fixture
from app.services.harness import (
    AUDIT_FILE,
    CRITERIA,
    MANIFEST_FILE,
    PROFILE_FILE,
    SERIES_FILE,
    dotY_self_test_series,
    harness_service,
    initial_profile,
    load_scenario,
)
from app.services.flow import dotY_inequality_check

SHORT_RUN = {
    "grid_points": 33,
    "dt": "1e-3",
    "t_max": "0.01",
    "sample_every": 5,
    "expensive_every": 10,
    "sectors": 2,
}


@pytest.mark.unit
class TestFixtures:
    """内置夹具测试"""

    def test_names(self):
        assert fixture_names() == ["fs-p1", "fs-p2", "perturbed-p1", "perturbed-p2"]

    def test_unknown_fixture(self):
        with pytest.raises(ConfigurationException):
            get_fixture("fs-p3")

    def test_defaults_include_grid(self):
        defaults = fixture_flow_defaults("perturbed-p1")
        assert defaults["grid_points"] == 97
        assert defaults["t_max"] == 20.0

    def test_load_fixture_label(self):
        """测试夹具剖面以夹具名为标签"""
        profile = load_fixture("fs-p2", grid_points=17)
        assert profile.label == "fs-p2"
        assert profile.n == 2
        assert profile.grid_points == 17


@pytest.mark.unit
class TestScenarioLoading:
    """场景加载测试"""

    def test_fixture_defaults_fill_missing_keys(self, scenario_file):
        """测试缺少 dt 时使用夹具默认配置"""
        scenario = load_scenario(scenario_file("defaults", fixture="fs-p1", seed=3))
        assert scenario.flow.dt == pytest.approx(2.5e-4)
        assert scenario.flow.grid_points == 97
        assert scenario.seed == 3

    def test_relative_profile_path(self, scenario_file, profile_file):
        """测试剖面路径相对场景文件目录解析"""
        scenario = load_scenario(scenario_file("from-file", profile=profile_file.name, **SHORT_RUN))
        assert scenario.profile == profile_file
        assert initial_profile(scenario).n == 1

    def test_unknown_key_rejected(self, scenario_file):
        with pytest.raises(ConfigurationException):
            load_scenario(scenario_file("bad", fixture="fs-p1", colour="blue"))

    def test_source_required(self, scenario_file):
        """测试必须且只能指定一个初始剖面来源"""
        with pytest.raises(ConfigurationException):
            load_scenario(scenario_file("nosource", dt="1e-3", t_max="0.01"))

    def test_dimension_mismatch(self, scenario_file):
        scenario = load_scenario(scenario_file("mismatch", fixture="fs-p1", n=2, **SHORT_RUN))
        with pytest.raises(ConfigurationException):
            initial_profile(scenario)


@pytest.mark.integration
class TestRunScenario:
    """场景运行测试"""

    def test_outputs_written(self, scenario_file, tmp_path, serial_runner):
        """测试序列、审计、清单与初始剖面均被写出"""
        scenario = load_scenario(scenario_file("short", fixture="perturbed-p1", **SHORT_RUN))
        out = tmp_path / "out"
        outcome = harness_service.run_scenario(scenario, out, serial_runner)
        assert outcome.ok
        for name in (SERIES_FILE, AUDIT_FILE, MANIFEST_FILE, PROFILE_FILE):
            assert (out / name).is_file()

        manifest = json.loads((out / MANIFEST_FILE).read_text(encoding="utf-8"))
        assert manifest["status"] == "completed"
        assert manifest["samples"] == 3
        assert manifest["grid_points"] == 33
        assert manifest["initial_profile_hash"].startswith("sha256:")

        rows = read_series(out / SERIES_FILE, SERIES_COLUMNS)
        assert len(rows) == 3
        assert rows[1]["lambda"] is None
        assert rows[2]["lambda"] is not None

    def test_cfl_violation_exit_code(self, scenario_file, tmp_path):
        """测试CFL违反时退出码为 2 且仍写出清单"""
        values = {**SHORT_RUN, "dt": "0.005", "t_max": "0.02"}
        scenario = load_scenario(scenario_file("unstable", fixture="perturbed-p1", **values))
        outcome = harness_service.run_scenario(scenario, tmp_path / "unstable")
        assert outcome.exit_code == 2
        manifest = json.loads((tmp_path / "unstable" / MANIFEST_FILE).read_text(encoding="utf-8"))
        assert manifest["status"] == "failed"
        assert "CFL" in manifest["halt_reason"]

    def test_repeat_runs_identical(self, scenario_file, tmp_path, serial_runner):
        """测试相同场景的输出逐字节一致"""
        scenario = load_scenario(scenario_file("repeat", fixture="perturbed-p1", **SHORT_RUN))
        first, second = tmp_path / "a", tmp_path / "b"
        harness_service.run_scenario(scenario, first, serial_runner)
        harness_service.run_scenario(scenario, second, serial_runner)
        for name in (SERIES_FILE, AUDIT_FILE, PROFILE_FILE):
            assert filecmp.cmp(first / name, second / name, shallow=False)

    def test_run_scenarios_isolated(self, scenario_file, tmp_path):
        """测试多场景运行中单个失败不影响其他场景"""
        good = load_scenario(scenario_file("good", fixture="fs-p1", **SHORT_RUN))
        bad = load_scenario(
            scenario_file("bad", fixture="perturbed-p1", **{**SHORT_RUN, "dt": "0.005", "t_max": "0.02"})
        )
        outcomes = harness_service.run_scenarios([good, bad], tmp_path)
        assert [outcome.name for outcome in outcomes] == ["good", "bad"]
        assert outcomes[0].exit_code == 0
        assert outcomes[1].exit_code == 2


@pytest.mark.unit
class TestVerify:
    """验收套件测试"""

    def test_criteria_registered(self):
        assert [index for index, _, _ in CRITERIA] == list(range(1, 11))

    def test_dotY_self_test_flagged(self):
        assert not dotY_inequality_check(dotY_self_test_series()).passed

    def test_filtered_verify(self, tmp_path):
        """测试按名称过滤的验收运行"""
        report = harness_service.verify_all("demailly", seed=3, out_dir=tmp_path)
        assert report.passed
        assert [criterion.index for criterion in report.criteria] == [1]
        assert (tmp_path / "verify.json").is_file()

    def test_einstein_fixed_point_includes_flat_oracle(self, tmp_path):
        """测试 Einstein 不动点标准同时检验平坦度量上的预言机"""
        report = harness_service.verify_all("einstein", seed=7, out_dir=tmp_path)
        (criterion,) = report.criteria
        assert criterion.passed
        for n in (1, 2):
            assert criterion.details[f"n={n}"]["flat_oracle"] <= 1e-12

    def test_filter_without_match(self, tmp_path):
        with pytest.raises(ConfigurationException):
            harness_service.verify_all("no-such-criterion", out_dir=tmp_path)


@pytest.mark.slow
def test_full_acceptance_suite(tmp_path):
    """完整验收套件（包含长时间流演化）"""
    report = harness_service.verify_all(seed=7, out_dir=tmp_path)
    failed = [criterion.name for criterion in report.criteria if not criterion.passed]
    assert not failed
