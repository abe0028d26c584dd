"""
数据导入导出测试
"""

import numpy as np
import pytest

from app.core.data_export import (
    AUDIT_COLUMNS,
    SERIES_COLUMNS,
    content_hash,
    data_exporter,
    format_value,
    read_series,
)
from app.core.data_import import data_importer
from app.core.exceptions import FixtureFormatException


@pytest.mark.unit
class TestProfileFiles:
    """剖面文件测试"""

    def test_written_profile_reads_back(self, profile_file, perturbed_p1):
        """测试 repr 格式保证读回的数值逐位一致"""
        profile = data_importer.read_profile(profile_file)
        assert profile.n == 1
        np.testing.assert_array_equal(profile.theta, perturbed_p1.theta)
        assert profile.label == "perturbed"

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0.0 0.0\n1.0 0.0\n", encoding="utf-8")
        with pytest.raises(FixtureFormatException):
            data_importer.read_profile(path)

    def test_nonzero_endpoint(self, tmp_path):
        """测试端点θ非零的文件被拒绝"""
        path = tmp_path / "endpoint.txt"
        path.write_text("# momentum-profile n=1 m=3\n0.0 0.0\n0.5 0.25\n1.0 0.01\n", encoding="utf-8")
        with pytest.raises(FixtureFormatException, match="端点"):
            data_importer.read_profile(path)

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("# momentum-profile n=1 m=5\n0.0 0.0\n0.5 0.25\n1.0 0.0\n", encoding="utf-8")
        with pytest.raises(FixtureFormatException):
            data_importer.read_profile(path)

    def test_inadmissible_profile(self, tmp_path):
        """测试不满足容许条件的剖面以格式错误报告"""
        tau = np.linspace(0.0, 1.0, 17)
        lines = ["# momentum-profile n=1 m=17"]
        lines += [f"{t!r} {0.3 * t * (1.0 - t)!r}" for t in tau]
        path = tmp_path / "slope.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(FixtureFormatException):
            data_importer.read_profile(path)


@pytest.mark.unit
class TestTensorFiles:
    """张量文件测试"""

    def test_one_based_indices(self, tmp_path):
        path = tmp_path / "t.tensor"
        path.write_text("# curvature n=2\n1 1 2 2 0.5 0.0\n2 1 1 2 0.0 -0.25\n", encoding="utf-8")
        tensor = data_importer.read_tensor(path)
        assert tensor.components[0, 0, 1, 1] == 0.5
        assert tensor.components[1, 0, 0, 1] == -0.25j
        assert tensor.label == "t"

    def test_index_out_of_range(self, tmp_path):
        path = tmp_path / "range.tensor"
        path.write_text("# curvature n=2\n1 1 3 1 1.0 0.0\n", encoding="utf-8")
        with pytest.raises(FixtureFormatException):
            data_importer.read_tensor(path)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "cols.tensor"
        path.write_text("# curvature n=1\n1 1 1 1 1.0\n", encoding="utf-8")
        with pytest.raises(FixtureFormatException):
            data_importer.read_tensor(path)


@pytest.mark.unit
class TestScenarioFiles:
    """场景文件测试"""

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "s.scenario"
        path.write_text("# 注释\n\nname = s  # 行尾注释\nfixture = fs-p1\n", encoding="utf-8")
        assert data_importer.read_scenario(path) == {"name": "s", "fixture": "fs-p1"}

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "dup.scenario"
        path.write_text("dt = 1e-3\ndt = 2e-3\n", encoding="utf-8")
        with pytest.raises(FixtureFormatException):
            data_importer.read_scenario(path)

    def test_missing_separator(self, tmp_path):
        path = tmp_path / "sep.scenario"
        path.write_text("fixture fs-p1\n", encoding="utf-8")
        with pytest.raises(FixtureFormatException):
            data_importer.read_scenario(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FixtureFormatException):
            data_importer.read_scenario(tmp_path / "none.scenario")


@pytest.mark.unit
class TestExport:
    """CSV与JSON导出测试"""

    def test_format_value(self):
        assert format_value(None) == ""
        assert format_value(True) == "1"
        assert format_value(np.int64(3)) == "3"
        assert format_value(0.1) == "0.1"

    def test_series_columns_fixed(self, tmp_path):
        """测试列序固定且缺失值为空字段"""
        path = data_exporter.write_series([{"t": 0.0, "Y": 1.5}, {"t": 0.1, "lambda": 2.0}], tmp_path / "s.csv")
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == ",".join(SERIES_COLUMNS)
        rows = read_series(path, SERIES_COLUMNS)
        assert rows[0]["Y"] == 1.5 and rows[0]["lambda"] is None
        assert rows[1]["lambda"] == 2.0

    def test_audit_column_mismatch(self, tmp_path):
        path = data_exporter.write_audit([{"t": 0.0}], tmp_path / "a.csv")
        assert read_series(path, AUDIT_COLUMNS)[0]["t"] == 0.0
        with pytest.raises(ValueError):
            read_series(path, SERIES_COLUMNS)

    def test_content_hash(self, tmp_path):
        first = data_exporter.write_json({"b": 1, "a": 2}, tmp_path / "a.json")
        second = data_exporter.write_json({"a": 2, "b": 1}, tmp_path / "b.json")
        assert content_hash(first).startswith("sha256:")
        assert content_hash(first) == content_hash(second)
