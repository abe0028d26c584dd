"""
数据导入系统

读取动量剖面表、曲率张量夹具和扁平 key = value 场景文件。
"""

import re
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from loguru import logger

from app.core.exceptions import FixtureFormatException, ProfileValidationException


class ImportFormat:
    PROFILE = "momentum-profile"
    TENSOR = "curvature"
    SCENARIO = "scenario"


PROFILE_HEADER = re.compile(r"^#\s*momentum-profile\s+n=(\d+)\s+m=(\d+)\s*$")
TENSOR_HEADER = re.compile(r"^#\s*curvature\s+n=(\d+)\s*$")


class DataImporter:
    """数据导入器"""

    def read_profile(self, path: Path):
        """读取动量剖面，端点θ非零的文件直接拒绝"""
        from app.services.geometry import MomentumProfile, calibrated_boundary_slopes

        lines = self._read_lines(path)
        match = PROFILE_HEADER.match(lines[0])
        if not match:
            raise FixtureFormatException(f"剖面文件缺少头部 '# momentum-profile n=<n> m=<m>': {path}")
        n, m = int(match.group(1)), int(match.group(2))

        rows = self._parse_rows(lines[1:], columns=2, path=path)
        if len(rows) != m:
            raise FixtureFormatException(f"剖面行数 {len(rows)} 与头部声明 m={m} 不一致: {path}")
        data = np.array(rows, dtype=float)
        tau, theta = data[:, 0], data[:, 1]
        if theta[0] != 0.0 or theta[-1] != 0.0:
            raise FixtureFormatException(
                f"剖面端点θ必须为零: theta(0)={theta[0]!r}, theta(1)={theta[-1]!r}"
            )

        try:
            profile = MomentumProfile(
                n, tau, theta, calibrated_boundary_slopes(n), label=Path(path).stem
            )
        except ProfileValidationException as exc:
            raise FixtureFormatException(f"剖面文件不满足容许条件: {exc.message}") from exc

        logger.debug(f"读取剖面: {path}, n={n}, m={m}")
        return profile

    def read_tensor(self, path: Path):
        """读取曲率张量夹具，每行 `j i l k re im`，指标从 1 开始"""
        from app.services.geometry import CurvatureTensor

        lines = self._read_lines(path)
        match = TENSOR_HEADER.match(lines[0])
        if not match:
            raise FixtureFormatException(f"张量文件缺少头部 '# curvature n=<n>': {path}")
        n = int(match.group(1))
        if n < 1:
            raise FixtureFormatException(f"张量维数无效: n={n}")

        components = np.zeros((n, n, n, n), dtype=complex)
        for row in self._parse_rows(lines[1:], columns=6, path=path):
            indices = [int(value) for value in row[:4]]
            if any(value != int(value) for value in row[:4]):
                raise FixtureFormatException(f"张量指标必须为整数: {row[:4]}")
            if any(index < 1 or index > n for index in indices):
                raise FixtureFormatException(f"张量指标越界: {indices}, n={n}")
            j, i, l, k = (index - 1 for index in indices)
            components[j, i, l, k] = complex(row[4], row[5])

        logger.debug(f"读取曲率张量: {path}, n={n}")
        return CurvatureTensor(
            n, components, np.eye(n, dtype=complex), label=Path(path).stem
        )

    def read_scenario(self, path: Path) -> Dict[str, str]:
        """读取扁平场景文件，# 开头为注释，空行忽略"""
        values: Dict[str, str] = {}
        for number, raw in enumerate(self._read_lines(path, allow_comments=True), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FixtureFormatException(f"场景文件第 {number} 行缺少 '=': {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise FixtureFormatException(f"场景文件第 {number} 行键为空")
            if key in values:
                raise FixtureFormatException(f"场景键重复: {key}")
            values[key] = value
        logger.debug(f"读取场景: {path}, 键={sorted(values)}")
        return values

    # -- 内部工具 ----------------------------------------------------------

    @staticmethod
    def _read_lines(path: Path, allow_comments: bool = False) -> List[str]:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise FixtureFormatException(f"无法读取文件 {path}: {exc}") from exc
        lines = text.splitlines() if allow_comments else [
            line.strip() for line in text.splitlines() if line.strip()
        ]
        if not lines:
            raise FixtureFormatException(f"文件为空: {path}")
        return lines

    @staticmethod
    def _parse_rows(lines: List[str], columns: int, path: Path) -> List[Tuple[float, ...]]:
        rows = []
        for line in lines:
            if line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != columns:
                raise FixtureFormatException(f"期望 {columns} 列，实际 {len(parts)} 列: {line!r} ({path})")
            try:
                rows.append(tuple(float(part) for part in parts))
            except ValueError as exc:
                raise FixtureFormatException(f"无法解析数值: {line!r} ({path})") from exc
        return rows


# 全局数据导入器实例
data_importer = DataImporter()
