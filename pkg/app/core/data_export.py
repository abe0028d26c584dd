"""
数据导出系统

剖面表、曲率张量、时间序列CSV、审计CSV以及JSON报告。
输出只依赖输入数据，同一输入产生逐字节相同的文件。
"""

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel

SERIES_COLUMNS = (
    "t",
    "sup_u",
    "sup_grad_u",
    "sup_R",
    "sup_ric_minus_g",
    "int_R_minus_n_sq",
    "Y",
    "Z",
    "lambda",
    "futaki_proj",
    "chen_margin",
    "griffiths_margin",
    "soliton_residual",
)

AUDIT_COLUMNS = (
    "t",
    "lambda_tilde",
    "c_lambda",
    "c_lambda_tilde",
    "A1",
    "A2",
    "nu",
    "chen_target",
    "kenergy",
    "class_correction",
    "class_correction_total",
    "potential_residual",
    "volume_density_min",
    "positivity_flag",
)


def format_value(value: Any) -> str:
    """浮点数取 repr，缺失值为空字段"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def content_hash(path: Union[str, Path]) -> str:
    """文件内容的 sha256 摘要，带 git 风格前缀"""
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"sha256:{digest}"


class DataExporter:
    """数据导出器"""

    def write_profile(self, profile, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"# momentum-profile n={profile.n} m={profile.grid_points}"]
        lines.extend(
            f"{format_value(t)} {format_value(v)}" for t, v in zip(profile.tau_grid, profile.theta)
        )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.debug(f"剖面已写出: {path}")
        return path

    def write_tensor(self, tensor, path: Union[str, Path]) -> Path:
        """写出非零分量，指标从 1 开始"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"# curvature n={tensor.n}"]
        for index in np.ndindex(*tensor.components.shape):
            value = complex(tensor.components[index])
            if value == 0:
                continue
            labels = " ".join(str(i + 1) for i in index)
            lines.append(f"{labels} {format_value(value.real)} {format_value(value.imag)}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.debug(f"曲率张量已写出: {path}")
        return path

    def write_rows(
        self,
        rows: Iterable[Mapping[str, Any]],
        path: Union[str, Path],
        columns: Sequence[str],
    ) -> Path:
        """按固定列序写出CSV，只有一行表头"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            count = 0
            for row in rows:
                writer.writerow([format_value(row.get(column)) for column in columns])
                count += 1
        logger.debug(f"CSV已写出: {path}, 行数={count}")
        return path

    def write_series(self, rows: Iterable[Mapping[str, Any]], path: Union[str, Path]) -> Path:
        return self.write_rows(rows, path, SERIES_COLUMNS)

    def write_audit(self, rows: Iterable[Mapping[str, Any]], path: Union[str, Path]) -> Path:
        return self.write_rows(rows, path, AUDIT_COLUMNS)

    @staticmethod
    def to_json(document: Union[BaseModel, Mapping[str, Any]]) -> str:
        if isinstance(document, BaseModel):
            document = document.model_dump(mode="json", by_alias=True)
        return json.dumps(document, ensure_ascii=False, indent=2, sort_keys=True)

    def write_json(
        self, document: Union[BaseModel, Mapping[str, Any]], path: Union[str, Path]
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(document) + "\n", encoding="utf-8")
        logger.debug(f"JSON已写出: {path}")
        return path


def read_series(path: Union[str, Path], columns: Optional[Sequence[str]] = None):
    """读回时间序列CSV，空字段为 None"""
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        header = tuple(reader.fieldnames or ())
        if columns is not None and header != tuple(columns):
            raise ValueError(f"CSV列序不符: {header}")
        return [
            {key: (float(value) if value != "" else None) for key, value in row.items()}
            for row in reader
        ]


# 全局数据导出器实例
data_exporter = DataExporter()
