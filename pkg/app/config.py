"""
应用配置管理
"""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """应用配置

    所有字段均可通过 ``KFL_`` 前缀的环境变量或 ``.env`` 文件覆盖，
    例如 ``KFL_THREADS=8``。
    """

    # 基本配置
    app_name: str = "Kahler Flow Lab"
    app_version: str = "1.0.0"
    debug: bool = Field(default=False, description="调试模式")

    # 并发配置
    threads: int = Field(default=4, ge=1, description="工作线程池宽度")

    # 日志配置
    log_level: str = Field(default="INFO", description="控制台日志级别")
    log_dir: str = Field(default="logs", description="日志目录")
    log_to_file: bool = Field(default=True, description="是否写入文件日志")

    # 输出配置
    output_dir: str = Field(default="runs", description="运行结果输出目录")

    # 网格配置
    grid_points_p1: int = Field(default=512, ge=9, description="P1 默认τ网格点数")
    grid_points_p2: int = Field(default=256, ge=9, description="P2 默认τ网格点数")
    spline_refine: int = Field(default=8, ge=1, description="图坐标积分的网格细化倍数")
    fd_step: float = Field(default=1e-3, gt=0, description="有限差分曲率预言机步长")

    # 谱计算配置
    sectors: int = Field(default=8, ge=1, description="Fourier扇区截断 K")
    kernel_gap_ratio: float = Field(default=1e-6, gt=0, description="核识别阈值(相对第一谱隙)")

    # 正性检验配置
    griffiths_restarts: int = Field(default=32, ge=1, description="Griffiths极小化随机重启次数")
    griffiths_max_iter: int = Field(default=200, ge=1, description="交替迭代最大次数")
    default_seed: int = Field(default=7, description="默认随机种子")

    # 容差阶梯
    tol_algebraic: float = Field(default=1e-12, description="代数恒等式容差")
    tol_certificate: float = Field(default=1e-10, description="特征值证书容差")
    tol_optimizer: float = Field(default=1e-6, description="优化器相关量容差")

    # 流演化配置
    cfl_safety: float = Field(default=0.5, gt=0, le=1.0, description="CFL安全系数")

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        env_prefix = "KFL_"

    def grid_points(self, n: int) -> int:
        """按复维数返回默认网格点数"""
        return self.grid_points_p1 if n == 1 else self.grid_points_p2

    def ensure_directories(self) -> None:
        """确保必要的目录存在"""
        Path(self.output_dir).mkdir(parents=True, exist_ok=True)
        if self.log_to_file:
            Path(self.log_dir).mkdir(parents=True, exist_ok=True)


# 创建全局配置实例
settings = Settings()
