"""
报告相关的Pydantic模式
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class PositivityReport(BaseModel):
    """曲率正性证书"""
    griffiths_min: float = Field(..., description="单位向量对上双截面曲率的最优极小值")
    nakano_min_sym: float = Field(..., description="Nakano形式在对称ζ上的最小特征值")
    nakano_min_full: Optional[float] = Field(None, description="Nakano形式的最小特征值")
    certified: Dict[str, bool] = Field(default_factory=dict, description="各锥的证书标志")
    samples_used: int = Field(0, ge=0, description="优化器随机重启次数")
    seed: int = Field(..., description="随机种子")
    restarts: int = Field(..., ge=0, description="随机重启次数")
    c_shift: Optional[float] = Field(None, description="平移常数")
    hypothesis_margin: Optional[float] = Field(None, description="平移假设的余量")


class SpectralReport(BaseModel):
    """λ 与 λ̃ 的计算结果"""
    model_config = ConfigDict(populate_by_name=True)

    lambda_: float = Field(..., alias="lambda", description="L 的最小正特征值")
    lambda_tilde: float = Field(..., description="L̃ 的最小正特征值")
    kernel_dim: int = Field(..., ge=0, description="识别出的核模数")
    representable_dim: int = Field(..., ge=0, description="核模在 U(n) 轨道下张成的维数")
    eta_dim: int = Field(..., ge=0, description="全纯向量场空间的维数")
    sectors: int = Field(..., ge=0, description="Fourier扇区截断 K")
    grid_points: int = Field(..., ge=0, description="τ网格点数")
    refinement_error: float = Field(..., ge=0, description="Richardson误差估计")
    lambda_coarse_sectors: Optional[float] = Field(None, description="截断 K−2 时的 λ")
    minimizing_sector: int = Field(..., description="λ 所在的扇区")

    def to_json_dict(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True)


class EigenvalueBoundReport(BaseModel):
    """特征值下界检验"""
    c_for_lambda: float
    c_for_lambda_tilde: float
    lambda_: float = Field(..., alias="lambda")
    lambda_tilde: float
    tolerance: float
    lambda_margin: float
    lambda_tilde_margin: float
    lambda_checked: bool = Field(..., description="阈值为正时才断言")
    lambda_tilde_checked: bool
    passed: bool

    model_config = ConfigDict(populate_by_name=True)


class FutakiReport(BaseModel):
    """Futaki不变量报告"""
    basis_labels: List[str]
    values: List[float]
    metric_id: str


class RunManifest(BaseModel):
    """流演化运行清单"""
    scenario: str
    n: int
    grid_points: int
    seed: int
    config: Dict[str, Any]
    initial_profile_hash: str
    series_file: str
    audit_file: str
    status: str
    exit_code: int
    halt_reason: Optional[str] = None
    samples: int = 0
    final_time: float = 0.0
    created_at: str


class CriterionResult(BaseModel):
    """单条验收标准的结果"""
    index: int
    name: str
    passed: bool
    details: Dict[str, Any] = Field(default_factory=dict)
    runtime: float = 0.0


class VerifyReport(BaseModel):
    """验收套件报告"""
    seed: int
    filter: Optional[str] = None
    criteria: List[CriterionResult]

    @property
    def passed(self) -> bool:
        return all(criterion.passed for criterion in self.criteria)
