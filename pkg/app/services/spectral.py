"""
向量场上 ∂̄-Laplace 型算子 L、L̃ 的谱计算

U(n) 等变约化：V = h(τ)·χ_k·E，E 为 Euler 场，χ_k = (z₁/|z|)^k。
规范 h = τ^a(1−τ)^b e^{k·Rreg/2}·q 下，能量密度为 P|θq′ + c_k q|²，
质量密度为 (n+1)θ|q|²P，P = τ^{2a+n−1}(1−τ)^{2b}e^{k·Rreg}·e^{−u}。
核扇区中 c_k ≡ 0，常数 q 恰为离散核。
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from app.config import settings
from app.core.concurrency import ParallelRunner
from app.core.exceptions import SpectralException
from app.core.logging import spectral_logger
from app.schemas.reports import EigenvalueBoundReport, SpectralReport
from app.services.geometry import (
    MomentumProfile,
    RicciPotential,
    frame_curvature,
    ricci_potential,
)
from app.services.positivity import lemma_thresholds_batch

KERNEL_SECTORS = {1: (-1, 0, 1), 2: (0, 1)}
# U(n) 轨道下每个核扇区张成的全纯场个数
ORBIT_MULTIPLICITY = {1: {-1: 1, 0: 1, 1: 1}, 2: {0: 1, 1: 2}}
HOLOMORPHY_TOLERANCE = 1e-8
GRAM_CONDITION_LIMIT = 1e8
LOW_EIGENVALUES = 6


class InnerProduct(str, Enum):
    """⟨,⟩_0 取权 ωⁿ，⟨,⟩_u 取权 e^{−u}ωⁿ"""
    FLAT = "flat"
    WEIGHTED = "weighted"


def sector_range(n: int, sectors: int) -> List[int]:
    if n == 1:
        return list(range(-sectors, sectors + 1))
    return list(range(0, sectors + 1))


def sector_exponents(k: int) -> Tuple[float, float]:
    """端点正则性指数 a = (|k+1|−1)/2, b = (|k−1|−1)/2"""
    return (abs(k + 1) - 1) / 2.0, (abs(k - 1) - 1) / 2.0


def eta_dimension(n: int) -> int:
    """Pⁿ 上全纯向量场空间的维数"""
    return n * n + 2 * n


# ---------------------------------------------------------------------------
# 扇区算子
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SectorOperator:
    """单个 Fourier 扇区上的离散算子 M⁻¹K

    Attributes:
        k: 扇区指标
        stiffness: 能量矩阵 K = DᵀΔD（实对称半正定）
        mass: 集中质量对角元
        nodes: 保留的网格节点下标；非核扇区中正则性迫使为零的端点已消去
    """
    k: int
    a: float
    b: float
    stiffness: np.ndarray
    mass: np.ndarray
    inner_product: InnerProduct
    nodes: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.mass.size)

    def restrict(self, samples: np.ndarray) -> np.ndarray:
        """整网格采样限制到保留节点上"""
        if self.nodes is None or samples.size == self.size:
            return samples
        return samples[self.nodes]

    def apply(self, q: np.ndarray) -> np.ndarray:
        return (self.stiffness @ q) / self.mass

    def pairing(self, x: np.ndarray, y: np.ndarray) -> complex:
        return complex(np.vdot(y, self.mass * x))

    def energy(self, q: np.ndarray) -> float:
        return float(np.real(np.vdot(q, self.stiffness @ q)))

    def norm_sq(self, q: np.ndarray) -> float:
        return float(np.real(np.vdot(q, self.mass * q)))

    def rayleigh(self, q: np.ndarray) -> float:
        return self.energy(q) / self.norm_sq(q)

    def adjointness_residual(self, x: np.ndarray, y: np.ndarray) -> float:
        """|⟨Lx, y⟩ − ⟨x, Ly⟩|"""
        return abs(self.pairing(self.apply(x), y) - self.pairing(x, self.apply(y)))

    def low_eigenvalues(self, count: int = LOW_EIGENVALUES) -> np.ndarray:
        top = min(self.size, count) - 1
        return scipy.linalg.eigh(
            self.stiffness, np.diag(self.mass), eigvals_only=True, subset_by_index=[0, top]
        )


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """按扇区组织的算子族"""
    n: int
    inner_product: InnerProduct
    grid_points: int
    sectors: Dict[int, SectorOperator]
    label: str = "operator"

    @property
    def truncation(self) -> int:
        return max(abs(k) for k in self.sectors)


def _sector_coefficients(
    profile: MomentumProfile, potential: Optional[RicciPotential], k: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """中点处的 α = √P·θ, β = √P·c_k 与质量密度 w = (n+1)θP"""
    tau = profile.tau_grid
    mid = 0.5 * (tau[:-1] + tau[1:])
    theta = profile.theta_at(mid)
    a, b = sector_exponents(k)
    log_p = (2.0 * a + profile.n - 1) * np.log(mid) + 2.0 * b * np.log1p(-mid)
    log_p = log_p + k * profile.regular_part(mid)
    if potential is not None:
        # 线性插值保证中点值落在节点值的范围内
        log_p = log_p - np.interp(mid, potential.tau_grid, potential.u)
    root = np.exp(0.5 * log_p)
    c_k = theta * ((a - k / 2.0) / mid - (b + k / 2.0) / (1.0 - mid))
    return root * theta, root * c_k, profile.A * theta * root**2


def _assemble(
    profile: MomentumProfile,
    potential: Optional[RicciPotential],
    k: int,
    inner_product: InnerProduct,
) -> SectorOperator:
    alpha, beta, weight = _sector_coefficients(profile, potential, k)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(weight))):
        raise SpectralException(f"扇区 k={k} 的权函数非有限，度量可能退化")
    m = profile.grid_points
    delta = profile.h
    rows = np.arange(m - 1)
    D = np.zeros((m - 1, m))
    D[rows, rows] = -alpha / delta + 0.5 * beta
    D[rows, rows + 1] = alpha / delta + 0.5 * beta
    mass = np.zeros(m)
    mass[:-1] += 0.5 * delta * weight
    mass[1:] += 0.5 * delta * weight
    a, b = sector_exponents(k)
    nodes = _regular_nodes(profile.n, k, a, b, m)
    D = D[:, nodes]
    mass = mass[nodes]
    stiffness = delta * (D.T @ D)
    if np.any(mass <= 0.0):
        raise SpectralException(f"扇区 k={k} 的质量矩阵非正定")
    return SectorOperator(k, a, b, stiffness, mass, inner_product, nodes=nodes)


def _regular_nodes(n: int, k: int, a: float, b: float, m: int) -> np.ndarray:
    """非核扇区中 a ≥ 0 (b ≥ 0) 时 q 在 τ = 0 (τ = 1) 处为零，消去该端点

    D 为 (m−1)×m，不消去时每个扇区都带一个伪零模。
    """
    nodes = np.arange(m)
    if k in KERNEL_SECTORS[n]:
        return nodes
    start = 1 if a >= 0.0 else 0
    stop = m - 1 if b >= 0.0 else m
    return nodes[start:stop]


def sector_operator(
    profile: MomentumProfile, k: int, potential: Optional[RicciPotential] = None
) -> SectorOperator:
    """单个扇区的算子，potential 为空时取 ⟨,⟩_0"""
    which = InnerProduct.FLAT if potential is None else InnerProduct.WEIGHTED
    return _assemble(profile, potential, k, which)


def _build(
    profile: MomentumProfile,
    potential: Optional[RicciPotential],
    sectors: Optional[int],
    inner_product: InnerProduct,
    runner: Optional[ParallelRunner],
) -> OperatorFamily:
    K = settings.sectors if sectors is None else sectors
    indices = sector_range(profile.n, K)
    runner = runner or ParallelRunner()
    operators = runner.map_ordered(
        lambda k: _assemble(profile, potential, k, inner_product), indices
    )
    return OperatorFamily(
        n=profile.n,
        inner_product=inner_product,
        grid_points=profile.grid_points,
        sectors=dict(zip(indices, operators)),
        label=profile.label,
    )


def build_L(
    profile: MomentumProfile,
    sectors: Optional[int] = None,
    runner: Optional[ParallelRunner] = None,
) -> OperatorFamily:
    """L = −g^{ij̄}∇_i∇_j̄，在 ⟨,⟩_0 下自伴"""
    return _build(profile, None, sectors, InnerProduct.FLAT, runner)


def build_L_tilde(
    profile: MomentumProfile,
    potential: RicciPotential,
    sectors: Optional[int] = None,
    runner: Optional[ParallelRunner] = None,
) -> OperatorFamily:
    """L̃ = L + g^{ij̄}∇_i u ∇_j̄，在 ⟨,⟩_u 下自伴"""
    if potential.tau_grid.shape != profile.tau_grid.shape or not np.allclose(
        potential.tau_grid, profile.tau_grid, rtol=0.0, atol=1e-14
    ):
        raise SpectralException(
            f"Ricci势与剖面网格不一致: {potential.tau_grid.size} vs {profile.grid_points}"
        )
    return _build(profile, potential, sectors, InnerProduct.WEIGHTED, runner)


def periodic_model_operator(
    alpha: float, beta: float, weight: float, m: int, length: float = 1.0
) -> SectorOperator:
    """周期区间上的常系数模型算子，与扇区算子同一离散格式"""
    delta = length / m
    rows = np.arange(m)
    D = np.zeros((m, m))
    D[rows, rows] = -alpha / delta + 0.5 * beta
    D[rows, (rows + 1) % m] += alpha / delta + 0.5 * beta
    return SectorOperator(
        k=0, a=0.0, b=0.0,
        stiffness=delta * (D.T @ D),
        mass=np.full(m, weight * delta),
        inner_product=InnerProduct.FLAT,
    )


def periodic_model_symbol(
    alpha: float, beta: float, weight: float, m: int, length: float = 1.0
) -> np.ndarray:
    """离散符号 |α(e^{iξΔ}−1)/Δ + β(1+e^{iξΔ})/2|²/w，升序"""
    delta = length / m
    xi = 2.0 * np.pi * np.arange(m) / length
    phase = np.exp(1j * xi * delta)
    symbol = alpha * (phase - 1.0) / delta + beta * (1.0 + phase) / 2.0
    return np.sort(np.abs(symbol) ** 2 / weight)


# ---------------------------------------------------------------------------
# 全纯场基底
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VectorFieldMode:
    """约化向量场模式 q（规范化后的径向采样）"""
    k: int
    radial_samples: np.ndarray
    n: int
    label: str = ""


@dataclass(frozen=True, eq=False)
class HolomorphicBasis:
    """全纯向量场空间 η 的约化基底

    不同扇区的模式在两个内积下都正交，Gram 矩阵分块对角。
    """
    n: int
    modes: Tuple[VectorFieldMode, ...]
    gram_0: np.ndarray
    gram_u: np.ndarray
    dbar_energy: np.ndarray

    @property
    def labels(self) -> List[str]:
        return [mode.label for mode in self.modes]

    @property
    def representable_dim(self) -> int:
        return sum(ORBIT_MULTIPLICITY[self.n].get(mode.k, 1) for mode in self.modes)

    def in_sector(self, k: int) -> List[VectorFieldMode]:
        return [mode for mode in self.modes if mode.k == k]

    def without(self, index: int) -> "HolomorphicBasis":
        """去掉一个基元，用于约束松弛检验"""
        keep = [i for i in range(len(self.modes)) if i != index]
        return HolomorphicBasis(
            n=self.n,
            modes=tuple(self.modes[i] for i in keep),
            gram_0=self.gram_0[np.ix_(keep, keep)],
            gram_u=self.gram_u[np.ix_(keep, keep)],
            dbar_energy=self.dbar_energy[keep],
        )


def _gram(modes: Sequence[VectorFieldMode], family: OperatorFamily) -> np.ndarray:
    size = len(modes)
    gram = np.zeros((size, size))
    for i, left in enumerate(modes):
        for j, right in enumerate(modes):
            if left.k == right.k:
                operator = family.sectors[left.k]
                gram[i, j] = float(np.real(operator.pairing(left.radial_samples, right.radial_samples)))
    return gram


def holomorphic_fields(
    n: int,
    profile: MomentumProfile,
    potential: Optional[RicciPotential] = None,
) -> HolomorphicBasis:
    """核扇区上的全纯场，按 ⟨,⟩_0 归一化使 Gram_0 = I"""
    if n not in KERNEL_SECTORS:
        raise SpectralException(f"不支持的复维数 n={n}")
    if profile.n != n:
        raise SpectralException(f"维数与剖面不一致: n={n}, profile.n={profile.n}")
    kernel = KERNEL_SECTORS[n]
    flat = build_L(profile, sectors=1, runner=ParallelRunner(max_workers=1))
    if potential is None:
        potential = ricci_potential(profile)
    weighted = build_L_tilde(profile, potential, sectors=1, runner=ParallelRunner(max_workers=1))

    modes: List[VectorFieldMode] = []
    energies: List[float] = []
    for k in kernel:
        operator = flat.sectors[k]
        q = np.ones(operator.size)
        norm_sq = operator.norm_sq(q)
        q = q / np.sqrt(norm_sq)
        energy = operator.energy(q)
        if energy > HOLOMORPHY_TOLERANCE:
            raise SpectralException(f"扇区 k={k} 的核模式不是数值全纯的: energy={energy:.3e}")
        modes.append(VectorFieldMode(k=k, radial_samples=q, n=n, label=f"V[k={k}]"))
        energies.append(energy)

    gram_0 = _gram(modes, flat)
    gram_u = _gram(modes, weighted)
    for name, gram in (("Gram_0", gram_0), ("Gram_u", gram_u)):
        condition = float(np.linalg.cond(gram))
        if not np.isfinite(condition) or condition > GRAM_CONDITION_LIMIT:
            raise SpectralException(f"全纯场基底退化: {name} 条件数={condition:.3e}")

    spectral_logger.debug(f"全纯场基底: n={n}, 模式数={len(modes)}, 剖面={profile.label}")
    return HolomorphicBasis(
        n=n,
        modes=tuple(modes),
        gram_0=gram_0,
        gram_u=gram_u,
        dbar_energy=np.array(energies),
    )


# ---------------------------------------------------------------------------
# 最小正特征值
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenSolution:
    """最小正特征值及其特征向量"""
    value: float
    sector: int
    vector: np.ndarray
    rayleigh: float
    orthogonality: float
    sector_values: Dict[int, float] = field(default_factory=dict)


def _deflated_minimum(
    operator: SectorOperator, modes: Sequence[VectorFieldMode]
) -> Tuple[float, np.ndarray]:
    if not modes:
        values, vectors = scipy.linalg.eigh(
            operator.stiffness, np.diag(operator.mass), subset_by_index=[0, 0]
        )
        return float(values[0]), vectors[:, 0]
    B = np.stack([mode.radial_samples for mode in modes], axis=1)
    Z = scipy.linalg.null_space((B * operator.mass[:, None]).T)
    reduced_k = Z.T @ operator.stiffness @ Z
    reduced_m = Z.T @ (operator.mass[:, None] * Z)
    values, vectors = scipy.linalg.eigh(reduced_k, reduced_m, subset_by_index=[0, 0])
    return float(values[0]), Z @ vectors[:, 0]


def smallest_positive_eigenvalue(
    operators: OperatorFamily,
    basis: HolomorphicBasis,
    which: InnerProduct,
    runner: Optional[ParallelRunner] = None,
) -> EigenSolution:
    """在 η 的正交补上求最小特征值，扇区间取最小"""
    if operators.inner_product != which:
        raise SpectralException(
            f"内积选择与算子不匹配: 算子={operators.inner_product.value}, 请求={which.value}"
        )
    for mode in basis.modes:
        if mode.radial_samples.size != operators.grid_points:
            raise SpectralException("基底与算子网格不一致")

    runner = runner or ParallelRunner()
    indices = list(operators.sectors)
    try:
        results = runner.map_ordered(
            lambda k: _deflated_minimum(operators.sectors[k], basis.in_sector(k)), indices
        )
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralException(f"特征值求解失败: {exc}") from exc

    sector_values = {k: value for k, (value, _) in zip(indices, results)}
    best = min(range(len(indices)), key=lambda i: results[i][0])
    k = indices[best]
    value, vector = results[best]
    operator = operators.sectors[k]
    vector = vector / np.sqrt(operator.norm_sq(vector))

    orthogonality = 0.0
    for mode in basis.in_sector(k):
        overlap = abs(operator.pairing(vector, mode.radial_samples))
        orthogonality = max(orthogonality, overlap / np.sqrt(operator.norm_sq(mode.radial_samples)))

    return EigenSolution(
        value=value,
        sector=k,
        vector=vector,
        rayleigh=operator.rayleigh(vector),
        orthogonality=orthogonality,
        sector_values=sector_values,
    )


def classify_kernel(operators: OperatorFamily) -> Tuple[int, float]:
    """按谱隙规则识别核：低于 kernel_gap_ratio × 第一正谱隙 的特征值"""
    low = np.concatenate([op.low_eigenvalues() for op in operators.sectors.values()])
    scale = float(np.abs(low).max()) if low.size else 0.0
    positive = low[low > 1e-9 * scale]
    if positive.size == 0:
        raise SpectralException("未找到正特征值，无法识别核")
    first_gap = float(positive.min())
    kernel_dim = int(np.sum(low < settings.kernel_gap_ratio * first_gap))
    return kernel_dim, first_gap


def _lambda_pair(
    profile: MomentumProfile,
    potential: RicciPotential,
    sectors: int,
    runner: ParallelRunner,
) -> Tuple[EigenSolution, EigenSolution, OperatorFamily, HolomorphicBasis]:
    flat = build_L(profile, sectors, runner)
    weighted = build_L_tilde(profile, potential, sectors, runner)
    basis = holomorphic_fields(profile.n, profile, potential)
    lam = smallest_positive_eigenvalue(flat, basis, InnerProduct.FLAT, runner)
    lam_tilde = smallest_positive_eigenvalue(weighted, basis, InnerProduct.WEIGHTED, runner)
    return lam, lam_tilde, flat, basis


def spectral_report(
    profile: MomentumProfile,
    potential: Optional[RicciPotential] = None,
    sectors: Optional[int] = None,
    refine: bool = True,
    runner: Optional[ParallelRunner] = None,
) -> SpectralReport:
    """λ、λ̃、核维数与网格加密误差估计"""
    K = settings.sectors if sectors is None else sectors
    runner = runner or ParallelRunner()
    if potential is None:
        potential = ricci_potential(profile)

    lam, lam_tilde, flat, basis = _lambda_pair(profile, potential, K, runner)
    kernel_dim, _ = classify_kernel(flat)

    refinement_error = 0.0
    coarse_points = (profile.grid_points - 1) // 2 + 1
    if refine and coarse_points >= 9:
        coarse = profile.resample(coarse_points)
        coarse_lam, coarse_tilde, _, _ = _lambda_pair(coarse, ricci_potential(coarse), K, runner)
        refinement_error = max(
            abs(lam.value - coarse_lam.value), abs(lam_tilde.value - coarse_tilde.value)
        ) / 3.0

    coarse_sectors = None
    if K > 2:
        coarse_sectors = min(v for k, v in lam.sector_values.items() if abs(k) <= K - 2)

    spectral_logger.debug(
        f"谱计算: {profile.label}, m={profile.grid_points}, K={K}, λ={lam.value:.10g}, "
        f"λ̃={lam_tilde.value:.10g}, 核维数={kernel_dim}, 误差={refinement_error:.3e}"
    )
    return SpectralReport(
        lambda_=lam.value,
        lambda_tilde=lam_tilde.value,
        kernel_dim=kernel_dim,
        representable_dim=basis.representable_dim,
        eta_dim=eta_dimension(profile.n),
        sectors=K,
        grid_points=profile.grid_points,
        refinement_error=refinement_error,
        lambda_coarse_sectors=coarse_sectors,
        minimizing_sector=lam.sector,
    )


# ---------------------------------------------------------------------------
# 比较与下界
# ---------------------------------------------------------------------------


def lemma_one_constants(osc_u: float) -> Tuple[float, float]:
    """A₁ = c₁c₄ = e^{−osc u}, A₂ = 1/A₁

    c₁ = e^{min u}, c₂ = e^{max u}, c₃ = e^{min u}, c₄ = c₃/c₂；
    只有比值进入常数，故只依赖振幅。
    """
    if osc_u < 0.0:
        raise SpectralException(f"振幅必须非负: osc={osc_u}")
    A1 = float(np.exp(-osc_u))
    return A1, 1.0 / A1


def lambda_equivalence_check(report: SpectralReport, osc_u: float, rtol: float = 1e-10) -> bool:
    """A₁λ̃ ≤ λ ≤ A₂λ̃"""
    A1, A2 = lemma_one_constants(osc_u)
    lam, lam_tilde = report.lambda_, report.lambda_tilde
    lower = A1 * lam_tilde <= lam * (1.0 + rtol)
    upper = lam <= A2 * lam_tilde * (1.0 + rtol)
    if not (lower and upper):
        spectral_logger.warning(
            f"λ 等价性检验失败: λ={lam:.10g}, λ̃={lam_tilde:.10g}, A1={A1:.6g}, A2={A2:.6g}"
        )
    return bool(lower and upper)


def curvature_thresholds(
    profile: MomentumProfile, tau: Optional[np.ndarray] = None
) -> Tuple[float, float]:
    """剖面上逐点 Nakano 阈值的最小值 (c_for_λ, c_for_λ̃)"""
    curvature = frame_curvature(profile, tau)
    c_lambda, c_lambda_tilde = lemma_thresholds_batch(curvature.tensors())
    return float(c_lambda.min()), float(c_lambda_tilde.min())


def verify_eigenvalue_lower_bounds(
    profile: MomentumProfile,
    report: Optional[SpectralReport] = None,
    potential: Optional[RicciPotential] = None,
    sectors: Optional[int] = None,
) -> EigenvalueBoundReport:
    """λ ≥ c_for_λ − tol 与 λ̃ ≥ c_for_λ̃ − tol，阈值非正时只报告余量"""
    if report is None:
        report = spectral_report(profile, potential, sectors)
    c_lambda, c_lambda_tilde = curvature_thresholds(profile)
    return bound_report(report, c_lambda, c_lambda_tilde)


def bound_report(
    report: SpectralReport, c_lambda: float, c_lambda_tilde: float
) -> EigenvalueBoundReport:
    tolerance = 1e-3 + report.refinement_error
    lambda_margin = report.lambda_ - c_lambda
    tilde_margin = report.lambda_tilde - c_lambda_tilde
    lambda_checked = c_lambda > 0.0
    tilde_checked = c_lambda_tilde > 0.0
    passed = (not lambda_checked or lambda_margin >= -tolerance) and (
        not tilde_checked or tilde_margin >= -tolerance
    )
    if not passed:
        spectral_logger.warning(
            f"特征值下界不成立: λ余量={lambda_margin:.3e}, λ̃余量={tilde_margin:.3e}, tol={tolerance:.3e}"
        )
    return EigenvalueBoundReport(
        c_for_lambda=c_lambda,
        c_for_lambda_tilde=c_lambda_tilde,
        lambda_=report.lambda_,
        lambda_tilde=report.lambda_tilde,
        tolerance=tolerance,
        lambda_margin=lambda_margin,
        lambda_tilde_margin=tilde_margin,
        lambda_checked=lambda_checked,
        lambda_tilde_checked=tilde_checked,
        passed=passed,
    )
