"""
沿流监测的泛函：Y、Z、Futaki 不变量、K-能量与孤立子残差

∇u = (u_τ/(n+1))·E 为径向场，|∇u|² = θu_τ²/(n+1)。
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from app.core.exceptions import FunctionalException, InsufficientSamplesException
from app.core.logging import functionals_logger
from app.schemas.reports import FutakiReport
from app.services.geometry import (
    MomentumProfile,
    RicciPotential,
    frame_curvature,
    gradient_norm_sq,
    ricci_potential,
    spline_integral,
)
from app.services.spectral import (
    GRAM_CONDITION_LIMIT,
    HOLOMORPHY_TOLERANCE,
    HolomorphicBasis,
    VectorFieldMode,
    holomorphic_fields,
    sector_operator,
)

SOLITON_THRESHOLD = 1e-8


def compute_Y(profile: MomentumProfile, potential: RicciPotential) -> float:
    """Y = ∫|∇u|² ωⁿ"""
    return spline_integral(profile, lambda t: gradient_norm_sq(profile, potential, t))


@dataclass(frozen=True)
class ZTerms:
    """Z 的两项：∫|∇u|²(R−n) 与 ∫∇u∇̄u(Ric − g)"""
    scalar_term: float
    ricci_term: float

    @property
    def total(self) -> float:
        return self.scalar_term + self.ricci_term


def compute_Z(profile: MomentumProfile, potential: RicciPotential) -> ZTerms:
    n = profile.n

    def scalar_integrand(t: np.ndarray) -> np.ndarray:
        return gradient_norm_sq(profile, potential, t) * (frame_curvature(profile, t).scalar - n)

    def ricci_integrand(t: np.ndarray) -> np.ndarray:
        # ∇u 沿径向，Ric − g 在该方向的本征值为 ric_r − 1
        return gradient_norm_sq(profile, potential, t) * (frame_curvature(profile, t).ric_radial - 1.0)

    return ZTerms(
        scalar_term=spline_integral(profile, scalar_integrand),
        ricci_term=spline_integral(profile, ricci_integrand),
    )


# ---------------------------------------------------------------------------
# Futaki 不变量
# ---------------------------------------------------------------------------


def _check_holomorphic(profile: MomentumProfile, mode: VectorFieldMode) -> None:
    if mode.radial_samples.size != profile.grid_points:
        raise FunctionalException(
            f"向量场模式与剖面网格不一致: {mode.radial_samples.size} vs {profile.grid_points}"
        )
    operator = sector_operator(profile, mode.k)
    samples = operator.restrict(mode.radial_samples)
    ratio = operator.energy(samples) / operator.norm_sq(samples)
    if ratio > HOLOMORPHY_TOLERANCE:
        raise FunctionalException(f"向量场不是全纯的: {mode.label}, ∂̄能量比={ratio:.3e}")


def futaki(profile: MomentumProfile, potential: RicciPotential, mode: VectorFieldMode) -> float:
    """Fut(V) = ∫ V(u) ωⁿ，不除以体积

    k ≠ 0 的扇区角向平均为零。k = 0 时 V = q·E，E(u) = θu_τ。
    """
    _check_holomorphic(profile, mode)
    if mode.k != 0:
        return 0.0
    tau = profile.tau_grid
    samples = np.real(mode.radial_samples)
    return spline_integral(
        profile,
        lambda t: np.interp(t, tau, samples) * profile.theta_at(t) * potential.du_at(t),
    )


def futaki_values(
    profile: MomentumProfile,
    potential: Optional[RicciPotential] = None,
    basis: Optional[HolomorphicBasis] = None,
) -> FutakiReport:
    potential = potential or ricci_potential(profile)
    basis = basis or holomorphic_fields(profile.n, profile, potential)
    values = [futaki(profile, potential, mode) for mode in basis.modes]
    functionals_logger.debug(f"Futaki不变量: {profile.label}, 值={values}")
    return FutakiReport(basis_labels=basis.labels, values=values, metric_id=profile.label)


@dataclass(frozen=True)
class FutakiSweep:
    """同一类中多个度量上的 Futaki 值"""
    labels: List[str]
    metric_ids: List[str]
    values: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    @property
    def spread(self) -> float:
        return float((self.values.max(axis=0) - self.values.min(axis=0)).max())


def futaki_metric_independence(profiles: Sequence[MomentumProfile]) -> FutakiSweep:
    """逐基元比较多个度量上的 Futaki 值"""
    reports = [futaki_values(profile) for profile in profiles]
    labels = reports[0].basis_labels
    if any(report.basis_labels != labels for report in reports):
        raise FunctionalException("各度量的全纯基底标签不一致")
    return FutakiSweep(
        labels=labels,
        metric_ids=[report.metric_id for report in reports],
        values=np.array([report.values for report in reports]),
    )


@dataclass(frozen=True)
class Projection:
    """∇u 在 η 上的 ⟨,⟩_0 正交投影"""
    coefficients: np.ndarray
    labels: List[str]
    value: float
    orthogonality: float


def futaki_projection(
    profile: MomentumProfile,
    potential: RicciPotential,
    basis: Optional[HolomorphicBasis] = None,
) -> Projection:
    """Fut(π(∇u))，系数由 Gram_0 正规方程给出

    ∇u 只落在 k = 0 扇区，投影只涉及该扇区的基元。
    """
    basis = basis or holomorphic_fields(profile.n, profile, potential)
    modes = basis.in_sector(0)
    operator = sector_operator(profile, 0)
    gradient = potential.du / profile.A
    if not modes:
        return Projection(np.zeros(0), [], 0.0, 0.0)

    B = np.stack([np.real(mode.radial_samples) for mode in modes], axis=1)
    gram = B.T @ (operator.mass[:, None] * B)
    condition = float(np.linalg.cond(gram))
    if condition > GRAM_CONDITION_LIMIT:
        raise FunctionalException(f"Gram_0 退化: 条件数={condition:.3e}")
    rhs = B.T @ (operator.mass * gradient)
    coefficients = np.linalg.solve(gram, rhs)
    residual = gradient - B @ coefficients
    orthogonality = float(np.abs(B.T @ (operator.mass * residual)).max())

    value = float(
        sum(c * futaki(profile, potential, mode) for c, mode in zip(coefficients, modes))
    )
    return Projection(coefficients, [mode.label for mode in modes], value, orthogonality)


# ---------------------------------------------------------------------------
# 孤立子
# ---------------------------------------------------------------------------


def soliton_residual(profile: MomentumProfile, potential: RicciPotential) -> float:
    """sup|∇̄∇̄u| = sup|θ·u_ττ|/(n+1)"""
    second = np.gradient(potential.du, potential.tau_grid, edge_order=2)
    return float(np.abs(profile.theta * second).max() / profile.A)


@dataclass(frozen=True)
class SolitonIdentity:
    """∫∇u∇̄u(Ric − g) 与 ∫(n − R)|∇u|² 的比较"""
    ricci_side: float
    scalar_side: float
    residual: float
    asserted: bool

    @property
    def difference(self) -> float:
        return self.ricci_side - self.scalar_side


def soliton_identity_check(profile: MomentumProfile, potential: RicciPotential) -> SolitonIdentity:
    """两侧之差即 Z；只有孤立子残差足够小时才断言其为零"""
    terms = compute_Z(profile, potential)
    residual = soliton_residual(profile, potential)
    return SolitonIdentity(
        ricci_side=terms.ricci_term,
        scalar_side=-terms.scalar_term,
        residual=residual,
        asserted=residual <= SOLITON_THRESHOLD,
    )


# ---------------------------------------------------------------------------
# K-能量
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KEnergySeries:
    """dK/dt = −Y 的梯形积分，K(0) = 0"""
    times: np.ndarray
    values: np.ndarray
    error_bounds: np.ndarray

    def is_nonincreasing(self) -> bool:
        steps = np.diff(self.values)
        return bool(np.all(steps <= self.error_bounds + 1e-15))


def kenergy_along_run(times: Sequence[float], Y: Sequence[float]) -> KEnergySeries:
    times = np.asarray(times, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if times.size < 2 or times.size != Y.size:
        raise InsufficientSamplesException(f"K-能量积分至少需要两个样本: {times.size}")
    if np.any(np.diff(times) <= 0.0):
        raise FunctionalException("时间戳必须严格递增")
    values = -cumulative_trapezoid(Y, times, initial=0.0)
    bounds = 0.5 * np.diff(times) * np.abs(np.diff(Y))
    return KEnergySeries(times, values, bounds)


@dataclass(frozen=True)
class FunctionalSample:
    """单个采样时刻的泛函值"""
    t: float
    Y: float
    Z: float
    futaki_projection: float
    soliton_residual: float
    futaki_values: Dict[str, float] = field(default_factory=dict)
    K_energy: Optional[float] = None


def functional_sample(
    t: float,
    profile: MomentumProfile,
    potential: RicciPotential,
    basis: Optional[HolomorphicBasis] = None,
) -> FunctionalSample:
    basis = basis or holomorphic_fields(profile.n, profile, potential)
    report = futaki_values(profile, potential, basis)
    return FunctionalSample(
        t=t,
        Y=compute_Y(profile, potential),
        Z=compute_Z(profile, potential).total,
        futaki_projection=futaki_projection(profile, potential, basis).value,
        soliton_residual=soliton_residual(profile, potential),
        futaki_values=dict(zip(report.basis_labels, report.values)),
    )
