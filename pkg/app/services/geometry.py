"""
对称约化Kähler度量的几何计算

Pⁿ (n = 1, 2) 上的 U(n) 不变度量以动量剖面 θ(τ) 编码，τ ∈ [0, 1]。
势函数 φ(s)，s = log|z|²，满足 φ′ = (n+1)τ，φ″ = (n+1)θ。
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq
from scipy.special import expit

from app.config import settings
from app.core.exceptions import GeometryException, ProfileValidationException
from app.core.logging import geometry_logger

SUPPORTED_DIMENSIONS = (1, 2)
# 一侧二阶差分斜率误差约为 h²θ‴/3，此系数给出宽松上界
SLOPE_TRUNCATION_FACTOR = 50.0


def class_volume(n: int) -> float:
    """πc₁ 类的体积 ∫ωⁿ = (π(n+1))ⁿ"""
    return float((np.pi * (n + 1)) ** n)


def calibrated_boundary_slopes(n: int) -> Tuple[float, float]:
    """由 Fubini–Study 剖面标定的端点斜率"""
    _check_dimension(n)
    tau = np.linspace(0.0, 1.0, 5)
    theta = tau * (1.0 - tau)
    return one_sided_slopes(tau, theta)


def one_sided_slopes(tau: np.ndarray, theta: np.ndarray, order: int = 2) -> Tuple[float, float]:
    """端点处一侧差分斜率，order = 2 或 4

    四阶五点格式对四次多项式精确。
    """
    h = tau[1] - tau[0]
    if order == 2:
        left = (-3.0 * theta[0] + 4.0 * theta[1] - theta[2]) / (2.0 * h)
        right = (3.0 * theta[-1] - 4.0 * theta[-2] + theta[-3]) / (2.0 * h)
    elif order == 4:
        weights = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
        left = np.dot(weights, theta[:5])
        right = -np.dot(weights, theta[::-1][:5])
    else:
        raise GeometryException(f"不支持的差分阶数: {order}")
    return float(left), float(right)


def _check_dimension(n: int) -> None:
    if n not in SUPPORTED_DIMENSIONS:
        raise GeometryException(f"不支持的复维数 n={n}，仅支持 {SUPPORTED_DIMENSIONS}")


# ---------------------------------------------------------------------------
# 动量剖面
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentumProfile:
    """U(n)不变度量的动量剖面

    Attributes:
        n: 复维数
        tau_grid: [0, 1] 上的均匀网格
        theta: 剖面值 θ(τ)
        boundary_slopes: 端点斜率，由 Fubini–Study 标定
        label: 名称，用于日志和报告
    """
    n: int
    tau_grid: np.ndarray
    theta: np.ndarray
    boundary_slopes: Tuple[float, float] = (1.0, -1.0)
    label: str = "profile"

    def __post_init__(self) -> None:
        _check_dimension(self.n)
        tau = np.array(self.tau_grid, dtype=float)
        theta = np.array(self.theta, dtype=float)
        tau.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "tau_grid", tau)
        object.__setattr__(self, "theta", theta)
        self._validate()

    def _validate(self) -> None:
        tau, theta = self.tau_grid, self.theta
        if tau.ndim != 1 or tau.shape != theta.shape or tau.size < 5:
            raise ProfileValidationException("剖面网格与取值维度不一致或点数不足")
        if tau[0] != 0.0 or tau[-1] != 1.0:
            raise ProfileValidationException("τ网格必须覆盖 [0, 1]")
        spacing = np.diff(tau)
        if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=1e-14):
            raise ProfileValidationException("τ网格必须均匀")
        if not np.all(np.isfinite(theta)):
            raise ProfileValidationException("剖面含非有限值")
        if theta[0] != 0.0 or theta[-1] != 0.0:
            raise ProfileValidationException("剖面端点值必须严格为零")
        interior = theta[1:-1]
        if np.any(interior <= 0.0):
            index = int(np.argmin(interior)) + 1
            raise ProfileValidationException(
                f"剖面在内部点失去正性: tau={tau[index]:.6g}, theta={theta[index]:.3e}"
            )
        expected = calibrated_boundary_slopes(self.n)
        if not np.allclose(self.boundary_slopes, expected, atol=1e-12):
            raise ProfileValidationException(f"端点斜率必须为标定值 {expected}")
        tolerance = SLOPE_TRUNCATION_FACTOR * self.h**2 + 1e-9
        measured = one_sided_slopes(tau, theta)
        for side, (value, target) in enumerate(zip(measured, expected)):
            if abs(value - target) > tolerance:
                raise ProfileValidationException(
                    f"端点斜率偏离光滑紧化条件: side={side}, slope={value:.6g}, "
                    f"target={target}, tol={tolerance:.2e}"
                )

    @property
    def A(self) -> int:
        """势函数斜率区间长度 n+1"""
        return self.n + 1

    @property
    def grid_points(self) -> int:
        return int(self.tau_grid.size)

    @property
    def h(self) -> float:
        return float(self.tau_grid[1] - self.tau_grid[0])

    @cached_property
    def spline(self) -> CubicSpline:
        """夹持边界的三次样条插值"""
        s0, s1 = self.boundary_slopes
        return CubicSpline(self.tau_grid, self.theta, bc_type=((1, s0), (1, s1)))

    def theta_at(self, tau: np.ndarray, nu: int = 0) -> np.ndarray:
        """θ 及其导数"""
        return self.spline(np.asarray(tau, dtype=float), nu)

    def resample(self, grid_points: int) -> "MomentumProfile":
        """样条重采样到新的网格"""
        tau = np.linspace(0.0, 1.0, grid_points)
        theta = self.theta_at(tau)
        theta[0] = 0.0
        theta[-1] = 0.0
        return MomentumProfile(self.n, tau, theta, self.boundary_slopes, self.label)

    def with_theta(self, theta: np.ndarray, label: Optional[str] = None) -> "MomentumProfile":
        return MomentumProfile(
            self.n, self.tau_grid, theta, self.boundary_slopes, label or self.label
        )

    # -- 图坐标 ------------------------------------------------------------

    @cached_property
    def _regular_part(self) -> Tuple[CubicSpline, float, float, float]:
        """Rreg(τ) = ∫_{1/2}^τ (1/θ − 1/(τ(1−τ))) 及其值域"""
        fine = np.linspace(0.0, 1.0, (self.grid_points - 1) * settings.spline_refine + 1)
        integrand = np.empty_like(fine)
        inner = fine[1:-1]
        integrand[1:-1] = 1.0 / self.theta_at(inner) - 1.0 / (inner * (1.0 - inner))
        integrand[0] = -0.5 * float(self.theta_at(0.0, 2)) - 1.0
        integrand[-1] = -0.5 * float(self.theta_at(1.0, 2)) - 1.0
        antiderivative = CubicSpline(fine, integrand).antiderivative()
        offset = float(antiderivative(0.5))
        values = antiderivative(fine) - offset
        return antiderivative, offset, float(values.min()), float(values.max())

    def regular_part(self, tau: np.ndarray) -> np.ndarray:
        antiderivative, offset, _, _ = self._regular_part
        return antiderivative(np.asarray(tau, dtype=float)) - offset

    def chart_s(self, tau: np.ndarray) -> np.ndarray:
        """τ ↦ s = log|z|²"""
        tau = np.asarray(tau, dtype=float)
        return np.log(tau) - np.log1p(-tau) + self.regular_part(tau)

    def tau_of_s(self, s: float) -> Tuple[float, float]:
        """s ↦ (τ, 1−τ)，以 logit 变量求根保证端点附近的相对精度"""
        _, _, r_min, r_max = self._regular_part

        def residual(y: float) -> float:
            return y + float(self.regular_part(expit(y))) - s

        lo, hi = s - r_max - 1.0, s - r_min + 1.0
        y = brentq(residual, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
        return float(expit(y)), float(expit(-y))

    def origin_scale(self) -> float:
        """z = 0 处 τ/|z|² 的极限 e^{−Rreg(0)}"""
        return float(np.exp(-self.regular_part(0.0)))


def fubini_study_profile(n: int, grid_points: Optional[int] = None) -> MomentumProfile:
    """Fubini–Study 剖面 θ = τ(1−τ)，流的 Kähler–Einstein 不动点"""
    _check_dimension(n)
    m = grid_points or settings.grid_points(n)
    tau = np.linspace(0.0, 1.0, m)
    theta = tau * (1.0 - tau)
    theta[0] = 0.0
    theta[-1] = 0.0
    geometry_logger.debug(f"构造Fubini–Study剖面: n={n}, m={m}")
    return MomentumProfile(n, tau, theta, calibrated_boundary_slopes(n), label=f"fs-p{n}")


def perturbed_profile(
    n: int,
    amplitude: float,
    grid_points: Optional[int] = None,
    skew: float = 0.0,
    label: Optional[str] = None,
) -> MomentumProfile:
    """扰动剖面 θ = τ(1−τ) + amplitude·τ²(1−τ)²·(1 + skew·(2τ−1))

    扰动项在端点二阶消失，端点斜率保持不变。
    """
    _check_dimension(n)
    m = grid_points or settings.grid_points(n)
    tau = np.linspace(0.0, 1.0, m)
    bump = tau**2 * (1.0 - tau) ** 2 * (1.0 + skew * (2.0 * tau - 1.0))
    theta = tau * (1.0 - tau) + amplitude * bump
    theta[0] = 0.0
    theta[-1] = 0.0
    name = label or f"perturbed-p{n}-{amplitude:g}"
    return MomentumProfile(n, tau, theta, calibrated_boundary_slopes(n), label=name)


def random_admissible_profile(
    n: int, grid_points: int, rng: np.random.Generator, scale: float = 0.3
) -> MomentumProfile:
    """随机容许剖面，用于性质测试"""
    coefficients = rng.uniform(-scale, scale, size=3)
    tau = np.linspace(0.0, 1.0, grid_points)
    poly = coefficients[0] + coefficients[1] * tau + coefficients[2] * tau**2
    theta = tau * (1.0 - tau) * (1.0 + tau * (1.0 - tau) * poly)
    theta[0] = 0.0
    theta[-1] = 0.0
    return MomentumProfile(n, tau, theta, calibrated_boundary_slopes(n), label="random")


# ---------------------------------------------------------------------------
# 约化曲率量
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameCurvature:
    """幺正标架（径向、切向）下的曲率分量"""
    tau: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    n: int

    @property
    def ric_radial(self) -> np.ndarray:
        return self.X + (self.n - 1) * self.Y

    @property
    def ric_tangential(self) -> np.ndarray:
        if self.n == 1:
            return self.ric_radial
        return self.Y + self.W

    @property
    def scalar(self) -> np.ndarray:
        return self.ric_radial + (self.n - 1) * self.ric_tangential

    @property
    def nu(self) -> float:
        """Ricci下界参数 ν = min(ric_r, ric_t)"""
        return float(min(self.ric_radial.min(), self.ric_tangential.min()))

    def tensors(self) -> np.ndarray:
        """逐点幺正标架张量，形状 (P, n, n, n, n)"""
        return frame_tensor(self.n, self.X, self.Y, self.W)


def frame_curvature(profile: MomentumProfile, tau: Optional[np.ndarray] = None) -> FrameCurvature:
    """闭式曲率分量 X = −θ″/A, Y = (θ−τθ′)/(Aτ²), W = 2(τ−θ)/(Aτ²)"""
    tau = profile.tau_grid if tau is None else np.atleast_1d(np.asarray(tau, dtype=float))
    A = profile.A
    theta = profile.theta_at(tau)
    d1 = profile.theta_at(tau, 1)
    d2 = profile.theta_at(tau, 2)
    X = -d2 / A

    at_origin = tau <= 0.0
    safe = np.where(at_origin, 1.0, tau)
    second_origin = float(profile.theta_at(0.0, 2))
    Y = np.where(at_origin, -second_origin / (2.0 * A), (theta - tau * d1) / (A * safe**2))
    W = np.where(at_origin, -second_origin / A, 2.0 * (tau - theta) / (A * safe**2))
    return FrameCurvature(tau=tau, X=X, Y=Y, W=W, n=profile.n)


def frame_tensor(n: int, X: np.ndarray, Y: np.ndarray, W: np.ndarray) -> np.ndarray:
    """由 (X, Y, W) 组装标架张量 T[j,i,l,k] = T_{j̄il̄k}"""
    X = np.atleast_1d(X)
    tensors = np.zeros((X.size, n, n, n, n), dtype=complex)
    tensors[:, 0, 0, 0, 0] = X
    if n == 2:
        Y = np.atleast_1d(Y)
        tensors[:, 1, 1, 1, 1] = np.atleast_1d(W)
        for index in [(0, 0, 1, 1), (1, 1, 0, 0), (1, 0, 0, 1), (0, 1, 1, 0)]:
            tensors[(slice(None),) + index] = Y
    return tensors


def rho(profile: MomentumProfile, tau: np.ndarray) -> np.ndarray:
    """Ricci势函数的 s-导数 ρ = n − (n−1)θ/τ − θ′"""
    tau = np.asarray(tau, dtype=float)
    n = profile.n
    d1 = profile.theta_at(tau, 1)
    if n == 1:
        return 1.0 - d1
    theta = profile.theta_at(tau)
    ratio = np.where(tau <= 0.0, profile.theta_at(0.0, 1), theta / np.where(tau <= 0.0, 1.0, tau))
    return n - (n - 1) * ratio - d1


# ---------------------------------------------------------------------------
# 图坐标度量
# ---------------------------------------------------------------------------


def _invariant_hermitian(first: float, second: float, z: np.ndarray, Q: float) -> np.ndarray:
    """U(n)不变 (1,1) 型矩阵 M[j,i] = (f′/Q)δ + (f″ − f′) z_j z̄_i / Q²"""
    n = z.size
    return (first / Q) * np.eye(n, dtype=complex) + (second - first) * np.outer(z, z.conj()) / Q**2


@dataclass(frozen=True)
class ChartSpec:
    """仿射图上的采样点与允许半径"""
    points: np.ndarray
    radius: float = 10.0

    @classmethod
    def radial(cls, n: int, radii: Sequence[float], radius: float = 10.0) -> "ChartSpec":
        pts = np.zeros((len(radii), n), dtype=complex)
        pts[:, 0] = np.asarray(radii, dtype=float)
        return cls(points=pts, radius=radius)


@dataclass(frozen=True, eq=False)
class MetricField:
    """图坐标点上的度量 G[j,i] = g_{j̄i}"""
    n: int
    chart_points: np.ndarray
    g: np.ndarray
    det_g: np.ndarray
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    radius: float = 10.0
    label: str = "metric"

    def at(self, z: np.ndarray) -> np.ndarray:
        return self.evaluator(np.asarray(z, dtype=complex))

    @classmethod
    def flat(cls, n: int, points: Optional[np.ndarray] = None, radius: float = 1.0) -> "MetricField":
        """平坦度量 g ≡ I，仅用于测试"""
        pts = np.zeros((1, n), dtype=complex) if points is None else np.asarray(points, complex)
        g = np.broadcast_to(np.eye(n, dtype=complex), (len(pts), n, n)).copy()
        return cls(
            n=n,
            chart_points=pts,
            g=g,
            det_g=np.ones(len(pts)),
            evaluator=lambda z: np.eye(n, dtype=complex),
            radius=radius,
            label="flat",
        )


def metric_at(profile: MomentumProfile, z: np.ndarray) -> np.ndarray:
    """剖面在图坐标点 z 处给出的度量矩阵"""
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise GeometryException("图坐标点位于排除集（非有限坐标）")
    A = profile.A
    Q = float(np.vdot(z, z).real)
    if Q == 0.0:
        return A * profile.origin_scale() * np.eye(profile.n, dtype=complex)
    tau, _ = profile.tau_of_s(np.log(Q))
    theta = float(profile.theta_at(tau))
    return _invariant_hermitian(A * tau, A * theta, z, Q)


def ricci_matrix_at(profile: MomentumProfile, z: np.ndarray) -> np.ndarray:
    """闭式 Ricci 矩阵：一阶 ρ，二阶 θρ′"""
    z = np.asarray(z, dtype=complex)
    Q = float(np.vdot(z, z).real)
    if Q == 0.0:
        curvature = frame_curvature(profile, np.array([0.0]))
        return float(curvature.ric_radial[0]) * metric_at(profile, z)
    tau, _ = profile.tau_of_s(np.log(Q))
    curvature = frame_curvature(profile, np.array([tau]))
    A = profile.A
    theta = float(profile.theta_at(tau))
    first = float(curvature.ric_tangential[0]) * A * tau
    second = float(curvature.ric_radial[0]) * A * theta
    return _invariant_hermitian(first, second, z, Q)


def metric_from_profile(profile: MomentumProfile, chart: ChartSpec) -> MetricField:
    """在图坐标点上重建度量"""
    points = np.atleast_2d(np.asarray(chart.points, dtype=complex))
    if points.shape[1] != profile.n:
        raise GeometryException("图坐标点维数与剖面维数不一致")
    g = np.stack([metric_at(profile, z) for z in points])
    eigenvalues = np.linalg.eigvalsh(g)
    if np.any(eigenvalues[:, 0] <= 0.0):
        raise GeometryException("度量在图坐标点上不正定")
    geometry_logger.debug(f"度量重建完成: {profile.label}, 点数={len(points)}")
    return MetricField(
        n=profile.n,
        chart_points=points,
        g=g,
        det_g=np.linalg.det(g).real,
        evaluator=lambda z: metric_at(profile, z),
        radius=chart.radius,
        label=profile.label,
    )


# ---------------------------------------------------------------------------
# 曲率张量
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CurvatureTensor:
    """逐点曲率张量 T[j,i,l,k] = R_{j̄il̄k}，附带该点度量 G[j,i] = g_{j̄i}"""
    n: int
    components: np.ndarray
    metric: np.ndarray
    tau: Optional[float] = None
    point: Optional[np.ndarray] = None
    label: str = "tensor"

    def symmetry_defect(self) -> float:
        """Kähler 对称性的最大偏差"""
        T = self.components
        swap_bar = np.abs(T - T.transpose(2, 1, 0, 3)).max()
        swap_holo = np.abs(T - T.transpose(0, 3, 2, 1)).max()
        conjugate = np.abs(T - T.transpose(1, 0, 3, 2).conj()).max()
        return float(max(swap_bar, swap_holo, conjugate))

    def in_unitary_frame(self) -> "CurvatureTensor":
        """以 G = LLᴴ, P = L^{-H} 变换到 g-幺正标架"""
        L = np.linalg.cholesky(self.metric)
        P = np.linalg.inv(L).conj().T
        T = np.einsum("jb,ia,ld,kc,jilk->badc", P.conj(), P, P.conj(), P, self.components)
        return CurvatureTensor(
            self.n, T, np.eye(self.n, dtype=complex), self.tau, self.point, self.label
        )

    def scaled(self, factor: float) -> "CurvatureTensor":
        return CurvatureTensor(
            self.n, factor * self.components, self.metric, self.tau, self.point, self.label
        )

    def __add__(self, other: "CurvatureTensor") -> "CurvatureTensor":
        return CurvatureTensor(
            self.n, self.components + other.components, self.metric, self.tau, self.point,
            self.label,
        )

    def __sub__(self, other: "CurvatureTensor") -> "CurvatureTensor":
        return self + other.scaled(-1.0)


def curvature_closed_form(profile: MomentumProfile, tau: float) -> CurvatureTensor:
    """τ 处的闭式曲率，取图坐标点 z = (r, 0, …)"""
    if not 0.0 < tau < 1.0:
        raise GeometryException(f"τ={tau} 位于退化轨道（端点），闭式曲率无定义")
    A = profile.A
    s = float(profile.chart_s(tau))
    Q = float(np.exp(s))
    theta = float(profile.theta_at(tau))
    scales = np.full(profile.n, A * tau / Q)
    scales[0] = A * theta / Q
    frame = frame_curvature(profile, np.array([tau])).tensors()[0]
    root = np.sqrt(scales)
    weights = np.einsum("j,i,l,k->jilk", root, root, root, root)
    point = np.zeros(profile.n, dtype=complex)
    point[0] = np.sqrt(Q)
    return CurvatureTensor(
        profile.n,
        frame * weights,
        np.diag(scales).astype(complex),
        tau=tau,
        point=point,
        label=f"{profile.label}@closed",
    )


def _real_directions(n: int) -> np.ndarray:
    directions = np.zeros((2 * n, n), dtype=complex)
    for a in range(n):
        directions[a, a] = 1.0
        directions[n + a, a] = 1.0j
    return directions


def _finite_differences(
    func: Callable[[np.ndarray], np.ndarray], z: np.ndarray, h: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """实方向一阶、二阶中心差分

    Returns:
        (f0, first[a], second[a, b])
    """
    n = z.size
    directions = _real_directions(n)
    f0 = np.asarray(func(z))
    first = np.empty((2 * n,) + f0.shape, dtype=complex)
    second = np.empty((2 * n, 2 * n) + f0.shape, dtype=complex)
    plus = [np.asarray(func(z + h * d)) for d in directions]
    minus = [np.asarray(func(z - h * d)) for d in directions]
    for a in range(2 * n):
        first[a] = (plus[a] - minus[a]) / (2.0 * h)
        second[a, a] = (plus[a] - 2.0 * f0 + minus[a]) / h**2
        for b in range(a + 1, 2 * n):
            da, db = directions[a], directions[b]
            mixed = (
                func(z + h * (da + db))
                - func(z + h * (da - db))
                - func(z - h * (da - db))
                + func(z - h * (da + db))
            ) / (4.0 * h**2)
            second[a, b] = mixed
            second[b, a] = mixed
    return f0, first, second


def _wirtinger(first: np.ndarray, second: np.ndarray, n: int):
    """实导数转换为 ∂_k、∂_l̄ 与 ∂_k∂_l̄"""
    x, y = slice(0, n), slice(n, 2 * n)
    d = 0.5 * (first[x] - 1j * first[y])
    d_bar = 0.5 * (first[x] + 1j * first[y])
    dd_bar = 0.25 * (
        second[x, x] + second[y, y] + 1j * (second[x, y] - second[y, x])
    )
    return d, d_bar, dd_bar


def complex_hessian(
    func: Callable[[np.ndarray], float], z: np.ndarray, h: float
) -> np.ndarray:
    """标量函数的复Hessian，M[k,j] = ∂_j∂_k̄ f（与度量的存储约定一致）"""
    z = np.asarray(z, dtype=complex)
    _, first, second = _finite_differences(lambda p: np.asarray(func(p), dtype=complex), z, h)
    _, _, dd_bar = _wirtinger(first, second, z.size)
    return dd_bar.T


def curvature_fd_oracle(
    metric: MetricField, point: np.ndarray, h: Optional[float] = None
) -> CurvatureTensor:
    """有限差分曲率预言机

    R_{j̄il̄k} = −∂_k∂_l̄ g_{j̄i} + g^{pq̄} ∂_k g_{q̄i} ∂_l̄ g_{j̄p}
    """
    h = settings.fd_step if h is None else h
    z = np.asarray(point, dtype=complex)
    reach = float(np.max(np.abs(z.real)) + np.max(np.abs(z.imag)) + 2.0 * h)
    if reach > metric.radius:
        raise GeometryException(f"差分模板超出图坐标范围: reach={reach:.3g} > {metric.radius}")
    G, first, second = _finite_differences(metric.at, z, h)
    d, d_bar, dd_bar = _wirtinger(first, second, metric.n)
    G_inv = np.linalg.inv(G)
    correction = np.einsum("ljp,pq,kqi->jilk", d_bar, G_inv, d)
    components = correction - dd_bar.transpose(2, 3, 1, 0)
    return CurvatureTensor(metric.n, components, G, point=z, label=f"{metric.label}@fd")


def oracle_defect(profile: MomentumProfile, tau: float, h: Optional[float] = None) -> float:
    """τ 轨道上差分预言机与闭式曲率的最大分量偏差"""
    closed = curvature_closed_form(profile, tau)
    metric = metric_from_profile(profile, ChartSpec(points=closed.point[None]))
    oracle = curvature_fd_oracle(metric, closed.point, h)
    return float(np.abs(oracle.components - closed.components).max())


def einstein_defect(profile: MomentumProfile) -> float:
    """网格上的 max|Ric − g|（幺正标架）"""
    curvature = frame_curvature(profile)
    return float(
        max(
            np.abs(curvature.ric_radial - 1.0).max(),
            np.abs(curvature.ric_tangential - 1.0).max(),
        )
    )


@dataclass(frozen=True)
class RicciData:
    """Ricci 张量与数量曲率"""
    ricci: np.ndarray
    scalar: np.ndarray


def ricci_and_scalar(tensor: CurvatureTensor, metric: Optional[np.ndarray] = None) -> RicciData:
    """对逆度量求迹：Ric[j,i] = g^{kl̄} T[j,i,l,k]，R = g^{ij̄} Ric[j,i]"""
    G = tensor.metric if metric is None else np.asarray(metric)
    if np.linalg.cond(G) > 1e14:
        raise GeometryException("度量奇异，无法求迹")
    G_inv = np.linalg.inv(G)
    ricci = np.einsum("...kl,...jilk->...ji", G_inv, tensor.components)
    scalar = np.einsum("...ij,...ji->...", G_inv, ricci).real
    return RicciData(ricci=ricci, scalar=np.asarray(scalar))


def bisectional(tensor: CurvatureTensor, V: np.ndarray, W: np.ndarray) -> float:
    """T_{j̄il̄k} V̄^j V^i W̄^l W^k"""
    V = np.asarray(V, dtype=complex)
    W = np.asarray(W, dtype=complex)
    if not np.any(V) or not np.any(W):
        raise GeometryException("双截面曲率的输入向量不能为零")
    value = np.einsum("jilk,j,i,l,k->", tensor.components, V.conj(), V, W.conj(), W)
    return float(value.real)


# ---------------------------------------------------------------------------
# 积分
# ---------------------------------------------------------------------------


def volume_weights(tau: np.ndarray, n: int) -> np.ndarray:
    """网格梯形权重，使 Σ w f ≈ ∫ f ωⁿ"""
    h = tau[1] - tau[0]
    trapezoid = np.full(tau.size, h)
    trapezoid[0] = trapezoid[-1] = 0.5 * h
    return class_volume(n) * n * trapezoid * tau ** (n - 1)


def grid_integral(values: np.ndarray, tau: np.ndarray, n: int) -> float:
    return float(np.dot(volume_weights(tau, n), values))


def gauss_nodes(tau: np.ndarray, nodes_per_interval: int) -> Tuple[np.ndarray, np.ndarray]:
    """每个网格区间上的 Gauss–Legendre 节点与权重"""
    x, w = np.polynomial.legendre.leggauss(nodes_per_interval)
    left, right = tau[:-1, None], tau[1:, None]
    half = 0.5 * (right - left)
    nodes = (left + right) / 2.0 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def spline_integral(
    profile: MomentumProfile,
    integrand: Callable[[np.ndarray], np.ndarray],
    nodes_per_interval: int = 4,
) -> float:
    """∫ f ωⁿ，节点取在样条区间内部，避开端点奇性"""
    nodes, weights = gauss_nodes(profile.tau_grid, nodes_per_interval)
    n = profile.n
    density = class_volume(n) * n * nodes ** (n - 1)
    return float(np.sum(weights * density * integrand(nodes)))


def integrate_scalar_curvature(profile: MomentumProfile) -> Tuple[float, float]:
    """返回 (∫R ωⁿ, n∫ωⁿ)"""
    total = spline_integral(profile, lambda t: frame_curvature(profile, t).scalar)
    return total, profile.n * class_volume(profile.n)


# ---------------------------------------------------------------------------
# Ricci 势
# ---------------------------------------------------------------------------


def potential_slope(profile: MomentumProfile, tau: np.ndarray) -> np.ndarray:
    """du/dτ = ((n+1)τ − ρ)/θ，端点取极限"""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    n, A = profile.n, profile.A
    slope = np.empty_like(tau)
    left = tau <= 0.0
    right = tau >= 1.0
    inner = ~(left | right)
    t = tau[inner]
    slope[inner] = (A * t - rho(profile, t)) / profile.theta_at(t)
    slope[left] = A * (1.0 + 0.5 * float(profile.theta_at(0.0, 2)))
    slope[right] = -2.0 * (1.0 + 0.5 * float(profile.theta_at(1.0, 2)))
    return slope


@dataclass(frozen=True, eq=False)
class RicciPotential:
    """归一化的 Ricci 势 u，满足 ∂∂̄u = g − Ric，∫e^{−u}ωⁿ = ∫ωⁿ"""
    n: int
    tau_grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    norm_constant: float
    slope_function: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    label: str = "potential"

    @property
    def A(self) -> int:
        return self.n + 1

    @property
    def oscillation(self) -> float:
        return float(self.u.max() - self.u.min())

    @property
    def sup_abs(self) -> float:
        return float(np.abs(self.u).max())

    def du_at(self, tau: np.ndarray) -> np.ndarray:
        if self.slope_function is not None:
            return self.slope_function(tau)
        return CubicSpline(self.tau_grid, self.du)(tau)

    def u_at(self, tau: np.ndarray) -> np.ndarray:
        return CubicHermiteSpline(self.tau_grid, self.u, self.du)(tau)

    def scaled(self, factor: float) -> "RicciPotential":
        """合成势：u ↦ factor·u（不再归一化），斜率函数随之缩放"""
        slope_function = None
        if self.slope_function is not None:
            source = self.slope_function

            def slope_function(t: np.ndarray) -> np.ndarray:
                return factor * source(t)

        return synthetic_potential(
            self.n,
            self.tau_grid,
            factor * self.u,
            factor * self.du,
            label=f"{self.label}x{factor:g}",
            slope_function=slope_function,
        )


def synthetic_potential(
    n: int,
    tau: np.ndarray,
    values: np.ndarray,
    slopes: Optional[np.ndarray] = None,
    label: str = "synthetic",
    slope_function: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> RicciPotential:
    """由给定采样构造势函数，用于一致性测试"""
    tau = np.asarray(tau, dtype=float)
    values = np.asarray(values, dtype=float)
    if slopes is None:
        slopes = np.gradient(values, tau, edge_order=2)
    return RicciPotential(
        n, tau, values, np.asarray(slopes, dtype=float), 0.0,
        slope_function=slope_function, label=label,
    )


def ricci_potential(profile: MomentumProfile) -> RicciPotential:
    """直接积分约化方程并加性归一化"""
    tau = profile.tau_grid
    slope = potential_slope(profile, tau)
    if not np.all(np.isfinite(slope)):
        raise GeometryException(f"Ricci势残差不可积: {profile.label}")
    antiderivative = CubicSpline(tau, slope).antiderivative()
    raw = antiderivative(tau) - antiderivative(0.0)
    weights = volume_weights(tau, profile.n)
    ratio = np.dot(weights, np.exp(-raw)) / np.sum(weights)
    if not np.isfinite(ratio) or ratio <= 0.0:
        raise GeometryException("Ricci势归一化积分失败")
    constant = float(np.log(ratio))
    u = raw + constant
    return RicciPotential(
        n=profile.n,
        tau_grid=tau,
        u=u,
        du=slope,
        norm_constant=constant,
        slope_function=lambda t: potential_slope(profile, t),
        label=profile.label,
    )


def normalization_defect(potential: RicciPotential) -> float:
    """|∫e^{−u}ωⁿ / ∫ωⁿ − 1|"""
    weights = volume_weights(potential.tau_grid, potential.n)
    return float(abs(np.dot(weights, np.exp(-potential.u)) / np.sum(weights) - 1.0))


def gradient_norm_sq(profile: MomentumProfile, potential: RicciPotential, tau: np.ndarray) -> np.ndarray:
    """|∇u|² = θ (du/dτ)² / (n+1)"""
    return profile.theta_at(tau) * potential.du_at(tau) ** 2 / profile.A


def potential_residual(
    profile: MomentumProfile,
    potential: RicciPotential,
    points: np.ndarray,
    h: Optional[float] = None,
) -> float:
    """图坐标上 max|∂∂̄u − (g − Ric)|"""
    h = settings.fd_step if h is None else h

    def u_of_z(z: np.ndarray) -> float:
        Q = float(np.vdot(z, z).real)
        tau, _ = profile.tau_of_s(np.log(Q))
        return float(potential.u_at(tau))

    worst = 0.0
    for z in np.atleast_2d(np.asarray(points, dtype=complex)):
        hessian = complex_hessian(u_of_z, z, h)
        target = metric_at(profile, z) - ricci_matrix_at(profile, z)
        worst = max(worst, float(np.abs(hessian - target).max()))
    return worst
