"""
约化剖面族上的归一化 Kähler–Ricci 流

∂_t g = g − Ric 在 U(n) 不变度量上化为动量剖面的拟线性抛物方程
θ_t = θ − τθ′ + (θθ″ − θ′² + nθ′ − (n−1)θ²/τ²)/(n+1)，端点 θ = 0 固定。
Ricci 势在每个采样时刻从剖面重新求解，不随时间演化。
"""

import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.stats import linregress

from app.config import settings
from app.core.concurrency import ParallelRunner
from app.core.exceptions import FlowHaltException, InsufficientSamplesException
from app.core.logging import flow_logger
from app.schemas.scenario import FlowConfig, FlowScheme
from app.services.functionals import (
    compute_Y,
    compute_Z,
    futaki_projection,
    kenergy_along_run,
    soliton_residual,
)
from app.services.geometry import (
    CurvatureTensor,
    ChartSpec,
    FrameCurvature,
    MomentumProfile,
    RicciPotential,
    frame_curvature,
    gradient_norm_sq,
    one_sided_slopes,
    potential_residual,
    ricci_potential,
    spline_integral,
)
from app.services.positivity import PositivityThreshold, chen_cone_monitor, griffiths_min
from app.services.spectral import (
    bound_report,
    curvature_thresholds,
    lemma_one_constants,
    spectral_report,
)

EXPONENTIAL_FLOOR = 1e-10
MIN_FIT_SAMPLES = 10
DECAY_THRESHOLD = 1e-8
# 标准运行上类修正的单步与累计上限
CLASS_STEP_LIMIT = 1e-8
CLASS_TOTAL_LIMIT = 1e-6
# ∂∂̄u = g − Ric 的图坐标检验半径
RESIDUAL_RADII = (0.5, 2.0)


# ---------------------------------------------------------------------------
# 状态
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FlowState:
    """流上的一个快照，势函数与曲率按需计算并缓存"""
    t: float
    profile: MomentumProfile
    step: int = 0
    class_correction: float = 0.0
    class_correction_total: float = 0.0

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def pinned_gap(self) -> float:
        """类对应的端点斜率差 θ′(0) − θ′(1)，取标定的解析值而非初始离散值"""
        left, right = self.profile.boundary_slopes
        return left - right

    @cached_property
    def potential(self) -> RicciPotential:
        return ricci_potential(self.profile)

    @cached_property
    def curvature(self) -> FrameCurvature:
        return frame_curvature(self.profile)


def _derivatives(theta: np.ndarray, h: float):
    d1 = np.zeros_like(theta)
    d2 = np.zeros_like(theta)
    d1[1:-1] = (theta[2:] - theta[:-2]) / (2.0 * h)
    d2[1:-1] = (theta[2:] - 2.0 * theta[1:-1] + theta[:-2]) / h**2
    return d1, d2


def rhs(theta: np.ndarray, tau: np.ndarray, n: int) -> np.ndarray:
    """约化流方程的右端，端点为零"""
    h = tau[1] - tau[0]
    A = n + 1
    d1, d2 = _derivatives(theta, h)
    out = np.zeros_like(theta)
    t = tau[1:-1]
    th = theta[1:-1]
    nonlinear = th * d2[1:-1] - d1[1:-1] ** 2 + n * d1[1:-1] - (n - 1) * th**2 / t**2
    out[1:-1] = th - t * d1[1:-1] + nonlinear / A
    return out


def _explicit_part(theta: np.ndarray, tau: np.ndarray, n: int) -> np.ndarray:
    """去掉扩散项 (θ/A)θ″ 后的右端"""
    h = tau[1] - tau[0]
    _, d2 = _derivatives(theta, h)
    out = rhs(theta, tau, n)
    out[1:-1] -= theta[1:-1] * d2[1:-1] / (n + 1)
    return out


def rk4_step(theta: np.ndarray, tau: np.ndarray, n: int, dt: float) -> np.ndarray:
    k1 = rhs(theta, tau, n)
    k2 = rhs(theta + 0.5 * dt * k1, tau, n)
    k3 = rhs(theta + 0.5 * dt * k2, tau, n)
    k4 = rhs(theta + dt * k3, tau, n)
    return theta + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def imex_step(theta: np.ndarray, tau: np.ndarray, n: int, dt: float) -> np.ndarray:
    """扩散项隐式、其余显式的一阶 IMEX 步"""
    h = tau[1] - tau[0]
    m = theta.size
    coefficient = dt * theta[1:-1] / ((n + 1) * h**2)
    banded = np.zeros((3, m))
    banded[1] = 1.0
    banded[1, 1:-1] += 2.0 * coefficient
    banded[0, 2:] = -coefficient
    banded[2, :-2] = -coefficient
    right = theta + dt * _explicit_part(theta, tau, n)
    right[0] = 0.0
    right[-1] = 0.0
    return solve_banded((1, 1), banded, right)


STEPPERS: Dict[FlowScheme, Callable[[np.ndarray, np.ndarray, int, float], np.ndarray]] = {
    FlowScheme.RK4: rk4_step,
    FlowScheme.IMEX: imex_step,
}


def cfl_limit(profile: MomentumProfile, scheme: FlowScheme, safety: float) -> float:
    """显式格式受扩散系数限制，IMEX 受输运速度限制"""
    h = profile.h
    A = profile.A
    if scheme == FlowScheme.RK4:
        diffusion = float(np.max(profile.theta) / A)
        return safety * h**2 / max(diffusion, 1e-300)
    d1, _ = _derivatives(profile.theta, h)
    speed = np.abs(-profile.tau_grid - 2.0 * d1 / A + profile.n / A)
    return safety * h / max(float(speed.max()), 1e-300)


def _class_gap(tau: np.ndarray, theta: np.ndarray) -> float:
    left, right = one_sided_slopes(tau, theta, order=4)
    return left - right


def _check_positive(theta: np.ndarray, tau: np.ndarray, step: int) -> None:
    interior = theta[1:-1]
    bad = ~np.isfinite(interior) | (interior <= 0.0)
    if np.any(bad):
        index = int(np.argmax(bad)) + 1
        flow_logger.error(f"剖面正性丢失: tau={tau[index]:.6g}, step={step}")
        raise FlowHaltException(tau=float(tau[index]), step=step)


def krf_step(
    state: FlowState,
    dt: float,
    scheme: FlowScheme = FlowScheme.RK4,
    pin_class: bool = True,
) -> FlowState:
    """推进一步；pin_class 时以标量缩放把端点斜率差拉回解析值，即 πc₁ 类

    缩放量记为 class_correction，累计绝对值记为 class_correction_total。
    """
    profile = state.profile
    tau = profile.tau_grid
    theta = STEPPERS[scheme](profile.theta, tau, profile.n, dt)
    theta[0] = 0.0
    theta[-1] = 0.0
    step = state.step + 1
    _check_positive(theta, tau, step)

    correction = 0.0
    if pin_class:
        scale = state.pinned_gap / _class_gap(tau, theta)
        theta = scale * theta
        correction = scale - 1.0
    return FlowState(
        t=state.t + dt,
        profile=profile.with_theta(theta),
        step=step,
        class_correction=correction,
        class_correction_total=state.class_correction_total + abs(correction),
    )


# ---------------------------------------------------------------------------
# 监测量
# ---------------------------------------------------------------------------


def cheap_monitors(state: FlowState) -> Dict[str, Any]:
    profile, potential, curvature = state.profile, state.potential, state.curvature
    n = profile.n
    tau = profile.tau_grid
    ric_defect = np.maximum(
        np.abs(curvature.ric_radial - 1.0), np.abs(curvature.ric_tangential - 1.0)
    )
    inner = tau[1:-1]
    density = profile.theta[1:-1] / (inner * (1.0 - inner))
    nu = curvature.nu
    return {
        "t": state.t,
        "sup_u": potential.sup_abs,
        "sup_grad_u": float(np.sqrt(gradient_norm_sq(profile, potential, tau).max())),
        "sup_R": float(np.abs(curvature.scalar).max()),
        "sup_ric_minus_g": float(ric_defect.max()),
        "int_R_minus_n_sq": spline_integral(
            profile, lambda t: (frame_curvature(profile, t).scalar - n) ** 2
        ),
        "Y": compute_Y(profile, potential),
        "Z": compute_Z(profile, potential).total,
        "soliton_residual": soliton_residual(profile, potential),
        "nu": nu,
        "chen_target": PositivityThreshold(c=0.0, nu=nu, n=n).target,
        "volume_density_min": float(density.min()),
        "class_correction": state.class_correction,
        "class_correction_total": state.class_correction_total,
    }


def _monitor_tau(profile: MomentumProfile, points: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, min(points, profile.grid_points))


def positivity_margins(
    profile: MomentumProfile,
    points: int,
    seed: int,
    runner: Optional[ParallelRunner] = None,
) -> Dict[str, float]:
    """τ 子采样上的 Griffiths 余量与 Chen 锥余量（取最小）"""
    curvature = frame_curvature(profile, _monitor_tau(profile, points))
    components = curvature.tensors()
    eye = np.eye(profile.n, dtype=complex)
    runner = runner or ParallelRunner()

    def margins(index: int):
        tensor = CurvatureTensor(profile.n, components[index], eye, tau=float(curvature.tau[index]))
        return (
            griffiths_min(tensor, restarts=8, seed=seed),
            chen_cone_monitor(tensor, restarts=8, seed=seed),
        )

    values = np.array(runner.map_ordered(margins, list(range(components.shape[0]))))
    return {"griffiths_margin": float(values[:, 0].min()), "chen_margin": float(values[:, 1].min())}


def expensive_monitors(
    state: FlowState,
    config: FlowConfig,
    runner: Optional[ParallelRunner] = None,
) -> Dict[str, Any]:
    profile, potential = state.profile, state.potential
    runner = runner or ParallelRunner()
    report = spectral_report(profile, potential, config.sectors, refine=True, runner=runner)
    c_lambda, c_lambda_tilde = curvature_thresholds(profile)
    bounds = bound_report(report, c_lambda, c_lambda_tilde)
    A1, A2 = lemma_one_constants(potential.oscillation)
    margins = positivity_margins(profile, config.monitor_points, config.seed, runner)
    return {
        "lambda": report.lambda_,
        "lambda_tilde": report.lambda_tilde,
        "refinement_error": report.refinement_error,
        "c_lambda": c_lambda,
        "c_lambda_tilde": c_lambda_tilde,
        "bounds_passed": bounds.passed,
        "A1": A1,
        "A2": A2,
        "futaki_proj": futaki_projection(profile, potential).value,
        "potential_residual": potential_residual(
            profile, potential, ChartSpec.radial(profile.n, RESIDUAL_RADII).points
        ),
        "positivity_flag": margins["griffiths_margin"] >= -settings.tol_optimizer,
        **margins,
    }


# ---------------------------------------------------------------------------
# 运行
# ---------------------------------------------------------------------------


@dataclass
class TimeSeries:
    """按廉价采样节奏记录的监测量行；昂贵监测量只出现在其采样行"""
    n: int
    rows: List[Dict[str, Any]] = field(default_factory=list)
    final_state: Optional[FlowState] = None
    label: str = "run"

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    def column(self, key: str) -> np.ndarray:
        """缺失值为 NaN"""
        return np.array(
            [np.nan if row.get(key) is None else float(row[key]) for row in self.rows]
        )

    def expensive_rows(self) -> List[Dict[str, Any]]:
        return [row for row in self.rows if row.get("lambda") is not None]

    def positivity_preserved(self) -> bool:
        return all(bool(row["positivity_flag"]) for row in self.expensive_rows())

    def perelman_bounded(self, bound: float) -> bool:
        return all(
            max(row["sup_u"], row["sup_grad_u"], row["sup_R"]) <= bound for row in self.rows
        )


def run_flow(
    config: FlowConfig,
    initial: MomentumProfile,
    runner: Optional[ParallelRunner] = None,
    label: Optional[str] = None,
) -> TimeSeries:
    """积分到 t_max 并按节奏记录监测量

    CFL 约束在起点及每个廉价采样时刻检查；正性丢失抛出 FlowHaltException。
    """
    runner = runner or ParallelRunner()
    if config.grid_points is not None and config.grid_points != initial.grid_points:
        initial = initial.resample(config.grid_points)
    cheap_every, expensive_every = config.cadence()
    total = config.total_steps
    series = TimeSeries(n=initial.n, label=label or initial.label)
    state = FlowState(t=0.0, profile=initial)
    config.check_cfl(cfl_limit(initial, config.scheme, config.cfl_safety))

    flow_logger.info(
        f"开始流演化: {series.label}, n={initial.n}, m={initial.grid_points}, "
        f"scheme={config.scheme.value}, dt={config.dt}, 步数={total}"
    )
    start_time = time.time()
    worst_correction = 0.0

    def record(current: FlowState) -> None:
        row = cheap_monitors(current)
        if current.step % expensive_every == 0:
            row.update(expensive_monitors(current, config, runner))
        series.rows.append(row)
        if len(series.rows) % 100 == 0:
            flow_logger.debug(
                f"t={current.t:.4f}, sup|Ric−g|={row['sup_ric_minus_g']:.3e}, Y={row['Y']:.3e}"
            )

    record(state)
    for _ in range(total):
        state = krf_step(state, config.dt, config.scheme)
        worst_correction = max(worst_correction, abs(state.class_correction))
        if state.step % cheap_every == 0 or state.step == total:
            config.check_cfl(cfl_limit(state.profile, config.scheme, config.cfl_safety))
            record(state)

    kenergy = kenergy_along_run(series.times, series.column("Y")) if len(series) >= 2 else None
    if kenergy is not None:
        for row, value in zip(series.rows, kenergy.values):
            row["kenergy"] = float(value)
    series.final_state = state

    if worst_correction > CLASS_STEP_LIMIT or state.class_correction_total > CLASS_TOTAL_LIMIT:
        flow_logger.warning(
            f"类修正超出上限: {series.label}, 单步最大={worst_correction:.3e}, "
            f"累计={state.class_correction_total:.3e}"
        )
    if not series.perelman_bounded(config.perelman_bound):
        flow_logger.warning(f"Perelman监测量超过夹具常数 {config.perelman_bound}: {series.label}")
    flow_logger.info(
        f"流演化完成: {series.label}, 样本数={len(series)}, 最大类修正={worst_correction:.3e}, "
        f"耗时={time.time() - start_time:.2f}s"
    )
    return series


# ---------------------------------------------------------------------------
# 收敛分析
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    """log(监测量) 对 t 的尾部最小二乘拟合"""
    rate: float
    intercept: float
    samples: int
    decaying: bool


def exponential_rate_fit(series: TimeSeries, key: str) -> RateFit:
    times = series.times
    values = series.column(key)
    keep = ~np.isnan(values)
    times, values = times[keep], values[keep]
    tail = slice(times.size // 2, None)
    times, values = times[tail], values[tail]
    if np.any(values < 0.0):
        raise InsufficientSamplesException(f"拟合窗口内存在负值: key={key}")
    above = values > EXPONENTIAL_FLOOR
    if int(above.sum()) < MIN_FIT_SAMPLES:
        raise InsufficientSamplesException(
            f"拟合窗口内的正样本不足: key={key}, 样本数={int(above.sum())}"
        )
    fit = linregress(times[above], np.log(values[above]))
    rate = float(-fit.slope)
    return RateFit(
        rate=rate,
        intercept=float(fit.intercept),
        samples=int(above.sum()),
        decaying=rate > DECAY_THRESHOLD,
    )


@dataclass(frozen=True)
class DotYCheck:
    """Ẏ ≤ −2λY − 2λFut(π∇u) − Z 的逐点残差"""
    times: np.ndarray
    residuals: np.ndarray
    tolerances: np.ndarray

    @property
    def violations(self) -> np.ndarray:
        return self.residuals > self.tolerances

    @property
    def passed(self) -> bool:
        return not bool(np.any(self.violations))

    @property
    def worst_margin(self) -> float:
        if self.residuals.size == 0:
            return 0.0
        return float(np.max(self.residuals - self.tolerances))


def dotY_inequality_check(series: TimeSeries, lambda_rtol: float = 1e-3) -> DotYCheck:
    """在昂贵采样时刻以廉价样本的中心差分估计 Ẏ

    容差由 λ 的离散误差、网格加密误差与两侧差分之差组成。
    """
    times = series.times
    Y = series.column("Y")
    indices = [
        i for i, row in enumerate(series.rows)
        if row.get("lambda") is not None and 0 < i < len(series.rows) - 1
    ]
    if not indices:
        raise InsufficientSamplesException("Ẏ 检验需要至少一个内部昂贵采样点")

    residuals, tolerances, stamps = [], [], []
    for i in indices:
        row = series.rows[i]
        forward = (Y[i + 1] - Y[i]) / (times[i + 1] - times[i])
        backward = (Y[i] - Y[i - 1]) / (times[i] - times[i - 1])
        central = (Y[i + 1] - Y[i - 1]) / (times[i + 1] - times[i - 1])
        lam = row["lambda"]
        bound = -2.0 * lam * Y[i] - 2.0 * lam * row["futaki_proj"] - row["Z"]
        spatial = 2.0 * Y[i] * (lambda_rtol * lam + row.get("refinement_error", 0.0))
        residuals.append(central - bound)
        tolerances.append(spatial + 0.5 * abs(forward - backward) + 1e-12)
        stamps.append(times[i])

    check = DotYCheck(np.array(stamps), np.array(residuals), np.array(tolerances))
    if not check.passed:
        flow_logger.warning(
            f"Ẏ 不等式在 {int(check.violations.sum())} 个时刻不成立: {series.label}"
        )
    return check


@dataclass(frozen=True)
class OrderStudy:
    """固定时域上的 Richardson 收敛阶"""
    dts: Sequence[float]
    differences: Sequence[float]
    order: float


def rk4_order_study(
    initial: MomentumProfile,
    dts: Sequence[float] = (0.01, 0.005, 0.0025),
    horizon: float = 0.2,
) -> OrderStudy:
    """不做类修正，使步进映射恰为 RK4"""
    finals = []
    for dt in dts:
        state = FlowState(t=0.0, profile=initial)
        for _ in range(int(round(horizon / dt))):
            state = krf_step(state, dt, FlowScheme.RK4, pin_class=False)
        finals.append(state.profile.theta)
    differences = [
        float(np.abs(finals[i] - finals[i + 1]).max()) for i in range(len(finals) - 1)
    ]
    ratio = differences[0] / differences[1]
    order = float(np.log(ratio) / np.log(dts[0] / dts[1]))
    flow_logger.debug(f"RK4 收敛阶: {order:.3f}, 差值={differences}")
    return OrderStudy(tuple(dts), tuple(differences), order)
