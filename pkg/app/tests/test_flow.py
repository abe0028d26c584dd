"""
流演化测试
"""

import numpy as np
import pytest

from app.core.exceptions import (
    CFLViolationException,
    FlowHaltException,
    InsufficientSamplesException,
)
from app.schemas.scenario import FlowScheme
from app.services.flow import (
    FlowState,
    TimeSeries,
    cfl_limit,
    cheap_monitors,
    dotY_inequality_check,
    exponential_rate_fit,
    krf_step,
    positivity_margins,
    rhs,
    rk4_order_study,
    run_flow,
)
from app.services.geometry import fubini_study_profile, one_sided_slopes, perturbed_profile


def _series(values, key: str = "Y", t_end: float = 5.0) -> TimeSeries:
    times = np.linspace(0.0, t_end, len(values))
    return TimeSeries(n=1, rows=[{"t": float(t), key: float(v)} for t, v in zip(times, values)])


@pytest.mark.unit
class TestStepping:
    """时间步进测试"""

    @pytest.mark.parametrize("n", [1, 2])
    def test_fubini_study_rhs_vanishes(self, n):
        """测试 Fubini–Study 是离散方程的精确不动点"""
        profile = fubini_study_profile(n, 33)
        assert np.abs(rhs(profile.theta, profile.tau_grid, n)).max() <= 1e-12

    @pytest.mark.parametrize("scheme", [FlowScheme.RK4, FlowScheme.IMEX])
    def test_fubini_study_fixed_point(self, fs_p2, scheme):
        """测试两种格式下 Fubini–Study 保持不变"""
        state = FlowState(t=0.0, profile=fs_p2)
        for _ in range(20):
            state = krf_step(state, 1e-4, scheme)
        assert np.abs(state.profile.theta - fs_p2.theta).max() <= 1e-10
        assert state.step == 20
        assert state.t == pytest.approx(2e-3)

    def test_class_pinning(self, perturbed_p1):
        """测试类修正把端点斜率差拉回解析值 2，并累计记录修正量"""
        tau = perturbed_p1.tau_grid
        left, right = one_sided_slopes(tau, perturbed_p1.theta, order=4)
        assert left - right == pytest.approx(2.0, abs=1e-9)

        state = FlowState(t=0.0, profile=perturbed_p1)
        assert state.pinned_gap == pytest.approx(2.0, abs=1e-12)
        total = 0.0
        for _ in range(10):
            state = krf_step(state, 1e-4)
            total += abs(state.class_correction)
        left, right = one_sided_slopes(tau, state.profile.theta, order=4)
        assert left - right == pytest.approx(2.0, rel=1e-12)
        assert abs(state.class_correction) < 1e-6
        assert state.class_correction_total == pytest.approx(total, rel=1e-12)

    def test_unpinned_step_records_nothing(self, perturbed_p1):
        state = krf_step(FlowState(t=0.0, profile=perturbed_p1), 1e-4, pin_class=False)
        assert state.class_correction == 0.0
        assert state.class_correction_total == 0.0

    def test_step_size_robustness(self):
        """测试 dt 与 dt/2 在固定时域上给出一致的剖面"""
        initial = perturbed_profile(1, 0.8, 33)
        finals = []
        for dt in (2e-3, 1e-3):
            state = FlowState(t=0.0, profile=initial)
            for _ in range(int(round(0.5 / dt))):
                state = krf_step(state, dt)
            assert state.t == pytest.approx(0.5)
            finals.append(state)
        coarse, fine = finals
        assert np.abs(coarse.profile.theta - fine.profile.theta).max() <= 1e-4
        coarse_row, fine_row = cheap_monitors(coarse), cheap_monitors(fine)
        assert coarse_row["sup_ric_minus_g"] == pytest.approx(fine_row["sup_ric_minus_g"], abs=1e-4)

    def test_positivity_loss_halts(self, perturbed_p1):
        """测试剖面正性丢失时中止"""
        state = FlowState(t=0.0, profile=perturbed_p1)
        with pytest.raises(FlowHaltException) as exc_info:
            krf_step(state, 1.0)
        assert exc_info.value.step == 1
        assert exc_info.value.code == "NUMERICAL_HALT"

    def test_imex_allows_larger_steps(self, perturbed_p1):
        """测试 IMEX 的稳定步长上界大于显式格式"""
        explicit = cfl_limit(perturbed_p1, FlowScheme.RK4, 0.5)
        imex = cfl_limit(perturbed_p1, FlowScheme.IMEX, 0.5)
        assert imex > explicit > 0.0

    def test_rk4_order(self):
        """测试 RK4 的四阶时间收敛"""
        study = rk4_order_study(perturbed_profile(1, 0.4, 9))
        assert 3.5 <= study.order <= 4.5
        assert study.differences[0] > study.differences[1]


@pytest.mark.unit
class TestMonitors:
    """监测量测试"""

    def test_cheap_monitors_fubini_study(self, fs_p1):
        """测试 Fubini–Study 上的廉价监测量"""
        row = cheap_monitors(FlowState(t=0.0, profile=fs_p1))
        assert row["sup_ric_minus_g"] <= 1e-8
        assert row["Y"] == pytest.approx(0.0, abs=1e-16)
        assert row["nu"] == pytest.approx(1.0, abs=1e-10)
        assert row["chen_target"] == pytest.approx(0.5, abs=1e-10)
        assert row["volume_density_min"] == pytest.approx(1.0)
        assert row["int_R_minus_n_sq"] == pytest.approx(0.0, abs=1e-16)

    def test_positivity_margins_fubini_study(self, fs_p2, serial_runner):
        """测试子采样上的 Griffiths 与 Chen 余量"""
        margins = positivity_margins(fs_p2, 9, seed=1, runner=serial_runner)
        assert margins["griffiths_margin"] == pytest.approx(1.0 / 3.0, abs=1e-8)
        assert margins["chen_margin"] == pytest.approx(1.0 / 3.0, abs=1e-8)


@pytest.mark.integration
class TestRunFlow:
    """完整运行测试"""

    def test_short_run(self, perturbed_p1, test_data_factory, serial_runner):
        """测试短时域运行的采样节奏与 K-能量"""
        config = test_data_factory.short_flow()
        series = run_flow(config, perturbed_p1, runner=serial_runner, label="short")
        assert len(series) == 11
        assert len(series.expensive_rows()) == 3
        assert series.times[-1] == pytest.approx(0.05)
        assert series.final_state.step == 50
        assert series.final_state.profile.grid_points == 33
        kenergy = series.column("kenergy")
        assert kenergy[0] == 0.0
        assert np.all(np.diff(kenergy) <= 1e-15)
        assert np.all(series.column("Y") > 0.0)
        assert series.perelman_bounded(config.perelman_bound)

    def test_fubini_study_run(self, fs_p1, test_data_factory, serial_runner):
        """测试 Fubini–Study 在整个运行中保持 Kähler–Einstein"""
        series = run_flow(test_data_factory.short_flow(), fs_p1, runner=serial_runner)
        assert np.nanmax(series.column("sup_ric_minus_g")) <= 1e-8
        assert series.positivity_preserved()
        for row in series.expensive_rows():
            assert abs(row["futaki_proj"]) <= 1e-10
            assert row["potential_residual"] <= 1e-6

    def test_cfl_violation(self, perturbed_p1, test_data_factory):
        """测试违反CFL约束的配置被拒绝"""
        config = test_data_factory.short_flow(dt=0.01)
        with pytest.raises(CFLViolationException):
            run_flow(config, perturbed_p1)

    @pytest.mark.slow
    def test_pinned_flow_reaches_fubini_study(self):
        """测试带类修正的流从扰动剖面收敛到 Fubini–Study，而不是停在别的不动点"""
        initial = perturbed_profile(1, 0.8, 33)
        dt = cfl_limit(initial, FlowScheme.RK4, 0.5)
        state = FlowState(t=0.0, profile=initial)
        while state.t < 24.0:
            state = krf_step(state, dt)
        row = cheap_monitors(state)
        assert row["sup_ric_minus_g"] < 1e-6
        assert np.abs(state.profile.theta - fubini_study_profile(1, 33).theta).max() < 1e-6
        assert abs(state.class_correction) < 1e-10


@pytest.mark.unit
class TestRateFit:
    """指数拟合测试"""

    def test_exact_exponential(self):
        """测试 e^{−2t} 的衰减率"""
        times = np.linspace(0.0, 5.0, 41)
        fit = exponential_rate_fit(_series(np.exp(-2.0 * times)), "Y")
        assert fit.rate == pytest.approx(2.0, abs=1e-6)
        assert fit.decaying
        assert fit.samples == 21

    def test_constant_not_decaying(self):
        fit = exponential_rate_fit(_series(np.ones(41)), "Y")
        assert not fit.decaying

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamplesException):
            exponential_rate_fit(_series(np.ones(12)), "Y")

    def test_negative_values_rejected(self):
        with pytest.raises(InsufficientSamplesException):
            exponential_rate_fit(_series(-np.ones(41)), "Y")


@pytest.mark.unit
class TestDotYCheck:
    """Ẏ 不等式检验测试"""

    @staticmethod
    def _rows(Y: float, lam: float):
        rows = []
        for k in range(5):
            row = {"t": 0.1 * k, "Y": Y, "Z": 0.0}
            if k == 2:
                row.update({"lambda": lam, "futaki_proj": 0.0, "refinement_error": 0.0})
            rows.append(row)
        return TimeSeries(n=1, rows=rows)

    def test_violation_flagged(self):
        """测试 Ẏ = 0 而右端为负时被标记"""
        check = dotY_inequality_check(self._rows(1.0, 2.0))
        assert not check.passed
        assert check.residuals[0] == pytest.approx(4.0)
        assert check.worst_margin > 0.0

    def test_einstein_series_passes(self):
        """测试 Y ≡ 0 时残差为零"""
        check = dotY_inequality_check(self._rows(0.0, 2.0))
        assert check.passed
        assert check.residuals[0] == 0.0

    def test_requires_interior_sample(self):
        rows = [{"t": 0.0, "Y": 1.0, "Z": 0.0, "lambda": 1.0, "futaki_proj": 0.0}]
        with pytest.raises(InsufficientSamplesException):
            dotY_inequality_check(TimeSeries(n=1, rows=rows))

