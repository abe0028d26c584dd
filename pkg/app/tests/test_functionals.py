"""
泛函测试
"""

import numpy as np
import pytest

from app.core.exceptions import FunctionalException, InsufficientSamplesException
from app.services.functionals import (
    compute_Y,
    compute_Z,
    functional_sample,
    futaki,
    futaki_metric_independence,
    futaki_projection,
    futaki_values,
    kenergy_along_run,
    soliton_identity_check,
    soliton_residual,
)
from app.services.geometry import perturbed_profile, ricci_potential, synthetic_potential
from app.services.spectral import VectorFieldMode


@pytest.fixture
def linear_potential(fs_p1):
    """u = A·c·τ，∇u = c·E 恰为全纯场"""
    tau = fs_p1.tau_grid
    return synthetic_potential(1, tau, fs_p1.A * 0.3 * tau, np.full(tau.size, fs_p1.A * 0.3))


@pytest.mark.unit
class TestYZ:
    """Y 与 Z 测试"""

    def test_fubini_study_vanishes(self, fs_p2):
        """测试 Kähler–Einstein 度量上 Y = Z = 0"""
        potential = ricci_potential(fs_p2)
        assert abs(compute_Y(fs_p2, potential)) <= 1e-16
        terms = compute_Z(fs_p2, potential)
        assert abs(terms.total) <= 1e-16

    def test_y_positive_and_quadratic(self, perturbed_p1):
        """测试 Y > 0 且对 u 二次齐次"""
        potential = ricci_potential(perturbed_p1)
        Y = compute_Y(perturbed_p1, potential)
        assert Y > 0.0
        assert compute_Y(perturbed_p1, potential.scaled(2.0)) == pytest.approx(4.0 * Y, rel=1e-5)

    def test_z_terms_sum(self, perturbed_p2):
        terms = compute_Z(perturbed_p2, ricci_potential(perturbed_p2))
        assert terms.total == pytest.approx(terms.scalar_term + terms.ricci_term)


@pytest.mark.unit
class TestFutaki:
    """Futaki 不变量测试"""

    @pytest.mark.parametrize("fixture_name", ["perturbed_p1", "perturbed_p2"])
    def test_vanishes_on_projective_space(self, fixture_name, request):
        """测试射影空间上 Futaki 不变量为零"""
        profile = request.getfixturevalue(fixture_name)
        report = futaki_values(profile)
        assert len(report.values) == len(report.basis_labels)
        assert max(abs(value) for value in report.values) <= 1e-10

    def test_metric_independence(self, fs_p1):
        """测试同一类中不同度量的 Futaki 值一致"""
        profiles = [fs_p1] + [
            perturbed_profile(1, amplitude, 65, skew=skew)
            for amplitude, skew in ((0.5, 0.0), (0.8, 0.3), (0.3, -0.4))
        ]
        sweep = futaki_metric_independence(profiles)
        assert sweep.values.shape == (4, 3)
        assert sweep.max_abs <= 1e-10
        assert sweep.spread <= 1e-10

    def test_non_holomorphic_rejected(self, perturbed_p1):
        """测试非全纯输入被拒绝"""
        potential = ricci_potential(perturbed_p1)
        mode = VectorFieldMode(k=2, radial_samples=np.ones(perturbed_p1.grid_points), n=1, label="bad")
        with pytest.raises(FunctionalException):
            futaki(perturbed_p1, potential, mode)

    def test_grid_mismatch_rejected(self, perturbed_p1):
        potential = ricci_potential(perturbed_p1)
        mode = VectorFieldMode(k=0, radial_samples=np.ones(17), n=1, label="coarse")
        with pytest.raises(FunctionalException):
            futaki(perturbed_p1, potential, mode)

    def test_projection_of_holomorphic_gradient(self, fs_p1, linear_potential):
        """测试 ∇u 本身全纯时投影不变且 Fut(π∇u) = Y"""
        projection = futaki_projection(fs_p1, linear_potential)
        assert projection.labels == ["V[k=0]"]
        assert projection.orthogonality <= 1e-8
        assert projection.value == pytest.approx(compute_Y(fs_p1, linear_potential), rel=1e-10)

    def test_projection_residual_orthogonal(self, perturbed_p1):
        """测试投影残差与 η 正交"""
        projection = futaki_projection(perturbed_p1, ricci_potential(perturbed_p1))
        assert projection.orthogonality <= 1e-8
        assert abs(projection.value) <= 1e-10


@pytest.mark.unit
class TestSoliton:
    """孤立子残差测试"""

    def test_linear_potential_is_soliton_like(self, fs_p1, linear_potential):
        """测试 ∇∇u = 0 时残差为零并断言恒等式"""
        assert soliton_residual(fs_p1, linear_potential) == 0.0
        identity = soliton_identity_check(fs_p1, linear_potential)
        assert identity.asserted

    def test_perturbed_metric_not_soliton(self, perturbed_p1):
        identity = soliton_identity_check(perturbed_p1, ricci_potential(perturbed_p1))
        assert identity.residual > 1e-8
        assert not identity.asserted
        assert identity.difference == pytest.approx(
            compute_Z(perturbed_p1, ricci_potential(perturbed_p1)).total, abs=1e-12
        )


@pytest.mark.unit
class TestKEnergy:
    """K-能量测试"""

    def test_trapezoid_values(self):
        """测试 dK/dt = −Y 的梯形积分"""
        series = kenergy_along_run([0.0, 1.0, 2.0], [3.0, 2.0, 1.0])
        np.testing.assert_allclose(series.values, [0.0, -2.5, -4.0])
        assert series.is_nonincreasing()

    def test_negative_y_detected(self):
        series = kenergy_along_run([0.0, 1.0], [-1.0, -1.0])
        assert not series.is_nonincreasing()

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamplesException):
            kenergy_along_run([0.0], [1.0])

    def test_times_must_increase(self):
        with pytest.raises(FunctionalException):
            kenergy_along_run([0.0, 0.5, 0.5], [1.0, 1.0, 1.0])


@pytest.mark.unit
def test_functional_sample(perturbed_p1):
    """测试单个采样时刻的泛函汇总"""
    potential = ricci_potential(perturbed_p1)
    sample = functional_sample(0.25, perturbed_p1, potential)
    assert sample.t == 0.25
    assert sample.Y == pytest.approx(compute_Y(perturbed_p1, potential))
    assert set(sample.futaki_values) == {"V[k=-1]", "V[k=0]", "V[k=1]"}
