"""
谱计算测试
"""

import numpy as np
import pytest

from app.core.exceptions import SpectralException
from app.schemas.reports import SpectralReport
from app.services.geometry import fubini_study_profile, ricci_potential
from app.services.spectral import (
    KERNEL_SECTORS,
    InnerProduct,
    bound_report,
    build_L,
    build_L_tilde,
    classify_kernel,
    eta_dimension,
    holomorphic_fields,
    lambda_equivalence_check,
    lemma_one_constants,
    periodic_model_operator,
    periodic_model_symbol,
    sector_exponents,
    sector_operator,
    smallest_positive_eigenvalue,
    spectral_report,
)


def _report(lam: float, lam_tilde: float, refinement_error: float = 0.0) -> SpectralReport:
    return SpectralReport(
        lambda_=lam,
        lambda_tilde=lam_tilde,
        kernel_dim=3,
        representable_dim=3,
        eta_dim=3,
        sectors=3,
        grid_points=33,
        refinement_error=refinement_error,
        minimizing_sector=0,
    )


@pytest.mark.unit
class TestSectorOperator:
    """扇区算子测试"""

    def test_kernel_sector_exponents(self):
        """测试核扇区的端点指数使 c_k 消失"""
        for k in (-1, 0, 1):
            a, b = sector_exponents(k)
            assert a - k / 2.0 == 0.0
            assert b + k / 2.0 == 0.0

    @pytest.mark.parametrize("n", [1, 2])
    def test_constant_mode_is_exact_kernel(self, n):
        """测试核扇区中常数模式的能量为零"""
        profile = fubini_study_profile(n, 33)
        for k in KERNEL_SECTORS[n]:
            operator = sector_operator(profile, k)
            q = np.ones(operator.size)
            assert operator.energy(q) <= 1e-12 * operator.norm_sq(q)

    def test_adjointness(self, perturbed_p1, rng):
        """测试 ⟨Lx, y⟩ = ⟨x, Ly⟩"""
        potential = ricci_potential(perturbed_p1)
        for operator in (sector_operator(perturbed_p1, 2), sector_operator(perturbed_p1, 2, potential)):
            x = rng.standard_normal(operator.size)
            y = rng.standard_normal(operator.size)
            scale = max(1.0, abs(operator.pairing(operator.apply(x), y)))
            assert operator.adjointness_residual(x, y) <= 1e-9 * scale

    def test_periodic_model_symbol(self):
        """测试常系数模型的算子特征值与离散符号一致"""
        m = 16
        operator = periodic_model_operator(0.7, 0.3, 2.0, m)
        values = operator.low_eigenvalues(m)
        symbol = periodic_model_symbol(0.7, 0.3, 2.0, m)
        np.testing.assert_allclose(values, symbol, rtol=1e-9, atol=1e-9 * symbol.max())

    def test_grid_mismatch_rejected(self, perturbed_p1):
        """测试势函数与剖面网格不一致"""
        potential = ricci_potential(perturbed_p1.resample(33))
        with pytest.raises(SpectralException):
            build_L_tilde(perturbed_p1, potential, sectors=1)


@pytest.mark.unit
class TestHolomorphicBasis:
    """全纯场基底测试"""

    @pytest.mark.parametrize("n", [1, 2])
    def test_basis_normalized(self, n):
        """测试基底按 ⟨,⟩_0 标准正交"""
        profile = fubini_study_profile(n, 33)
        basis = holomorphic_fields(n, profile)
        size = len(KERNEL_SECTORS[n])
        np.testing.assert_allclose(basis.gram_0, np.eye(size), atol=1e-12)
        assert np.all(basis.dbar_energy <= 1e-8)
        assert basis.representable_dim == 3

    def test_dimension_mismatch(self, fs_p1):
        with pytest.raises(SpectralException):
            holomorphic_fields(2, fs_p1)

    def test_eta_dimension(self):
        assert eta_dimension(1) == 3
        assert eta_dimension(2) == 8


@pytest.mark.unit
class TestEigenvalues:
    """最小正特征值测试"""

    def test_fubini_study_p1_lambda(self):
        """测试 P¹ 上 λ ≈ 2"""
        profile = fubini_study_profile(1, 65)
        report = spectral_report(profile, sectors=3, refine=False)
        assert report.lambda_ == pytest.approx(2.0, rel=1e-2)
        assert report.lambda_tilde == pytest.approx(report.lambda_, rel=1e-9)
        assert report.eta_dim == 3
        assert report.representable_dim == 3
        assert report.lambda_coarse_sectors is not None

    @pytest.mark.parametrize("n", [1, 2])
    def test_kernel_dimension(self, n):
        """测试谱隙规则识别出的核维数"""
        profile = fubini_study_profile(n, 33)
        kernel_dim, gap = classify_kernel(build_L(profile, sectors=2))
        assert kernel_dim == len(KERNEL_SECTORS[n])
        assert gap > 0.0

    @pytest.mark.parametrize("n,floor", [(1, 2.0), (2, 1.0)])
    def test_non_kernel_sectors_positive_definite(self, n, floor):
        """测试非核扇区没有零模，最小特征值不低于 Fubini–Study 阈值"""
        profile = fubini_study_profile(n, 65)
        for k in build_L(profile, sectors=4).sectors:
            if k in KERNEL_SECTORS[n]:
                continue
            operator = sector_operator(profile, k)
            assert operator.size < profile.grid_points
            assert operator.low_eigenvalues(1)[0] >= floor - 1e-2

    def test_decoupled_endpoint_removed(self):
        """测试 k=2 扇区 τ=1 处的端点节点不再作为零能量模式出现"""
        profile = fubini_study_profile(1, 65)
        operator = sector_operator(profile, 2)
        assert operator.nodes[0] == 1
        assert operator.nodes[-1] == profile.grid_points - 2
        q = np.zeros(operator.size)
        q[-1] = 1.0
        assert operator.rayleigh(q) > 1.0

    def test_rayleigh_and_orthogonality(self, perturbed_p1, serial_runner):
        """测试特征向量的 Rayleigh 商与正交性"""
        potential = ricci_potential(perturbed_p1)
        basis = holomorphic_fields(1, perturbed_p1, potential)
        family = build_L_tilde(perturbed_p1, potential, sectors=2, runner=serial_runner)
        solution = smallest_positive_eigenvalue(family, basis, InnerProduct.WEIGHTED, serial_runner)
        assert solution.rayleigh == pytest.approx(solution.value, rel=1e-8)
        assert solution.orthogonality <= 1e-8
        assert solution.value > 0.0

    def test_relaxing_constraint_lowers_minimum(self, perturbed_p1, serial_runner):
        """测试去掉一个约束后最小值不增"""
        basis = holomorphic_fields(1, perturbed_p1)
        family = build_L(perturbed_p1, sectors=2, runner=serial_runner)
        full = smallest_positive_eigenvalue(family, basis, InnerProduct.FLAT, serial_runner)
        for index in range(len(basis.modes)):
            relaxed = smallest_positive_eigenvalue(
                family, basis.without(index), InnerProduct.FLAT, serial_runner
            )
            assert relaxed.value <= full.value + 1e-12

    def test_inner_product_mismatch(self, fs_p1):
        """测试内积选择与算子不匹配"""
        basis = holomorphic_fields(1, fs_p1)
        with pytest.raises(SpectralException):
            smallest_positive_eigenvalue(build_L(fs_p1, sectors=1), basis, InnerProduct.WEIGHTED)

    @pytest.mark.parametrize("fixture_name", ["perturbed_p1", "perturbed_p2"])
    def test_lambda_equivalence(self, fixture_name, request):
        """测试 A₁λ̃ ≤ λ ≤ A₂λ̃"""
        profile = request.getfixturevalue(fixture_name)
        potential = ricci_potential(profile)
        report = spectral_report(profile, potential, sectors=2, refine=False)
        assert lambda_equivalence_check(report, potential.oscillation)


@pytest.mark.unit
class TestBounds:
    """下界检验测试"""

    def test_constants_depend_on_oscillation(self):
        A1, A2 = lemma_one_constants(0.5)
        assert A1 == pytest.approx(np.exp(-0.5))
        assert A1 * A2 == pytest.approx(1.0)
        with pytest.raises(SpectralException):
            lemma_one_constants(-0.1)

    def test_bound_within_tolerance(self):
        """测试容差内的下界通过"""
        result = bound_report(_report(1.9995, 2.5), 2.0, 2.0)
        assert result.passed
        assert result.tolerance == pytest.approx(1e-3)

    def test_bound_violation(self):
        result = bound_report(_report(1.5, 2.5), 2.0, 2.0)
        assert not result.passed
        assert result.lambda_margin == pytest.approx(-0.5)

    def test_nonpositive_threshold_not_asserted(self):
        """测试阈值非正时只报告余量"""
        result = bound_report(_report(0.1, 0.1), -1.0, 0.0)
        assert result.passed
        assert not result.lambda_checked
        assert not result.lambda_tilde_checked
