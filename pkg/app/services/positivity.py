"""
曲率型张量的 Griffiths / Nakano 正性

所有计算先把张量变换到 g-幺正标架，单位向量均指 g-单位向量。
张量约定 T[j,i,l,k] = T_{j̄il̄k}，Nakano 矩阵 H[(i,k),(j,l)] = T_{j̄il̄k}，
二次型 Q(ζ) = vᴴHv，v = conj(ζ)。
"""

import itertools
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from app.config import settings
from app.core.concurrency import ParallelRunner
from app.core.exceptions import PositivityException
from app.core.logging import positivity_logger
from app.schemas.reports import PositivityReport
from app.services.geometry import CurvatureTensor, bisectional, ricci_and_scalar

INV_SQRT2_MINUS_ONE = 1.0 / np.sqrt(2.0) - 1.0


# ---------------------------------------------------------------------------
# 标准张量
# ---------------------------------------------------------------------------


def gg_tensor(n: int) -> np.ndarray:
    """幺正标架下的 g⊗g：δ_{ji}δ_{lk}（不具有 Kähler 对称性）"""
    eye = np.eye(n, dtype=complex)
    return np.einsum("ji,lk->jilk", eye, eye)


def swap_tensor(n: int) -> np.ndarray:
    """δ_{jk}δ_{li}"""
    eye = np.eye(n, dtype=complex)
    return np.einsum("jk,li->jilk", eye, eye)


def chen_tensor(n: int) -> np.ndarray:
    """g⊗g + swap，双截面值为 |V|²|W|² + |⟨V,W⟩|²"""
    return gg_tensor(n) + swap_tensor(n)


def ricci_product(ricci: np.ndarray) -> np.ndarray:
    """Ric⊗g：Ric[j,i]δ_{lk}"""
    n = ricci.shape[-1]
    return np.einsum("...ji,lk->...jilk", ricci, np.eye(n, dtype=complex))


def framed(tensor: CurvatureTensor, metric: Optional[np.ndarray] = None) -> CurvatureTensor:
    """g-幺正标架下的张量"""
    if metric is not None:
        tensor = CurvatureTensor(
            tensor.n, tensor.components, np.asarray(metric, dtype=complex),
            tensor.tau, tensor.point, tensor.label,
        )
    if np.array_equal(tensor.metric, np.eye(tensor.n)):
        return tensor
    return tensor.in_unitary_frame()


def conjugation_defect(components: np.ndarray) -> float:
    return float(np.abs(components - components.transpose(1, 0, 3, 2).conj()).max())


# ---------------------------------------------------------------------------
# Nakano 形式
# ---------------------------------------------------------------------------


def symmetric_basis(n: int) -> np.ndarray:
    """对称 ζ 的实正交基，形状 (n², n(n+1)/2)"""
    columns = []
    for i in range(n):
        for k in range(i, n):
            column = np.zeros(n * n)
            if i == k:
                column[i * n + k] = 1.0
            else:
                column[i * n + k] = column[k * n + i] = 1.0 / np.sqrt(2.0)
            columns.append(column)
    return np.stack(columns, axis=1)


def skew_basis(n: int) -> np.ndarray:
    """反对称 ζ 的实正交基，形状 (n², n(n−1)/2)"""
    columns = []
    for i in range(n):
        for k in range(i + 1, n):
            column = np.zeros(n * n)
            column[i * n + k] = 1.0 / np.sqrt(2.0)
            column[k * n + i] = -1.0 / np.sqrt(2.0)
            columns.append(column)
    if not columns:
        return np.zeros((n * n, 0))
    return np.stack(columns, axis=1)


def nakano_matrix(components: np.ndarray) -> np.ndarray:
    """H[(i,k),(j,l)] = T[j,i,l,k]，支持前置批量维"""
    n = components.shape[-1]
    batch = components.shape[:-4]
    axes = tuple(range(len(batch)))
    offset = len(batch)
    order = axes + tuple(offset + a for a in (1, 3, 0, 2))
    H = components.transpose(order).reshape(batch + (n * n, n * n))
    return 0.5 * (H + np.swapaxes(H, -1, -2).conj())


@dataclass(frozen=True)
class NakanoForm:
    """T⊗T 上的 Hermitian 形式"""
    n: int
    H: np.ndarray

    def quadratic(self, zeta: np.ndarray) -> float:
        """Q(ζ) = T_{j̄il̄k} ζ̄^{jl} ζ^{ik}"""
        v = np.asarray(zeta, dtype=complex).conj().reshape(-1)
        return float(np.vdot(v, self.H @ v).real)

    @property
    def min_full(self) -> float:
        return float(np.linalg.eigvalsh(self.H)[0])

    @property
    def min_sym(self) -> float:
        S = symmetric_basis(self.n)
        return float(np.linalg.eigvalsh(S.T @ self.H @ S)[0])

    def skew_defect(self) -> float:
        """H 在反对称子空间上的最大分量"""
        K = skew_basis(self.n)
        if K.shape[1] == 0:
            return 0.0
        return float(np.abs(self.H @ K).max())


def nakano_form(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray] = None,
    require_kahler: bool = True,
) -> NakanoForm:
    """构造 Nakano 形式

    平移后的张量（含 g⊗g、Ric⊗g）不具 Kähler 对称性，以 require_kahler=False
    调用，此时只要求共轭对称。
    """
    frame = framed(tensor, metric)
    T = frame.components
    scale = max(1.0, float(np.abs(T).max()))
    tolerance = settings.tol_algebraic * scale
    if require_kahler:
        defect = frame.symmetry_defect()
        if defect > tolerance:
            raise PositivityException(f"张量不满足Kähler对称性: defect={defect:.3e}")
    else:
        defect = conjugation_defect(T)
        if defect > tolerance:
            raise PositivityException(f"张量不满足共轭对称性: defect={defect:.3e}")
    return NakanoForm(frame.n, nakano_matrix(T))


def nakano_min_sym(tensor: CurvatureTensor, require_kahler: bool = True) -> float:
    return nakano_form(tensor, require_kahler=require_kahler).min_sym


def nakano_min_full(tensor: CurvatureTensor, require_kahler: bool = True) -> float:
    return nakano_form(tensor, require_kahler=require_kahler).min_full


# ---------------------------------------------------------------------------
# Griffiths 极小化
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GriffithsSearch:
    """交替特征向量迭代的最优结果"""
    value: float
    V: np.ndarray
    W: np.ndarray
    restarts: int
    iterations: int


def _random_unit(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    vectors = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def _minimize_form(M: np.ndarray, partner: np.ndarray, weighted: bool) -> Tuple[np.ndarray, np.ndarray]:
    """批量求 xᴴMx / xᴴNx 的最小值与极小向量

    weighted 时 N = I + uuᴴ（u 为单位伙伴向量），否则 N = I。
    """
    M = 0.5 * (M + np.swapaxes(M, -1, -2).conj())
    if not weighted:
        values, vectors = np.linalg.eigh(M)
        return vectors[:, :, 0], values[:, 0]
    n = M.shape[-1]
    projector = np.einsum("ri,rj->rij", partner, partner.conj())
    root = np.eye(n)[None] + INV_SQRT2_MINUS_ONE * projector
    values, vectors = np.linalg.eigh(root @ M @ root)
    x = np.einsum("rij,rj->ri", root, vectors[:, :, 0])
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x, values[:, 0]


def _alternate(
    T: np.ndarray,
    V: np.ndarray,
    W: np.ndarray,
    weighted: bool,
    max_iter: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """对 V、W 交替求最小特征向量，目标值单调不增"""
    n = T.shape[0]
    Tmat = T.reshape(n * n, n * n)
    scale = max(1.0, float(np.abs(T).max()))
    best = np.inf
    values = np.full(V.shape[0], np.inf)
    iteration = 0
    for iteration in range(1, max_iter + 1):
        WW = np.einsum("rl,rk->rlk", W.conj(), W).reshape(-1, n * n)
        M_W = (WW @ Tmat.T).reshape(-1, n, n)
        V, _ = _minimize_form(M_W, W, weighted)
        VV = np.einsum("rj,ri->rji", V.conj(), V).reshape(-1, n * n)
        M_V = (VV @ Tmat).reshape(-1, n, n)
        W, values = _minimize_form(M_V, V, weighted)
        current = float(values.min())
        if abs(best - current) <= 1e-14 * scale:
            best = current
            break
        best = current
    return V, W, values, iteration


def _search(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray],
    restarts: Optional[int],
    seed: Optional[int],
    max_iter: Optional[int],
    weighted: bool,
) -> GriffithsSearch:
    T = framed(tensor, metric).components
    restarts = restarts or settings.griffiths_restarts
    max_iter = max_iter or settings.griffiths_max_iter
    rng = np.random.default_rng(settings.default_seed if seed is None else seed)
    V0 = _random_unit(rng, restarts, tensor.n)
    W0 = _random_unit(rng, restarts, tensor.n)
    V, W, values, iterations = _alternate(T, V0, W0, weighted, max_iter)
    best = int(np.argmin(values))
    value = float(values[best])
    if not weighted:
        unitary = CurvatureTensor(tensor.n, T, np.eye(tensor.n, dtype=complex))
        value = bisectional(unitary, V[best], W[best])
    return GriffithsSearch(value, V[best], W[best], restarts, iterations)


def griffiths_search(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray] = None,
    restarts: Optional[int] = None,
    seed: Optional[int] = None,
    max_iter: Optional[int] = None,
) -> GriffithsSearch:
    """单位向量对上双截面曲率的最优极小（随机重启）"""
    return _search(tensor, metric, restarts, seed, max_iter, weighted=False)


def griffiths_min(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray] = None,
    restarts: Optional[int] = None,
    seed: Optional[int] = None,
    max_iter: Optional[int] = None,
) -> float:
    return griffiths_search(tensor, metric, restarts, seed, max_iter).value


def griffiths_dense_grid(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray] = None,
    points_per_axis: int = 32,
    polish: bool = True,
) -> float:
    """n = 2 的穷举网格预言机

    V = (cos a, sin a·e^{iφ})，a ∈ [0, π/2]，φ ∈ [0, 2π)；V、W 各 p² 个点，
    共 p⁴ 对。polish 时以网格最优点为起点做一次局部交替迭代。
    """
    if tensor.n != 2:
        raise PositivityException("穷举网格预言机仅支持 n = 2")
    T = framed(tensor, metric).components
    angles = np.linspace(0.0, np.pi / 2.0, points_per_axis)
    phases = np.linspace(0.0, 2.0 * np.pi, points_per_axis, endpoint=False)
    a, phi = np.meshgrid(angles, phases, indexing="ij")
    U = np.stack([np.cos(a), np.sin(a) * np.exp(1j * phi)], axis=-1).reshape(-1, 2)
    outer = np.einsum("pj,pi->pji", U.conj(), U).reshape(-1, 4)
    values = (outer @ T.reshape(4, 4) @ outer.T).real
    flat = int(np.argmin(values))
    best = float(values.flat[flat])
    if not polish:
        return best
    row, column = divmod(flat, values.shape[1])
    _, _, polished, _ = _alternate(
        T, U[row][None], U[column][None], weighted=False, max_iter=settings.griffiths_max_iter
    )
    return min(best, float(polished[0]))


# ---------------------------------------------------------------------------
# 单位根平均
# ---------------------------------------------------------------------------


def roots_of_unity_tuples(n: int, q: int) -> np.ndarray:
    """全部 q 次单位根 n 元组，形状 (qⁿ, n)"""
    roots = np.exp(2j * np.pi * np.arange(q) / q)
    return np.array(list(itertools.product(roots, repeat=n)), dtype=complex)


def demailly_average(
    x: np.ndarray, y: np.ndarray, q: int, alpha: int, beta: int
) -> complex:
    """q^{−n} Σ_σ x′_σ conj(y′_σ) σ_α conj(σ_β)，逐项求和

    x′_σ = Σ_λ x^λ conj(σ_λ)；指标 alpha、beta 从 1 开始。
    """
    if q < 3:
        raise PositivityException(f"单位根阶数必须 ≥ 3: q={q}")
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = x.size
    if not (1 <= alpha <= n and 1 <= beta <= n):
        raise PositivityException(f"指标越界: alpha={alpha}, beta={beta}, n={n}")
    sigma = roots_of_unity_tuples(n, q)
    x_prime = sigma.conj() @ x
    y_prime = sigma.conj() @ y
    terms = x_prime * y_prime.conj() * sigma[:, alpha - 1] * sigma[:, beta - 1].conj()
    return complex(terms.sum() / q**n)


def demailly_closed_form(x: np.ndarray, y: np.ndarray, alpha: int, beta: int) -> complex:
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if alpha != beta:
        return complex(x[alpha - 1] * np.conj(y[beta - 1]))
    return complex(np.vdot(y, x))


# ---------------------------------------------------------------------------
# 锥蕴含与阈值
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PositivityThreshold:
    """锥余量参数"""
    c: float
    nu: float
    n: int
    c_t: Optional[float] = None

    @property
    def target(self) -> float:
        """Chen 锥余量的极限 (2ν−1)/(n+1)"""
        return (2.0 * self.nu - 1.0) / (self.n + 1)


def griffiths_implies_nakano_shifted(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray] = None,
    c_shift: Optional[float] = None,
    seed: Optional[int] = None,
    restarts: Optional[int] = None,
    griffiths_value: Optional[float] = None,
) -> PositivityReport:
    """检验 R + Ric⊗g − n·c·g⊗g 的 Nakano 正性

    g⊗g 在单位向量对上恒为 1，故假设余量 griffiths_min(R − c·g⊗g)
    等于 griffiths_min(R) − c。c_shift 缺省时取证书余量
    griffiths_min(R) − tol_optimizer。
    """
    frame = framed(tensor, metric)
    n = frame.n
    seed = settings.default_seed if seed is None else seed
    restarts = restarts or settings.griffiths_restarts
    if griffiths_value is None:
        griffiths_value = griffiths_min(frame, restarts=restarts, seed=seed)
    if c_shift is None:
        c_shift = griffiths_value - settings.tol_optimizer

    ricci = ricci_and_scalar(frame).ricci
    shifted = frame.components + ricci_product(ricci) - n * c_shift * gg_tensor(n)
    form = nakano_form(
        CurvatureTensor(n, shifted, frame.metric, label=f"{frame.label}-shifted"),
        require_kahler=False,
    )
    hypothesis_margin = griffiths_value - c_shift
    hypothesis = c_shift >= 0.0 and hypothesis_margin >= -settings.tol_certificate
    min_sym = form.min_sym
    min_full = form.min_full
    certified = {
        "hypothesis": bool(hypothesis),
        "nakano": bool(min_sym >= -settings.tol_certificate),
        "nakano_full": bool(min_full >= -settings.tol_certificate),
    }
    positivity_logger.debug(
        f"平移蕴含检验: c={c_shift:.6g}, 假设余量={hypothesis_margin:.3e}, "
        f"Nakano对称极小={min_sym:.3e}"
    )
    return PositivityReport(
        griffiths_min=griffiths_value,
        nakano_min_sym=min_sym,
        nakano_min_full=min_full,
        certified=certified,
        samples_used=restarts,
        seed=seed,
        restarts=restarts,
        c_shift=c_shift,
        hypothesis_margin=hypothesis_margin,
    )


def positivity_report(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
    restarts: Optional[int] = None,
) -> PositivityReport:
    """单个张量的 Griffiths 与 Nakano 证书"""
    seed = settings.default_seed if seed is None else seed
    restarts = restarts or settings.griffiths_restarts
    frame = framed(tensor, metric)
    value = griffiths_min(frame, restarts=restarts, seed=seed)
    form = nakano_form(frame)
    min_sym, min_full = form.min_sym, form.min_full
    return PositivityReport(
        griffiths_min=value,
        nakano_min_sym=min_sym,
        nakano_min_full=min_full,
        certified={
            "griffiths": bool(value >= -settings.tol_certificate),
            "nakano_sym": bool(min_sym >= -settings.tol_certificate),
            "nakano": bool(min_full >= -settings.tol_certificate),
        },
        samples_used=restarts,
        seed=seed,
        restarts=restarts,
    )


def dim2_equivalence_check(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
    oracle: bool = False,
) -> bool:
    """n ≤ 2 时 Griffiths 证书与对称 Nakano 证书一致"""
    if tensor.n > 2:
        raise PositivityException(f"等价性仅在 n ≤ 2 成立: n={tensor.n}")
    frame = framed(tensor, metric)
    if oracle and frame.n == 2:
        value = griffiths_dense_grid(frame)
    else:
        value = griffiths_min(frame, seed=seed)
    griffiths_ok = value >= -settings.tol_certificate
    nakano_ok = nakano_form(frame).min_sym >= -settings.tol_certificate
    return bool(griffiths_ok == nakano_ok)


def chen_cone_monitor(
    tensor: CurvatureTensor,
    metric: Optional[np.ndarray] = None,
    threshold: Optional[PositivityThreshold] = None,
    seed: Optional[int] = None,
    restarts: Optional[int] = None,
) -> float:
    """使 R − c(g⊗g + swap) Griffiths 非负的最大 c

    等于单位向量对上 B(V,W)/(1 + |⟨V,W⟩|²) 的极小值，由广义特征值交替迭代求得。
    """
    search = _search(tensor, metric, restarts, seed, None, weighted=True)
    if threshold is not None:
        positivity_logger.debug(
            f"Chen锥余量: c={search.value:.6g}, 目标={threshold.target:.6g}, ν={threshold.nu:.6g}"
        )
    return search.value


@dataclass(frozen=True)
class LemmaThresholds:
    """特征值下界的 Nakano 阈值"""
    c_lambda: float
    c_lambda_tilde: float


def lemma_thresholds(tensor: CurvatureTensor, metric: Optional[np.ndarray] = None) -> LemmaThresholds:
    """R + Ric⊗g − c·g⊗g 与 R + (1−c)·g⊗g 保持 Nakano 非负的最大 c

    H(g⊗g) = I，故两个阈值都是移位矩阵的最小特征值。
    """
    frame = framed(tensor, metric)
    thresholds = lemma_thresholds_batch(frame.components[None])
    return LemmaThresholds(float(thresholds[0][0]), float(thresholds[1][0]))


def lemma_thresholds_batch(components: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """批量版本，输入形状 (P, n, n, n, n)，幺正标架"""
    n = components.shape[-1]
    ricci = np.einsum("pjikk->pji", components)
    with_ricci = nakano_matrix(components + ricci_product(ricci))
    with_metric = nakano_matrix(components + gg_tensor(n)[None])
    c_lambda = np.linalg.eigvalsh(with_ricci)[:, 0]
    c_lambda_tilde = np.linalg.eigvalsh(with_metric)[:, 0]
    return c_lambda, c_lambda_tilde


# ---------------------------------------------------------------------------
# 随机张量与锥扫描
# ---------------------------------------------------------------------------


def kahler_symmetrize(components: np.ndarray) -> np.ndarray:
    """对 Kähler 对称群及共轭取平均"""
    T = 0.5 * (components + components.transpose(2, 1, 0, 3))
    T = 0.5 * (T + T.transpose(0, 3, 2, 1))
    return 0.5 * (T + T.transpose(1, 0, 3, 2).conj())


def random_kahler_tensor(
    n: int,
    rng: np.random.Generator,
    nakano_target: Optional[float] = None,
) -> CurvatureTensor:
    """随机 Kähler 对称张量

    nakano_target 给定时沿 g⊗g + swap 平移，使对称 Nakano 极小值恰为该值
    （H(g⊗g + swap) 在对称子空间上为 2I）。
    """
    shape = (n, n, n, n)
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    T = kahler_symmetrize(raw)
    if nakano_target is not None:
        current = NakanoForm(n, nakano_matrix(T)).min_sym
        T = T + 0.5 * (nakano_target - current) * chen_tensor(n)
    return CurvatureTensor(n, T, np.eye(n, dtype=complex), label="random")


@dataclass
class ConeSweepResult:
    """随机张量的锥性质统计"""
    n: int
    count: int
    seed: int
    nakano_certified: int = 0
    implication_failures: int = 0
    worst_implied_griffiths: float = np.inf
    max_skew_defect: float = 0.0
    disagreements: Optional[int] = None
    shift_checked: int = 0
    shift_failures: int = 0
    worst_shift_nakano: float = np.inf

    @property
    def passed(self) -> bool:
        return (
            self.implication_failures == 0
            and self.max_skew_defect <= settings.tol_algebraic
            and (self.disagreements is None or self.disagreements == 0)
            and self.shift_failures == 0
        )

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "count": self.count,
            "seed": self.seed,
            "nakano_certified": self.nakano_certified,
            "implication_failures": self.implication_failures,
            "worst_implied_griffiths": None if np.isinf(self.worst_implied_griffiths)
            else self.worst_implied_griffiths,
            "max_skew_defect": self.max_skew_defect,
            "disagreements": self.disagreements,
            "shift_checked": self.shift_checked,
            "shift_failures": self.shift_failures,
            "worst_shift_nakano": None if np.isinf(self.worst_shift_nakano)
            else self.worst_shift_nakano,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class _TensorVerdict:
    nakano_ok: bool
    griffiths: float
    skew_defect: float
    agreement: Optional[bool]
    shift_nakano: Optional[float]


def _evaluate(tensor: CurvatureTensor, seed: int) -> _TensorVerdict:
    form = nakano_form(tensor)
    scale = max(1.0, float(np.abs(tensor.components).max()))
    nakano_ok = form.min_sym >= -settings.tol_certificate
    value = griffiths_min(tensor, seed=seed)
    agreement = None
    if tensor.n == 2:
        agreement = (value >= -settings.tol_certificate) == nakano_ok
    shift_nakano = None
    c_shift = value - settings.tol_optimizer
    if c_shift >= 0.0:
        report = griffiths_implies_nakano_shifted(
            tensor, c_shift=c_shift, seed=seed, griffiths_value=value
        )
        shift_nakano = report.nakano_min_sym
    return _TensorVerdict(nakano_ok, value, form.skew_defect() / scale, agreement, shift_nakano)


def cone_sweep(
    n: int,
    count: int,
    seed: Optional[int] = None,
    runner: Optional[ParallelRunner] = None,
) -> ConeSweepResult:
    """随机 Kähler 对称张量上的锥性质扫描

    张量一半落在 Nakano 锥内，一半落在锥外，对称 Nakano 极小值的
    绝对值取自 [0.05, 0.5]。
    """
    seed = settings.default_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    tensors: List[CurvatureTensor] = []
    for _ in range(count):
        magnitude = rng.uniform(0.05, 0.5)
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        tensors.append(random_kahler_tensor(n, rng, nakano_target=sign * magnitude))

    runner = runner or ParallelRunner()
    verdicts = runner.map_ordered(
        lambda item: _evaluate(item[1], seed + item[0]), list(enumerate(tensors))
    )

    result = ConeSweepResult(n=n, count=count, seed=seed)
    if n == 2:
        result.disagreements = 0
    for verdict in verdicts:
        result.max_skew_defect = max(result.max_skew_defect, verdict.skew_defect)
        if verdict.nakano_ok:
            result.nakano_certified += 1
            result.worst_implied_griffiths = min(result.worst_implied_griffiths, verdict.griffiths)
            if verdict.griffiths < -settings.tol_certificate:
                result.implication_failures += 1
        if verdict.agreement is False and result.disagreements is not None:
            result.disagreements += 1
        if verdict.shift_nakano is not None:
            result.shift_checked += 1
            result.worst_shift_nakano = min(result.worst_shift_nakano, verdict.shift_nakano)
            if verdict.shift_nakano < -settings.tol_certificate:
                result.shift_failures += 1

    positivity_logger.info(
        f"锥扫描完成: n={n}, 数量={count}, Nakano证书={result.nakano_certified}, "
        f"蕴含失败={result.implication_failures}, 不一致={result.disagreements}, "
        f"平移失败={result.shift_failures}"
    )
    return result
