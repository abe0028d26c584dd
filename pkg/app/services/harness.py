"""
运行驱动服务

场景加载、流演化运行与数据输出，以及验收套件。
"""

import filecmp
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.core.concurrency import ParallelRunner
from app.core.data_export import content_hash, data_exporter
from app.core.data_import import data_importer
from app.core.exceptions import (
    ConfigurationException,
    KahlerLabException,
    exception_to_exit_code,
)
from app.core.logging import harness_logger
from app.schemas.reports import CriterionResult, RunManifest, VerifyReport
from app.schemas.scenario import DEFAULT_PERELMAN_BOUND, Scenario
from app.services.fixtures import load_fixture
from app.services.flow import (
    TimeSeries,
    dotY_inequality_check,
    exponential_rate_fit,
    run_flow,
)
from app.services.functionals import futaki_metric_independence, kenergy_along_run
from app.services.geometry import (
    MomentumProfile,
    MetricField,
    curvature_fd_oracle,
    einstein_defect,
    fubini_study_profile,
    oracle_defect,
    perturbed_profile,
)
from app.services.positivity import cone_sweep, demailly_average, demailly_closed_form

SERIES_FILE = "series.csv"
AUDIT_FILE = "audit.csv"
MANIFEST_FILE = "manifest.json"
PROFILE_FILE = "initial_profile.txt"


@dataclass
class ScenarioOutcome:
    """单个场景的运行结果"""
    name: str
    exit_code: int
    manifest: Optional[RunManifest] = None
    series: Optional[TimeSeries] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.exit_code == 0


def load_scenario(path: Path) -> Scenario:
    """读取扁平场景文件，相对路径以场景文件目录为基准"""
    path = Path(path)
    values = data_importer.read_scenario(path)
    return Scenario.from_mapping(values, base_dir=path.parent)


def initial_profile(scenario: Scenario) -> MomentumProfile:
    if scenario.fixture is not None:
        profile = load_fixture(scenario.fixture, scenario.flow.grid_points)
    else:
        profile = data_importer.read_profile(scenario.profile)
    if scenario.n is not None and scenario.n != profile.n:
        raise ConfigurationException(f"场景维数 n={scenario.n} 与剖面维数 n={profile.n} 不一致")
    return profile


class HarnessService:
    """运行驱动服务"""

    def run_scenario(
        self,
        scenario: Scenario,
        out_dir: Optional[Path] = None,
        runner: Optional[ParallelRunner] = None,
    ) -> ScenarioOutcome:
        """运行一个场景并写出序列CSV、审计CSV与运行清单

        失败时仍写出清单，记录退出码与中止原因。
        """
        out = Path(out_dir or scenario.out or Path(settings.output_dir) / scenario.name)
        out.mkdir(parents=True, exist_ok=True)
        harness_logger.info(f"运行场景: {scenario.name}, 输出目录={out}")

        series: Optional[TimeSeries] = None
        exit_code, status, reason = 0, "completed", None
        profile_hash, n, grid_points = "", scenario.n or 0, scenario.flow.grid_points or 0
        try:
            profile = initial_profile(scenario)
            n, grid_points = profile.n, profile.grid_points
            profile_path = data_exporter.write_profile(profile, out / PROFILE_FILE)
            profile_hash = content_hash(profile_path)
            series = run_flow(scenario.flow, profile, runner=runner, label=scenario.name)
            data_exporter.write_series(series.rows, out / SERIES_FILE)
            data_exporter.write_audit(series.rows, out / AUDIT_FILE)
        except KahlerLabException as exc:
            exit_code = exception_to_exit_code(exc)
            status = "halted" if exit_code == 3 else "failed"
            reason = exc.message
            harness_logger.error(f"场景失败: {scenario.name}, 退出码={exit_code}, 原因={reason}")

        manifest = RunManifest(
            scenario=scenario.name,
            n=n,
            grid_points=grid_points,
            seed=scenario.seed,
            config=scenario.flow.model_dump(mode="json"),
            initial_profile_hash=profile_hash,
            series_file=SERIES_FILE,
            audit_file=AUDIT_FILE,
            status=status,
            exit_code=exit_code,
            halt_reason=reason,
            samples=len(series) if series is not None else 0,
            final_time=series.rows[-1]["t"] if series is not None and series.rows else 0.0,
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        data_exporter.write_json(manifest, out / MANIFEST_FILE)
        return ScenarioOutcome(scenario.name, exit_code, manifest, series, reason)

    def run_scenarios(
        self,
        scenarios: Sequence[Scenario],
        out_root: Optional[Path] = None,
        runner: Optional[ParallelRunner] = None,
    ) -> List[ScenarioOutcome]:
        """在线程池中隔离运行多个场景，单个场景内部串行"""
        runner = runner or ParallelRunner()
        root = Path(out_root or settings.output_dir)
        outcomes = runner.run_isolated(
            lambda scenario: self.run_scenario(
                scenario, root / scenario.name, ParallelRunner(max_workers=1)
            ),
            list(scenarios),
            labels=[scenario.name for scenario in scenarios],
        )
        results = []
        for outcome, scenario in zip(outcomes, scenarios):
            if outcome.ok:
                results.append(outcome.result)
            else:
                results.append(
                    ScenarioOutcome(scenario.name, exception_to_exit_code(outcome.error),
                                    error=str(outcome.error))
                )
        return results

    def verify_all(
        self,
        name_filter: Optional[str] = None,
        seed: Optional[int] = None,
        out_dir: Optional[Path] = None,
        runner: Optional[ParallelRunner] = None,
    ) -> VerifyReport:
        """执行验收套件，每条标准独立计时、独立失败"""
        seed = settings.default_seed if seed is None else seed
        out = Path(out_dir or Path(settings.output_dir) / "verify")
        context = VerifyContext(seed=seed, out_dir=out)
        selected = [
            entry for entry in CRITERIA
            if name_filter is None or name_filter.lower() in entry[1].lower()
        ]
        if not selected:
            raise ConfigurationException(f"没有匹配的验收标准: {name_filter}")

        runner = runner or ParallelRunner()
        outcomes = runner.run_isolated(
            lambda entry: entry[2](context), selected, labels=[entry[1] for entry in selected]
        )

        criteria = []
        for (index, name, _), outcome in zip(selected, outcomes):
            if outcome.ok:
                passed, details = outcome.result
            else:
                passed, details = False, {"error": str(outcome.error)}
            criteria.append(
                CriterionResult(
                    index=index,
                    name=name,
                    passed=bool(passed),
                    details=_plain(details),
                    runtime=round(outcome.execution_time, 3),
                )
            )
            harness_logger.info(f"验收标准 {index} [{name}]: {'通过' if passed else '失败'}")

        report = VerifyReport(seed=seed, filter=name_filter, criteria=criteria)
        data_exporter.write_json(report, out / "verify.json")
        return report


def _plain(value: Any) -> Any:
    """numpy 标量与数组转为 JSON 可序列化的值"""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# 验收标准
# ---------------------------------------------------------------------------


class VerifyContext:
    """验收标准共享的状态；收敛运行只执行一次"""

    def __init__(self, seed: int, out_dir: Path):
        self.seed = seed
        self.out_dir = out_dir
        self._lock = threading.Lock()
        self._convergence: Optional[TimeSeries] = None

    def convergence_run(self) -> TimeSeries:
        with self._lock:
            if self._convergence is None:
                scenario = Scenario.from_mapping(
                    {"name": "perturbed-p1", "fixture": "perturbed-p1", "seed": str(self.seed)}
                )
                outcome = harness_service.run_scenario(
                    scenario, self.out_dir / "perturbed-p1", ParallelRunner(max_workers=1)
                )
                if outcome.series is None:
                    raise KahlerLabException(f"收敛运行失败: {outcome.error}", "RUN_FAILED")
                self._convergence = outcome.series
            return self._convergence


Criterion = Callable[[VerifyContext], Tuple[bool, Dict[str, Any]]]


def demailly_identity(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    rng = np.random.default_rng(context.seed)
    worst = 0.0
    for n in (1, 2, 3):
        for q in (3, 4, 5):
            for _ in range(100):
                x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                alpha, beta = (int(v) for v in rng.integers(1, n + 1, size=2))
                literal = demailly_average(x, y, q, alpha, beta)
                closed = demailly_closed_form(x, y, alpha, beta)
                scale = max(abs(closed), float(np.linalg.norm(x) * np.linalg.norm(y)))
                worst = max(worst, abs(literal - closed) / scale)
    return worst <= 1e-12, {"max_relative_error": worst}


def einstein_fixed_point(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    details: Dict[str, Any] = {}
    passed = True
    for n in (1, 2):
        profile = fubini_study_profile(n, 65)
        closed = einstein_defect(profile)
        coarse = oracle_defect(profile, 0.3, h=2e-3)
        fine = oracle_defect(profile, 0.3, h=1e-3)
        ratio = coarse / fine if fine > 0.0 else float("inf")
        # 平坦度量上预言机必须给出零曲率
        flat = curvature_fd_oracle(MetricField.flat(n), np.zeros(n, dtype=complex))
        flat_defect = float(np.abs(flat.components).max())
        ok = closed <= 1e-8 and coarse <= 1e-4 and abs(ratio - 4.0) <= 0.8 and flat_defect <= 1e-12
        details[f"n={n}"] = {
            "closed_form": closed,
            "oracle": coarse,
            "oracle_ratio": ratio,
            "flat_oracle": flat_defect,
        }
        passed = passed and ok
    return passed, details


def positivity_cones(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    results = [cone_sweep(n, 1000, context.seed) for n in (2, 3)]
    return all(result.passed for result in results), {
        f"n={result.n}": result.as_dict() for result in results
    }


def flow_convergence(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    series = context.convergence_run()
    final = series.rows[-1]
    fit = exponential_rate_fit(series, "sup_ric_minus_g")
    bounded = series.perelman_bounded(DEFAULT_PERELMAN_BOUND)
    passed = (
        final["sup_ric_minus_g"] <= 1e-3
        and fit.rate > 0.0
        and series.positivity_preserved()
        and bounded
    )
    return passed, {
        "final_sup_R_minus_1": final["sup_ric_minus_g"],
        "rate": fit.rate,
        "positivity_preserved": series.positivity_preserved(),
        "perelman_bounded": bounded,
        "min_griffiths_margin": float(np.nanmin(series.column("griffiths_margin"))),
        "class_correction_total": series.final_state.class_correction_total,
    }


def eigenvalue_bounds(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    rows = context.convergence_run().expensive_rows()
    bound_failures = sum(1 for row in rows if not row["bounds_passed"])
    sandwich_failures = 0
    for row in rows:
        A1, A2 = row["A1"], row["A2"]
        lam, lam_tilde = row["lambda"], row["lambda_tilde"]
        if not (A1 * lam_tilde <= lam * (1 + 1e-10) and lam <= A2 * lam_tilde * (1 + 1e-10)):
            sandwich_failures += 1
    return bound_failures == 0 and sandwich_failures == 0, {
        "samples": len(rows),
        "bound_failures": bound_failures,
        "sandwich_failures": sandwich_failures,
        "min_lambda": min(row["lambda"] for row in rows),
    }


def dotY_self_test_series() -> TimeSeries:
    """Ẏ = 0 而右端为负的合成序列，检验必须将其标记"""
    rows = []
    for k in range(5):
        row: Dict[str, Any] = {"t": 0.1 * k, "Y": 1.0, "Z": 0.0}
        if k == 2:
            row.update({"lambda": 2.0, "futaki_proj": 0.0, "refinement_error": 0.0})
        rows.append(row)
    return TimeSeries(n=1, rows=rows, label="dotY-self-test")


def dotY_inequality(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    check = dotY_inequality_check(context.convergence_run())
    flagged = not dotY_inequality_check(dotY_self_test_series()).passed
    return check.passed and flagged, {
        "samples": int(check.residuals.size),
        "violations": int(check.violations.sum()),
        "worst_margin": check.worst_margin,
        "self_test_flagged": flagged,
    }


def futaki_vanishing(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    profiles = [
        perturbed_profile(1, amplitude, 97, skew=skew, label=f"p1-{index}")
        for index, (amplitude, skew) in enumerate(
            [(0.0, 0.0), (0.3, 0.0), (0.6, 0.5), (0.8, -0.5), (0.5, 1.0)]
        )
    ]
    sweep = futaki_metric_independence(profiles)
    return sweep.max_abs <= 1e-6 and sweep.spread <= 1e-6, {
        "labels": sweep.labels,
        "max_abs": sweep.max_abs,
        "spread": sweep.spread,
    }


def kenergy_monotone(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    series = context.convergence_run()
    kenergy = kenergy_along_run(series.times, series.column("Y"))
    final = series.rows[-1]["int_R_minus_n_sq"]
    monotone = kenergy.is_nonincreasing()
    return monotone and final <= 1e-4, {
        "nonincreasing": monotone,
        "final_K": float(kenergy.values[-1]),
        "final_int_R_minus_n_sq": final,
    }


def chen_cone_trend(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    last = context.convergence_run().expensive_rows()[-1]
    target = last["chen_target"]
    margin = last["chen_margin"]
    return abs(margin - target) <= 0.1 * abs(target), {
        "chen_margin": margin,
        "target": target,
        "nu": last["nu"],
    }


def determinism(context: VerifyContext) -> Tuple[bool, Dict[str, Any]]:
    values = {
        "name": "determinism", "fixture": "perturbed-p1", "t_max": "0.5",
        "expensive_dt": "0.25", "seed": str(context.seed),
    }
    scenario = Scenario.from_mapping(values)
    first = context.out_dir / "determinism" / "a"
    second = context.out_dir / "determinism" / "b"
    for out in (first, second):
        harness_service.run_scenario(scenario, out, ParallelRunner(max_workers=1))
    identical = all(
        filecmp.cmp(first / name, second / name, shallow=False)
        for name in (SERIES_FILE, AUDIT_FILE, PROFILE_FILE)
    )
    return identical, {"identical": identical, "directories": [str(first), str(second)]}


CRITERIA: List[Tuple[int, str, Criterion]] = [
    (1, "demailly-identity", demailly_identity),
    (2, "einstein-fixed-point", einstein_fixed_point),
    (3, "positivity-cones", positivity_cones),
    (4, "flow-convergence", flow_convergence),
    (5, "eigenvalue-bounds", eigenvalue_bounds),
    (6, "dotY-inequality", dotY_inequality),
    (7, "futaki-vanishing", futaki_vanishing),
    (8, "kenergy-monotone", kenergy_monotone),
    (9, "chen-cone-trend", chen_cone_trend),
    (10, "determinism", determinism),
]


# 全局服务实例
harness_service = HarnessService()
