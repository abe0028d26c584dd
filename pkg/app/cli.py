"""
命令行接口 - 流演化运行、谱与正性检验以及验收套件

JSON 报告写入 stdout，日志写入 stderr 与日志文件。
退出码：0 成功，1 验收失败，2 配置错误，3 数值中止。
"""

import sys
from pathlib import Path
from typing import Optional

import click

from app.config import settings
from app.core.data_export import data_exporter
from app.core.data_import import data_importer
from app.core.exceptions import KahlerLabException, exception_to_exit_code
from app.core.logging import harness_logger, setup_logging


def _emit(document) -> None:
    click.echo(data_exporter.to_json(document))


def _fail(exc: KahlerLabException) -> None:
    harness_logger.error(f"[{exc.code}] {exc.message}")
    click.echo(data_exporter.to_json({"error": exc.code, "message": exc.message}))
    sys.exit(exception_to_exit_code(exc))


@click.group()
@click.version_option(version=settings.app_version)
@click.option('--log-level', default=None,
              type=click.Choice(['debug', 'info', 'warning', 'error'], case_sensitive=False),
              help='控制台日志级别')
@click.option('--no-log-file', is_flag=True, help='不写入文件日志')
def main(log_level: Optional[str], no_log_file: bool):
    """Kahler Flow Lab - Kähler–Ricci 流数值实验室"""
    if not no_log_file:
        settings.ensure_directories()
    setup_logging(level=log_level, to_file=False if no_log_file else None)


@main.command('run-flow')
@click.option('--scenario', 'scenario_path', required=True,
              type=click.Path(dir_okay=False, path_type=Path), help='场景文件')
@click.option('--out', 'out_dir', default=None,
              type=click.Path(file_okay=False, path_type=Path), help='输出目录')
def run_flow_command(scenario_path: Path, out_dir: Optional[Path]):
    """运行一个流演化场景"""
    from app.services.harness import harness_service, load_scenario

    try:
        scenario = load_scenario(scenario_path)
    except KahlerLabException as exc:
        _fail(exc)
        return

    outcome = harness_service.run_scenario(scenario, out_dir)
    _emit(outcome.manifest)
    sys.exit(outcome.exit_code)


@main.command()
@click.option('--filter', 'name_filter', default=None, help='只运行名称包含该字符串的验收标准')
@click.option('--seed', default=None, type=int, help='随机种子')
@click.option('--out', 'out_dir', default=None,
              type=click.Path(file_okay=False, path_type=Path), help='输出目录')
def verify(name_filter: Optional[str], seed: Optional[int], out_dir: Optional[Path]):
    """执行验收套件"""
    from app.services.harness import harness_service

    try:
        report = harness_service.verify_all(name_filter, seed, out_dir)
    except KahlerLabException as exc:
        _fail(exc)
        return

    _emit(report)
    sys.exit(0 if report.passed else 1)


@main.command()
@click.option('--profile', 'profile_path', required=True,
              type=click.Path(dir_okay=False, path_type=Path), help='动量剖面文件')
@click.option('--sectors', default=None, type=int, help='Fourier扇区截断 K')
@click.option('--no-refine', is_flag=True, help='跳过网格加密误差估计')
def spectrum(profile_path: Path, sectors: Optional[int], no_refine: bool):
    """计算 λ、λ̃ 与特征值下界"""
    from app.services.spectral import spectral_report, verify_eigenvalue_lower_bounds

    try:
        profile = data_importer.read_profile(profile_path)
        report = spectral_report(profile, sectors=sectors, refine=not no_refine)
        bounds = verify_eigenvalue_lower_bounds(profile, report)
    except KahlerLabException as exc:
        _fail(exc)
        return

    _emit({**report.to_json_dict(), "bounds": bounds.model_dump(by_alias=True)})


@main.command('check-positivity')
@click.option('--tensor', 'tensor_path', required=True,
              type=click.Path(dir_okay=False, path_type=Path), help='曲率张量文件')
@click.option('--seed', default=None, type=int, help='随机种子')
@click.option('--restarts', default=None, type=int, help='随机重启次数')
def check_positivity(tensor_path: Path, seed: Optional[int], restarts: Optional[int]):
    """Griffiths 与 Nakano 证书"""
    from app.services.positivity import positivity_report

    try:
        tensor = data_importer.read_tensor(tensor_path)
        report = positivity_report(tensor, seed=seed, restarts=restarts)
    except KahlerLabException as exc:
        _fail(exc)
        return

    _emit(report)


@main.command()
@click.option('--profile', 'profile_path', required=True,
              type=click.Path(dir_okay=False, path_type=Path), help='动量剖面文件')
def futaki(profile_path: Path):
    """全纯向量场基底上的 Futaki 不变量"""
    from app.services.functionals import futaki_values

    try:
        profile = data_importer.read_profile(profile_path)
        report = futaki_values(profile)
    except KahlerLabException as exc:
        _fail(exc)
        return

    _emit(report)


@main.command('export-fixture')
@click.argument('name')
@click.option('--out', 'out_path', required=True,
              type=click.Path(dir_okay=False, path_type=Path), help='输出剖面文件')
@click.option('--grid-points', default=None, type=int, help='τ网格点数')
def export_fixture(name: str, out_path: Path, grid_points: Optional[int]):
    """将内置夹具写出为剖面文件"""
    from app.services.fixtures import load_fixture

    try:
        profile = load_fixture(name, grid_points)
    except KahlerLabException as exc:
        _fail(exc)
        return

    data_exporter.write_profile(profile, out_path)
    _emit({"fixture": name, "path": str(out_path), "grid_points": profile.grid_points})


if __name__ == '__main__':
    main()
