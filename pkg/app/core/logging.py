"""
日志配置
"""

import sys
import logging
from pathlib import Path
from typing import Optional, Union

from loguru import logger

# settings将在需要时动态导入以避免循环依赖


class InterceptHandler(logging.Handler):
    """拦截标准库日志并转发给loguru"""

    def emit(self, record: logging.LogRecord) -> None:
        # 获取对应的loguru等级
        try:
            level: Union[str, int] = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        # 查找调用者
        frame, depth = logging.currentframe(), 2
        while frame is not None and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{message}</level>"
)


def setup_logging(
    level: Optional[str] = None,
    log_dir: Optional[Union[str, Path]] = None,
    to_file: Optional[bool] = None,
) -> None:
    """设置应用日志

    控制台日志写入stderr，stdout保留给JSON报告输出。
    """

    # 动态导入settings以避免循环依赖
    from app.config import settings

    console_level = (level or ("DEBUG" if settings.debug else settings.log_level)).upper()
    write_files = settings.log_to_file if to_file is None else to_file

    # 移除默认的loguru处理器
    logger.remove()

    # 控制台日志
    logger.add(
        sys.stderr,
        format=LOG_FORMAT,
        level=console_level,
        colorize=True,
        backtrace=True,
        diagnose=settings.debug,
    )

    if write_files:
        directory = Path(log_dir or settings.log_dir)
        directory.mkdir(parents=True, exist_ok=True)

        # 运行日志
        logger.add(
            directory / "kfl.log",
            format=LOG_FORMAT,
            level="INFO",
            rotation="1 day",
            retention="30 days",
            compression="zip",
            backtrace=True,
            diagnose=False,
        )

        # 错误日志
        logger.add(
            directory / "kfl_error.log",
            format=LOG_FORMAT,
            level="ERROR",
            rotation="1 week",
            retention="90 days",
            compression="zip",
            backtrace=True,
            diagnose=False,
        )

        # 流演化日志单独归档
        logger.add(
            directory / "flow.log",
            format=LOG_FORMAT,
            level="DEBUG",
            rotation="1 day",
            retention="7 days",
            filter=lambda record: record["extra"].get("name") == "flow",
        )

    # 拦截标准库日志
    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)

    # 第三方数值库只保留警告
    for logger_name in ["matplotlib", "numba"]:
        logging.getLogger(logger_name).setLevel(logging.WARNING)


def get_logger(name: str):
    """获取特定名称的日志器"""
    return logger.bind(name=name)


# 创建模块专用日志器
geometry_logger = get_logger("geometry")
positivity_logger = get_logger("positivity")
spectral_logger = get_logger("spectral")
flow_logger = get_logger("flow")
functionals_logger = get_logger("functionals")
harness_logger = get_logger("harness")
