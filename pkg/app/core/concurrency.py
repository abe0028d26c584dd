"""
并发执行工具

线程池按提交顺序返回结果，保证输出确定性。
"""

import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

from loguru import logger

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class TaskOutcome:
    """单个任务的执行结果"""
    index: int
    label: str
    result: Any = None
    error: Optional[BaseException] = None
    execution_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ParallelRunner:
    """线程池执行器"""

    max_workers: Optional[int] = None
    stats: Dict[str, float] = field(default_factory=lambda: {"tasks": 0, "failed": 0})
    _stats_lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.max_workers is None:
            from app.config import settings

            self.max_workers = settings.threads
        self.max_workers = max(1, int(self.max_workers))

    def map_ordered(self, func: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """并发执行并按输入顺序返回结果，任一任务失败即抛出其异常"""
        outcomes = self.run_isolated(func, items)
        for outcome in outcomes:
            if outcome.error is not None:
                raise outcome.error
        return [outcome.result for outcome in outcomes]

    def run_isolated(
        self,
        func: Callable[[T], R],
        items: Sequence[T],
        labels: Optional[Iterable[str]] = None,
    ) -> List[TaskOutcome]:
        """并发执行，单个任务的失败不影响其他任务"""
        names = list(labels) if labels is not None else [str(i) for i in range(len(items))]
        outcomes: List[Optional[TaskOutcome]] = [None] * len(items)

        if self.max_workers == 1 or len(items) <= 1:
            for index, item in enumerate(items):
                outcomes[index] = self._execute(func, item, index, names[index])
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                futures = {
                    executor.submit(self._execute, func, item, index, names[index]): index
                    for index, item in enumerate(items)
                }
                for future in as_completed(futures):
                    outcomes[futures[future]] = future.result()

        failed = sum(1 for o in outcomes if o is not None and not o.ok)
        # 同一执行器可能被嵌套任务并发调用
        with self._stats_lock:
            self.stats["tasks"] += len(items)
            self.stats["failed"] += failed
        return [o for o in outcomes if o is not None]

    @staticmethod
    def _execute(func: Callable[[T], R], item: T, index: int, label: str) -> TaskOutcome:
        start_time = time.time()
        try:
            result = func(item)
            return TaskOutcome(index, label, result=result, execution_time=time.time() - start_time)
        except Exception as exc:  # noqa: BLE001 - 失败被隔离并记录
            logger.error(f"并发任务失败 [{label}]: {exc}")
            return TaskOutcome(index, label, error=exc, execution_time=time.time() - start_time)
