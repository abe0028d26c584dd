"""
并发执行工具测试
"""

from concurrent.futures import ThreadPoolExecutor

import pytest

from app.core.concurrency import ParallelRunner


@pytest.mark.unit
class TestParallelRunner:
    """线程池执行器测试"""

    def test_results_in_input_order(self):
        runner = ParallelRunner(max_workers=4)
        assert runner.map_ordered(lambda x: x * x, list(range(20))) == [x * x for x in range(20)]
        assert runner.stats["tasks"] == 20

    def test_failure_isolated(self):
        """测试单个任务失败不影响其他任务"""
        runner = ParallelRunner(max_workers=2)

        def task(x):
            if x == 3:
                raise ValueError("bad item")
            return x

        outcomes = runner.run_isolated(task, list(range(6)))
        assert [o.ok for o in outcomes] == [True, True, True, False, True, True]
        assert runner.stats == {"tasks": 6, "failed": 1}
        with pytest.raises(ValueError):
            runner.map_ordered(task, list(range(6)))

    def test_shared_runner_stats_consistent(self):
        """测试多个线程共用一个执行器时任务计数不丢失"""
        runner = ParallelRunner(max_workers=2)
        callers, batches, size = 8, 25, 4

        def caller(_):
            for _ in range(batches):
                runner.map_ordered(lambda x: x + 1, list(range(size)))

        with ThreadPoolExecutor(max_workers=callers) as executor:
            list(executor.map(caller, range(callers)))
        assert runner.stats["tasks"] == callers * batches * size
        assert runner.stats["failed"] == 0
