from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import click

T = TypeVar("T")
R = TypeVar("R")


class _SequentialExecutor():
    """Context manager that mimics ThreadPoolExecutor without worker threads"""

    def __init__(self, *args, **kargs):
        pass

    def __enter__(self, *args, **kargs):
        return self

    def __exit__(*exc_info):
        pass

    @staticmethod
    def map(fun, *iterable, **kargs):
        return map(fun, *iterable)


class ParallelUtils:
    """Ordered parallel map used by the grid scans"""

    @staticmethod
    def executor(threads: int):
        if threads is None or threads <= 1:
            return _SequentialExecutor()
        return ThreadPoolExecutor(max_workers=threads)

    @staticmethod
    def map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1,
            progress: bool = False, label: Optional[str] = None) -> List[R]:
        """Apply fn to every item; results keep input order for any thread count"""
        items = list(items)
        results: List[R] = []
        with ParallelUtils.executor(threads) as pool:
            mapped = pool.map(fn, items)
            if progress and items:
                with click.progressbar(mapped, length=len(items), label=label or "working",
                                       file=click.get_text_stream("stderr")) as bar:
                    for value in bar:
                        results.append(value)
            else:
                results.extend(mapped)
        return results
