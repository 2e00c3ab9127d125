import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Any, Callable, Iterable, Iterator, List, Optional, TypeVar

from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class KahanSum:
    """Compensated running sum; feed partials in a fixed order for reproducible totals."""

    __slots__ = ("total", "_c")

    def __init__(self) -> None:
        self.total = 0.0
        self._c = 0.0

    def add(self, value: float) -> None:
        y = float(value) - self._c
        t = self.total + y
        self._c = (t - self.total) - y
        self.total = t


def log_stage(stage: str, **fields: Any) -> None:
    """Emit one structured `key=value` progress line."""
    parts = [f"stage={stage}"]
    for key, value in fields.items():
        if isinstance(value, float):
            value = f"{value:.4g}"
        parts.append(f"{key}={value}")
    logger.info(" ".join(parts))


@contextmanager
def timed(stage: str, **fields: Any) -> Iterator[None]:
    start = time.perf_counter()
    yield
    log_stage(stage, **fields, elapsed_s=time.perf_counter() - start)


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
    desc: Optional[str] = None,
) -> List[R]:
    """Apply `fn` to every item, possibly on a thread pool; results keep input order."""
    items = list(items)
    show = desc is not None and sys.stderr.isatty()
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not show)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, disable=not show))
