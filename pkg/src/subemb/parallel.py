"""Worker-count resolution and deterministic chunked execution."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ParameterError

ENV_THREADS = "SUBEMB_THREADS"


def worker_count() -> int:
    """SUBEMB_THREADS if set, else the hardware parallelism."""
    raw = os.environ.get(ENV_THREADS)
    if raw is None:
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError as exc:
        raise ParameterError(f"{ENV_THREADS} must be an integer, got {raw!r}") from exc
    if count < 1:
        raise ParameterError(f"{ENV_THREADS} must be >= 1, got {count}")
    return count


def run_chunked(fn, total: int, workers: int | None = None) -> None:
    """Call fn(lo, hi) over a partition of range(total).

    Results must be written into preallocated storage indexed by
    position, which keeps the outcome independent of scheduling.
    """
    workers = worker_count() if workers is None else workers
    if workers <= 1 or total <= 1:
        fn(0, total)
        return
    workers = min(workers, total)
    step = (total + workers - 1) // workers
    bounds = [(lo, min(lo + step, total)) for lo in range(0, total, step)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for future in [pool.submit(fn, lo, hi) for lo, hi in bounds]:
            future.result()
