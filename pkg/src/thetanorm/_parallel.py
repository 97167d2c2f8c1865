import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor


def default_threads():
    return os.cpu_count() or 1


def ordered_map(fn, items, threads=1):
    """Yield ``fn(item)`` in input order, keeping at most ``2 * threads`` jobs in flight.

    Results never depend on ``threads``: merging downstream is by position only.
    """
    if threads is None:
        threads = default_threads()
    if threads <= 1:
        for item in items:
            yield fn(item)
        return
    window = 2 * threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending = deque()
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
