"""Deterministic chunked map-reduce over path index ranges.

The chunk decomposition depends only on (n_items, chunk_size); threads merely
execute chunks concurrently and partial results are combined in chunk order,
so outputs are bit-identical for every thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

__all__ = ["map_chunks", "combine_complex_mean"]


def map_chunks(n_items: int, chunk_size: int, fn: Callable[[int, int], object],
               threads: int = 1) -> list:
    """Apply fn(start, stop) over fixed chunks of range(n_items); ordered results."""
    ranges = [(a, min(a + chunk_size, n_items)) for a in range(0, n_items, chunk_size)]
    if threads <= 1 or len(ranges) == 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def combine_complex_mean(partials: Sequence[tuple]) -> tuple:
    """Combine per-chunk (count, sum, sum_re2, sum_im2) into mean and stderr.

    Summation runs in chunk order with scalar accumulators, which pins the
    rounding pattern independently of the worker count.
    """
    n = 0
    total = 0.0 + 0.0j
    re2 = 0.0
    im2 = 0.0
    for cn, cs, cre2, cim2 in partials:
        n += cn
        total += cs
        re2 += cre2
        im2 += cim2
    if n == 0:
        return 0.0j, 0.0, 0
    mean = total / n
    if n == 1:
        return mean, 0.0, n
    var_re = max(re2 - n * mean.real ** 2, 0.0) / (n - 1)
    var_im = max(im2 - n * mean.imag ** 2, 0.0) / (n - 1)
    stderr = float(np.sqrt(max(var_re, var_im) / n))
    return mean, stderr, n
