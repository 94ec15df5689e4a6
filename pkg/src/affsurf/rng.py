"""Counter-indexed random streams and an order-preserving parallel map.

Every Monte Carlo routine splits its work into tasks keyed by integers and
draws from ``stream(seed, *key)``; results therefore do not depend on how
many workers execute the tasks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def pmap(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Map ``fn`` over ``items`` preserving order, optionally with threads."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def fsum_mean(values: Iterable[float]) -> float:
    vals = list(values)
    return math.fsum(vals) / len(vals)


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Order-insensitive (compensated) sample mean and standard error."""
    vals = [float(v) for v in values]
    m = len(vals)
    mean = math.fsum(vals) / m
    if m < 2:
        return mean, float("nan")
    var = math.fsum((v - mean) ** 2 for v in vals) / (m - 1)
    return mean, math.sqrt(var / m)
