"""Seeded deterministic Monte Carlo samplers.

Every sample index gets its own RNG stream derived from (global seed, index),
so results are independent of thread count and a 2N-sample run reproduces the
first N samples of the N-sample run exactly (nested refinement).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .config import AnnulusSpec, Exclusion
from .errors import InputError
from .polymap import PolynomialMap

T = TypeVar("T")

_MAX_DRAWS = 200  # rejection-sampling budget per index


def rng_for(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Deterministic per-sample generator."""
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(n)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def annulus_point(
    map: PolynomialMap,
    region: AnnulusSpec,
    rng: np.random.Generator,
    exclusion: Exclusion | None = None,
) -> np.ndarray | None:
    """One point with eps_min <= ||x|| <= eps_max, off V and off the
    exclusion zone; None when the rejection budget is exhausted."""
    for _ in range(_MAX_DRAWS):
        r = rng.uniform(region.eps_min, region.eps_max)
        x = r * unit_vector(rng, map.n)
        fx = map.eval(x)
        if np.linalg.norm(fx) <= region.f_floor:
            continue
        if exclusion is not None and not exclusion.allows(fx):
            continue
        return x
    return None


def sphere_point(
    map: PolynomialMap,
    radius: float,
    f_floor: float,
    rng: np.random.Generator,
    exclusion: Exclusion | None = None,
) -> np.ndarray | None:
    """One point on the sphere of the given radius, off V and exclusion."""
    for _ in range(_MAX_DRAWS):
        x = radius * unit_vector(rng, map.n)
        fx = map.eval(x)
        if np.linalg.norm(fx) <= f_floor:
            continue
        if exclusion is not None and not exclusion.allows(fx):
            continue
        return x
    return None


def log_uniform_radius(
    rng: np.random.Generator, eps: float, decades: float = 2.0
) -> float:
    """Radius log-uniform in (eps/10^decades, eps]."""
    return float(eps * 10.0 ** (-decades * rng.uniform(0.0, 1.0)))


def indexed_map(
    fn: Callable[[int], T],
    count: int,
    threads: int = 1,
) -> list[T]:
    """fn(i) for i in range(count), merged in index order.

    The chunked thread pool changes scheduling only; outputs are identical
    for every thread count because fn derives all randomness from i.
    """
    if count < 0:
        raise InputError(f"sample count must be >= 0, got {count}")
    if threads <= 1 or count < 2:
        return [fn(i) for i in range(count)]
    chunk = max(1, count // (threads * 4))
    ranges = [range(lo, min(lo + chunk, count)) for lo in range(0, count, chunk)]

    def run(r: range) -> list[T]:
        return [fn(i) for i in r]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(run, ranges))
    out: list[T] = []
    for part in parts:
        out.extend(part)
    return out
