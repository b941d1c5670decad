"""Seeded, splittable random streams.

Every random draw in the package comes from a Philox generator keyed by a
top-level seed plus a tuple of integer stream keys, so a replicate's draws
depend only on ``(seed, keys)`` and never on scheduling order.
"""
from __future__ import annotations

import os
import secrets

import numpy as np

SEED_BITS = 63


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def fresh_seed() -> int:
    """Seed for runs where the caller supplied none; always echoed in outputs."""
    return secrets.randbits(SEED_BITS)


def worker_count(requested: int | None = None) -> int:
    """Worker processes to use, capped by the TVLAD_THREADS environment variable."""
    cap = os.environ.get("TVLAD_THREADS")
    n = requested if requested is not None else 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Order-preserving map; results are identical for any worker count."""
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * n))))
