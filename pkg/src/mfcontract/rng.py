"""Counter-based normal draws keyed by (seed, stream, row).

Rows (particles or games) are grouped in fixed blocks of ``BLOCK`` rows.
Each block owns an independent Philox key derived from
``(seed, stream, block)``; row ``i`` always receives the same draws for a
given number of columns, whatever the total row count or the number of
worker threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 4096

STREAMS = {
    "equilibrium": 1,
    "agent": 2,
    "fixed_point": 3,
    "nplayer": 4,
    "reference": 5,
}


def _key(seed: int, stream: int, block: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, stream, block]).generate_state(2, np.uint64)


def block_normals(seed: int, stream: int, block: int, cols: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=_key(seed, stream, block)))
    return gen.standard_normal((BLOCK, cols))


def normals(seed: int, stream: str | int, rows: int, cols: int, start: int = 0, workers: int = 1) -> np.ndarray:
    """Standard normals for rows ``start .. start+rows-1``, shape ``(rows, cols)``."""
    stream_id = STREAMS[stream] if isinstance(stream, str) else int(stream)
    out = np.empty((rows, cols))
    if rows == 0:
        return out
    first, last = start // BLOCK, (start + rows - 1) // BLOCK

    def fill(block):
        draws = block_normals(seed, stream_id, block, cols)
        lo = max(start, block * BLOCK)
        hi = min(start + rows, (block + 1) * BLOCK)
        out[lo - start:hi - start] = draws[lo - block * BLOCK:hi - block * BLOCK]

    blocks = range(first, last + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for b in blocks:
            fill(b)
    return out
