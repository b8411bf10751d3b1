"""Process-pool helper for per-track measure computation.

Uses fork so workers share the recording read-only; results are reassembled
in track order, keeping output deterministic regardless of worker count.
"""

from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor

_CTX: dict = {}


def _init(tracks, params, thw_only) -> None:
    _CTX["by_id"] = {t.track_id: t for t in tracks}
    _CTX["params"] = params
    _CTX["thw_only"] = thw_only
    _CTX["tracks"] = {t.track_id: t for t in tracks}


def _work(track_id: int):
    from .measures import compute_series

    track = _CTX["tracks"][track_id]
    return compute_series(track, _CTX["by_id"], _CTX["params"], _CTX["thw_only"])


def series_parallel(tracks, params, thw_only, jobs: int):
    ids = [t.track_id for t in tracks]
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(
        max_workers=jobs, mp_context=ctx,
        initializer=_init, initargs=(tracks, params, thw_only),
    ) as pool:
        chunk = max(1, len(ids) // (jobs * 4))
        results = list(pool.map(_work, ids, chunksize=chunk))
    return dict(zip(ids, results))
