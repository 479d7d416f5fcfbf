"""Pure-Python implementations of the hot kernels.

Drop-in twins of the compiled versions in ``_speedups``. The selecting
package (:mod:`gridiron._kernels`) decides at import time which set is used.
All functions treat an interval as alive on ``[create, delete)``.
"""
from __future__ import annotations

import heapq


def peak_alive(create_ticks, delete_ticks):
    """Peak number of concurrently alive intervals.

    At a boundary tick, deletions apply before creations, so back-to-back
    intervals never overlap.
    """
    n = len(create_ticks)
    if n != len(delete_ticks):
        raise ValueError("create/delete tick arrays differ in length")
    if n == 0:
        return 0
    creates = sorted(create_ticks)
    deletes = sorted(delete_ticks)
    alive = 0
    peak = 0
    di = 0
    for c in creates:
        while di < n and deletes[di] <= c:
            alive -= 1
            di += 1
        alive += 1
        if alive > peak:
            peak = alive
    return peak


def rolling_split(create_ticks, delete_ticks, cap):
    """Assign intervals, in arrival order, to split indices under a peak cap.

    Arrivals must already be sorted by creation tick. The current split keeps
    accepting arrivals until its historical peak reaches ``cap``; the next
    arrival after that opens a fresh split (which tracks its own peak, so a
    split can itself overflow into another). Deletions never reopen a split.

    Returns a list with one split index per input interval, starting at 0.
    """
    if cap < 2:
        raise ValueError("cap must be >= 2")
    n = len(create_ticks)
    if n != len(delete_ticks):
        raise ValueError("create/delete tick arrays differ in length")
    out = [0] * n
    heap: list = []  # delete ticks of the current split's alive members
    split = 0
    peak = 0
    for i in range(n):
        c = create_ticks[i]
        if peak >= cap:
            split += 1
            heap.clear()
            peak = 0
        while heap and heap[0] <= c:
            heapq.heappop(heap)
        heapq.heappush(heap, delete_ticks[i])
        if len(heap) > peak:
            peak = len(heap)
        out[i] = split
    return out


def tick_deltas_to_series(ticks, deltas, horizon):
    """Accumulate per-tick deltas into a dense prefix-summed series.

    ``series[t]`` is the sum of all deltas posted at ticks ``<= t``. Deltas
    at ticks outside ``[0, horizon)`` are ignored, which makes open-ended
    intervals (delete tick past the horizon) contribute through the end.
    """
    if len(ticks) != len(deltas):
        raise ValueError("tick/delta arrays differ in length")
    series = [0.0] * horizon
    for t, d in zip(ticks, deltas):
        if 0 <= t < horizon:
            series[t] += d
    acc = 0.0
    for t in range(horizon):
        acc += series[t]
        series[t] = acc
    return series
