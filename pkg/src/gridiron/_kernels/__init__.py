"""Hot numeric kernels: compiled extension core with a pure-Python fallback.

The compiled module ``_speedups`` is built from Cython at install time. When
it is missing (no compiler, source checkout) or when ``GRIDIRON_PURE_PYTHON=1``
is set, the pure twins in ``_pure`` are selected instead. Both expose the
same three operations over interval data:

* ``peak_alive``            peak concurrent-interval count
* ``rolling_split``         peak-capped split assignment in arrival order
* ``tick_deltas_to_series`` dense prefix-summed per-tick series

``benchmarks/bench_kernels.py`` compares the two implementations.
"""
from __future__ import annotations

import os
from array import array

from . import _pure

_compiled = None
if os.environ.get("GRIDIRON_PURE_PYTHON") != "1":
    try:
        from . import _speedups as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "pure"


def _as_q(seq):
    if isinstance(seq, array) and seq.typecode == "q":
        return seq
    return array("q", seq)


def _as_d(seq):
    if isinstance(seq, array) and seq.typecode == "d":
        return seq
    return array("d", seq)


def peak_alive(create_ticks, delete_ticks) -> int:
    """Peak number of intervals alive at once; alive on [create, delete)."""
    if _compiled is not None:
        return _compiled.peak_alive(_as_q(create_ticks), _as_q(delete_ticks))
    return _pure.peak_alive(create_ticks, delete_ticks)


def rolling_split(create_ticks, delete_ticks, cap: int) -> list[int]:
    """Split index per interval under a historical-peak cap; see ``_pure``."""
    if _compiled is not None:
        return _compiled.rolling_split(_as_q(create_ticks), _as_q(delete_ticks), cap)
    return _pure.rolling_split(create_ticks, delete_ticks, cap)


def tick_deltas_to_series(ticks, deltas, horizon: int) -> list[float]:
    """Prefix-summed dense series of length ``horizon`` from sparse deltas."""
    if _compiled is not None:
        return _compiled.tick_deltas_to_series(_as_q(ticks), _as_d(deltas), horizon)
    return _pure.tick_deltas_to_series(ticks, deltas, horizon)
