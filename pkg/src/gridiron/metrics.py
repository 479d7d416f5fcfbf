"""Workload characterization: per-tick footprints and peak-size statistics.

Footprints sample the state after all of a tick's events (deletes, then
creates) have applied. The series covers ticks [0, last event tick); the
last tick of a complete workload is pure teardown, so it is excluded rather
than reported as a zero sample.
"""
from __future__ import annotations

import csv
from array import array
from dataclasses import dataclass
from typing import IO, Iterable

from . import _kernels
from .model import EventKind, VdcEvent, VmRecord


@dataclass
class FootprintSeries:
    """Per-tick totals over alive VMs and vlinks."""

    cores: list[float]
    memory_gb: list[float]
    bandwidth_mbps: list[float]

    @property
    def horizon(self) -> int:
        return len(self.cores)

    def write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh)
        writer.writerow(["tick", "cores", "memory_gb", "bandwidth_mbps"])
        for t in range(self.horizon):
            writer.writerow([t, self.cores[t], self.memory_gb[t],
                             self.bandwidth_mbps[t]])

    def summary(self) -> dict:
        def band(series):
            if not series:
                return {"min": None, "max": None, "variance_band_pct": None}
            return {"min": min(series), "max": max(series),
                    "variance_band_pct": variance_band(series)}

        return {"horizon_ticks": self.horizon,
                "cores": band(self.cores),
                "memory_gb": band(self.memory_gb),
                "bandwidth_mbps": band(self.bandwidth_mbps)}


class _DeltaAccum:
    def __init__(self):
        self.ticks = array("q")
        self.deltas = array("d")

    def post(self, start: int, end: int, weight: float):
        self.ticks.append(start)
        self.deltas.append(weight)
        self.ticks.append(end)
        self.deltas.append(-weight)

    def series(self, horizon: int) -> list[float]:
        return _kernels.tick_deltas_to_series(self.ticks, self.deltas, horizon)


def footprint(events: Iterable[VdcEvent], horizon: int | None = None
              ) -> FootprintSeries:
    """Sweep a sorted event stream into per-tick footprint series."""
    cores = _DeltaAccum()
    memory = _DeltaAccum()
    bandwidth = _DeltaAccum()
    vm_specs: dict[tuple[str, str], tuple[int, float, int]] = {}
    link_specs: dict[tuple[str, str, str], tuple[float, int]] = {}
    max_tick = 0
    for ev in events:
        max_tick = max(max_tick, ev.tick)
        if ev.kind is EventKind.VM_CREATE:
            vm_specs[(ev.vdc_id, ev.vm_id)] = (ev.cores, float(ev.memory_gb), ev.tick)
        elif ev.kind is EventKind.VM_DELETE:
            c, m, start = vm_specs.pop((ev.vdc_id, ev.vm_id))
            cores.post(start, ev.tick, c)
            memory.post(start, ev.tick, m)
        elif ev.kind is EventKind.VLINK_CREATE:
            key = (ev.vdc_id, ev.link_a, ev.link_b)
            link_specs[key] = (float(ev.bandwidth_mbps), ev.tick)
        else:
            bw, start = link_specs.pop((ev.vdc_id, ev.link_a, ev.link_b))
            bandwidth.post(start, ev.tick, bw)
    for (c, m, start) in vm_specs.values():  # still alive at stream end
        cores.post(start, max_tick + 1, c)
        memory.post(start, max_tick + 1, m)
    for (bw, start) in link_specs.values():
        bandwidth.post(start, max_tick + 1, bw)

    if horizon is None:
        horizon = max_tick
    return FootprintSeries(
        cores=cores.series(horizon),
        memory_gb=memory.series(horizon),
        bandwidth_mbps=bandwidth.series(horizon),
    )


def base_footprint(records: Iterable[VmRecord], horizon: int | None = None
                   ) -> FootprintSeries:
    """Cores/memory footprint straight from base records (no vlinks).

    Independent of the event path in :func:`footprint`; the two must agree
    on any workload built from the same records.
    """
    cores = _DeltaAccum()
    memory = _DeltaAccum()
    max_delete = 0
    for r in records:
        cores.post(r.create_tick, r.delete_tick, r.cores)
        memory.post(r.create_tick, r.delete_tick, float(r.memory_gb))
        max_delete = max(max_delete, r.delete_tick)
    if horizon is None:
        horizon = max_delete
    return FootprintSeries(
        cores=cores.series(horizon),
        memory_gb=memory.series(horizon),
        bandwidth_mbps=[0.0] * horizon,
    )


def bandwidth_footprint(vdc_groups: Iterable[list[VmRecord]], bpc,
                        horizon: int | None = None) -> list[float]:
    """Bandwidth series for all-to-all VDCs, without materializing events.

    ``vdc_groups`` yields the member records of one VDC at a time, so memory
    stays bounded by the largest VDC. Pair overlap math matches the builder:
    a vlink lives from the later create to the earlier delete and carries
    bpc times the weaker endpoint's cores.
    """
    from .build import vlink_bandwidth  # local import to avoid a cycle

    acc = _DeltaAccum()
    max_delete = 0
    for members in vdc_groups:
        ordered = sorted(members, key=lambda v: (v.create_tick, v.vm_id))
        alive: list[VmRecord] = []
        for vm in ordered:
            max_delete = max(max_delete, vm.delete_tick)
            alive = [m for m in alive if m.delete_tick > vm.create_tick]
            for peer in alive:
                bw = float(vlink_bandwidth(vm.cores, peer.cores, bpc))
                acc.post(vm.create_tick, min(vm.delete_tick, peer.delete_tick), bw)
            alive.append(vm)
    if horizon is None:
        horizon = max_delete
    return acc.series(horizon)


def variance_band(series) -> float | None:
    """Spread of a series as (max - min) / max, in percent.

    Undefined (None) when the series peaks at zero.
    """
    if not len(series):
        raise ValueError("variance band of an empty series")
    hi = max(series)
    lo = min(series)
    if hi == 0:
        return None
    return (hi - lo) / hi * 100.0


@dataclass
class PeakSizeDistribution:
    histogram: dict[int, int]
    p50: int
    p90: int
    p99: int
    max: int

    @property
    def total(self) -> int:
        return sum(self.histogram.values())

    def fraction_below(self, size: int) -> float:
        below = sum(n for peak, n in self.histogram.items() if peak < size)
        return below / self.total

    def to_json_dict(self) -> dict:
        return {"p50": self.p50, "p90": self.p90, "p99": self.p99,
                "max": self.max, "vdc_count": self.total,
                "histogram": {str(k): v for k, v in sorted(self.histogram.items())}}

    def write_histogram_dat(self, fh: IO[str]) -> None:
        """Two-column histogram data, plottable with gnuplot."""
        fh.write("# peak_size vdc_count\n")
        for peak in sorted(self.histogram):
            fh.write(f"{peak} {self.histogram[peak]}\n")


def nearest_rank(sorted_values, q: int):
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest value."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("percentile of empty data")
    rank = min(n, max(1, (q * n + 99) // 100))
    return sorted_values[rank - 1]


def peak_distribution(peaks: Iterable[int]) -> PeakSizeDistribution:
    values = sorted(peaks)
    if not values:
        raise ValueError("no VDC peaks to summarize")
    histogram: dict[int, int] = {}
    for p in values:
        histogram[p] = histogram.get(p, 0) + 1
    return PeakSizeDistribution(
        histogram=histogram,
        p50=nearest_rank(values, 50),
        p90=nearest_rank(values, 90),
        p99=nearest_rank(values, 99),
        max=values[-1],
    )


def vdc_peaks_from_events(events: Iterable[VdcEvent]) -> dict[str, int]:
    """Per-VDC peak alive-VM counts, derived purely from the event stream."""
    alive: dict[str, int] = {}
    peaks: dict[str, int] = {}
    for ev in events:
        if ev.kind is EventKind.VM_CREATE:
            n = alive.get(ev.vdc_id, 0) + 1
            alive[ev.vdc_id] = n
            if n > peaks.get(ev.vdc_id, 0):
                peaks[ev.vdc_id] = n
        elif ev.kind is EventKind.VM_DELETE:
            alive[ev.vdc_id] = alive.get(ev.vdc_id, 0) - 1
    return peaks
