"""Build VDC workloads from a base trace.

Each deployment of the base workload becomes one VDC with all-to-all
connectivity: a VM joining the VDC gets a vlink to every member alive at
that tick, and its vlinks are torn down with whichever endpoint dies first.
Vlink bandwidth is compute-proportional: a configurable bandwidth-per-core
(bpc) unit times the core count of the weaker endpoint, so a stronger peer
never floods a weaker one.

Peak VDC size can be capped. Capping splits a deployment by rolling
overflow: VM arrivals keep feeding the current split until its historical
peak reaches the cap, after which arrivals open the next split. Splits are
fully independent VDCs; VMs never link across splits.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from . import _kernels
from .model import VdcEvent, VmRecord, Workload, sort_events


@dataclass(frozen=True)
class GridironConfig:
    """Workload-generation knobs: peak cap P and bandwidth-per-core."""

    peak_cap: int | None  # None: uncapped
    bpc: Fraction

    def __post_init__(self):
        if self.peak_cap is not None and self.peak_cap < 2:
            raise ValueError("peak cap must be >= 2 (a VDC has at least two VMs)")
        if not isinstance(self.bpc, Fraction):
            object.__setattr__(self, "bpc", Fraction(str(self.bpc)))
        if self.bpc <= 0:
            raise ValueError("bpc must be positive")


@dataclass
class VdcAssignment:
    """Mapping of VMs to (possibly split) VDCs for one or more deployments."""

    vm_to_vdc: dict[str, str]
    vdc_parent: dict[str, str]
    vdc_split_index: dict[str, int]


@dataclass(frozen=True)
class VdcManifestRow:
    vdc_id: str
    deployment_id: str
    peak_size: int
    vm_count: int


def peak_size(vms: Sequence[VmRecord]) -> int:
    """Maximum number of the given VMs alive in the same tick."""
    return _kernels.peak_alive([v.create_tick for v in vms],
                               [v.delete_tick for v in vms])


def vlink_bandwidth(cores_a: int, cores_b: int, bpc) -> Fraction:
    """Bandwidth of a vlink: bpc times the weaker endpoint's core count."""
    if cores_a < 1 or cores_b < 1:
        raise ValueError("core counts must be >= 1")
    bpc = Fraction(str(bpc)) if not isinstance(bpc, Fraction) else bpc
    if bpc <= 0:
        raise ValueError("bpc must be positive")
    return bpc * min(cores_a, cores_b)


def roll_overflow(deployment: Sequence[VmRecord], cap: int) -> VdcAssignment:
    """Split one deployment's VMs into peak-capped VDCs by rolling overflow.

    VMs are processed in (create_tick, input order). A deployment whose peak
    never reaches the cap maps to a single VDC named after the deployment;
    otherwise splits are named ``<deployment_id>#<index>`` from 0, and each
    split tracks its own peak so it can roll over in turn.
    """
    if cap < 2:
        raise ValueError("cap must be >= 2")
    if not deployment:
        return VdcAssignment({}, {}, {})
    dep_ids = {v.deployment_id for v in deployment}
    if len(dep_ids) != 1:
        raise ValueError(f"records span multiple deployments: {sorted(dep_ids)}")
    dep_id = deployment[0].deployment_id

    ordered = sorted(range(len(deployment)),
                     key=lambda i: (deployment[i].create_tick, i))
    splits = _kernels.rolling_split(
        [deployment[i].create_tick for i in ordered],
        [deployment[i].delete_tick for i in ordered],
        cap,
    )
    split_count = splits[-1] + 1

    def vdc_name(split: int) -> str:
        return dep_id if split_count == 1 else f"{dep_id}#{split}"

    assignment = VdcAssignment({}, {}, {})
    for pos, rec_idx in enumerate(ordered):
        vdc = vdc_name(splits[pos])
        assignment.vm_to_vdc[deployment[rec_idx].vm_id] = vdc
        if vdc not in assignment.vdc_parent:
            assignment.vdc_parent[vdc] = dep_id
            assignment.vdc_split_index[vdc] = splits[pos]
    return assignment


def _vdc_events(vdc_id: str, members: Sequence[VmRecord], bpc: Fraction,
                out: list[VdcEvent]) -> None:
    """Emit the all-to-all event stream for one VDC's members."""
    ordered = sorted(members, key=lambda v: (v.create_tick, v.vm_id))
    alive: list[VmRecord] = []
    for vm in ordered:
        out.append(VdcEvent.vm_create(vm.create_tick, vdc_id, vm.vm_id,
                                      vm.cores, vm.memory_gb))
        out.append(VdcEvent.vm_delete(vm.delete_tick, vdc_id, vm.vm_id))
        alive = [m for m in alive if m.delete_tick > vm.create_tick]
        for peer in alive:
            bw = vlink_bandwidth(vm.cores, peer.cores, bpc)
            start = vm.create_tick
            end = min(vm.delete_tick, peer.delete_tick)
            out.append(VdcEvent.vlink_create(start, vdc_id, vm.vm_id,
                                             peer.vm_id, bw))
            out.append(VdcEvent.vlink_delete(end, vdc_id, vm.vm_id, peer.vm_id))
        alive.append(vm)


def build_deployment(deployment: Sequence[VmRecord], config: GridironConfig
                     ) -> tuple[list[VdcEvent], list[VdcManifestRow], VdcAssignment]:
    """Events and manifest rows for one deployment (events not yet sorted)."""
    if not deployment:
        return [], [], VdcAssignment({}, {}, {})
    if config.peak_cap is None:
        dep_id = deployment[0].deployment_id
        assignment = VdcAssignment(
            {v.vm_id: dep_id for v in deployment}, {dep_id: deployment[0].deployment_id},
            {dep_id: 0})
    else:
        assignment = roll_overflow(deployment, config.peak_cap)

    by_vdc: dict[str, list[VmRecord]] = {}
    for v in deployment:
        by_vdc.setdefault(assignment.vm_to_vdc[v.vm_id], []).append(v)

    events: list[VdcEvent] = []
    manifest: list[VdcManifestRow] = []
    for vdc_id in sorted(by_vdc):
        members = by_vdc[vdc_id]
        _vdc_events(vdc_id, members, config.bpc, events)
        manifest.append(VdcManifestRow(
            vdc_id=vdc_id,
            deployment_id=assignment.vdc_parent[vdc_id],
            peak_size=peak_size(members),
            vm_count=len(members),
        ))
    return events, manifest, assignment


def group_by_deployment(records: Iterable[VmRecord]) -> dict[str, list[VmRecord]]:
    """Bucket records per deployment, preserving input order within each."""
    groups: dict[str, list[VmRecord]] = {}
    for r in records:
        groups.setdefault(r.deployment_id, []).append(r)
    return groups


def build_workload(records: Iterable[VmRecord], config: GridironConfig
                   ) -> tuple[Workload, list[VdcManifestRow], VdcAssignment]:
    """Full in-memory build: sorted workload, VDC manifest, VM assignment."""
    groups = group_by_deployment(records)
    events: list[VdcEvent] = []
    manifest: list[VdcManifestRow] = []
    assignment = VdcAssignment({}, {}, {})
    for dep_id in sorted(groups):
        evs, rows, asg = build_deployment(groups[dep_id], config)
        events.extend(evs)
        manifest.extend(rows)
        assignment.vm_to_vdc.update(asg.vm_to_vdc)
        assignment.vdc_parent.update(asg.vdc_parent)
        assignment.vdc_split_index.update(asg.vdc_split_index)
    workload = Workload(events=tuple(sort_events(events)),
                        vdc_count=len(assignment.vdc_parent),
                        vm_count=len(assignment.vm_to_vdc))
    return workload, manifest, assignment
