"""Datacenter-awareness math for sizing vlink bandwidths.

Given the fattest per-server aggregate uplink C and a peak VDC size P, three
bounds keep an all-to-all workload from being impossible to place for
network reasons alone:

* per-vlink:    B <= C                (one vlink can always cross one uplink)
* per-VM aggr.: B <= C / (P - 1)      (a VM peers with at most P - 1 others)
* colocation:   B <= C / (P / 2)^2    (an even split concentrates (P/2)^2
                                       crossing vlinks on one uplink)

The colocation bound implies the other two for P >= 2, so it is the
effective limit. All arithmetic is exact rational; the bandwidth-per-core
derivation floors to whole Mbps before and after dividing by the largest
core count, matching how such limits are quoted in practice.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable


@dataclass(frozen=True)
class ServerSpec:
    server_id: str
    cores: int
    memory_gb: Fraction
    uplinks_mbps: tuple[Fraction, ...]

    def __post_init__(self):
        if self.cores < 1 or self.memory_gb <= 0:
            raise ValueError(f"server {self.server_id}: capacities must be positive")
        if not self.uplinks_mbps:
            raise ValueError(f"server {self.server_id}: needs at least one uplink")
        if any(u <= 0 for u in self.uplinks_mbps):
            raise ValueError(f"server {self.server_id}: uplinks must be positive")

    @property
    def uplink_total_mbps(self) -> Fraction:
        return sum(self.uplinks_mbps, Fraction(0))


@dataclass(frozen=True)
class DatacenterSpec:
    """Servers with their uplinks; the switch fabric is assumed non-blocking.

    ``topology`` is a free-form descriptor kept for documentation; bandwidth
    accounting charges server uplinks only.
    """

    servers: tuple[ServerSpec, ...]
    topology: str = ""

    def __post_init__(self):
        if not self.servers:
            raise ValueError("datacenter needs at least one server")
        ids = [s.server_id for s in self.servers]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate server ids in datacenter spec")

    @classmethod
    def from_json(cls, path: str) -> "DatacenterSpec":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        servers = tuple(
            ServerSpec(
                server_id=str(s["server_id"]),
                cores=int(s["cores"]),
                memory_gb=Fraction(str(s["memory_gb"])),
                uplinks_mbps=tuple(Fraction(str(u)) for u in s["uplinks_mbps"]),
            )
            for s in doc.get("servers", ())
        )
        return cls(servers=servers, topology=doc.get("topology", ""))

    def server(self, server_id: str) -> ServerSpec:
        for s in self.servers:
            if s.server_id == server_id:
                return s
        raise KeyError(f"unknown server {server_id!r}")


def fattest_uplink(dc: DatacenterSpec) -> Fraction:
    """Largest per-server aggregate uplink bandwidth in Mbps."""
    return max(s.uplink_total_mbps for s in dc.servers)


@dataclass(frozen=True)
class ConstraintReport:
    """The derived bandwidth bounds for one (datacenter, peak size) pair."""

    C: Fraction
    P: int
    B_vlink: Fraction
    B_overpeer: Fraction
    B_coloc: Fraction
    B_effective: Fraction
    max_cores: int | None = None
    bpc_max: int | None = None

    def to_json_dict(self) -> dict:
        doc = {
            "fattest_uplink_mbps": float(self.C),
            "peak_vdc_size": self.P,
            "bound_vlink_mbps": float(self.B_vlink),
            "bound_overpeer_mbps": float(self.B_overpeer),
            "bound_colocation_mbps": float(self.B_coloc),
            "bound_effective_mbps": float(self.B_effective),
        }
        if self.max_cores is not None:
            doc["max_cores"] = self.max_cores
            doc["bpc_max_mbps"] = self.bpc_max
        return doc

    def format_table(self) -> str:
        rows = [
            ("fattest server uplink C", f"{float(self.C):,.1f} Mbps"),
            ("peak VDC size P", str(self.P)),
            ("per-vlink bound", f"{float(self.B_vlink):,.2f} Mbps"),
            ("per-VM aggregate bound C/(P-1)", f"{float(self.B_overpeer):,.2f} Mbps"),
            ("colocation bound C/(P/2)^2", f"{float(self.B_coloc):,.2f} Mbps"),
            ("effective vlink bound", f"{float(self.B_effective):,.2f} Mbps"),
        ]
        if self.max_cores is not None:
            rows.append(("largest VM core count", str(self.max_cores)))
            rows.append(("bpc upper bound", f"{self.bpc_max} Mbps"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}} : {v}" for k, v in rows)


def bandwidth_bounds(C, P: int) -> ConstraintReport:
    """Evaluate the three vlink-bandwidth bounds at exact precision.

    P/2 stays rational for odd P, so the colocation bound is the formula as
    written (slightly conservative versus the integer worst case
    floor(P/2) * ceil(P/2)).
    """
    C = Fraction(str(C)) if not isinstance(C, Fraction) else C
    if C <= 0:
        raise ValueError("uplink capacity C must be positive")
    if P < 2:
        raise ValueError("peak VDC size P must be >= 2; a VDC has at least two VMs")
    b_vlink = C
    b_overpeer = C / (P - 1)
    b_coloc = C / (Fraction(P, 2) ** 2)
    return ConstraintReport(
        C=C, P=P,
        B_vlink=b_vlink,
        B_overpeer=b_overpeer,
        B_coloc=b_coloc,
        B_effective=min(b_vlink, b_overpeer, b_coloc),
    )


def derive_bpc(b_effective, max_cores: int) -> int:
    """Whole-Mbps bandwidth-per-core limit under an effective vlink bound.

    Floors the bound to whole Mbps first, then floors the per-core share,
    e.g. 177.78 -> 177 -> 11 for 16-core VMs.
    """
    if max_cores < 1:
        raise ValueError("max_cores must be >= 1")
    b = Fraction(str(b_effective)) if not isinstance(b_effective, Fraction) else b_effective
    if b <= 0:
        raise ValueError("effective bound must be positive")
    return math.floor(Fraction(math.floor(b)) / max_cores)


def constraint_report(dc: DatacenterSpec, P: int, max_cores: int) -> ConstraintReport:
    """Full report for a datacenter: bounds plus the derived bpc limit."""
    base = bandwidth_bounds(fattest_uplink(dc), P)
    return ConstraintReport(
        C=base.C, P=base.P,
        B_vlink=base.B_vlink,
        B_overpeer=base.B_overpeer,
        B_coloc=base.B_coloc,
        B_effective=base.B_effective,
        max_cores=max_cores,
        bpc_max=derive_bpc(base.B_effective, max_cores),
    )


def amdahl_numbers(cpu_ghz, memory_gb, net_gbps) -> tuple[float, float]:
    """Balance ratios of a machine: (GB per GHz, Gbps per GHz).

    A balanced system scores 1 on both: one byte of memory and one bit per
    second of I/O for every instruction per second.
    """
    cpu = float(cpu_ghz)
    if cpu <= 0:
        raise ValueError("cpu_ghz must be positive")
    return float(memory_gb) / cpu, float(net_gbps) / cpu


def ml_vdc_size(batch: int, mini_batch: int) -> int:
    """VM count for data-parallel training: batch split into mini-batches."""
    if mini_batch < 1:
        raise ValueError("mini_batch must be >= 1")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    return max(1, math.ceil(batch / mini_batch))


def max_cores_of(records: Iterable) -> int:
    """Largest VM core count observed in a base workload."""
    best = 0
    for r in records:
        if r.cores > best:
            best = r.cores
    if best == 0:
        raise ValueError("no VM records to derive max cores from")
    return best
