"""Domain model for virtual-datacenter (VDC) event workloads.

A workload is an ordered stream of VM and vlink create/delete events grouped
into named VDCs. This module owns the canonical event ordering, the JSONL
wire format, and a replay checker for the stream invariants:

* within a tick, every delete sorts before every create, so datacenter
  resources are released before they are consumed;
* a vlink only ever exists between two alive VMs, at every stream prefix
  (vlink deletes precede the VM delete, VM creates precede vlink creates);
* optionally, each VDC's alive vlinks are exactly all unordered pairs of its
  alive VMs (all-to-all closure).

Bandwidth is carried as an exact rational (Mbps) in memory; serialization
rounds to 3 decimal places.
"""
from __future__ import annotations

import heapq
import json
import tempfile
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import IO, Iterable, Iterator

TICK_SECONDS = 300


class InvariantViolation(ValueError):
    """An event stream broke one of the workload invariants."""


class EventKind(str, Enum):
    VLINK_DELETE = "vlink_delete"
    VM_DELETE = "vm_delete"
    VM_CREATE = "vm_create"
    VLINK_CREATE = "vlink_create"


# Within a tick: deletes before creates, and additionally vlink deletes
# before the VM delete that strands them / VM creates before the vlink
# creates that attach to them, so every stream prefix is consistent.
_KIND_RANK = {
    EventKind.VLINK_DELETE: 0,
    EventKind.VM_DELETE: 1,
    EventKind.VM_CREATE: 2,
    EventKind.VLINK_CREATE: 3,
}


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    """Unordered VM pair, canonicalized by lexical order."""
    if a == b:
        raise ValueError(f"vlink endpoints must differ, got {a!r} twice")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class VmRecord:
    """One VM lifetime from a (preprocessed) base trace."""

    vm_id: str
    deployment_id: str
    create_tick: int
    delete_tick: int
    cores: int
    memory_gb: Fraction

    def __post_init__(self):
        if self.create_tick < 0:
            raise ValueError(f"vm {self.vm_id}: negative create tick")
        if self.delete_tick <= self.create_tick:
            raise ValueError(
                f"vm {self.vm_id}: delete tick {self.delete_tick} not after "
                f"create tick {self.create_tick}"
            )
        if self.cores < 1:
            raise ValueError(f"vm {self.vm_id}: cores must be >= 1")
        if self.memory_gb <= 0:
            raise ValueError(f"vm {self.vm_id}: memory must be positive")


@dataclass(frozen=True)
class Vlink:
    """Undirected VM pair with a bandwidth demand in Mbps."""

    endpoint_a: str
    endpoint_b: str
    bandwidth_mbps: Fraction

    def __post_init__(self):
        a, b = canonical_pair(self.endpoint_a, self.endpoint_b)
        object.__setattr__(self, "endpoint_a", a)
        object.__setattr__(self, "endpoint_b", b)
        if self.bandwidth_mbps <= 0:
            raise ValueError(f"vlink {a}-{b}: bandwidth must be positive")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.endpoint_a, self.endpoint_b)


@dataclass(frozen=True)
class VdcEvent:
    """A timestamped create/delete of a VM or vlink inside a named VDC.

    VM events carry ``vm_id`` (creates also ``cores`` and ``memory_gb``);
    vlink events carry the canonical endpoint pair (creates also
    ``bandwidth_mbps``).
    """

    tick: int
    vdc_id: str
    kind: EventKind
    vm_id: str | None = None
    cores: int | None = None
    memory_gb: Fraction | None = None
    link_a: str | None = None
    link_b: str | None = None
    bandwidth_mbps: Fraction | None = None

    def __post_init__(self):
        if self.tick < 0:
            raise ValueError("event tick must be non-negative")
        if self.kind in (EventKind.VM_CREATE, EventKind.VM_DELETE):
            if not self.vm_id:
                raise ValueError(f"{self.kind.value} event needs a vm_id")
            if self.kind is EventKind.VM_CREATE:
                if not self.cores or self.cores < 1:
                    raise ValueError(f"vm_create {self.vm_id}: cores must be >= 1")
                if self.memory_gb is None or self.memory_gb <= 0:
                    raise ValueError(f"vm_create {self.vm_id}: memory must be positive")
        else:
            if not self.link_a or not self.link_b:
                raise ValueError(f"{self.kind.value} event needs both endpoints")
            a, b = canonical_pair(self.link_a, self.link_b)
            object.__setattr__(self, "link_a", a)
            object.__setattr__(self, "link_b", b)
            if self.kind is EventKind.VLINK_CREATE:
                if self.bandwidth_mbps is None or self.bandwidth_mbps <= 0:
                    raise ValueError(f"vlink_create {a}-{b}: bandwidth must be positive")

    # -- constructors ------------------------------------------------------

    @classmethod
    def vm_create(cls, tick, vdc_id, vm_id, cores, memory_gb) -> "VdcEvent":
        return cls(tick, vdc_id, EventKind.VM_CREATE, vm_id=vm_id, cores=cores,
                   memory_gb=Fraction(memory_gb))

    @classmethod
    def vm_delete(cls, tick, vdc_id, vm_id) -> "VdcEvent":
        return cls(tick, vdc_id, EventKind.VM_DELETE, vm_id=vm_id)

    @classmethod
    def vlink_create(cls, tick, vdc_id, a, b, bandwidth_mbps) -> "VdcEvent":
        return cls(tick, vdc_id, EventKind.VLINK_CREATE, link_a=a, link_b=b,
                   bandwidth_mbps=Fraction(bandwidth_mbps))

    @classmethod
    def vlink_delete(cls, tick, vdc_id, a, b) -> "VdcEvent":
        return cls(tick, vdc_id, EventKind.VLINK_DELETE, link_a=a, link_b=b)

    # -- ordering ----------------------------------------------------------

    @property
    def pair(self) -> tuple[str, str]:
        if self.link_a is None or self.link_b is None:
            raise ValueError(f"{self.kind.value} event has no endpoint pair")
        return (self.link_a, self.link_b)

    def payload_id(self) -> tuple[str, ...]:
        if self.vm_id is not None:
            return (self.vm_id,)
        return (self.link_a or "", self.link_b or "")

    def sort_key(self):
        return (self.tick, _KIND_RANK[self.kind], self.vdc_id, self.payload_id())


@dataclass(frozen=True)
class Workload:
    """A sorted event stream plus its VDC and VM counts."""

    events: tuple[VdcEvent, ...]
    vdc_count: int
    vm_count: int

    @classmethod
    def from_events(cls, events: Iterable[VdcEvent]) -> "Workload":
        evs = tuple(sort_events(events))
        vdcs = {e.vdc_id for e in evs}
        vms = sum(1 for e in evs if e.kind is EventKind.VM_CREATE)
        return cls(events=evs, vdc_count=len(vdcs), vm_count=vms)


def sort_events(events: Iterable[VdcEvent]) -> list[VdcEvent]:
    """Sort events into the canonical deterministic order.

    Key: (tick, kind class with deletes first, vdc_id, payload id). Raises
    on duplicate identical events, naming the duplicate.
    """
    ordered = sorted(events, key=VdcEvent.sort_key)
    for prev, cur in zip(ordered, ordered[1:]):
        if prev == cur:
            raise InvariantViolation(f"duplicate event: {cur}")
    return ordered


# ---------------------------------------------------------------------------
# Replay checking
# ---------------------------------------------------------------------------


@dataclass
class ReplaySummary:
    vdc_count: int
    vm_count: int
    max_tick: int


def validate_workload(events: Iterable[VdcEvent], *,
                      require_all_to_all: bool = False) -> ReplaySummary:
    """Replay a sorted stream and enforce the workload invariants.

    Checks canonical ordering, unique VM lifetimes (ids are never reused),
    matched create/delete pairs, endpoint liveness for every vlink at every
    prefix, and, when ``require_all_to_all`` is set, that each VDC's alive
    vlinks are exactly all pairs of its alive VMs at the end of every tick.
    """
    alive_vms: dict[str, set[str]] = {}
    alive_links: dict[str, set[tuple[str, str]]] = {}
    ever_created: set[tuple[str, str]] = set()
    last_key = None
    last_tick = -1
    touched: set[str] = set()
    vm_count = 0

    def check_closure():
        for vdc in touched:
            vms = alive_vms.get(vdc, set())
            links = alive_links.get(vdc, set())
            want = {canonical_pair(a, b) for a in vms for b in vms if a < b}
            if links != want:
                missing = want - links
                extra = links - want
                raise InvariantViolation(
                    f"vdc {vdc}: vlinks not all-to-all at tick {last_tick} "
                    f"(missing {sorted(missing)[:3]}, extra {sorted(extra)[:3]})"
                )

    for ev in events:
        key = ev.sort_key()
        if last_key is not None and key < last_key:
            raise InvariantViolation(f"events out of order at {ev}")
        if key == last_key:
            raise InvariantViolation(f"duplicate event: {ev}")
        if require_all_to_all and ev.tick != last_tick and last_tick >= 0:
            check_closure()
            touched = set()
        last_key = key
        last_tick = ev.tick
        touched.add(ev.vdc_id)

        vms = alive_vms.setdefault(ev.vdc_id, set())
        links = alive_links.setdefault(ev.vdc_id, set())
        if ev.kind is EventKind.VM_CREATE:
            if (ev.vdc_id, ev.vm_id) in ever_created:
                raise InvariantViolation(
                    f"vm id {ev.vm_id} reused in vdc {ev.vdc_id} (tick {ev.tick})")
            ever_created.add((ev.vdc_id, ev.vm_id))
            vms.add(ev.vm_id)
            vm_count += 1
        elif ev.kind is EventKind.VM_DELETE:
            if ev.vm_id not in vms:
                raise InvariantViolation(
                    f"delete of vm {ev.vm_id} not alive in vdc {ev.vdc_id} "
                    f"(tick {ev.tick})")
            for pair in links:
                if ev.vm_id in pair:
                    raise InvariantViolation(
                        f"vm {ev.vm_id} deleted at tick {ev.tick} while vlink "
                        f"{pair} is still alive in vdc {ev.vdc_id}")
            vms.discard(ev.vm_id)
        elif ev.kind is EventKind.VLINK_CREATE:
            pair = ev.pair
            if pair[0] not in vms or pair[1] not in vms:
                raise InvariantViolation(
                    f"vlink {pair} created at tick {ev.tick} with a dead "
                    f"endpoint in vdc {ev.vdc_id}")
            if pair in links:
                raise InvariantViolation(
                    f"vlink {pair} already alive in vdc {ev.vdc_id}")
            links.add(pair)
        else:
            pair = ev.pair
            if pair not in links:
                raise InvariantViolation(
                    f"delete of vlink {pair} not alive in vdc {ev.vdc_id} "
                    f"(tick {ev.tick})")
            links.discard(pair)

    if require_all_to_all and last_tick >= 0:
        check_closure()
    for vdc, links in alive_links.items():
        for pair in links:
            a, b = pair
            if a not in alive_vms[vdc] or b not in alive_vms[vdc]:
                raise InvariantViolation(f"vdc {vdc}: dangling vlink {pair}")
    return ReplaySummary(vdc_count=len(alive_vms), vm_count=vm_count,
                         max_tick=last_tick)


# ---------------------------------------------------------------------------
# JSONL wire format
# ---------------------------------------------------------------------------

_BW_DECIMALS = 3


def _round_bw(bw: Fraction) -> float:
    return round(float(bw), _BW_DECIMALS)


def event_to_json(ev: VdcEvent) -> str:
    doc: dict = {"tick": ev.tick, "vdc": ev.vdc_id, "op": ev.kind.value}
    if ev.kind is EventKind.VM_CREATE:
        doc["vm"] = ev.vm_id
        doc["cores"] = ev.cores
        doc["mem_gb"] = float(ev.memory_gb)
    elif ev.kind is EventKind.VM_DELETE:
        doc["vm"] = ev.vm_id
    else:
        doc["link"] = {"a": ev.link_a, "b": ev.link_b}
        if ev.kind is EventKind.VLINK_CREATE:
            doc["bw_mbps"] = _round_bw(ev.bandwidth_mbps)
    return json.dumps(doc, separators=(",", ":"))


def event_from_json(line: str) -> VdcEvent:
    doc = json.loads(line)
    op = EventKind(doc["op"])
    tick = doc["tick"]
    vdc = doc["vdc"]
    if op is EventKind.VM_CREATE:
        return VdcEvent.vm_create(tick, vdc, doc["vm"], doc["cores"],
                                  Fraction(str(doc["mem_gb"])))
    if op is EventKind.VM_DELETE:
        return VdcEvent.vm_delete(tick, vdc, doc["vm"])
    link = doc["link"]
    if op is EventKind.VLINK_CREATE:
        return VdcEvent.vlink_create(tick, vdc, link["a"], link["b"],
                                     Fraction(str(doc["bw_mbps"])))
    return VdcEvent.vlink_delete(tick, vdc, link["a"], link["b"])


def write_events(events: Iterable[VdcEvent], fh: IO[str]) -> int:
    n = 0
    for ev in events:
        fh.write(event_to_json(ev))
        fh.write("\n")
        n += 1
    return n


def read_events(fh: IO[str]) -> Iterator[VdcEvent]:
    for line in fh:
        line = line.strip()
        if line:
            yield event_from_json(line)


# ---------------------------------------------------------------------------
# External sort for streams too large to hold in memory
# ---------------------------------------------------------------------------


def _json_line_key(line: str):
    doc = json.loads(line)
    op = EventKind(doc["op"])
    if "vm" in doc:
        payload = (doc["vm"],)
    else:
        payload = (doc["link"]["a"], doc["link"]["b"])
    return (doc["tick"], _KIND_RANK[op], doc["vdc"], payload)


def external_sort_jsonl(lines: Iterable[str], out: IO[str], *,
                        chunk_lines: int = 200_000) -> int:
    """Sort serialized events into canonical order using bounded memory.

    Spills sorted chunks to temporary files and k-way merges them, so the
    peak memory footprint is one chunk regardless of stream length. Returns
    the number of lines written; raises on duplicate identical events.
    """
    chunks: list = []
    buf: list[str] = []

    def spill():
        buf.sort(key=_json_line_key)
        tmp = tempfile.TemporaryFile(mode="w+", prefix="gridiron-sort-")
        tmp.writelines(l + "\n" for l in buf)
        tmp.seek(0)
        chunks.append(tmp)
        buf.clear()

    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        buf.append(line)
        if len(buf) >= chunk_lines:
            spill()

    def chunk_reader(fh):
        for stored in fh:
            yield stored.rstrip("\n")

    written = 0
    last = None
    if not chunks:
        buf.sort(key=_json_line_key)
        merged: Iterable[str] = buf
    else:
        if buf:
            spill()
        merged = heapq.merge(*(chunk_reader(c) for c in chunks),
                             key=_json_line_key)
    try:
        for line in merged:
            if line == last:
                raise InvariantViolation(f"duplicate event: {line}")
            last = line
            out.write(line)
            out.write("\n")
            written += 1
    finally:
        for c in chunks:
            c.close()
    return written
