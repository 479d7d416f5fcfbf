"""Replay a VDC workload onto a datacenter with uplink bandwidth accounting.

Servers expose cores, memory, and an aggregate uplink. A vlink between VMs
on different servers consumes its full bandwidth on both endpoint servers'
uplinks; colocated VMs communicate through the hypervisor and consume none.
The switch fabric above the server uplinks is treated as non-blocking, so
bandwidth can only run out at the uplinks.

A VM is placed together with all of its creation-tick vlinks, atomically:
if a candidate server cannot satisfy the VM's cores, memory, and every
vlink's bandwidth (on all uplinks involved), the next candidate is tried.
When no server works the VM fails with a cause of ``compute``, ``memory``,
or ``network``; network is reported only if some server had the cores and
memory but bandwidth ran out. A failed VM is skipped: its later delete and
all its vlinks are ignored so replay can keep counting failures.

Within a tick, deletes apply before creates, so resources released at a
tick are available to that tick's arrivals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from .constraints import DatacenterSpec
from .model import EventKind, InvariantViolation, VdcEvent

CAUSE_COMPUTE = "compute"
CAUSE_MEMORY = "memory"
CAUSE_NETWORK = "network"


@dataclass(frozen=True)
class FailureRecord:
    tick: int
    vdc_id: str
    vm_id: str
    cause: str
    detail: str


@dataclass(frozen=True)
class UtilizationRow:
    tick: int
    server_id: str
    used_cores: int
    used_memory_gb: float
    used_uplink_mbps: float


@dataclass
class _PlacedVm:
    server: int
    vdc_id: str
    cores: int
    memory_gb: Fraction


@dataclass
class PlacementState:
    """Mutable residual-capacity view of a datacenter during replay."""

    dc: DatacenterSpec
    used_cores: list[int] = field(default_factory=list)
    used_memory: list[Fraction] = field(default_factory=list)
    used_uplink: list[Fraction] = field(default_factory=list)
    vms: dict[tuple[str, str], _PlacedVm] = field(default_factory=dict)
    links: dict[tuple[str, str, str], Fraction] = field(default_factory=dict)
    vdc_members: dict[tuple[str, int], int] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.dc.servers)
        if not self.used_cores:
            self.used_cores = [0] * n
            self.used_memory = [Fraction(0)] * n
            self.used_uplink = [Fraction(0)] * n
        self._index = {s.server_id: i for i, s in enumerate(self.dc.servers)}
        self._uplink_cap = [s.uplink_total_mbps for s in self.dc.servers]

    def server_index(self, server_id: str) -> int:
        try:
            return self._index[server_id]
        except KeyError:
            raise KeyError(f"unknown server {server_id!r}") from None

    def free_cores(self, i: int) -> int:
        return self.dc.servers[i].cores - self.used_cores[i]

    def free_memory(self, i: int) -> Fraction:
        return self.dc.servers[i].memory_gb - self.used_memory[i]

    def free_uplink(self, i: int) -> Fraction:
        return self._uplink_cap[i] - self.used_uplink[i]


def uplink_load(state: PlacementState, server_id: str) -> Fraction:
    """Aggregate bandwidth of alive vlinks with exactly one endpoint here.

    Recomputed from the alive-vlink table rather than read from the running
    totals, so it doubles as an independent check on the accounting.
    """
    i = state.server_index(server_id)
    total = Fraction(0)
    for (vdc, a, b), bw in state.links.items():
        sa = state.vms[(vdc, a)].server
        sb = state.vms[(vdc, b)].server
        if (sa == i) ^ (sb == i):
            total += bw
    return total


def crossing_vlinks(k_here: int, k_there: int) -> int:
    """All-to-all vlinks crossing between two server-halves of one VDC."""
    if k_here < 0 or k_there < 0:
        raise ValueError("VM counts must be non-negative")
    return k_here * k_there


# ---------------------------------------------------------------------------
# Placement policies
# ---------------------------------------------------------------------------


class FirstFitByIndex:
    """Try servers in spec order."""

    def candidates(self, state: PlacementState, vdc_id: str, vm_id: str) -> Iterable[int]:
        return range(len(state.dc.servers))


class FirstFitSpread:
    """Prefer servers hosting the fewest of this VDC's VMs (then spec order)."""

    def candidates(self, state: PlacementState, vdc_id: str, vm_id: str) -> Iterable[int]:
        n = len(state.dc.servers)
        return sorted(range(n),
                      key=lambda i: (state.vdc_members.get((vdc_id, i), 0), i))


class ForcedPlacement:
    """Pin every VM to a predetermined server; used for exhaustive sweeps."""

    def __init__(self, mapping: dict[str, str]):
        self.mapping = mapping

    def candidates(self, state: PlacementState, vdc_id: str, vm_id: str) -> Iterable[int]:
        return [state.server_index(self.mapping[vm_id])]


POLICIES = {
    "first-fit-by-server-index": FirstFitByIndex,
    "first-fit-spread": FirstFitSpread,
}


def make_policy(policy):
    if isinstance(policy, str):
        try:
            return POLICIES[policy]()
        except KeyError:
            raise ValueError(
                f"unknown policy {policy!r}; choose from {sorted(POLICIES)}"
            ) from None
    return policy


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


@dataclass
class ReplayResult:
    failures: list[FailureRecord]
    colocation_degree: dict[str, int]
    utilization: list[UtilizationRow]
    state: PlacementState

    @property
    def network_failures(self) -> list[FailureRecord]:
        return [f for f in self.failures if f.cause == CAUSE_NETWORK]


def _ticks(events: Iterable[VdcEvent]) -> Iterator[tuple[int, list[VdcEvent]]]:
    batch: list[VdcEvent] = []
    last_key = None
    for ev in events:
        key = ev.sort_key()
        if last_key is not None and key < last_key:
            raise InvariantViolation(f"events out of order at {ev}")
        last_key = key
        if batch and ev.tick != batch[0].tick:
            yield batch[0].tick, batch
            batch = []
        batch.append(ev)
    if batch:
        yield batch[0].tick, batch


def replay(events: Iterable[VdcEvent], dc: DatacenterSpec,
           policy="first-fit-by-server-index", *,
           record_utilization: bool = True) -> ReplayResult:
    """Apply a sorted event stream to an empty datacenter."""
    policy = make_policy(policy)
    state = PlacementState(dc=dc)
    failures: list[FailureRecord] = []
    coloc: dict[str, int] = {}
    utilization: list[UtilizationRow] = []
    failed_vms: set[tuple[str, str]] = set()
    skipped_links: set[tuple[str, str, str]] = set()

    def release_vm(key: tuple[str, str]):
        placed = state.vms[key]
        # Defensive: drop any vlinks the stream failed to delete first.
        for lk in [lk for lk in state.links if lk[0] == key[0] and key[1] in lk[1:]]:
            release_link(lk)
        del state.vms[key]
        i = placed.server
        state.used_cores[i] -= placed.cores
        state.used_memory[i] -= placed.memory_gb
        state.vdc_members[(placed.vdc_id, i)] -= 1

    def release_link(lk: tuple[str, str, str]):
        bw = state.links.pop(lk)
        sa = state.vms[(lk[0], lk[1])].server
        sb = state.vms[(lk[0], lk[2])].server
        if sa != sb:
            state.used_uplink[sa] -= bw
            state.used_uplink[sb] -= bw

    def try_place(ev: VdcEvent, links_now: list[VdcEvent]):
        """Returns None on success, else (cause, detail)."""
        saw_memory_ok = False
        saw_cores_ok = False
        bottleneck = ""
        memory_server = ""
        for i in policy.candidates(state, ev.vdc_id, ev.vm_id):
            if state.free_cores(i) < ev.cores:
                continue
            saw_cores_ok = True
            if state.free_memory(i) < ev.memory_gb:
                memory_server = memory_server or state.dc.servers[i].server_id
                continue
            saw_memory_ok = True
            needed: dict[int, Fraction] = {}
            for lc in links_now:
                other = lc.link_a if lc.link_b == ev.vm_id else lc.link_b
                j = state.vms[(ev.vdc_id, other)].server
                if j != i:
                    needed[i] = needed.get(i, Fraction(0)) + lc.bandwidth_mbps
                    needed[j] = needed.get(j, Fraction(0)) + lc.bandwidth_mbps
            blocked = ""
            for j in sorted(needed):
                if state.free_uplink(j) < needed[j]:
                    blocked = state.dc.servers[j].server_id
                    break
            if blocked:
                bottleneck = bottleneck or blocked
                continue
            # Commit.
            state.vms[(ev.vdc_id, ev.vm_id)] = _PlacedVm(
                server=i, vdc_id=ev.vdc_id, cores=ev.cores, memory_gb=ev.memory_gb)
            state.used_cores[i] += ev.cores
            state.used_memory[i] += ev.memory_gb
            for j, amount in needed.items():
                state.used_uplink[j] += amount
            for lc in links_now:
                state.links[(ev.vdc_id, lc.link_a, lc.link_b)] = lc.bandwidth_mbps
            members = state.vdc_members.get((ev.vdc_id, i), 0) + 1
            state.vdc_members[(ev.vdc_id, i)] = members
            if members > coloc.get(ev.vdc_id, 0):
                coloc[ev.vdc_id] = members
            return None
        if saw_memory_ok:
            return CAUSE_NETWORK, f"uplink of {bottleneck} exhausted"
        if saw_cores_ok:
            return CAUSE_MEMORY, f"insufficient memory (first short: {memory_server})"
        return CAUSE_COMPUTE, "no server with enough free cores"

    for tick, batch in _ticks(events):
        link_deletes = [e for e in batch if e.kind is EventKind.VLINK_DELETE]
        vm_deletes = [e for e in batch if e.kind is EventKind.VM_DELETE]
        vm_creates = [e for e in batch if e.kind is EventKind.VM_CREATE]
        link_creates = [e for e in batch if e.kind is EventKind.VLINK_CREATE]

        for ev in link_deletes:
            lk = (ev.vdc_id, ev.link_a, ev.link_b)
            if lk in skipped_links:
                skipped_links.discard(lk)
            elif lk in state.links:
                release_link(lk)
            elif ((ev.vdc_id, ev.link_a) in failed_vms
                  or (ev.vdc_id, ev.link_b) in failed_vms):
                pass
            else:
                raise InvariantViolation(
                    f"delete of unknown vlink {lk} at tick {tick}")

        for ev in vm_deletes:
            key = (ev.vdc_id, ev.vm_id)
            if key in failed_vms:
                failed_vms.discard(key)
            elif key in state.vms:
                release_vm(key)
            else:
                raise InvariantViolation(
                    f"delete of unknown vm {key} at tick {tick}")

        pending: dict[str, list[VdcEvent]] = {}
        for lc in link_creates:
            pending.setdefault(lc.link_a, []).append(lc)
            pending.setdefault(lc.link_b, []).append(lc)
        consumed: set[tuple[str, str, str]] = set()

        for ev in vm_creates:
            key = (ev.vdc_id, ev.vm_id)
            if key in state.vms or key in failed_vms:
                raise InvariantViolation(f"vm {key} created twice")
            links_now = []
            for lc in pending.get(ev.vm_id, ()):
                lk = (lc.vdc_id, lc.link_a, lc.link_b)
                if lc.vdc_id != ev.vdc_id or lk in consumed:
                    continue
                other = lc.link_a if lc.link_b == ev.vm_id else lc.link_b
                if (ev.vdc_id, other) in state.vms:
                    links_now.append(lc)
            outcome = try_place(ev, links_now)
            if outcome is None:
                for lc in links_now:
                    consumed.add((lc.vdc_id, lc.link_a, lc.link_b))
            else:
                cause, detail = outcome
                failures.append(FailureRecord(tick, ev.vdc_id, ev.vm_id, cause, detail))
                failed_vms.add(key)

        for lc in link_creates:
            lk = (lc.vdc_id, lc.link_a, lc.link_b)
            if lk in consumed:
                continue
            ka, kb = (lc.vdc_id, lc.link_a), (lc.vdc_id, lc.link_b)
            if ka in failed_vms or kb in failed_vms:
                skipped_links.add(lk)
                continue
            if ka not in state.vms or kb not in state.vms:
                raise InvariantViolation(
                    f"vlink {lk} created with unknown endpoint at tick {tick}")
            sa, sb = state.vms[ka].server, state.vms[kb].server
            if sa == sb:
                state.links[lk] = lc.bandwidth_mbps
                continue
            if (state.free_uplink(sa) < lc.bandwidth_mbps
                    or state.free_uplink(sb) < lc.bandwidth_mbps):
                short = sa if state.free_uplink(sa) < lc.bandwidth_mbps else sb
                failures.append(FailureRecord(
                    tick, lc.vdc_id, f"{lc.link_a}~{lc.link_b}", CAUSE_NETWORK,
                    f"uplink of {state.dc.servers[short].server_id} exhausted"))
                skipped_links.add(lk)
                continue
            state.used_uplink[sa] += lc.bandwidth_mbps
            state.used_uplink[sb] += lc.bandwidth_mbps
            state.links[lk] = lc.bandwidth_mbps

        if record_utilization:
            for i, server in enumerate(dc.servers):
                utilization.append(UtilizationRow(
                    tick=tick,
                    server_id=server.server_id,
                    used_cores=state.used_cores[i],
                    used_memory_gb=float(state.used_memory[i]),
                    used_uplink_mbps=float(state.used_uplink[i]),
                ))

    return ReplayResult(failures=failures, colocation_degree=coloc,
                        utilization=utilization, state=state)
