from fractions import Fraction

import pytest

from gridiron.constraints import DatacenterSpec, ServerSpec
from gridiron.model import VmRecord

LATE = 60  # stand-in delete tick for VMs that outlive the scenario window


@pytest.fixture
def mutation_vdc():
    """One deployment whose VDC grows to three VMs, shrinks, and regrows.

    v0 (2 cores) and v1 (4 cores) start together at tick 5, v2 (4 cores)
    joins at tick 20, and at tick 42 v0 leaves while v3 (2 cores) joins.
    """
    return [
        VmRecord("v0", "depA", 5, 42, 2, Fraction(4)),
        VmRecord("v1", "depA", 5, LATE, 4, Fraction(8)),
        VmRecord("v2", "depA", 20, LATE, 4, Fraction(8)),
        VmRecord("v3", "depA", 42, LATE, 2, Fraction(4)),
    ]


def make_dc(server_defs, topology=""):
    """server_defs: list of (server_id, cores, memory_gb, uplink_mbps_total)."""
    return DatacenterSpec(servers=tuple(
        ServerSpec(server_id=sid, cores=cores, memory_gb=Fraction(mem),
                   uplinks_mbps=(Fraction(up),))
        for sid, cores, mem, up in server_defs), topology=topology)


def brute_force_peak(records):
    """Per-tick scan oracle for peak concurrent VMs."""
    if not records:
        return 0
    lo = min(r.create_tick for r in records)
    hi = max(r.delete_tick for r in records)
    best = 0
    for t in range(lo, hi + 1):
        alive = sum(1 for r in records if r.create_tick <= t < r.delete_tick)
        best = max(best, alive)
    return best
