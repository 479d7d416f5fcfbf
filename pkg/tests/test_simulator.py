import random
from fractions import Fraction

import pytest

from gridiron.build import GridironConfig, build_workload
from gridiron.model import InvariantViolation, VdcEvent, sort_events
from gridiron.simulator import (
    CAUSE_COMPUTE,
    CAUSE_MEMORY,
    CAUSE_NETWORK,
    ForcedPlacement,
    crossing_vlinks,
    make_policy,
    replay,
    uplink_load,
)

from conftest import make_dc


def vm(tick, vdc, name, cores=1, mem=1):
    return VdcEvent.vm_create(tick, vdc, name, cores, Fraction(mem))


def all_to_all_vdc(n, bw, vdc="t1", create=0, delete=10, cores=1):
    """Event stream for one VDC of n VMs with uniform vlink bandwidth."""
    from gridiron.model import VmRecord
    records = [VmRecord(f"v{i}", vdc, create, delete, cores, Fraction(1))
               for i in range(n)]
    workload, _, _ = build_workload(
        records, GridironConfig(peak_cap=None, bpc=Fraction(bw) / cores))
    return list(workload.events)


def upto(events, tick):
    """Stream prefix covering the steady state before teardown."""
    return [e for e in events if e.tick <= tick]


# -- scenario: expansion blocked by a peer's uplink (overpeering) -------------


def overpeering_scenario():
    """Four-VM all-to-all VDC lands on three servers; a fifth VM arrives
    needing one bandwidth unit to a peer whose server uplink is already full.
    """
    dc = make_dc([("S1", 2, 8, 4), ("S2", 1, 8, 4), ("S3", 2, 8, 4)])
    events = []
    names = ["v1", "v2", "v3", "v4"]
    for n in names:
        events.append(vm(0, "t1", n))
        events.append(VdcEvent.vm_delete(5, "t1", n))
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            events.append(VdcEvent.vlink_create(0, "t1", a, b, 1))
            events.append(VdcEvent.vlink_delete(5, "t1", a, b))
    events.append(vm(1, "t1", "v5"))
    events.append(VdcEvent.vlink_create(1, "t1", "v1", "v5", 1))
    events.append(VdcEvent.vlink_delete(5, "t1", "v1", "v5"))
    events.append(VdcEvent.vm_delete(5, "t1", "v5"))
    return dc, sort_events(events)


def test_overpeering_expansion_fails_on_peer_uplink():
    dc, events = overpeering_scenario()
    result = replay(upto(events, 1), dc)
    assert len(result.failures) == 1
    failure = result.failures[0]
    assert failure.vm_id == "v5"
    assert failure.cause == CAUSE_NETWORK
    assert failure.tick == 1
    assert "S1" in failure.detail
    # the initial four VMs spread over three servers, filling S1's uplink
    assert result.state.vms[("t1", "v1")].server == 0
    assert result.state.vms[("t1", "v3")].server == 1
    assert result.state.vms[("t1", "v4")].server == 2


# -- scenario: greedy packing of a ten-VM VDC onto two big servers ------------


def test_packed_ten_vm_vdc_loses_last_four():
    dc = make_dc([("server0", 5, 64, 40000), ("server1", 5, 64, 40000)])
    result = replay(upto(all_to_all_vdc(10, 4400), 0), dc)
    assert [f.vm_id for f in result.failures] == ["v6", "v7", "v8", "v9"]
    assert all(f.cause == CAUSE_NETWORK for f in result.failures)
    assert result.colocation_degree["t1"] == 5
    # v5 crossed to server1 with five vlinks into server0
    assert uplink_load(result.state, "server0") == 22000


def test_balanced_six_vm_vdc_places_cleanly():
    dc = make_dc([("server0", 3, 64, 40000), ("server1", 3, 64, 40000)])
    result = replay(upto(all_to_all_vdc(6, 4400), 0), dc)
    assert result.failures == []
    assert result.colocation_degree["t1"] == 3
    # 3x3 crossing vlinks at 4.4 Gbps fill 39.6 of the 40 Gbps uplink
    assert uplink_load(result.state, "server0") == 39600
    assert uplink_load(result.state, "server1") == 39600


# -- uplink accounting --------------------------------------------------------


def test_uplink_load_four_vms_four_servers():
    dc = make_dc([(f"s{i}", 1, 8, 100) for i in range(4)])
    result = replay(upto(all_to_all_vdc(4, 1), 0), dc)
    assert result.failures == []
    for i in range(4):
        assert uplink_load(result.state, f"s{i}") == 3


def test_uplink_load_nine_crossing_links():
    # Hand-built split: five VMs on one server, two on the other, nine
    # crossing vlinks of 4.4 Gbps load the first uplink with 39.6 Gbps.
    dc = make_dc([("A", 8, 64, 40000), ("B", 8, 64, 40000)])
    events = []
    for i in range(7):
        events.append(vm(0, "t1", f"v{i}"))
    for i in range(5):
        events.append(VdcEvent.vlink_create(0, "t1", f"v{i}", "v5", 4400))
    for i in range(4):
        events.append(VdcEvent.vlink_create(0, "t1", f"v{i}", "v6", 4400))
    placement = {f"v{i}": "A" for i in range(5)} | {"v5": "B", "v6": "B"}
    result = replay(sort_events(events), dc, ForcedPlacement(placement))
    assert result.failures == []
    assert uplink_load(result.state, "A") == 39600
    assert uplink_load(result.state, "B") == 39600


def test_colocated_vdc_consumes_no_uplink():
    dc = make_dc([("big", 16, 64, 10)])
    result = replay(upto(all_to_all_vdc(4, 1000), 0), dc)  # all colocated
    assert result.failures == []
    assert uplink_load(result.state, "big") == 0
    assert result.colocation_degree["t1"] == 4


def test_crossing_vlinks_is_quadratic():
    assert crossing_vlinks(2, 2) == 4
    assert crossing_vlinks(0, 5) == 0
    assert crossing_vlinks(3, 3) == 9
    with pytest.raises(ValueError):
        crossing_vlinks(-1, 2)


def test_uplink_load_agrees_with_running_totals():
    rng = random.Random(31)
    from gridiron.model import VmRecord
    records = []
    for d in range(6):
        for i in range(rng.randint(1, 8)):
            c = rng.randint(0, 10)
            records.append(VmRecord(f"d{d}v{i}", f"dep{d}", c,
                                    c + rng.randint(1, 10),
                                    rng.choice([1, 2]), Fraction(1)))
    workload, _, _ = build_workload(records, GridironConfig(peak_cap=4, bpc=3))
    dc = make_dc([(f"s{i}", 10, 100, 10**6) for i in range(4)])
    for upto in range(0, 22, 3):
        prefix = [e for e in workload.events if e.tick <= upto]
        result = replay(prefix, dc, "first-fit-spread")
        assert result.failures == []
        for i, server in enumerate(dc.servers):
            assert uplink_load(result.state, server.server_id) \
                == result.state.used_uplink[i]
            assert 0 <= result.state.used_cores[i] <= server.cores
            assert result.state.used_uplink[i] <= server.uplink_total_mbps


# -- semantics ---------------------------------------------------------------


def test_delete_frees_capacity_for_same_tick_create():
    dc = make_dc([("only", 1, 8, 10)])
    events = [
        vm(0, "t1", "x"),
        VdcEvent.vm_delete(3, "t1", "x"),
        vm(3, "t1", "y"),  # same tick: release precedes consume
        VdcEvent.vm_delete(6, "t1", "y"),
    ]
    result = replay(sort_events(events), dc)
    assert result.failures == []


def test_compute_and_memory_causes():
    dc = make_dc([("tiny", 2, 2, 10)])
    events = [vm(0, "t1", "big", cores=4, mem=1)]
    assert replay(events, dc).failures[0].cause == CAUSE_COMPUTE
    events = [vm(0, "t1", "fat", cores=1, mem=64)]
    failure = replay(events, dc).failures[0]
    assert failure.cause == CAUSE_MEMORY


def test_failed_vm_is_skipped_and_its_teardown_ignored():
    dc = make_dc([("tiny", 1, 8, 10)])
    events = [
        vm(0, "t1", "a"),
        vm(0, "t1", "b"),  # no cores left: compute failure
        VdcEvent.vlink_create(0, "t1", "a", "b", 1),
        VdcEvent.vlink_delete(4, "t1", "a", "b"),
        VdcEvent.vm_delete(4, "t1", "b"),
        VdcEvent.vm_delete(5, "t1", "a"),
    ]
    result = replay(sort_events(events), dc)
    assert [f.vm_id for f in result.failures] == ["b"]
    assert result.state.vms == {}


def test_standalone_vlink_failure_is_network():
    dc = make_dc([("s0", 1, 8, 10), ("s1", 1, 8, 10)])
    events = [
        vm(0, "t1", "a"),
        vm(0, "t1", "b"),
        VdcEvent.vlink_create(2, "t1", "a", "b", 20),  # exceeds both uplinks
        VdcEvent.vm_delete(9, "t1", "a"),
        VdcEvent.vm_delete(9, "t1", "b"),
    ]
    result = replay(sort_events(events), dc)
    assert len(result.failures) == 1
    assert result.failures[0].cause == CAUSE_NETWORK
    assert result.failures[0].vm_id == "a~b"


def test_unknown_references_rejected():
    dc = make_dc([("s0", 4, 8, 10)])
    with pytest.raises(InvariantViolation):
        replay([VdcEvent.vm_delete(0, "t1", "ghost")], dc)
    with pytest.raises(InvariantViolation):
        replay([VdcEvent.vlink_delete(0, "t1", "a", "b")], dc)
    with pytest.raises(InvariantViolation):
        replay([VdcEvent.vlink_create(0, "t1", "a", "b", 1)], dc)


def test_unsorted_stream_rejected():
    dc = make_dc([("s0", 4, 8, 10)])
    events = [vm(5, "t1", "a"), vm(0, "t1", "b")]
    with pytest.raises(InvariantViolation, match="out of order"):
        replay(events, dc)


def test_spread_policy_spreads():
    dc = make_dc([("s0", 4, 32, 1000), ("s1", 4, 32, 1000)])
    events = all_to_all_vdc(4, 1)
    packed = replay(events, dc, "first-fit-by-server-index")
    spread = replay(events, dc, "first-fit-spread")
    assert packed.colocation_degree["t1"] == 4
    assert spread.colocation_degree["t1"] == 2


def test_utilization_rows_sampled_per_tick():
    dc = make_dc([("s0", 4, 32, 1000)])
    events = [vm(0, "t1", "a"), VdcEvent.vm_delete(7, "t1", "a")]
    result = replay(events, dc)
    assert [(u.tick, u.used_cores) for u in result.utilization] == [(0, 1), (7, 0)]


def test_unknown_policy_rejected():
    with pytest.raises(ValueError, match="unknown policy"):
        make_policy("worst-fit")
