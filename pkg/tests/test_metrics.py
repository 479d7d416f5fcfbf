import io
import random
from fractions import Fraction

import pytest

from gridiron.build import GridironConfig, build_workload, group_by_deployment
from gridiron.metrics import (
    bandwidth_footprint,
    base_footprint,
    footprint,
    nearest_rank,
    peak_distribution,
    variance_band,
    vdc_peaks_from_events,
)
from gridiron.model import VmRecord


def test_mutation_vdc_bandwidth_series(mutation_vdc):
    workload, _, _ = build_workload(
        mutation_vdc, GridironConfig(peak_cap=None, bpc=1))
    series = footprint(workload.events)
    # three vlinks at 2+2+4 while v0/v1/v2 overlap
    assert series.bandwidth_mbps[21] == 8.0
    # v3 (2 cores) pairs with the two 4-core survivors: 4+2+2
    assert series.bandwidth_mbps[43] == 8.0
    assert series.bandwidth_mbps[4] == 0.0
    assert series.cores[21] == 10.0
    assert series.cores[43] == 10.0


def test_empty_workload_series():
    series = footprint([], horizon=5)
    assert series.cores == [0.0] * 5
    assert series.bandwidth_mbps == [0.0] * 5
    assert footprint([]).horizon == 0


def test_series_excludes_trailing_pure_teardown_tick():
    records = [VmRecord("a", "d", 0, 10, 2, Fraction(3))]
    workload, _, _ = build_workload(records, GridironConfig(None, 1))
    series = footprint(workload.events)
    assert series.horizon == 10
    assert series.cores == [2.0] * 10


def random_records(rng, n_deps=20):
    records = []
    for d in range(n_deps):
        for i in range(rng.randint(1, 10)):
            c = rng.randint(0, 30)
            records.append(VmRecord(f"d{d}v{i}", f"dep{d}", c,
                                    c + rng.randint(1, 20),
                                    rng.choice([1, 2, 4]), Fraction(5, 2)))
    return records


def test_doubling_bpc_doubles_bandwidth_series_pointwise():
    rng = random.Random(4)
    records = random_records(rng)
    w1, _, _ = build_workload(records, GridironConfig(peak_cap=6, bpc=1))
    w2, _, _ = build_workload(records, GridironConfig(peak_cap=6, bpc=2))
    s1 = footprint(w1.events)
    s2 = footprint(w2.events)
    assert s2.bandwidth_mbps == [2 * x for x in s1.bandwidth_mbps]
    assert s2.cores == s1.cores
    assert s2.memory_gb == s1.memory_gb


def test_event_footprint_matches_record_footprint():
    rng = random.Random(9)
    records = random_records(rng)
    workload, _, asg = build_workload(records, GridironConfig(peak_cap=5, bpc=3))
    via_events = footprint(workload.events)
    via_records = base_footprint(records, horizon=via_events.horizon)
    assert via_events.cores == via_records.cores
    assert via_events.memory_gb == via_records.memory_gb

    by_vdc = {}
    for r in records:
        by_vdc.setdefault(asg.vm_to_vdc[r.vm_id], []).append(r)
    bw = bandwidth_footprint(by_vdc.values(), 3, horizon=via_events.horizon)
    assert bw == via_events.bandwidth_mbps


def test_variance_band():
    assert variance_band([321043, 346755]) == pytest.approx(7.4150, abs=0.001)
    assert variance_band([5, 5, 5]) == 0.0
    assert variance_band([50, 100]) == 50.0
    assert variance_band([0, 0]) is None
    with pytest.raises(ValueError):
        variance_band([])


def test_peak_distribution_tiny():
    dist = peak_distribution([1, 2, 3])
    assert dist.max == 3
    assert dist.p50 == 2
    assert dist.p90 == 3
    assert dist.histogram == {1: 1, 2: 1, 3: 1}
    assert dist.total == 3
    assert dist.fraction_below(3) == pytest.approx(2 / 3)


def test_nearest_rank_is_observed_value():
    values = sorted([5, 1, 9, 7, 3])
    for q in (1, 50, 90, 99):
        assert nearest_rank(values, q) in values
    assert nearest_rank(values, 50) == 5
    assert nearest_rank([4], 99) == 4
    with pytest.raises(ValueError):
        nearest_rank([], 50)


def test_peaks_from_events_match_builder_manifest():
    rng = random.Random(12)
    records = random_records(rng)
    workload, manifest, _ = build_workload(records, GridironConfig(peak_cap=4, bpc=1))
    from_events = vdc_peaks_from_events(workload.events)
    from_manifest = {m.vdc_id: m.peak_size for m in manifest}
    assert from_events == from_manifest
    assert max(from_events.values()) <= 4


def test_capped_distribution_never_exceeds_cap():
    rng = random.Random(13)
    records = random_records(rng)
    _, manifest, _ = build_workload(records, GridironConfig(peak_cap=3, bpc=1))
    dist = peak_distribution([m.peak_size for m in manifest])
    assert dist.max <= 3


def test_footprint_csv_and_summary():
    records = [VmRecord("a", "d", 0, 3, 2, Fraction(3))]
    workload, _, _ = build_workload(records, GridironConfig(None, 1))
    series = footprint(workload.events)
    buf = io.StringIO()
    series.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "tick,cores,memory_gb,bandwidth_mbps"
    assert len(lines) == 1 + series.horizon
    summary = series.summary()
    assert summary["cores"]["max"] == 2.0


def test_histogram_dat_format():
    dist = peak_distribution([1, 1, 4])
    buf = io.StringIO()
    dist.write_histogram_dat(buf)
    assert buf.getvalue() == "# peak_size vdc_count\n1 2\n4 1\n"
