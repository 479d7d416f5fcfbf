"""Deterministic synthetic base workloads in the ingest CSV schema.

Meant for desk-scale testing when no real trace is at hand. Deployment VM
counts default to a truncated geometric so most deployments are small and a
few are large; statistical fidelity to any particular cloud is a non-goal.
"""
from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO

from .ingest import RawVmRow
from .model import TICK_SECONDS


def sample_dist(rng: random.Random, spec: dict) -> int:
    """Draw one integer from a distribution spec.

    Supported kinds: ``choice`` (values + optional weights), ``uniform``
    (low/high inclusive), ``geometric`` (success probability p, support
    starting at ``min``, truncated at ``max``).
    """
    kind = spec.get("kind")
    if kind == "choice":
        values = spec["values"]
        if not values:
            raise ValueError("choice distribution needs at least one value")
        weights = spec.get("weights")
        return rng.choices(values, weights=weights, k=1)[0]
    if kind == "uniform":
        return rng.randint(spec["low"], spec["high"])
    if kind == "geometric":
        p = spec["p"]
        if not 0 < p <= 1:
            raise ValueError(f"geometric p must be in (0, 1], got {p}")
        lo = spec.get("min", 1)
        hi = spec.get("max")
        k = lo
        while rng.random() >= p:
            k += 1
            if hi is not None and k >= hi:
                return hi
        return k
    raise ValueError(f"unknown distribution kind {kind!r}")


@dataclass
class SynthConfig:
    seed: int = 0
    deployment_count: int = 100
    vm_count_distribution: dict = field(
        default_factory=lambda: {"kind": "geometric", "p": 0.25, "max": 60})
    lifetime_distribution: dict = field(
        default_factory=lambda: {"kind": "geometric", "p": 0.08, "min": 1, "max": 200})
    cores_choices: dict = field(
        default_factory=lambda: {"kind": "choice",
                                 "values": [1, 2, 4, 8, 16],
                                 "weights": [30, 30, 20, 15, 5]})
    memory_per_core_gb: Fraction = Fraction(7, 4)
    horizon_ticks: int = 288
    instant_vm_fraction: float = 0.0  # deliberate instant-VMs, for negative tests

    def __post_init__(self):
        if isinstance(self.memory_per_core_gb, (str, float, int)):
            self.memory_per_core_gb = Fraction(str(self.memory_per_core_gb))
        if self.horizon_ticks < 2:
            raise ValueError("horizon_ticks must be >= 2")
        if not self.cores_choices.get("values"):
            raise ValueError("cores_choices needs at least one value")
        if not 0.0 <= self.instant_vm_fraction <= 1.0:
            raise ValueError("instant_vm_fraction must be within [0, 1]")

    @property
    def max_cores(self) -> int:
        return max(self.cores_choices["values"])

    @classmethod
    def from_json(cls, path: str) -> "SynthConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


def generate_base(config: SynthConfig) -> list[RawVmRow]:
    """Generate deployment-grouped VM rows, reproducible under the seed."""
    rng = random.Random(config.seed)
    rows: list[RawVmRow] = []
    for d in range(config.deployment_count):
        deployment_id = f"dep{d:05d}"
        vm_count = max(1, sample_dist(rng, config.vm_count_distribution))
        for v in range(vm_count):
            create_tick = rng.randint(0, config.horizon_ticks - 2)
            if rng.random() < config.instant_vm_fraction:
                delete_tick = create_tick
            else:
                lifetime = max(1, sample_dist(rng, config.lifetime_distribution))
                delete_tick = min(create_tick + lifetime, config.horizon_ticks)
            cores = sample_dist(rng, config.cores_choices)
            rows.append(RawVmRow(
                vm_id=f"{deployment_id}-vm{v:04d}",
                deployment_id=deployment_id,
                created_s=create_tick * TICK_SECONDS,
                deleted_s=delete_tick * TICK_SECONDS,
                cores=cores,
                memory_gb=cores * config.memory_per_core_gb,
            ))
    return rows


_RAW_HEADER = ["vm_id", "deployment_id", "created", "deleted", "cores", "memory"]


def write_rows_csv(rows: list[RawVmRow], fh: IO[str]) -> int:
    """Emit rows in the default ingest schema (named header columns)."""
    writer = csv.writer(fh)
    writer.writerow(_RAW_HEADER)
    for r in rows:
        writer.writerow([
            r.vm_id, r.deployment_id, r.created_s,
            "" if r.deleted_s is None else r.deleted_s,
            r.cores, str(float(r.memory_gb)),
        ])
    return len(rows)
