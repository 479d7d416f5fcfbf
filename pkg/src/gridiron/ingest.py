"""Parse per-VM cloud traces and normalize them into the base workload.

The expected input is a CSV in the shape of the 2017 Azure VM table: one row
per VM with creation/deletion timestamps in seconds, a deployment id, a core
count, and a memory size. The column layout is configurable so versioned
releases of such datasets can be mapped without code changes.

Preprocessing rounds timestamps to 5-minute ticks, drops VMs whose rounded
creation and deletion fall in the same tick (instant-VMs), and drops
deployments left empty by that rule.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterable, Iterator

from .model import TICK_SECONDS, VmRecord

log = logging.getLogger(__name__)

DEFAULT_HORIZON_TICKS = 8640  # 30 days at 5-minute ticks

_FIELDS = ("vm_id", "deployment_id", "created", "deleted", "cores", "memory")


class TraceFormatError(ValueError):
    """A trace file row could not be parsed."""


@dataclass(frozen=True)
class RawVmRow:
    """One unvalidated VM row straight from the trace."""

    vm_id: str
    deployment_id: str
    created_s: int
    deleted_s: int | None  # None: VM still alive at the end of the trace
    cores: int
    memory_gb: Fraction


@dataclass
class TraceSchema:
    """Column mapping and parsing options for a trace CSV.

    ``columns`` maps each logical field to a 0-based column index, or to a
    header name when ``has_header`` is set. An empty ``deleted`` cell means
    the VM outlives the trace window.
    """

    columns: dict[str, int | str] = field(
        default_factory=lambda: {f: i for i, f in enumerate(_FIELDS)})
    delimiter: str = ","
    has_header: bool = True
    timestamp_unit: str = "seconds"
    horizon_ticks: int = DEFAULT_HORIZON_TICKS

    def __post_init__(self):
        missing = [f for f in _FIELDS if f not in self.columns]
        if missing:
            raise ValueError(f"schema is missing column mappings: {missing}")
        if self.timestamp_unit != "seconds":
            raise ValueError(f"unsupported timestamp unit {self.timestamp_unit!r}")
        if self.horizon_ticks < 2:
            raise ValueError("horizon_ticks must be >= 2")

    @classmethod
    def from_json(cls, path: str) -> "TraceSchema":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(**doc)


@dataclass
class PreprocessStats:
    raw_vm_count: int = 0
    raw_deployment_count: int = 0
    invalid_timestamp_count: int = 0
    instant_vm_count: int = 0
    final_vm_count: int = 0
    final_deployment_count: int = 0

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)


def round_timestamp(t: int) -> int:
    """Round a second-granularity timestamp to the nearest tick.

    Exact midpoints (t mod 300 == 150) round down so the rule is total and
    deterministic.
    """
    if t < 0:
        raise ValueError(f"negative timestamp {t}")
    q, r = divmod(t, TICK_SECONDS)
    return q + 1 if r > TICK_SECONDS // 2 else q


def parse_trace(path: str, schema: TraceSchema | None = None) -> Iterator[RawVmRow]:
    """Stream rows out of a trace CSV, reporting bad rows by line number."""
    schema = schema or TraceSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        yield from parse_trace_file(fh, schema, name=path)


def parse_trace_file(fh: IO[str], schema: TraceSchema | None = None, *,
                     name: str = "<trace>") -> Iterator[RawVmRow]:
    schema = schema or TraceSchema()
    reader = csv.reader(fh, delimiter=schema.delimiter)
    indices: dict[str, int] | None = None
    if not schema.has_header:
        indices = _resolve_indices(schema, header=None, name=name)

    rows = 0
    for lineno, row in enumerate(reader, start=1):
        if not row:
            continue
        if indices is None:
            indices = _resolve_indices(schema, header=row, name=name)
            continue
        yield _parse_row(row, indices, lineno, name)
        rows += 1
    if rows == 0:
        log.warning("%s: no data rows parsed", name)


def _resolve_indices(schema: TraceSchema, header: list[str] | None,
                     name: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for fieldname, ref in schema.columns.items():
        if isinstance(ref, int):
            out[fieldname] = ref
        else:
            if header is None:
                raise TraceFormatError(
                    f"{name}: schema maps {fieldname!r} to header name {ref!r} "
                    f"but has_header is false")
            try:
                out[fieldname] = header.index(ref)
            except ValueError:
                raise TraceFormatError(
                    f"{name}: column {ref!r} not found in header") from None
    return out


def _parse_row(row: list[str], idx: dict[str, int], lineno: int,
               name: str) -> RawVmRow:
    def cell(fieldname: str) -> str:
        i = idx[fieldname]
        if i >= len(row):
            raise TraceFormatError(
                f"{name}: line {lineno}: missing column {fieldname!r} (index {i})")
        return row[i].strip()

    def intcell(fieldname: str) -> int:
        text = cell(fieldname)
        try:
            return int(text)
        except ValueError:
            raise TraceFormatError(
                f"{name}: line {lineno}: {fieldname} is not an integer: "
                f"{text!r}") from None

    deleted_text = cell("deleted")
    try:
        memory = Fraction(cell("memory"))
    except (ValueError, ZeroDivisionError):
        raise TraceFormatError(
            f"{name}: line {lineno}: memory is not a number: "
            f"{cell('memory')!r}") from None
    return RawVmRow(
        vm_id=cell("vm_id"),
        deployment_id=cell("deployment_id"),
        created_s=intcell("created"),
        deleted_s=int(deleted_text) if deleted_text else None,
        cores=intcell("cores"),
        memory_gb=memory,
    )


def preprocess(rows: Iterable[RawVmRow], *,
               horizon_ticks: int = DEFAULT_HORIZON_TICKS
               ) -> tuple[list[VmRecord], PreprocessStats]:
    """Round timestamps, drop instant-VMs, and build validated VM records.

    A missing deletion timestamp is mapped to one tick past the horizon so
    the VM stays alive through the whole trace window. Raises on duplicate
    vm ids and on lifetimes that end before they start after rounding.
    """
    stats = PreprocessStats()
    raw_deployments: set[str] = set()
    final_deployments: set[str] = set()
    seen: set[str] = set()
    inverted: list[str] = []
    records: list[VmRecord] = []

    for row in rows:
        stats.raw_vm_count += 1
        raw_deployments.add(row.deployment_id)
        if row.vm_id in seen:
            raise ValueError(f"duplicate vm id {row.vm_id!r} in trace")
        seen.add(row.vm_id)

        create_tick = round_timestamp(row.created_s)
        if row.deleted_s is None:
            delete_tick = horizon_ticks + 1
            invalid = row.created_s % TICK_SECONDS != 0
        else:
            delete_tick = round_timestamp(row.deleted_s)
            invalid = (row.created_s % TICK_SECONDS != 0
                       or row.deleted_s % TICK_SECONDS != 0)
        if invalid:
            stats.invalid_timestamp_count += 1

        if delete_tick == create_tick:
            stats.instant_vm_count += 1
            continue
        if delete_tick < create_tick:
            inverted.append(row.vm_id)
            continue
        records.append(VmRecord(
            vm_id=row.vm_id,
            deployment_id=row.deployment_id,
            create_tick=create_tick,
            delete_tick=delete_tick,
            cores=row.cores,
            memory_gb=row.memory_gb,
        ))
        final_deployments.add(row.deployment_id)

    if inverted:
        shown = ", ".join(inverted[:20])
        more = f" (+{len(inverted) - 20} more)" if len(inverted) > 20 else ""
        raise ValueError(f"VMs deleted before creation after rounding: {shown}{more}")

    stats.raw_deployment_count = len(raw_deployments)
    stats.final_vm_count = len(records)
    stats.final_deployment_count = len(final_deployments)
    return records, stats


def records_to_rows(records: Iterable[VmRecord]) -> list[RawVmRow]:
    """Express preprocessed records back in raw-trace form (tick boundaries)."""
    return [RawVmRow(
        vm_id=r.vm_id,
        deployment_id=r.deployment_id,
        created_s=r.create_tick * TICK_SECONDS,
        deleted_s=r.delete_tick * TICK_SECONDS,
        cores=r.cores,
        memory_gb=r.memory_gb,
    ) for r in records]


# ---------------------------------------------------------------------------
# Preprocessed-trace CSV (tick-valued lifetimes, grouped by deployment)
# ---------------------------------------------------------------------------

_PREPROCESSED_HEADER = ["vm_id", "deployment_id", "create_tick", "delete_tick",
                        "cores", "memory_gb"]


def write_preprocessed_csv(records: Iterable[VmRecord], fh: IO[str]) -> int:
    """Write records grouped by deployment so downstream stages can stream.

    Group order is lexical by deployment id; within a deployment, rows keep
    (create_tick, input order).
    """
    ordered = sorted(enumerate(records),
                     key=lambda iv: (iv[1].deployment_id, iv[1].create_tick, iv[0]))
    writer = csv.writer(fh)
    writer.writerow(_PREPROCESSED_HEADER)
    n = 0
    for _, r in ordered:
        writer.writerow([r.vm_id, r.deployment_id, r.create_tick, r.delete_tick,
                         r.cores, str(float(r.memory_gb))])
        n += 1
    return n


def read_preprocessed_csv(fh: IO[str]) -> Iterator[VmRecord]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        return
    if header != _PREPROCESSED_HEADER:
        raise TraceFormatError(
            f"unexpected preprocessed-trace header: {header!r}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            yield VmRecord(
                vm_id=row[0],
                deployment_id=row[1],
                create_tick=int(row[2]),
                delete_tick=int(row[3]),
                cores=int(row[4]),
                memory_gb=Fraction(row[5]),
            )
        except (IndexError, ValueError) as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
