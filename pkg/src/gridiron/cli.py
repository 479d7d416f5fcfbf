"""Command-line pipeline: preprocess, synth, generate, validate, analyze.

Every subcommand writes a run manifest next to its primary output (input
content hashes, resolved options, tool version) so reruns are verifiable.
I/O is streamed; the generate stage sorts its event stream with an external
merge so memory stays bounded by one deployment plus a sort chunk.

``GRIDIRON_THREADS`` caps worker threads for the per-deployment build stage
(default 1). Output is deterministic regardless of the thread count.
"""
from __future__ import annotations

import argparse
import collections
import csv
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import __version__, build, constraints, ingest, metrics, model, synth


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(subcommand: str, primary_out: str, *, inputs: list[str],
                   outputs: list[str], options: dict) -> str:
    doc = {
        "tool": "gridiron",
        "version": __version__,
        "subcommand": subcommand,
        "options": options,
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": outputs,
    }
    path = primary_out + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _threads() -> int:
    try:
        n = int(os.environ.get("GRIDIRON_THREADS", "1"))
    except ValueError:
        raise ValueError("GRIDIRON_THREADS must be an integer") from None
    return max(1, n)


def _bounded_map(fn, iterable, workers: int):
    """Ordered parallel map with a bounded number of in-flight tasks."""
    if workers <= 1:
        for item in iterable:
            yield fn(item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = collections.deque()
        it = iter(iterable)
        for item in it:
            pending.append(pool.submit(fn, item))
            if len(pending) >= workers * 2:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    schema = ingest.TraceSchema.from_json(args.schema) if args.schema \
        else ingest.TraceSchema()
    rows = ingest.parse_trace(args.trace, schema)
    records, stats = ingest.preprocess(rows, horizon_ticks=schema.horizon_ticks)
    with open(args.out_trace, "w", newline="", encoding="utf-8") as fh:
        ingest.write_preprocessed_csv(records, fh)
    with open(args.out_stats, "w", encoding="utf-8") as fh:
        json.dump(stats.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest("preprocess", args.out_trace,
                   inputs=[args.trace] + ([args.schema] if args.schema else []),
                   outputs=[args.out_trace, args.out_stats],
                   options={"schema": args.schema,
                            "horizon_ticks": schema.horizon_ticks})
    print(f"preprocessed {stats.final_vm_count} VMs in "
          f"{stats.final_deployment_count} deployments "
          f"({stats.instant_vm_count} instant-VMs dropped)")
    return 0


def cmd_synth(args) -> int:
    config = synth.SynthConfig.from_json(args.config) if args.config \
        else synth.SynthConfig()
    if args.seed is not None:
        config.seed = args.seed
    rows = synth.generate_base(config)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        synth.write_rows_csv(rows, fh)
    write_manifest("synth", args.out,
                   inputs=[args.config] if args.config else [],
                   outputs=[args.out],
                   options={"seed": config.seed,
                            "deployment_count": config.deployment_count})
    print(f"generated {len(rows)} VMs in {config.deployment_count} deployments")
    return 0


def _iter_deployments(path: str):
    """Yield per-deployment record lists from a deployment-grouped CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        seen: set[str] = set()
        current: list = []
        for rec in ingest.read_preprocessed_csv(fh):
            if current and rec.deployment_id != current[0].deployment_id:
                seen.add(current[0].deployment_id)
                yield current
                current = []
            if not current and rec.deployment_id in seen:
                raise ValueError(
                    f"trace is not grouped by deployment: "
                    f"{rec.deployment_id!r} reappears; rerun preprocess")
            current.append(rec)
        if current:
            yield current


def cmd_generate(args) -> int:
    if args.bpc is None and args.dc is None:
        raise ValueError("one of --bpc or --dc is required")
    cap = args.cap

    report = None
    if args.dc is not None:
        if cap is None:
            raise ValueError("--dc needs --cap to bound the peak VDC size")
        dc = constraints.DatacenterSpec.from_json(args.dc)
        if args.max_cores is not None:
            max_cores = args.max_cores
        else:
            with open(args.trace, newline="", encoding="utf-8") as fh:
                max_cores = constraints.max_cores_of(
                    ingest.read_preprocessed_csv(fh))
        report = constraints.constraint_report(dc, cap, max_cores)
        if args.bpc is None:
            bpc = Fraction(report.bpc_max)
        else:
            bpc = Fraction(args.bpc)
            if bpc > report.bpc_max and not args.force:
                print(report.format_table(), file=sys.stderr)
                print(f"error: bpc {args.bpc} exceeds the datacenter-aware "
                      f"limit of {report.bpc_max} Mbps (use --force to "
                      f"generate anyway)", file=sys.stderr)
                return 1
    else:
        bpc = Fraction(args.bpc)

    config = build.GridironConfig(peak_cap=cap, bpc=bpc)
    manifest_rows: list[build.VdcManifestRow] = []

    def build_one(deployment):
        events, rows, _ = build.build_deployment(deployment, config)
        return [model.event_to_json(e) for e in events], rows

    spool = tempfile.TemporaryFile(mode="w+", prefix="gridiron-events-")
    event_count = 0
    for lines, rows in _bounded_map(build_one, _iter_deployments(args.trace),
                                    _threads()):
        manifest_rows.extend(rows)
        for line in lines:
            spool.write(line)
            spool.write("\n")
            event_count += 1
    spool.seek(0)
    with open(args.out, "w", encoding="utf-8") as out_fh:
        written = model.external_sort_jsonl(spool, out_fh)
    spool.close()
    assert written == event_count

    outputs = [args.out]
    if args.vdc_manifest:
        manifest_rows.sort(key=lambda r: r.vdc_id)
        with open(args.vdc_manifest, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["vdc_id", "deployment_id", "peak_size", "vm_count"])
            for r in manifest_rows:
                writer.writerow([r.vdc_id, r.deployment_id, r.peak_size, r.vm_count])
        outputs.append(args.vdc_manifest)
    if report is not None and args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(args.report)

    write_manifest("generate", args.out,
                   inputs=[args.trace] + ([args.dc] if args.dc else []),
                   outputs=outputs,
                   options={"cap": cap, "bpc_mbps": float(bpc),
                            "dc": args.dc, "force": args.force,
                            "threads": _threads()})
    if report is not None:
        print(report.format_table())
    print(f"wrote {written} events for {len(manifest_rows)} VDCs")
    return 0


def cmd_validate(args) -> int:
    from . import simulator

    dc = constraints.DatacenterSpec.from_json(args.dc)
    with open(args.workload, encoding="utf-8") as fh:
        result = simulator.replay(
            model.read_events(fh), dc, args.policy,
            record_utilization=args.utilization_out is not None)

    if args.failures_out:
        with open(args.failures_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick", "vdc_id", "vm_id", "cause", "detail"])
            for f in result.failures:
                writer.writerow([f.tick, f.vdc_id, f.vm_id, f.cause, f.detail])
        write_manifest("validate", args.failures_out,
                       inputs=[args.workload, args.dc],
                       outputs=[args.failures_out],
                       options={"policy": args.policy})
    if args.utilization_out:
        with open(args.utilization_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick", "server_id", "used_cores",
                             "used_memory_gb", "used_uplink_mbps"])
            for u in result.utilization:
                writer.writerow([u.tick, u.server_id, u.used_cores,
                                 u.used_memory_gb, u.used_uplink_mbps])

    by_cause: dict[str, int] = {}
    for f in result.failures:
        by_cause[f.cause] = by_cause.get(f.cause, 0) + 1
    network = by_cause.get(simulator.CAUSE_NETWORK, 0)
    print(f"failures: {len(result.failures)} "
          f"(network {network}, compute {by_cause.get('compute', 0)}, "
          f"memory {by_cause.get('memory', 0)})")
    return 0 if network == 0 else 1


def cmd_analyze(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(args.workload, encoding="utf-8") as fh:
        series = metrics.footprint(model.read_events(fh), horizon=args.horizon)
    with open(args.workload, encoding="utf-8") as fh:
        peaks = metrics.vdc_peaks_from_events(model.read_events(fh))

    footprint_path = out_dir / "footprint.csv"
    with open(footprint_path, "w", newline="", encoding="utf-8") as fh:
        series.write_csv(fh)
    summary = series.summary()
    hist_path = None
    if peaks:
        dist = metrics.peak_distribution(peaks.values())
        summary["peak_vdc_sizes"] = dist.to_json_dict()
        hist_path = out_dir / "peak_histogram.dat"
        with open(hist_path, "w", encoding="utf-8") as fh:
            dist.write_histogram_dat(fh)
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    outputs = [str(footprint_path), str(summary_path)]
    if hist_path:
        outputs.append(str(hist_path))
    write_manifest("analyze", str(summary_path),
                   inputs=[args.workload], outputs=outputs,
                   options={"horizon": args.horizon})
    print(f"analyzed {len(peaks)} VDCs over {series.horizon} ticks")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridiron",
        description="Generate and validate VDC workloads with inter-VM "
                    "bandwidth demands from per-VM cloud traces.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="round timestamps, drop instant-VMs")
    p.add_argument("trace", help="raw trace CSV")
    p.add_argument("--schema", help="trace schema config (JSON)")
    p.add_argument("--out-trace", required=True, help="preprocessed trace CSV")
    p.add_argument("--out-stats", required=True, help="preprocessing stats JSON")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("synth", help="generate a synthetic base trace")
    p.add_argument("--config", help="synthesis config (JSON)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True, help="output trace CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("generate", help="build the VDC event workload")
    p.add_argument("trace", help="preprocessed trace CSV")
    p.add_argument("--cap", type=int, help="peak VDC size cap P (>= 2)")
    p.add_argument("--bpc", help="bandwidth per core in Mbps")
    p.add_argument("--dc", help="datacenter spec JSON; derives the bpc limit")
    p.add_argument("--max-cores", type=int,
                   help="override the observed largest VM core count")
    p.add_argument("--force", action="store_true",
                   help="allow bpc above the datacenter-aware limit")
    p.add_argument("--out", required=True, help="output workload JSONL")
    p.add_argument("--vdc-manifest", help="per-VDC manifest CSV")
    p.add_argument("--report", help="constraint report JSON (with --dc)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="replay a workload onto a datacenter")
    p.add_argument("workload", help="workload JSONL")
    p.add_argument("--dc", required=True, help="datacenter spec JSON")
    p.add_argument("--policy", default="first-fit-by-server-index",
                   choices=["first-fit-by-server-index", "first-fit-spread"])
    p.add_argument("--failures-out", help="failure report CSV")
    p.add_argument("--utilization-out", help="per-tick per-server usage CSV")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="footprints and peak-size statistics")
    p.add_argument("workload", help="workload JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--horizon", type=int, help="series length in ticks")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
