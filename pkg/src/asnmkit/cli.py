"""Command-line entry point wiring the pipeline: extract, morph, label,
audit, bench.

Exit codes: 0 success, 1 domain error (bad data), 2 usage error.  All
diagnostics go to stderr; outputs are deterministic given seeds.
"""

from __future__ import annotations

import argparse
import multiprocessing
import os
import sys

from . import bench, capture, dataset_io, morph
from .context import DEFAULT_TAU, sliding_window
from .errors import AsnmkitError, TruncatedCaptureError
from .features import FeatureCatalog, default_catalog, extract
from .flows import DEFAULT_TIMEOUT, assemble_connections

_WORKER_STATE = {}


def _extract_chunk(chunk):
    conns = _WORKER_STATE["conns"]
    tau = _WORKER_STATE["tau"]
    catalog = _WORKER_STATE["catalog"]
    prefixes = _WORKER_STATE["prefixes"]
    out = []
    for i in chunk:
        ctx = sliding_window(conns, conns[i], tau)
        out.append(extract(conns[i], ctx, catalog, prefixes))
    return out


def _extract_rows(conns, tau, catalog, prefixes, jobs):
    _WORKER_STATE.update(conns=conns, tau=tau, catalog=catalog, prefixes=prefixes)
    indices = list(range(len(conns)))
    if jobs <= 1 or len(conns) < 4:
        return _extract_chunk(indices)
    chunk_size = max(1, len(indices) // (jobs * 4))
    chunks = [indices[i : i + chunk_size] for i in range(0, len(indices), chunk_size)]
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        return _extract_chunk(indices)
    rows = []
    with ctx.Pool(processes=jobs) as pool:
        for part in pool.map(_extract_chunk, chunks):
            rows.extend(part)
    return rows


def _read_trace(path, allow_partial):
    try:
        return capture.read_pcap(path)
    except TruncatedCaptureError as err:
        if not allow_partial:
            raise
        print("warning: %s; continuing with partial trace" % err, file=sys.stderr)
        return err.trace


def cmd_extract(args):
    trace = _read_trace(args.input, args.allow_partial)
    conns, residue = assemble_connections(trace, timeout=args.flow_timeout)
    print(
        "decoded %d packets, %d connections, %d residue packets"
        % (len(trace), len(conns), len(residue)),
        file=sys.stderr,
    )
    catalog = (
        FeatureCatalog.load(args.catalog) if args.catalog else default_catalog()
    )
    prefixes = tuple(p for p in (args.local_prefixes or "").split(",") if p)
    rows = _extract_rows(conns, args.context_tau, catalog, prefixes, args.jobs)
    dataset_io.write_csv(rows, args.output)
    return 0


def _load_morph_stages(spec_arg):
    if os.path.isfile(spec_arg):
        with open(spec_arg, "r", encoding="utf-8") as fh:
            return morph.parse_spec_text(fh.read())
    return morph.ObfuscationSpec(spec_arg).stages()


def cmd_morph(args):
    trace = _read_trace(args.input, args.allow_partial)
    stages = _load_morph_stages(args.spec)
    morphed = morph.apply_stages(
        list(trace),
        stages,
        args.seed,
        flow_timeout=args.flow_timeout,
        exempt_handshake=not args.allow_broken_handshake,
    )
    capture.write_pcap(
        morphed,
        args.output,
        base_ts_us=trace.base_ts_us,
        nanos=trace.nanos,
        swapped=trace.swapped,
        snaplen=trace.snaplen,
        linktype=trace.linktype,
    )
    print("wrote %d packets" % len(morphed), file=sys.stderr)
    return 0


def cmd_label(args):
    rows = dataset_io.read_csv(args.input)
    labels = dataset_io.LabelSet(
        label_2=args.label_2,
        label_3=args.label_3,
        service=args.service,
        modifier=args.modifier,
    )
    if args.schemas:
        schemas = args.schemas.split(",")
    else:
        schemas = []
        for schema in dataset_io.LABEL_SCHEMAS:
            try:
                dataset_io.compose_labels(labels, schema)
            except AsnmkitError:
                continue
            schemas.append(schema)
    dataset_io.attach_labels(rows, labels, schemas)
    dataset_io.write_csv(rows, args.output)
    return 0


def cmd_audit(args):
    rows = dataset_io.load_dataset(args.dataset)
    report = dataset_io.audit(rows)
    print("rows=%d" % report["rows"])
    for schema, counts in report["counts"].items():
        for token, count in sorted(counts.items()):
            print("%s.%s=%d" % (schema, token, count))
    for violation in report["violations"]:
        print("violation: %s" % violation)
    return 0


def _resolve_features(spec, rows):
    if os.path.isfile(spec):
        with open(spec, "r", encoding="utf-8") as fh:
            return [line.strip() for line in fh if line.strip()]
    try:
        return bench.builtin_subset(spec)
    except AsnmkitError:
        if "," in spec:
            return [c.strip() for c in spec.split(",") if c.strip()]
        raise


def cmd_bench(args):
    rows = dataset_io.load_dataset(args.dataset)
    features = _resolve_features(args.features, rows)
    kv = ["dataset=%s" % args.dataset, "experiment=%s" % args.experiment,
          "classifier=%s" % args.classifier, "seed=%d" % args.seed,
          "features=%s" % "|".join(features)]
    roc = None
    if args.experiment == "cv":
        report = bench.cv_experiment(
            rows, features, classifier=args.classifier, k=args.folds,
            seed=args.seed, jobs=args.jobs,
        )
        print(report.to_text())
        kv += report.to_kv_lines()
        roc = report
    elif args.experiment == "evasion":
        result = bench.evasion_experiment(
            rows, features, classifier=args.classifier, k=args.folds,
            seed=args.seed, jobs=args.jobs,
        )
        print(result.cv_report.to_text())
        print(
            "obfuscated tpr %.2f%% (%d of %d), all-attacks tpr %.2f%%"
            % (
                100 * result.obfuscated_tpr,
                result.n_obfuscated_detected,
                result.n_obfuscated,
                100 * result.all_attacks_tpr,
            )
        )
        kv += result.cv_report.to_kv_lines()
        kv += [
            "obfuscated_tpr=%.6f" % result.obfuscated_tpr,
            "all_attacks_tpr=%.6f" % result.all_attacks_tpr,
        ]
        roc = result.cv_report
    else:  # augment
        result = bench.augmentation_experiment(
            rows, features, classifier=args.classifier, k=args.folds,
            seed=args.seed, jobs=args.jobs,
        )
        print(result.report.to_text())
        kv += result.report.to_kv_lines()
        if result.delta_tpr is not None:
            print(
                "delta tpr %+.2f%%, delta fpr %+.2f%%"
                % (100 * result.delta_tpr, 100 * result.delta_fpr)
            )
            kv += [
                "delta_tpr=%.6f" % result.delta_tpr,
                "delta_fpr=%.6f" % result.delta_fpr,
            ]
        roc = result.report
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write("\n".join(kv) + "\n")
    if args.roc and roc is not None:
        with open(args.roc, "w", encoding="utf-8") as fh:
            fh.write("\n".join(roc.roc_csv_lines()) + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="asnmkit",
        description="TCP trace features, obfuscation, and evasion benchmarking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="pcap -> feature CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--flow-timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--context-tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--catalog", help="feature catalog manifest")
    p.add_argument("--local-prefixes", help="comma-separated CIDRs")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--allow-partial", action="store_true",
                   help="keep packets decoded before a truncated record")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("morph", help="rewrite a pcap with an obfuscation")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--spec", required=True,
                   help="preset id (a..q, tunnel-http, tunnel-https), op name, or spec file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--flow-timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--allow-broken-handshake", action="store_true")
    p.add_argument("--allow-partial", action="store_true")
    p.set_defaults(func=cmd_morph)

    p = sub.add_parser("label", help="attach labels to a feature CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--label-2", choices=["legitimate", "attack"])
    p.add_argument("--label-3", type=int, choices=[1, 2, 3])
    p.add_argument("--service")
    p.add_argument("--modifier")
    p.add_argument("--schemas", help="comma-separated schemas to compose")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("audit", help="class counts and label consistency")
    p.add_argument("dataset", help="cdx, tun, npbo, or a CSV path")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bench", help="run a benchmarking experiment")
    p.add_argument("--dataset", required=True)
    p.add_argument("--features", required=True,
                   help="builtin subset name, file, or comma list")
    p.add_argument("--classifier", choices=["nb", "tree"], default="nb")
    p.add_argument("--experiment", choices=["cv", "evasion", "augment"],
                   default="cv")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--report", help="write key=value report here")
    p.add_argument("--roc", help="write ROC points CSV here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except AsnmkitError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1
    except OSError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
