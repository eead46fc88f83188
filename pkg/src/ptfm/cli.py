"""Command line entry point: ``ptfm synth|train|eval|infer``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import __version__
from .config import RunConfig, load_config
from .ensemble import (
    ESTIMATE_COLUMNS,
    SLOTS,
    estimate_many,
    evaluate_bundle,
    load_bundle,
    save_bundle,
    train_ensemble,
)
from .errors import PtfmError
from .flight_data import (
    DatasetPartition,
    generate_synthetic,
    load_csv,
    segment,
    write_csv,
)
from .reporting import write_report
from .training import split_dataset

log = logging.getLogger("ptfm")


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _load_records(path, args, **kw):
    errors = []
    records = load_csv(path, strict=args.strict, errors=errors, **kw)
    for exc in errors:
        log.warning("skipped %s", exc)
    return records, errors


def cmd_synth(args) -> int:
    cfg = _config(args)
    out = args.output or os.path.join(cfg.output_dir, "synthetic.csv")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    records = generate_synthetic(cfg.synthetic)
    n = write_csv(records, out)
    print(f"wrote {n} records (seed {cfg.synthetic.seed}) to {out}")
    return 0


def split_partition(part: DatasetPartition, role, spec) -> tuple[DatasetPartition, DatasetPartition]:
    """70/30 split of the non-disrupted set and of ``role``'s disrupted set."""
    train, test = DatasetPartition(), DatasetPartition()
    if part.non_disrupted:
        train.non_disrupted, test.non_disrupted = split_dataset(part.non_disrupted, spec)
    d = part.disrupted(role)
    if d:
        a, b = split_dataset(d, spec)
        train.disrupted_by_role[role] = a
        test.disrupted_by_role[role] = b
    return train, test


def cmd_train(args) -> int:
    cfg = _config(args)
    out_dir = args.output or cfg.output_dir
    data = args.data or cfg.data_csv
    if data:
        records, _ = _load_records(data, args)
    else:
        log.info("no data file given; generating %d synthetic records", cfg.synthetic.n_records)
        records = generate_synthetic(cfg.synthetic)
    part = segment(records)
    train_part, test_part = split_partition(part, cfg.role, cfg.split)
    bundle = train_ensemble(train_part, cfg.role, cfg.train, parallel=args.parallel, split_seed=cfg.split.seed)

    bundle_dir = os.path.join(out_dir, "bundle")
    manifest = save_bundle(bundle, bundle_dir)
    test_records = test_part.non_disrupted + test_part.disrupted(cfg.role)
    write_csv(test_records, os.path.join(out_dir, "test.csv"))
    training_log = {
        "role": cfg.role.value,
        "records": len(records),
        "quarantined": len(part.quarantine),
        "models": {
            s.name: dict(
                bundle.model(s.name).loss_summary(cfg.train.plateau_window),
                n_train=bundle.model(s.name).n_train,
                seeds=bundle.model(s.name).seeds,
            )
            for s in SLOTS
        },
    }
    with open(os.path.join(out_dir, "training_log.json"), "w", encoding="utf-8") as fh:
        json.dump(training_log, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "run_config.toml"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_toml())
    for s in SLOTS:
        m = bundle.model(s.name)
        log.info(
            "%-13s n=%-6d loss %.4g -> %.4g", s.name, m.n_train, m.loss_history[0], m.loss_history[-1]
        )
    print(f"bundle written to {bundle_dir} ({len(manifest['models'])} models)")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    bundle = load_bundle(args.bundle)
    records, _ = _load_records(args.test_csv, args)
    report = evaluate_bundle(bundle, segment(records))
    out_dir = args.output or os.path.join(cfg.output_dir, "report")
    paths = write_report(report, out_dir, cfg.report_formats, plots=cfg.plots and not args.no_plots)
    sys.stdout.write(report.to_text())
    for p in paths:
        log.info("wrote %s", p)
    return 0


def cmd_infer(args) -> int:
    bundle = load_bundle(args.bundle)
    records, errors = _load_records(args.records, args, require_targets=False)
    if not records:
        log.warning("no records to score in %s", args.records)
    estimates = estimate_many(bundle, records)
    fh = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATE_COLUMNS)
        for est in estimates:
            w.writerow([_cell(v) for v in est.as_row().values()])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 1 if errors and args.strict else 0


def _cell(v):
    return str(v) if isinstance(v, int) else repr(float(v))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ptfm", description="Turnaround/block-time ensemble for disruption management")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="TOML run configuration")
        sp.add_argument("--strict", action="store_true", help="reject the whole file on the first bad row")
        sp.add_argument("-o", "--output", metavar="PATH", help="output file or directory")

    sp = sub.add_parser("synth", help="write a synthetic flight CSV")
    common(sp)
    sp.add_argument("output_pos", nargs="?", metavar="OUT_CSV")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="segment, split and train the six-model bundle")
    common(sp)
    sp.add_argument("data", nargs="?", metavar="DATA_CSV")
    sp.add_argument("--parallel", action="store_true", help="train the six models concurrently")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="score a bundle on held-out flights")
    common(sp)
    sp.add_argument("bundle", metavar="BUNDLE_DIR")
    sp.add_argument("test_csv", metavar="TEST_CSV")
    sp.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("infer", help="fused estimates for each record")
    common(sp)
    sp.add_argument("bundle", metavar="BUNDLE_DIR")
    sp.add_argument("records", metavar="RECORD_CSV")
    sp.set_defaults(func=cmd_infer)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "output_pos", None):
        args.output = args.output or args.output_pos
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (PtfmError, OSError) as exc:
        print(f"ptfm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
