"""Command line entry point: parse a sweep, run it, write per-run and summary CSVs."""
from __future__ import annotations

import csv
import logging
import sys
from typing import Sequence

from .config import ConfigError, build_arg_parser, expand_sweep, parse_config
from .harness import RUN_COLUMNS, SUMMARY_COLUMNS, aggregate, run_many, run_row, summary_row, write_csv

log = logging.getLogger("mmv2v")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        sweep = parse_config(argv)
        ns = build_arg_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"mmv2v: configuration error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if ns.workers < 1:
        print("mmv2v: configuration error: --workers must be >= 1", file=sys.stderr)
        return 2

    configs = expand_sweep(sweep)
    log.info("%d points x %d replications = %d runs", len(sweep.points()), sweep.replications, len(configs))
    try:
        results = run_many(configs, workers=ns.workers, trace_path=ns.trace, channel_path=ns.dump_channel)
        rows = [run_row(r) for r in results]
        if ns.out:
            write_csv(rows, ns.out)
        else:
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(RUN_COLUMNS)
            w.writerows(rows)
        if ns.summary_out:
            write_csv([summary_row(s) for s in aggregate(results)], ns.summary_out, SUMMARY_COLUMNS)
    except OSError as exc:
        print(f"mmv2v: I/O error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
