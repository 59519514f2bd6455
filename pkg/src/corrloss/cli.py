"""Command-line entry point: ``corrloss {train,metrics,compare}``.

Exit codes: 0 success, 2 configuration or input error, 3 training failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as X
from .data import DataError
from .metrics import evaluate
from .trainer import TrainingError

EXIT_OK, EXIT_CONFIG, EXIT_TRAIN = 0, 2, 3

log = logging.getLogger("corrloss")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load(path, seed, fmt, out=None) -> X.RunConfig:
    cfg = X.load_config(path)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    if fmt:
        cfg.report_format = fmt
    if out:
        cfg.output_dir = out
    return cfg


def cmd_train(args) -> int:
    try:
        cfg = _load(args.config, args.seed, args.format, args.out)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (X.ConfigError, OSError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        rr = X.run(cfg)
    except DataError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (TrainingError, ValueError, FloatingPointError) as exc:
        _err(f"training failed: {exc}")
        return EXIT_TRAIN
    paths = X.write_outputs(rr, out)
    sys.stdout.write(X.format_report(rr.reports, cfg.report_format))
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def read_columns(path, *names) -> list[np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        missing = [n for n in names if n not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}; header is {header}")
        idx = [header.index(n) for n in names]
        cols = [[] for _ in names]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                for c, i in zip(cols, idx):
                    c.append(float(row[i]))
            except (ValueError, IndexError):
                raise DataError(f"{path}: row {lineno} is not numeric in {names}") from None
    return [np.array(c) for c in cols]


def cmd_metrics(args) -> int:
    try:
        target, pred = read_columns(args.csv, args.target_column, args.pred_column)
        rep = evaluate(pred, target)
    except (OSError, DataError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    sys.stdout.write(X.format_report({"all": rep}, args.format or "table"))
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.configs) < 2:
        _err("compare needs at least two config files")
        return EXIT_CONFIG
    try:
        cfgs = [_load(p, args.seed, None) for p in args.configs]
    except X.ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    rows = X.compare(cfgs)
    text = X.format_compare(rows, args.format or "table")
    sys.stdout.write(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "compare.txt").write_text(text, encoding="utf-8")
    if any(r.failed for r in rows):
        _err("one or more runs failed; table is partial")
        return EXIT_TRAIN
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrloss", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration and write its artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--format", choices=("table", "delimited"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("metrics", help="PLC/SRC/KLC/AE/RE of a prediction CSV")
    p.add_argument("csv")
    p.add_argument("--target-column", default="target")
    p.add_argument("--pred-column", default="prediction")
    p.add_argument("--format", choices=("table", "delimited"))
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("compare", help="3-seed mean(std) table over several configs")
    p.add_argument("configs", nargs="+")
    p.add_argument("--seed", type=int, help="first of the three seeds")
    p.add_argument("--out")
    p.add_argument("--format", choices=("table", "delimited"))
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
