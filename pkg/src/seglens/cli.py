"""``seglens <subcommand> --config path [--set k=v]... [--threads N] [--stamp]``

Exit status: 0 success, 1 validation failure, 2 runtime failure. On
failure one JSON line describing the error is written to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from seglens.config import load_config
from seglens.errors import ConfigError, DataError, SeglensError
from seglens.pipeline import STAGES, Pipeline

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

logger = logging.getLogger("seglens")


def _error_line(code: int, exc: BaseException) -> str:
    doc = {"status": "error", "exit_code": code, "kind": type(exc).__name__, "message": str(exc)}
    path = getattr(exc, "path", None)
    if path:
        doc["path"] = path
    return json.dumps(doc, sort_keys=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seglens", description="Segment-level diagnostics for text classifiers.")
    ap.add_argument("subcommand", choices=("validate",) + STAGES)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config key, e.g. aggregation.k=50 (repeatable)")
    ap.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    ap.add_argument("--stamp", action="store_true", help="add a generation timestamp to the report")
    return ap


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("SEGLENS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.overrides)
        if args.threads is not None:
            overrides.append(f"threads={args.threads}")
        cfg = load_config(args.config, overrides)
        cfg.check_files()
        pipe = Pipeline(cfg, stamp=args.stamp)
        if args.subcommand == "validate":
            summary = pipe.validate()
    except (SeglensError, OSError) as exc:
        print(_error_line(EXIT_INVALID, exc), file=sys.stderr)
        return EXIT_INVALID
    if args.subcommand == "validate":
        print(json.dumps({"status": "ok", **summary}, sort_keys=True))
        return EXIT_OK
    try:
        result = pipe.run(args.subcommand)
    except (ConfigError, DataError) as exc:
        code = EXIT_INVALID if isinstance(exc, ConfigError) else EXIT_RUNTIME
        print(_error_line(code, exc), file=sys.stderr)
        return code
    except (SeglensError, OSError, ValueError) as exc:
        print(_error_line(EXIT_RUNTIME, exc), file=sys.stderr)
        return EXIT_RUNTIME
    out = {"status": "ok", "stage": args.subcommand, "recomputed": pipe.recomputed,
           "stage_dir": str(pipe.stage_dir(args.subcommand))}
    if args.subcommand == "report":
        out["index"] = str(result)
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
