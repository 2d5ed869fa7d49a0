"""Run the full pipeline on the bundled mini-corpus.

    python scripts/run_mini_report.py [--out seglens-out] [--set key=value ...]

Writes a config with absolute input paths next to the output and calls
``seglens report``; open <out>/report/index.html afterwards.
"""

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from seglens.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("seglens-out"))
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    ap.add_argument("--stamp", action="store_true")
    args = ap.parse_args()
    mini = Path(str(resources.files("seglens.data").joinpath("mini")))
    doc = json.loads((mini / "config.json").read_text())
    doc["paths"]["corpus"] = str(mini / "corpus.jsonl")
    doc["paths"]["embeddings"] = str(mini / "embeddings.txt")
    out = args.out.resolve()
    doc["paths"]["out_dir"] = str(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = out / "mini_config.json"
    cfg.write_text(json.dumps(doc, indent=2) + "\n")
    argv = ["report", "--config", str(cfg)]
    for o in args.overrides:
        argv += ["--set", o]
    if args.stamp:
        argv.append("--stamp")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
