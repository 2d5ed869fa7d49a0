"""Recompute the published gender-similarity rows from a GloVe text file.

    python scripts/gender_rows.py path/to/glove.6B.300d.txt

Prints male/female similarity, their difference, the published difference
and the bias flag for each token. Only the needed words are loaded.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from reference import GENDER_ROWS  # noqa: E402

from seglens.embeddings import FEMALE_WORDS, MALE_WORDS, default_gender_anchors, load_embeddings  # noqa: E402
from seglens.grouping import gender_bias_scan  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("glove", type=Path)
    args = ap.parse_args()
    tokens = [t for t, *_ in GENDER_ROWS]
    table = load_embeddings(args.glove, keep=set(tokens) | set(MALE_WORDS) | set(FEMALE_WORDS))
    male, female = default_gender_anchors()
    rows = {r.token: r for r in gender_bias_scan(tokens, table, male, female)}
    print(f"{'token':<11}{'male':>8}{'female':>8}{'diff':>9}{'printed':>9}{'delta':>8}  flag")
    worst = 0.0
    for tok, _, _, printed in GENDER_ROWS:
        r = rows.get(tok)
        if r is None:
            print(f"{tok:<11}  (not in embedding)")
            continue
        delta = r.difference - printed
        worst = max(worst, abs(delta))
        print(f"{tok:<11}{r.sim_a:8.3f}{r.sim_b:8.3f}{r.difference:+9.3f}{printed:+9.3f}{delta:+8.4f}  {r.flag}")
    print(f"max |delta| = {worst:.4f}")


if __name__ == "__main__":
    main()
