"""Purity of LDA hard assignments on disjoint-vocabulary toy corpora.

    python scripts/lda_recovery.py [--docs 300] [--topics 3] [--seeds 5] [--iterations 50 200 500]
"""

import argparse
import time

from seglens.segmentation import lda_fit, lda_hard_assign, purity
from seglens.synthetic import disjoint_topic_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=300)
    ap.add_argument("--topics", type=int, default=3)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--iterations", type=int, nargs="+", default=[50, 200, 500])
    args = ap.parse_args()
    print(f"{'seed':>4}{'sweeps':>8}{'purity':>8}{'secs':>7}")
    for seed in range(args.seeds):
        docs, truth = disjoint_topic_corpus(n_docs=args.docs, n_topics=args.topics, seed=seed)
        for iters in args.iterations:
            t0 = time.perf_counter()
            model = lda_fit(docs, K=args.topics, iterations=iters, seed=seed)
            p = purity(lda_hard_assign(model, docs), truth)
            print(f"{seed:>4}{iters:>8}{p:>8.3f}{time.perf_counter() - t0:>7.2f}")


if __name__ == "__main__":
    main()
