"""Generate the bundled synthetic mini-corpus, its toy embedding and run config.

Writes into src/seglens/data/mini/. Output is fully determined by --seed.

    python scripts/make_mini_corpus.py [--seed 7] [--out src/seglens/data/mini]
"""

import argparse
import json
from pathlib import Path

import numpy as np

TOPICS = {
    "Restaurant": dict(
        n=120,
        nouns="food pizza burger pasta sushi salad steak menu waiter table fries drinks noodles".split(),
        neg="tasteless undercooked soggy bland greasy stale rotten inedible mushy oily".split(),
        pos="tasty yummy flavorful delicious fresh hearty".split(),
    ),
    "Hotel": dict(
        n=90,
        nouns="room bed bathroom lobby pool breakfast towels sheets staff manager reservation parking".split(),
        neg="dirty smelly noisy cramped outdated filthy unsanitary".split(),
        pos="spacious cozy clean comfortable hospitable".split(),
    ),
    "Beauty": dict(
        n=90,
        nouns="salon nail haircut stylist spa massage polish appointment nails".split(),
        neg="unprofessional sloppy overpriced rude dishonest".split(),
        pos="talented gentle meticulous thorough relaxing".split(),
    ),
}
GENERAL_NEG = ("worst disappointing horrible terrible awful rude poor disgusting miserable "
               "unacceptable ridiculous mediocre incompetent pathetic waste").split()
GENERAL_POS = ("great excellent amazing wonderful friendly helpful perfect fantastic nice best "
               "professional attentive courteous superb outstanding").split()
FEMALE_POS = "lovely beautiful".split()
MALE_POS = "gracious thoughtful informative".split()
NAMES = "tina natalie".split()
FILLER = ("we went there our visit place service time price bill location came back again "
          "ordered asked told waited minutes really definitely").split()
STOP_GLUE = "the and was it is a to of for with".split()
SPANISH = ("hay nada especial lugar mío fue bastante decepcionante comida servicio muy rico "
           "pero caro limpio sucio").split()
PATTERNS = ["paid $45", "at 7pm", "call 555-123-4567", "see www.example.com/review", "on 12/05/2020",
            "about 30 minutes"]
MALE = "man men he his sir gentleman".split()
FEMALE = "woman women she her madam lady".split()

LENGTH_BUCKETS = [(6, 24), (32, 66), (76, 108), (120, 150)]
LENGTH_WEIGHTS = [0.3, 0.35, 0.2, 0.15]


def _sentence(rng, topic, sentiment):
    t = TOPICS[topic]
    noun = rng.choice(t["nouns"])
    if sentiment < 0:
        adj = rng.choice(t["neg"] if rng.random() < 0.45 else GENERAL_NEG)
    else:
        r = rng.random()
        if r < 0.1:
            adj = rng.choice(FEMALE_POS)
        elif r < 0.2:
            adj = rng.choice(MALE_POS)
        else:
            adj = rng.choice(t["pos"] if rng.random() < 0.45 else GENERAL_POS)
    words = ["the", noun, "was", adj]
    if rng.random() < 0.1:
        words = ["the", noun, "was", "not", adj]
    words += list(rng.choice(FILLER, size=int(rng.integers(1, 4))))
    if rng.random() < 0.3:
        words += [rng.choice(STOP_GLUE)]
    if topic == "Beauty" and rng.random() < 0.08:
        words += [rng.choice(NAMES)]
    if rng.random() < 0.04:
        words += [rng.choice(PATTERNS)]
    return " ".join(words)


def make_message(rng, topic, label):
    lo, hi = LENGTH_BUCKETS[rng.choice(len(LENGTH_BUCKETS), p=LENGTH_WEIGHTS)]
    target = int(rng.integers(lo, hi + 1))
    if rng.random() < 0.06:
        text = " ".join(rng.choice(SPANISH, size=max(4, target // 3)))
        return text.capitalize() + "."
    sentences, n = [], 0
    while n < target:
        # 80% of sentences agree with the label
        agree = rng.random() < 0.8
        sign = (1 if label == 0 else -1) * (1 if agree else -1)
        s = _sentence(rng, topic, sign)
        sentences.append(s.capitalize() + rng.choice([".", "!", "."]))
        n += len(s.split())
    return " ".join(sentences)


def make_corpus(seed):
    rng = np.random.default_rng(seed)
    rows = []
    for topic, spec in TOPICS.items():
        for i in range(spec["n"]):
            label = i % 2
            text = make_message(rng, topic, label)
            if rng.random() < 0.05:
                label = 1 - label  # label noise so the reference model makes mistakes
            rows.append({"id": f"{topic[0].lower()}{i:03d}", "text": text, "label": label,
                         "metadata": {"topic": topic}})
    return rows


def make_embeddings(seed, dim=32):
    """Toy vectors with a sentiment axis, a gender axis and one axis per topic."""
    rng = np.random.default_rng(seed + 1)
    vocab = {}

    def put(words, **axes):
        for w in words:
            v = rng.normal(0.0, 0.18, size=dim)
            v[0] += axes.get("sent", 0.0)
            v[1] += axes.get("gender", 0.0)
            for j, name in enumerate(TOPICS):
                v[2 + j] += axes.get("topic", {}).get(name, 0.0)
            v[5] += axes.get("func", 0.0)
            vocab.setdefault(w, v)

    put(MALE, gender=1.2, func=0.3)
    put(FEMALE, gender=-1.2, func=0.3)
    put(NAMES, gender=-0.9, topic={"Beauty": 0.3})
    put(FEMALE_POS, sent=1.0, gender=-0.45)
    put(MALE_POS, sent=1.0, gender=0.35)
    for name, spec in TOPICS.items():
        put(spec["neg"], sent=-1.0, topic={name: 0.5})
        put(spec["pos"], sent=1.0, topic={name: 0.5})
        put(spec["nouns"], topic={name: 1.0})
    put(GENERAL_NEG, sent=-1.1)
    put(GENERAL_POS, sent=1.1)
    put(FILLER + ["not", "no"], func=1.0)
    put(["tag_money", "tag_time", "tag_phone", "tag_url", "tag_date", "tag_number"], func=0.8)
    put(["pink", "nurse", "architect", "player"], func=0.2)
    return vocab


CONFIG = {
    "paths": {
        "corpus": "corpus.jsonl",
        "embeddings": "embeddings.txt",
        "out_dir": "seglens-out",
    },
    "segmentation": {"metadata_field": "topic", "length_boundaries": [20, 50, 80],
                     "oov_boundaries": [0.5], "lda_k": 3, "lda_iterations": 300},
    "aggregation": {"min_freq_fraction": 0.0001, "k": 100, "unique_k": 15, "display_k": 20},
    "report": {"n_examples": 3},
    "seed": 7,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/seglens/data/mini"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = make_corpus(args.seed)
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
    emb = make_embeddings(args.seed)
    with open(out / "embeddings.txt", "w", encoding="utf-8") as fh:
        dim = len(next(iter(emb.values())))
        fh.write(f"{len(emb)} {dim}\n")
        for w, v in emb.items():
            fh.write(w + " " + " ".join(f"{x:.5f}" for x in v) + "\n")
    (out / "config.json").write_text(json.dumps(CONFIG, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(rows)} messages, {len(emb)} vectors to {out}")


if __name__ == "__main__":
    main()
