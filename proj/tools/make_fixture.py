#!/usr/bin/env python3
"""Regenerates the bundled 20-item synthetic fixture under data/fixture/.

Every item has its own invented vocabulary, so items never compete for
documents. Per item the corpus holds three documents for the correct option,
three "mimic" documents that share the question's surface wording but name a
wrong option, and one document per remaining distractor.

Items 0-13 are built so that the stem, the HyDE passages and the Query2Doc
pseudo-document all lean toward the mimic while the contrastive pair (a
mimic-leaning H+ plus an H- describing the mimic) pulls the target documents
up. Items 14-16 are easy for every method. Items 17-19 get an H- that repeats
H+, which cancels the contrastive query.
"""

import argparse
import json
import pathlib
import random

ITEMS = 20
WINS = range(0, 14)
EASY = range(14, 17)
COLLAPSE = range(17, 20)

ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "tr", "pl", "st"]
VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
CODAS = ["", "n", "r", "l", "s", "x", "th"]


class Words:
    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.used = set()

    def take(self, syllables=3):
        while True:
            word = "".join(
                self.rng.choice(ONSETS) + self.rng.choice(VOWELS) + self.rng.choice(CODAS)
                for _ in range(syllables)
            )
            # Option names are matched as substrings, so keep every word unique
            # and free of other words.
            if word not in self.used and not any(word in u or u in word for u in self.used):
                self.used.add(word)
                return word

    def many(self, n, syllables=3):
        return [self.take(syllables) for _ in range(n)]


def sentence(words):
    return " ".join(words) + "."


def build(seed):
    words = Words(seed)
    dataset, corpus, script, ratings = [], [], [], []
    for i in range(ITEMS):
        item_id = f"q{i:02d}"
        split = "synth-a" if i < ITEMS // 2 else "synth-b"
        shared = words.many(6)
        asked = words.many(2)
        target_name, mimic_name, *distractor_names = [n.capitalize() for n in words.many(4, 4)]
        target = words.many(4)
        mimic = words.many(4)

        letters = "ABCD"
        key = letters[i % 4]
        others = [l for l in letters if l != key]
        options = {key: target_name, others[0]: mimic_name, others[1]: distractor_names[0],
                   others[2]: distractor_names[1]}
        options = dict(sorted(options.items()))

        stem_words = shared + asked
        if i in EASY:
            stem_words = target + shared[:1] + asked
        stem = "Findings: " + ", ".join(stem_words) + ". Which diagnosis fits best?"
        dataset.append({"id": item_id, "question": stem, "options": options, "answer": key, "dataset": split})

        for j in range(3):
            corpus.append({"id": f"d{i:02d}t{j}",
                           "text": f"{target_name} " + sentence(target + shared[j * 2:j * 2 + 2] + words.many(3))})
        for j in range(3):
            corpus.append({"id": f"d{i:02d}m{j}",
                           "text": f"{mimic_name} " + sentence(shared + mimic[j:j + 2] + words.many(2))})
        for j, name in enumerate(distractor_names):
            corpus.append({"id": f"d{i:02d}x{j}", "text": f"{name} " + sentence(asked[:1] + words.many(5))})

        h_plus = sentence(shared + target[:2])
        h_minus = sentence([mimic_name.lower()] + mimic + shared)
        if i in EASY:
            h_plus = sentence([target_name.lower()] + target + shared[:2])
        if i in COLLAPSE:
            h_minus = h_plus
        if i in EASY:
            passages = [sentence([target_name.lower()] + target[k:] + shared[:2]) for k in range(3)]
            pseudo = sentence([target_name.lower()] + target)
        else:
            passages = [sentence(shared + [mimic_name.lower()] + mimic[k:k + 2]) for k in range(3)]
            pseudo = sentence(shared + [mimic_name.lower()] + mimic)
        script.append({"id": item_id, "h_plus": h_plus, "h_minus": h_minus, "passages": passages,
                       "pseudo_doc": pseudo})

        if i in COLLAPSE:
            tier = "Poor"
        elif i in EASY:
            tier = "exclude" if i == 16 else "Good"
        else:
            tier = "Excellent" if i % 3 == 0 else "Good"
        ratings.append((item_id, tier))
    return dataset, corpus, script, ratings


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "fixture"))
    parser.add_argument("--seed", type=int, default=20240611)
    args = parser.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset, corpus, script, ratings = build(args.seed)
    write_jsonl(out / "dataset.jsonl", dataset)
    write_jsonl(out / "corpus.jsonl", corpus)
    write_jsonl(out / "mock_script.jsonl", script)
    (out / "ratings.tsv").write_text(
        "# item_id\ttier\n" + "".join(f"{item}\t{tier}\n" for item, tier in ratings))


if __name__ == "__main__":
    main()
