#!/usr/bin/env python3
"""Writes deterministic term-weight vectors for a passage file.

Weights imitate a learned sparse encoder: stopwords are dropped, the in-text
terms get log-scaled tf * idf weights and a small synonym table adds
expansion terms at reduced weight.

    make_sparse_vectors.py corpus.tsv > sparse_vectors.tsv
"""
import math
import re
import sys
from collections import Counter

STOPWORDS = set("""a an and are as at be but by can for from has have in is it its less let
make makes many me more most my near now of often on one or other same should so some such
than that the their them then there these they this those to too usually very was were when
where which while who will with without your you""".split())

EXPANSIONS = {
    "bike": ["bicycle", "cycling"],
    "bikes": ["bicycle", "cycling"],
    "mountain": ["mtb"],
    "hardtail": ["bike", "mtb"],
    "suspension": ["shock"],
    "knee": ["joint"],
    "knees": ["knee", "joint"],
    "trails": ["trail"],
    "trail": ["trails"],
    "beginner": ["beginners", "novice"],
    "beginners": ["beginner", "novice"],
    "shinkansen": ["train", "rail"],
    "trains": ["train", "rail"],
    "train": ["trains", "rail"],
    "vegetarian": ["vegan", "meat"],
    "fish": ["seafood"],
    "children": ["kids", "family"],
    "japanese": ["japan"],
    "japan": ["japanese"],
    "kyoto": ["japan"],
    "tokyo": ["japan"],
    "osaka": ["japan"],
    "colorado": ["denver"],
}


def tokens(text):
    return [t for t in re.split(r"[^0-9a-z]+", text.lower()) if t and t not in STOPWORDS]


def main(path):
    docs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            doc_id, text = line.split("\t", 1)
            docs.append((doc_id, Counter(tokens(text))))
    df = Counter()
    for _, tf in docs:
        df.update(tf.keys())
    n = len(docs)
    for doc_id, tf in docs:
        weights = {}
        for term, count in tf.items():
            idf = math.log(1.0 + n / df[term])
            weights[term] = weights.get(term, 0.0) + math.log1p(count) * idf
        for term, count in tf.items():
            for extra in EXPANSIONS.get(term, []):
                weights[extra] = weights.get(extra, 0.0) + 0.3 * math.log1p(count)
        entries = " ".join(f"{t}:{w:.4f}" for t, w in sorted(weights.items()))
        print(f"{doc_id}\t{entries}")


if __name__ == "__main__":
    main(sys.argv[1])
