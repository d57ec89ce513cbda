#!/usr/bin/env python3
# Copyright 2026 The lexaug Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the bundled data assets under data/.

Input is the labMT 1.0 word list as distributed in the `labMTsimple`
package (labMTsimple/data/LabMT/labMT1.txt). Outputs:

  data/labmt/labmt1.tsv           full lexicon, canonical column names
  data/sample/labmt_sample500.tsv 500-word slice of stem families
  data/sample/vectors50.txt       seeded random 50-d vectors (text format)
  data/sample/subword_vocab.txt   small WordPiece vocabulary

Usage: prepare_data.py <labMT1.txt> <repo root>
"""

import collections
import json
import os
import random
import sys

HEADER = [
    "word",
    "happiness_rank",
    "happiness_average",
    "happiness_standard_deviation",
    "twitter_rank",
    "google_rank",
    "nyt_rank",
    "lyrics_rank",
]


def read_labmt(path):
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\r\n") for ln in f]
    rows = [ln.split("\t") for ln in lines[1:] if ln]
    return rows


def write_tsv(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(HEADER) + "\n")
        for r in rows:
            f.write("\t".join(r) + "\n")


def family_slice(rows, size, seed):
    # Words grouped by their first five characters; only families with at
    # least three members are eligible so that held-out words share n-grams
    # with training words.
    groups = collections.defaultdict(list)
    for r in rows:
        w = r[0]
        if w.isalpha() and len(w) >= 5:
            groups[w[:5]].append(r)
    families = [v for _, v in sorted(groups.items()) if len(v) >= 3]
    rng = random.Random(seed)
    rng.shuffle(families)
    picked = []
    for fam in families:
        picked.extend(fam[: size - len(picked)])
        if len(picked) == size:
            break
    if len(picked) < size:
        raise SystemExit("not enough families for a %d-word slice" % size)
    order = {id(r): i for i, r in enumerate(rows)}
    picked.sort(key=lambda r: order[id(r)])
    return picked


def toy_vectors(path, words, dim, seed):
    rng = random.Random(seed)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("%d %d\n" % (len(words), dim))
        for w in words:
            vals = " ".join("%.4f" % rng.uniform(-0.1, 0.1) for _ in range(dim))
            f.write("%s %s\n" % (w, vals))


def subword_vocab(path, rows, fixture_dir, n_words):
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    chars = list("abcdefghijklmnopqrstuvwxyz0123456789") + list(";,.:'\"-()!?#&/")
    suffixes = ["s", "es", "ed", "ing", "ly", "er", "est", "ness", "ful",
                "less", "able", "ible", "tion", "sion", "ment", "ity", "ous",
                "ive", "al", "ic", "y", "en", "ish", "ist", "ism"]
    tokens = []
    seen = set()

    def add(t):
        if t and t not in seen:
            seen.add(t)
            tokens.append(t)

    for t in specials + chars + ["##" + c for c in chars] + ["##" + s for s in suffixes]:
        add(t)

    # Definition words from the recorded fixtures come first so the fixture
    # pipeline exercises whole-word hits.
    for name in sorted(os.listdir(fixture_dir)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(fixture_dir, name), encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, list):
            continue
        for entry in data:
            for meaning in entry.get("meanings", []):
                for d in meaning.get("definitions", []):
                    for w in d.get("definition", "").lower().split():
                        w = w.strip(";,.:'\"()!?")
                        if w.isalpha():
                            add(w)
    by_rank = sorted(rows, key=lambda r: int(r[4]) if r[4].isdigit() else 10**9)
    for r in by_rank[:n_words]:
        if r[0].isalpha():
            add(r[0])
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for t in tokens:
            f.write(t + "\n")


def main():
    src, root = sys.argv[1], sys.argv[2]
    rows = read_labmt(src)
    write_tsv(os.path.join(root, "data/labmt/labmt1.tsv"), rows)
    sample = family_slice(rows, 500, seed=7)
    write_tsv(os.path.join(root, "data/sample/labmt_sample500.tsv"), sample)
    toy_vectors(os.path.join(root, "data/sample/vectors50.txt"),
                [r[0] for r in sample], 50, seed=11)
    subword_vocab(os.path.join(root, "data/sample/subword_vocab.txt"), rows,
                  os.path.join(root, "data/fixtures/defs"), 2000)


if __name__ == "__main__":
    main()
