#!/usr/bin/env python3
"""Regenerate fixtures/english_10k.txt.

Sentences are sampled word-by-word from the English unigram distribution
published by the `wordfreq` package (top 40k alphabetic words), so word
frequencies follow real English while the text itself is synthetic.
Usage: python3 scripts/make_fixture.py [lines] > fixtures/english_10k.txt
"""
import random
import sys

import wordfreq

SEED = 20230612
# Keep the fixture free of the most common profanity.
BLOCK = {"shit", "fuck", "fucking", "fucked", "fucker", "bitch", "bitches", "ass", "asshole", "damn",
         "dick", "pussy", "cunt", "cock", "bullshit", "porn", "nigga", "nigger", "fag", "faggot",
         "whore", "slut", "shitty", "motherfucker", "sex", "sexy", "tits", "boobs", "penis", "rape"}


def main() -> None:
    lines = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
    rng = random.Random(SEED)
    words = [w for w in wordfreq.top_n_list("en", 40_000) if w.isascii() and w.replace("'", "").isalpha() and w not in BLOCK]
    weights = [wordfreq.word_frequency(w, "en") for w in words]

    def sentence() -> str:
        n = max(3, min(24, int(rng.gauss(11, 5))))
        toks = rng.choices(words, weights=weights, k=n)
        toks = ["I" if t == "i" else t for t in toks]
        toks[0] = toks[0][0].upper() + toks[0][1:]
        out = []
        for i, t in enumerate(toks):
            if i < n - 1 and rng.random() < 0.06:
                t += ","
            out.append(t)
        end = rng.choices([".", "?", "!"], weights=[90, 7, 3])[0]
        return " ".join(out) + end

    for _ in range(lines):
        k = 1 if rng.random() < 0.7 else 2
        print(" ".join(sentence() for _ in range(k)))


if __name__ == "__main__":
    main()
