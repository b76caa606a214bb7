"""Random corpora scored by NLTK's corpus_bleu, for cross-checking.

Every candidate has four or more tokens. NLTK counts a segment with no
n-grams of some order as one n-gram in the denominator, while pooled counts
add nothing, so shorter candidates would make the two definitions differ.

    python3 make_bleu_fixture.py <out.json>
"""
import json
import random
import sys
import warnings

from nltk.translate.bleu_score import corpus_bleu

WORDS = ["left", "right", "lung", "lobe", "mass", "liver", "ct", "axial", "cm", "cyst"]


def corpus(rng):
    pairs = []
    for _ in range(rng.randint(1, 8)):
        ref = [rng.choice(WORDS[:rng.randint(3, len(WORDS))]) for _ in range(rng.randint(1, 7))]
        if rng.random() < 0.5:
            cand = list(ref)
            for _ in range(rng.randint(0, 2)):
                op = rng.random()
                if op < 0.4 and cand:
                    cand[rng.randrange(len(cand))] = rng.choice(WORDS)
                elif op < 0.7:
                    cand.insert(rng.randint(0, len(cand)), rng.choice(WORDS))
                elif cand:
                    cand.pop(rng.randrange(len(cand)))
        else:
            cand = [rng.choice(WORDS) for _ in range(rng.randint(1, 7))]
        pairs.append((cand, ref))
    pad = ["lung", "lobe", "mass", "cm"]
    return [(c + pad[: max(0, 4 - len(c))], r) for c, r in pairs]


def main(out):
    rng = random.Random(1311)
    cases = []
    while len(cases) < 30:
        pairs = corpus(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            score = corpus_bleu([[r] for _, r in pairs], [c for c, _ in pairs])
        cases.append({"candidates": [c for c, _ in pairs], "references": [r for _, r in pairs], "bleu": float(score)})
    with open(out, "w") as f:
        json.dump(cases, f, indent=0)


if __name__ == "__main__":
    main(sys.argv[1])
