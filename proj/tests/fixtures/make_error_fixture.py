"""Writes the annotated error fixture: 1772 records whose category counts
(364 MODALITY_PLANE, 251 SEMANTIC, 292 SPECIFICATION, 363 BOUNDARY_LOSS,
502 MISCELLANEOUS) round to 20.54 / 14.16 / 16.48 / 20.49 / 28.33 percent.
1772 is the smallest total for which all five shares round that way.

    python3 make_error_fixture.py <out.jsonl>
"""
import json
import random
import sys

COUNTS = [("MODALITY_PLANE", 364), ("SEMANTIC", 251), ("SPECIFICATION", 292),
          ("BOUNDARY_LOSS", 363), ("MISCELLANEOUS", 502)]

EXAMPLES = {
    "MODALITY_PLANE": [("axial", "coronal", "plane confused"), ("ct", "mri", "modality confused"),
                       ("sagittal", "axial", "plane confused"), ("x-ray", "ct", "modality confused")],
    "SEMANTIC": [("hemorrhage", "bleeding", "same meaning, different word"),
                 ("tumor", "neoplasm", "synonym"), ("kidney", "renal", "related form")],
    "SPECIFICATION": [("right lower lobe pneumonia", "pneumonia", "location missing"),
                      ("left kidney cyst", "cyst", "side missing"), ("4 cm mass", "mass", "size missing")],
    "BOUNDARY_LOSS": [("ring enhancing lesion in the left frontal lobe", "ring enhancing lesion",
                       "answer cut off at length limit"),
                      ("fracture of the distal radius with displacement", "fracture of the distal",
                       "answer truncated")],
    "MISCELLANEOUS": [("pulmonary embolism", "brain", "unrelated answer"), ("yes", "no", "wrong polarity"),
                      ("calcification", "the the", "degenerate output")],
}


def main(path):
    rng = random.Random(226)
    cats = [c for c, n in COUNTS for _ in range(n)]
    rng.shuffle(cats)
    with open(path, "w", newline="\n") as f:
        for i, c in enumerate(cats, 1):
            gold, pred, note = EXAMPLES[c][rng.randrange(len(EXAMPLES[c]))]
            rec = {"qa_id": "err_%04d" % i, "gold": gold, "predicted": pred, "category": c, "note": note}
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
