#!/usr/bin/env python3
"""One-off generator for the committed 1,000-line review fixture.

Writes reviews_1k.jsonl plus reviews_1k.expected.json holding independently
counted statistics (distinct users/items, record count, whitespace word
counts). The counting here is deliberately separate from the C++ pipeline so
the fixture's expected numbers come from a second implementation.

Run from the repository root:
    python3 tests/support/gen_fixture.py
"""

import json
import random
import os

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "..", "data", "fixtures")

ADJ = ["great", "tasty", "bland", "fresh", "stale", "salty", "sweet", "bitter",
       "smooth", "crunchy", "rich", "mild", "spicy", "nutty", "creamy", "dry"]
NOUN = ["coffee", "tea", "sauce", "snack", "cereal", "chips", "candy", "honey",
        "pasta", "rice", "soup", "jerky", "granola", "popcorn", "chocolate", "oil"]
VERB = ["love", "like", "hate", "enjoy", "recommend", "return", "reorder", "avoid"]
FILLER = ["the", "a", "is", "was", "very", "really", "quite", "so", "and", "but",
          "with", "for", "of", "per", "mg", "110", "serving", "price", "box", "bag"]


def make_text(rng):
    n = rng.randint(3, 60)
    words = []
    for _ in range(n):
        pool = rng.choice([ADJ, NOUN, VERB, FILLER, FILLER])
        words.append(rng.choice(pool))
    # sprinkle punctuation so the fixture exercises normalization
    text = " ".join(words)
    if rng.random() < 0.5:
        text = text.capitalize() + "."
    if rng.random() < 0.2:
        text += " Great!"
    return text


def main():
    rng = random.Random(20240811)
    n_lines = 1000
    users = [f"U{i:04d}" for i in range(180)]
    items = [f"I{i:04d}" for i in range(70)]

    lines = []
    records = []
    malformed_at = {250, 500, 750}  # exercised as recoverable per-line errors
    for i in range(n_lines):
        if i in malformed_at:
            if i == 250:
                lines.append('{"reviewerID":"U9999","asin":"I9999","reviewText":"no rating"}')
            elif i == 500:
                lines.append('{"this is not json at all')
            else:
                lines.append('{"reviewerID":"","asin":"I0001","overall":5.0,"reviewText":"x"}')
            continue
        user = rng.choice(users)
        item = rng.choice(items)
        rating = float(rng.randint(1, 5))
        text = make_text(rng)
        rec = {"reviewerID": user, "asin": item, "reviewText": text, "overall": rating}
        if rng.random() < 0.01:
            del rec["reviewText"]  # missing text -> empty-text review, not an error
            text = ""
        lines.append(json.dumps(rec))
        records.append((user, item, rating, text))

    # independent statistics
    distinct_users = sorted({r[0] for r in records})
    distinct_items = sorted({r[1] for r in records})
    total_words = sum(len(r[3].split()) for r in records)
    stats = {
        "n_lines": n_lines,
        "n_malformed": len(malformed_at),
        "n_records": len(records),
        "n_users": len(distinct_users),
        "n_items": len(distinct_items),
        "total_words": total_words,
        "avg_reviews_per_item": len(records) / len(distinct_items),
        "avg_words_per_review": total_words / len(records),
    }

    os.makedirs(OUT_DIR, exist_ok=True)
    with open(os.path.join(OUT_DIR, "reviews_1k.jsonl"), "w") as f:
        f.write("\n".join(lines) + "\n")
    with open(os.path.join(OUT_DIR, "reviews_1k.expected.json"), "w") as f:
        json.dump(stats, f, indent=2)
        f.write("\n")
    print(json.dumps(stats, indent=2))


if __name__ == "__main__":
    main()
