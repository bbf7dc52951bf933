#!/usr/bin/env python3
"""Regenerates the bundled toy corpus under data/toy/.

60-word vocabulary, 16-dimensional embeddings, two review classes with
planted class keywords, 50-entry synonym and typo lists, and a POS lexicon.
Output is deterministic for a given --seed.
"""

import argparse
import math
import random
from pathlib import Path

GOOD_KEYWORDS = {
    "NOUN": ["masterpiece", "gem", "delight", "triumph"],
    "ADJECTIVE": ["superb", "brilliant", "wonderful"],
    "ADVERB": ["beautifully", "flawlessly", "perfectly"],
}
BAD_KEYWORDS = {
    "NOUN": ["disaster", "mess", "flop", "bore"],
    "ADJECTIVE": ["awful", "dreadful", "terrible"],
    "ADVERB": ["poorly", "badly", "horribly"],
}
NEUTRAL = {
    "NOUN": ["movie", "film", "plot", "story", "actor", "scene", "cast", "ending",
             "director", "script"],
    "PLURAL_NOUN": ["movies", "films", "actors", "scenes"],
    "VERB": ["watched", "saw", "bought", "felt", "seemed", "played"],
    "ADJECTIVE": ["long", "old", "new", "big", "famous", "serious"],
    "ADVERB": ["really", "quickly", "mostly", "simply", "nearly", "finally"],
    "OTHER": ["the", "a", "this", "it", "was", "and", "of", "is"],
}

SYNONYMS = {
    "movie": ["film", "picture"], "film": ["movie", "picture"],
    "plot": ["story", "storyline"], "story": ["plot", "tale"],
    "actor": ["performer", "star"], "scene": ["sequence", "shot"],
    "cast": ["ensemble"], "ending": ["finale", "conclusion"],
    "director": ["filmmaker"], "script": ["screenplay"],
    "movies": ["films"], "films": ["movies"], "actors": ["performers"],
    "scenes": ["sequences"], "watched": ["saw", "viewed"], "saw": ["watched"],
    "bought": ["purchased"], "felt": ["seemed"], "seemed": ["appeared", "felt"],
    "played": ["performed"], "long": ["lengthy"], "old": ["dated"],
    "new": ["recent", "fresh"], "big": ["large", "huge"],
    "famous": ["renowned", "celebrated"], "serious": ["earnest", "grave"],
    "really": ["truly", "genuinely"], "quickly": ["rapidly", "swiftly"],
    "mostly": ["largely", "mainly"], "simply": ["merely"], "nearly": ["almost"],
    "finally": ["eventually", "ultimately"], "masterpiece": ["classic"],
    "gem": ["jewel"], "delight": ["joy", "pleasure"], "triumph": ["success", "victory"],
    "superb": ["excellent", "outstanding"], "brilliant": ["excellent", "terrific"],
    "wonderful": ["marvelous", "fantastic"], "beautifully": ["gracefully"],
    "flawlessly": ["perfectly"], "perfectly": ["flawlessly", "ideally"],
    "disaster": ["catastrophe", "fiasco"], "mess": ["shambles"], "flop": ["failure"],
    "bore": ["drag"], "awful": ["horrible", "dreadful"], "dreadful": ["awful", "horrible"],
    "terrible": ["awful", "horrible"], "poorly": ["badly", "weakly"],
}

# Tags for synonym words outside the vocabulary.
EXTRA_LEXICON = {
    "picture": "NOUN", "storyline": "NOUN", "tale": "NOUN", "performer": "NOUN",
    "star": "NOUN", "sequence": "NOUN", "shot": "NOUN", "ensemble": "NOUN",
    "finale": "NOUN", "conclusion": "NOUN", "filmmaker": "NOUN", "screenplay": "NOUN",
    "performers": "PLURAL_NOUN", "sequences": "PLURAL_NOUN", "viewed": "VERB",
    "purchased": "VERB", "appeared": "VERB", "performed": "VERB", "lengthy": "ADJECTIVE",
    "dated": "ADJECTIVE", "recent": "ADJECTIVE", "fresh": "ADJECTIVE", "large": "ADJECTIVE",
    "huge": "ADJECTIVE", "renowned": "ADJECTIVE", "celebrated": "ADJECTIVE",
    "earnest": "ADJECTIVE", "grave": "ADJECTIVE", "almost": "ADVERB", "merely": "ADVERB",
    "classic": "NOUN", "jewel": "NOUN", "joy": "NOUN", "pleasure": "NOUN", "success": "NOUN",
    "victory": "NOUN", "excellent": "ADJECTIVE", "outstanding": "ADJECTIVE",
    "terrific": "ADJECTIVE", "marvelous": "ADJECTIVE", "fantastic": "ADJECTIVE",
    "catastrophe": "NOUN", "fiasco": "NOUN", "shambles": "NOUN", "failure": "NOUN",
    "drag": "NOUN", "horrible": "ADJECTIVE",
}


def typo_of(word, rng):
    """Two deterministic misspellings: an adjacent swap and a doubled letter."""
    out = []
    i = rng.randrange(1, len(word) - 1) if len(word) > 2 else 0
    swapped = word[:i] + word[i + 1] + word[i] + word[i + 2:] if len(word) > 1 else word
    if swapped != word:
        out.append(swapped)
    j = rng.randrange(len(word))
    doubled = word[:j + 1] + word[j] + word[j + 1:]
    if doubled not in out:
        out.append(doubled)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data/toy")
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--per-class", type=int, default=330)
    parser.add_argument("--neutral-reviews", type=int, default=40)
    args = parser.parse_args()
    rng = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)

    lexicon = {}
    for table in (GOOD_KEYWORDS, BAD_KEYWORDS, NEUTRAL):
        for tag, words in table.items():
            for w in words:
                lexicon[w] = tag
    vocab = list(lexicon)
    assert len(vocab) == 60, len(vocab)
    assert len(SYNONYMS) == 50, len(SYNONYMS)
    lexicon.update(EXTRA_LEXICON)

    # Keywords of one class share an axis that no other word touches.
    dim = 16
    good_set = {w for words in GOOD_KEYWORDS.values() for w in words}
    bad_set = {w for words in BAD_KEYWORDS.values() for w in words}
    with open(args.out / "embeddings.txt", "w") as f:
        f.write(f"{len(vocab)} {dim}\n")
        for w in vocab:
            v = [rng.gauss(0.0, 1.0) for _ in range(dim)]
            v[0] = v[1] = 0.0
            if w in good_set or w in bad_set:
                v = [0.25 * x for x in v]
                v[0 if w in good_set else 1] = 1.0
            norm = math.sqrt(sum(x * x for x in v))
            f.write(w + " " + " ".join(f"{x / norm:.6f}" for x in v) + "\n")

    with open(args.out / "pos_lexicon.tsv", "w") as f:
        for w in sorted(lexicon):
            f.write(f"{w}\t{lexicon[w]}\n")

    with open(args.out / "synonyms.tsv", "w") as f:
        for w in SYNONYMS:
            f.write(f"{w}\t{','.join(SYNONYMS[w])}\n")

    with open(args.out / "typos.tsv", "w") as f:
        for w in list(SYNONYMS)[:50]:
            f.write(f"{w}\t{','.join(typo_of(w, rng))}\n")

    neutral_words = [w for words in NEUTRAL.values() for w in words]
    good = [w for words in GOOD_KEYWORDS.values() for w in words]
    bad = [w for words in BAD_KEYWORDS.values() for w in words]

    def review(keywords):
        words = [rng.choice(neutral_words) for _ in range(rng.randint(8, 16))]
        planted = 1 if rng.random() < 0.7 else 2
        for _ in range(planted if keywords else 0):
            words.insert(rng.randrange(len(words) + 1), rng.choice(keywords))
        text = " ".join(words)
        return text[0].upper() + text[1:] + "."

    records = [("good", s) for s in range(args.per_class)] + \
              [("bad", s) for s in range(args.per_class)] + \
              [("neutral", s) for s in range(args.neutral_reviews)]
    rng.shuffle(records)
    with open(args.out / "reviews.txt", "w") as f:
        for n, (kind, _) in enumerate(records):
            if kind == "good":
                score, text = rng.choice(["4.0", "4.5", "5.0"]), review(good)
            elif kind == "bad":
                score, text = rng.choice(["1.0", "1.5", "2.0"]), review(bad)
            else:
                score, text = "3.0", review([])
            f.write(f"product/productId: TOY{n:05d}\n")
            f.write(f"review/userId: U{rng.randrange(10**6):06d}\n")
            f.write(f"review/score: {score}\n")
            f.write(f"review/summary: review {n}\n")
            f.write(f"review/text: {text}\n\n")


if __name__ == "__main__":
    main()
