"""Synthetic question-fact pair sets for exercising the fine-tuning loop.

Positive candidates verbalize a fact that answers the question; negative
candidates verbalize unrelated attribute facts, so the two classes are
separable from candidate content alone.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

_SUBJECTS = (
    "alba bekker", "boris cormac", "carla dravik", "dmitri elsner",
    "elena fontane", "farid grubic", "greta hallen", "hugo ivanov",
)
_OBJECTS = (
    "fc arden", "fc bray", "fc esk", "fc kells", "fc lorne",
    "golden boot trophy", "northfield academy",
)
_RELEVANT = ("member of sports team", "award received", "educated at")
_IRRELEVANT = ("height", "shirt number", "nickname", "place of birth")
_FILLER = ("1.85 m", "7", "the wall", "selby", "blue", "left foot")


def separable_pairs(n: int, seed: int = 0) -> list[dict]:
    """Balanced pair set whose label is decidable from the candidate."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        subject = rng.choice(_SUBJECTS)
        obj = rng.choice(_OBJECTS)
        question = f"when did {subject} play for {obj}?"
        if i % 2 == 0:
            candidate = (
                f"{subject} {rng.choice(_RELEVANT)} {obj} "
                f"and start time {rng.randint(1980, 2015)}."
            )
            label = 1
        else:
            candidate = f"{subject} {rng.choice(_IRRELEVANT)} {rng.choice(_FILLER)}."
            label = 0
        pairs.append({"question": question, "candidate": candidate, "label": label})
    return pairs


def write_pairs(path: str | Path, pairs: list[dict]):
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps(p, sort_keys=True) + "\n")
