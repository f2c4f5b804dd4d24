"""Seeded desk-scale synthetic benchmark: a football-career world with
temporal qualifiers, plus templated questions in all four temporal
categories with computed gold answers.

Byte-identical output under a fixed seed: all iteration is over sorted
structures and the only randomness comes from one seeded generator.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .kg import KnowledgeGraph, dump_kg_files, load_kg_files

CATEGORY_NAMES = ("EXPLICIT", "IMPLICIT", "TEMPORAL-ANSWER", "ORDINAL")

_FIRST = (
    "alba", "boris", "carla", "dmitri", "elena", "farid", "greta", "hugo",
    "ines", "jonas", "katya", "luca", "marta", "nuno", "olga", "pavel",
    "quinn", "rosa", "stefan", "tilda", "umar", "vera", "wim", "xenia",
    "yara", "zoran", "amara", "bruno", "celia", "darius",
)
_LAST = (
    "abano", "bekker", "cormac", "dravik", "elsner", "fontane", "grubic",
    "hallen", "ivanov", "jarvela", "kovic", "lindqvist", "moravec", "novak",
    "olden", "petrov", "quist", "rossi", "sandor", "tesler", "ungar",
    "varga", "weiss", "ybarra", "zeman",
)
_CITIES = (
    "arden", "bray", "corvel", "dunmore", "esk", "farrow", "glenside",
    "harlow", "istria", "jorvik", "kells", "lorne", "meriden", "norholm",
    "ostia", "pellworm", "quarry bay", "rydal", "selby", "tarnow",
    "uxholt", "velden", "westport", "yarrow", "zennor",
)
_AWARD_WORDS = (
    "golden boot", "silver ball", "bronze glove", "iron boot", "copper whistle",
    "crystal cup", "granite shield", "amber medal", "cobalt star", "jade crown",
)
_SCHOOL_WORDS = (
    "northfield", "southgate", "eastbrook", "westcliff", "midtown",
    "riverside", "lakeview", "hillcrest", "stonebridge", "ferndale",
)


@dataclass(frozen=True)
class BenchmarkQuestion:
    id: str
    text: str
    answers: tuple[str, ...]  # item ids
    category: str
    within_two_hops: bool = True

    def __post_init__(self):
        if not self.answers:
            raise ValueError(f"question {self.id}: gold answers must be nonempty")
        if self.category not in CATEGORY_NAMES:
            raise ValueError(f"question {self.id}: unknown category {self.category}")


@dataclass(frozen=True)
class Stint:
    club: str  # club item id
    start: int
    end: int


@dataclass
class World:
    people: dict[str, str] = field(default_factory=dict)  # id -> label
    clubs: dict[str, str] = field(default_factory=dict)
    awards: dict[str, str] = field(default_factory=dict)
    schools: dict[str, str] = field(default_factory=dict)
    careers: dict[str, tuple[Stint, ...]] = field(default_factory=dict)
    award_wins: dict[str, tuple[tuple[str, int], ...]] = field(default_factory=dict)
    education: dict[str, tuple[str, int, int]] = field(default_factory=dict)


@dataclass
class SynthConfig:
    seed: int = 0
    n_people: int = 120
    n_clubs: int = 15
    n_awards: int = 10
    n_schools: int = 10
    n_questions: int = 1000
    category_mix: dict[str, float] = field(
        default_factory=lambda: {c: 0.25 for c in CATEGORY_NAMES}
    )
    guaranteed_fraction: float = 1.0  # fraction with gold within 2 hops
    year_lo: int = 1990
    year_hi: int = 2004
    min_stints: int = 2
    max_stints: int = 2
    min_stint_len: int = 4
    max_stint_len: int = 6
    max_wins: int = 1

    def __post_init__(self):
        if self.n_people + self.n_clubs + self.n_awards + self.n_schools < 20:
            raise ValueError("world too small: need at least 20 entities")
        if abs(sum(self.category_mix.values()) - 1.0) > 1e-9:
            raise ValueError("category mix must sum to 1")
        if not 0.0 <= self.guaranteed_fraction <= 1.0:
            raise ValueError("guaranteed_fraction must be in [0, 1]")
        if not 1 <= self.min_stints <= self.max_stints <= 4:
            raise ValueError("stint counts must satisfy 1 <= min <= max <= 4")
        if not 1 <= self.min_stint_len <= self.max_stint_len:
            raise ValueError("stint lengths must satisfy 1 <= min <= max")
        if self.max_wins < 0:
            raise ValueError("max_wins must be >= 0")
        if self.year_hi - self.year_lo < (self.max_stint_len + 1) * self.max_stints:
            raise ValueError("year range too narrow for the longest career")


def _category_counts(cfg: SynthConfig) -> dict[str, int]:
    """Largest-remainder apportionment: totals match proportions within 1."""
    exact = {c: cfg.n_questions * cfg.category_mix.get(c, 0.0) for c in CATEGORY_NAMES}
    counts = {c: int(exact[c]) for c in CATEGORY_NAMES}
    leftover = cfg.n_questions - sum(counts.values())
    by_frac = sorted(CATEGORY_NAMES, key=lambda c: (-(exact[c] - counts[c]), c))
    for c in by_frac[:leftover]:
        counts[c] += 1
    return counts


def generate_world(cfg: SynthConfig) -> World:
    rng = random.Random(cfg.seed)
    w = World()
    names = [f"{f} {l}" for f in _FIRST for l in _LAST]
    rng.shuffle(names)
    for i in range(cfg.n_people):
        w.people[f"per{i:03d}"] = names[i]
    for i in range(cfg.n_clubs):
        w.clubs[f"club{i:03d}"] = f"fc {_CITIES[i % len(_CITIES)]}" + (
            f" {i // len(_CITIES) + 1}" if i >= len(_CITIES) else ""
        )
    for i in range(cfg.n_awards):
        w.awards[f"awd{i:03d}"] = f"{_AWARD_WORDS[i % len(_AWARD_WORDS)]} trophy" + (
            f" {i // len(_AWARD_WORDS) + 1}" if i >= len(_AWARD_WORDS) else ""
        )
    for i in range(cfg.n_schools):
        w.schools[f"sch{i:03d}"] = f"{_SCHOOL_WORDS[i % len(_SCHOOL_WORDS)]} academy" + (
            f" {i // len(_SCHOOL_WORDS) + 1}" if i >= len(_SCHOOL_WORDS) else ""
        )

    club_ids = sorted(w.clubs)
    award_claimed: set[tuple[str, int]] = set()  # unique winner per (award, year)
    for pid in sorted(w.people):
        n_stints = rng.randint(cfg.min_stints, cfg.max_stints)
        year = rng.randint(
            cfg.year_lo, cfg.year_hi - (cfg.max_stint_len + 1) * n_stints
        )
        stints = []
        used_clubs = rng.sample(club_ids, n_stints)
        for club in used_clubs:
            length = rng.randint(cfg.min_stint_len, cfg.max_stint_len)
            stints.append(Stint(club=club, start=year, end=year + length))
            year += length + 1  # one-year gap keeps boundary years unambiguous
        w.careers[pid] = tuple(stints)

        wins = []
        for _ in range(rng.randint(0, cfg.max_wins)):
            award = rng.choice(sorted(w.awards))
            wyear = rng.randint(stints[0].start, stints[-1].end)
            if (award, wyear) in award_claimed:
                continue
            award_claimed.add((award, wyear))
            wins.append((award, wyear))
        w.award_wins[pid] = tuple(sorted(wins))

        school = rng.choice(sorted(w.schools))
        w.education[pid] = (school, stints[0].start - 4, stints[0].start - 1)
    return w


def world_to_kg(w: World) -> KnowledgeGraph:
    items: list[dict] = []
    facts: list[dict] = []
    years: set[int] = set()

    for pid, label in sorted(w.people.items()):
        items.append({"id": pid, "kind": "entity", "label": label})
    for cid, label in sorted(w.clubs.items()):
        items.append({"id": cid, "kind": "entity", "label": label})
    for aid, label in sorted(w.awards.items()):
        items.append({"id": aid, "kind": "entity", "label": label})
    for sid, label in sorted(w.schools.items()):
        items.append({"id": sid, "kind": "entity", "label": label})
    items += [
        {"id": "pMember", "kind": "predicate", "label": "member of sports team"},
        {"id": "pAward", "kind": "predicate", "label": "award received"},
        {"id": "pSchool", "kind": "predicate", "label": "educated at"},
        {"id": "pStart", "kind": "predicate", "label": "start time"},
        {"id": "pEnd", "kind": "predicate", "label": "end time"},
        {"id": "pPoint", "kind": "predicate", "label": "point in time"},
    ]

    for pid in sorted(w.careers):
        for i, st in enumerate(w.careers[pid]):
            years.update((st.start, st.end))
            facts.append(
                {
                    "id": f"f-{pid}-m{i}",
                    "subject": pid,
                    "predicate": "pMember",
                    "object": st.club,
                    "qualifiers": [
                        ["pStart", year_id(st.start)],
                        ["pEnd", year_id(st.end)],
                    ],
                }
            )
        for j, (award, wyear) in enumerate(w.award_wins.get(pid, ())):
            years.add(wyear)
            facts.append(
                {
                    "id": f"f-{pid}-a{j}",
                    "subject": pid,
                    "predicate": "pAward",
                    "object": award,
                    "qualifiers": [["pPoint", year_id(wyear)]],
                }
            )
        school, s_start, s_end = w.education[pid]
        years.update((s_start, s_end))
        facts.append(
            {
                "id": f"f-{pid}-s",
                "subject": pid,
                "predicate": "pSchool",
                "object": school,
                "qualifiers": [
                    ["pStart", year_id(s_start)],
                    ["pEnd", year_id(s_end)],
                ],
            }
        )

    for y in sorted(years):
        items.append({"id": year_id(y), "kind": "timestamp", "timestamp": str(y)})

    from .kg import load_kg

    return load_kg((json.dumps(r) for r in items), (json.dumps(r) for r in facts))


def year_id(year: int) -> str:
    return f"T{year}"


def _gen_explicit(w: World, rng: random.Random, n: int) -> list[tuple[str, tuple[str, ...]]]:
    out = []
    people = sorted(w.careers)
    for _ in range(n):
        if rng.random() < 0.7:
            pid = rng.choice(people)
            st = rng.choice(w.careers[pid])
            year = rng.randint(st.start, st.end)
            out.append(
                (
                    f"which club did {w.people[pid]} play for in {year}?",
                    (st.club,),
                )
            )
        else:
            winners = [
                (pid, a, y)
                for pid in people
                for a, y in w.award_wins.get(pid, ())
            ]
            pid, award, year = rng.choice(winners)
            out.append(
                (f"who won the {w.awards[award]} in {year}?", (pid,))
            )
    return out


def _gen_implicit(w: World, rng: random.Random, n: int) -> list[tuple[str, tuple[str, ...]]]:
    out = []
    people = sorted(w.careers)
    for _ in range(n):
        pid = rng.choice(people)
        stints = w.careers[pid]
        i = rng.randrange(len(stints))
        if i + 1 < len(stints) and (i == 0 or rng.random() < 0.5):
            out.append(
                (
                    f"which club did {w.people[pid]} play for after {w.clubs[stints[i].club]}?",
                    (stints[i + 1].club,),
                )
            )
        else:
            out.append(
                (
                    f"which club did {w.people[pid]} play for before {w.clubs[stints[i].club]}?",
                    (stints[i - 1].club,),
                )
            )
    return out


def _gen_temporal_answer(
    w: World, rng: random.Random, n: int
) -> list[tuple[str, tuple[str, ...]]]:
    out = []
    people = sorted(w.careers)
    for _ in range(n):
        pid = rng.choice(people)
        roll = rng.random()
        if roll < 0.4:
            st = rng.choice(w.careers[pid])
            out.append(
                (
                    f"when did {w.people[pid]} join {w.clubs[st.club]}?",
                    (year_id(st.start),),
                )
            )
        elif roll < 0.8:
            st = rng.choice(w.careers[pid])
            out.append(
                (
                    f"when did {w.people[pid]} leave {w.clubs[st.club]}?",
                    (year_id(st.end),),
                )
            )
        elif w.award_wins.get(pid):
            award, wyear = rng.choice(w.award_wins[pid])
            out.append(
                (
                    f"what year did {w.people[pid]} win the {w.awards[award]}?",
                    (year_id(wyear),),
                )
            )
        else:
            st = w.careers[pid][0]
            out.append(
                (
                    f"when did {w.people[pid]} join {w.clubs[st.club]}?",
                    (year_id(st.start),),
                )
            )
    return out


_ORDINALS = ("first", "second", "third", "fourth")


def _gen_ordinal(w: World, rng: random.Random, n: int) -> list[tuple[str, tuple[str, ...]]]:
    out = []
    people = sorted(w.careers)
    for _ in range(n):
        pid = rng.choice(people)
        stints = w.careers[pid]
        if rng.random() < 0.5:
            out.append(
                (
                    f"what was the last club that {w.people[pid]} played for?",
                    (stints[-1].club,),
                )
            )
        else:
            i = rng.randrange(len(stints))
            out.append(
                (
                    f"what was the {_ORDINALS[i]} club that {w.people[pid]} played for?",
                    (stints[i].club,),
                )
            )
    return out


def _gen_distant(w: World, rng: random.Random, n: int) -> list[tuple[str, tuple[str, ...]]]:
    """School-anchored questions: gold is two facts away from the detected
    entity and is only reachable through temporal-fact augmentation, so
    Stage-1 recall is not guaranteed for these."""
    out = []
    by_school: dict[str, list[str]] = {}
    for pid, (school, _, _) in sorted(w.education.items()):
        by_school.setdefault(school, []).append(pid)
    schools = sorted(by_school)
    for _ in range(n):
        school = rng.choice(schools)
        members = by_school[school]
        year = rng.randint(
            min(w.careers[p][0].start for p in members),
            max(w.careers[p][-1].end for p in members),
        )
        gold = sorted(
            {
                st.club
                for p in members
                for st in w.careers[p]
                if st.start <= year <= st.end
            }
        )
        if not gold:
            gold = sorted({w.careers[p][0].club for p in members})
            year = min(w.careers[p][0].start for p in members)
        out.append(
            (
                f"which club did a player educated at {w.schools[school]} play for in {year}?",
                tuple(gold),
            )
        )
    return out


_GENERATORS = {
    "EXPLICIT": _gen_explicit,
    "IMPLICIT": _gen_implicit,
    "TEMPORAL-ANSWER": _gen_temporal_answer,
    "ORDINAL": _gen_ordinal,
}


def generate_questions(w: World, cfg: SynthConfig) -> list[BenchmarkQuestion]:
    rng = random.Random(cfg.seed + 1)
    counts = _category_counts(cfg)
    questions: list[BenchmarkQuestion] = []
    idx = 0
    for cat in CATEGORY_NAMES:
        total = counts[cat]
        guaranteed = round(total * cfg.guaranteed_fraction)
        for text, gold in _GENERATORS[cat](w, rng, guaranteed):
            questions.append(
                BenchmarkQuestion(f"q{idx:04d}", text, gold, cat, within_two_hops=True)
            )
            idx += 1
        if cat == "EXPLICIT" and total > guaranteed:
            for text, gold in _gen_distant(w, rng, total - guaranteed):
                questions.append(
                    BenchmarkQuestion(f"q{idx:04d}", text, gold, cat, within_two_hops=False)
                )
                idx += 1
        elif total > guaranteed:
            for text, gold in _GENERATORS[cat](w, rng, total - guaranteed):
                questions.append(
                    BenchmarkQuestion(f"q{idx:04d}", text, gold, cat, within_two_hops=False)
                )
                idx += 1
    return questions


def write_benchmark(path: str | Path, questions: list[BenchmarkQuestion]):
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(
                json.dumps(
                    {
                        "id": q.id,
                        "question": q.text,
                        "answers": list(q.answers),
                        "category": q.category,
                        "within_two_hops": q.within_two_hops,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_benchmark(path: str | Path) -> list[BenchmarkQuestion]:
    questions = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            q = BenchmarkQuestion(
                id=rec["id"],
                text=rec["question"],
                answers=tuple(rec["answers"]),
                category=rec["category"],
                within_two_hops=rec.get("within_two_hops", True),
            )
            if q.id in seen:
                raise ValueError(f"duplicate question id: {q.id}")
            seen.add(q.id)
            questions.append(q)
    return questions


def generate_synthetic(cfg: SynthConfig, out_dir: str | Path) -> tuple[KnowledgeGraph, list[BenchmarkQuestion]]:
    """Writes items.jsonl, facts.jsonl and questions.jsonl under out_dir;
    byte-identical for a fixed config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    w = generate_world(cfg)
    kg = world_to_kg(w)
    questions = generate_questions(w, cfg)
    dump_kg_files(kg, out / "items.jsonl", out / "facts.jsonl")
    write_benchmark(out / "questions.jsonl", questions)
    return kg, questions


def load_synthetic(dir_path: str | Path) -> tuple[KnowledgeGraph, list[BenchmarkQuestion]]:
    d = Path(dir_path)
    kg = load_kg_files(d / "items.jsonl", d / "facts.jsonl")
    return kg, load_benchmark(d / "questions.jsonl")
