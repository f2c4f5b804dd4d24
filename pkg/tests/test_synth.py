import re
from collections import Counter

import pytest

from tempoqa.question import CATEGORIES, GazetteerDetector, analyze_question
from tempoqa.synth import (
    CATEGORY_NAMES,
    BenchmarkQuestion,
    SynthConfig,
    generate_questions,
    generate_synthetic,
    generate_world,
    load_benchmark,
    load_synthetic,
    world_to_kg,
    write_benchmark,
)

SMALL = SynthConfig(seed=3, n_people=20, n_clubs=8, n_awards=4, n_schools=3, n_questions=80)


@pytest.fixture(scope="module")
def world():
    return generate_world(SMALL)


@pytest.fixture(scope="module")
def kg(world):
    return world_to_kg(world)


@pytest.fixture(scope="module")
def questions(world):
    return generate_questions(world, SMALL)


class KgOracle:
    """Recomputes gold answers from the knowledge graph alone, independently
    of the world structures the generator used."""

    def __init__(self, kg):
        self.kg = kg
        self.by_label = {it.label: it.id for it in kg.items.values()}
        self.careers: dict[str, list[tuple[int, int, str]]] = {}
        self.wins: dict[tuple[str, int], str] = {}
        self.win_years: dict[tuple[str, str], int] = {}
        for f in kg.facts.values():
            quals = {qp.id: qo for qp, qo in f.qualifiers}
            if f.predicate.id == "pMember":
                start = quals["pStart"].timestamp.year
                end = quals["pEnd"].timestamp.year
                self.careers.setdefault(f.subject.id, []).append(
                    (start, end, f.object.id)
                )
            elif f.predicate.id == "pAward":
                year = quals["pPoint"].timestamp.year
                self.wins[(f.object.id, year)] = f.subject.id
                self.win_years[(f.subject.id, f.object.id)] = year
        for stints in self.careers.values():
            stints.sort()

    def answer(self, q: BenchmarkQuestion) -> tuple[str, ...] | None:
        text, lab = q.text, self.by_label
        ordinals = {"first": 0, "second": 1, "third": 2, "fourth": 3, "last": -1}
        if m := re.fullmatch(r"which club did (.+) play for in (\d{4})\?", text):
            pid = lab[m[1]]
            return tuple(
                sorted(
                    c for s, e, c in self.careers[pid] if s <= int(m[2]) <= e
                )
            )
        if m := re.fullmatch(r"who won the (.+) in (\d{4})\?", text):
            return (self.wins[(lab[m[1]], int(m[2]))],)
        if m := re.fullmatch(r"which club did (.+) play for (after|before) (.+)\?", text):
            clubs = [c for _, _, c in self.careers[lab[m[1]]]]
            i = clubs.index(lab[m[3]])
            return (clubs[i + 1],) if m[2] == "after" else (clubs[i - 1],)
        if m := re.fullmatch(r"when did (.+) (join|leave) (.+)\?", text):
            for s, e, c in self.careers[lab[m[1]]]:
                if c == lab[m[3]]:
                    return (f"T{s if m[2] == 'join' else e}",)
        if m := re.fullmatch(r"what year did (.+) win the (.+)\?", text):
            return (f"T{self.win_years[(lab[m[1]], lab[m[2]])]}",)
        if m := re.fullmatch(r"what was the (\w+) club that (.+) played for\?", text):
            clubs = [c for _, _, c in self.careers[lab[m[2]]]]
            return (clubs[ordinals[m[1]]],)
        return None


class TestWorld:
    def test_stints_are_disjoint(self, world):
        # No shared year between consecutive stints, so every year maps to at
        # most one club.
        for stints in world.careers.values():
            for a, b in zip(stints, stints[1:]):
                assert b.start > a.end

    def test_one_winner_per_award_year(self, world):
        seen = Counter()
        for wins in world.award_wins.values():
            seen.update(wins)
        assert all(v == 1 for v in seen.values())

    def test_education_precedes_career(self, world):
        for pid, (_, s_start, s_end) in world.education.items():
            assert s_end < world.careers[pid][0].start

    def test_labels_are_unique(self, kg):
        labels = [it.label for it in kg.items.values()]
        assert len(labels) == len(set(labels))


class TestQuestions:
    def test_count_and_unique_ids(self, questions):
        assert len(questions) == SMALL.n_questions
        assert len({q.id for q in questions}) == len(questions)

    def test_category_proportions_within_one(self, questions):
        counts = Counter(q.category for q in questions)
        for cat in CATEGORY_NAMES:
            assert abs(counts[cat] - SMALL.n_questions / 4) <= 1

    def test_gold_matches_kg_oracle(self, kg, questions):
        oracle = KgOracle(kg)
        for q in questions:
            want = oracle.answer(q)
            assert want is not None, f"oracle cannot parse: {q.text}"
            assert set(q.answers) <= set(want), q.text

    def test_tagger_agrees_with_intended_category(self, kg, questions):
        for q in questions:
            bits = analyze_question(q.text, kg).categories
            assert bits[CATEGORIES.index(q.category)] == 1, q.text

    def test_every_question_names_a_kg_entity(self, kg, questions):
        det = GazetteerDetector(kg)
        for q in questions:
            assert det(q.text), q.text

    def test_distant_questions_marked(self, world):
        cfg = SynthConfig(
            seed=3, n_people=20, n_clubs=8, n_awards=4, n_schools=3,
            n_questions=40, guaranteed_fraction=0.8,
        )
        qs = generate_questions(world, cfg)
        distant = [q for q in qs if not q.within_two_hops]
        assert len(distant) == pytest.approx(8, abs=4)  # round() per category
        assert all(q.answers for q in distant)


class TestSerialization:
    def test_generate_is_byte_identical(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        generate_synthetic(SMALL, d1)
        generate_synthetic(SMALL, d2)
        for name in ("items.jsonl", "facts.jsonl", "questions.jsonl"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name

    def test_different_seed_different_bytes(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        generate_synthetic(SMALL, d1)
        generate_synthetic(
            SynthConfig(seed=4, n_people=20, n_clubs=8, n_awards=4, n_schools=3,
                        n_questions=80),
            d2,
        )
        assert (d1 / "questions.jsonl").read_bytes() != (d2 / "questions.jsonl").read_bytes()

    def test_roundtrip(self, tmp_path, kg, questions):
        kg2, qs2 = (
            generate_synthetic(SMALL, tmp_path)[0],
            load_synthetic(tmp_path)[1],
        )
        assert qs2 == questions
        assert sorted(kg2.facts) == sorted(kg.facts)

    def test_duplicate_ids_rejected_on_load(self, tmp_path, questions):
        path = tmp_path / "q.jsonl"
        write_benchmark(path, [questions[0], questions[0]])
        with pytest.raises(ValueError):
            load_benchmark(path)

    def test_empty_answers_rejected(self):
        with pytest.raises(ValueError):
            BenchmarkQuestion("q1", "who?", (), "EXPLICIT")
