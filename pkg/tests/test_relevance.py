import json
import math

import pytest
from hypothesis import given, strategies as st

from tempoqa.kg import verbalize_fact
from tempoqa.relevance import (
    FallbackScorer,
    LexicalScorer,
    RemoteScorer,
    ScoringError,
    TrainingPair,
    fact_contains_gold,
    make_training_pairs,
    score_fact,
    score_path,
    select_relevant_facts,
    select_temporal_facts,
)

texts = st.text(
    alphabet=st.sampled_from("abc xyz 123"), min_size=0, max_size=40
)


class TestLexicalScorer:
    def test_identical_text_scores_one(self):
        s = LexicalScorer(["real madrid club"])
        assert s("real madrid", "real madrid") == pytest.approx(1.0)

    def test_disjoint_text_scores_zero(self):
        s = LexicalScorer(["a b c"])
        assert s("alpha beta", "gamma delta") == 0.0

    def test_empty_side_scores_zero(self):
        s = LexicalScorer([])
        assert s("", "anything") == 0.0
        assert s("anything", "???") == 0.0

    def test_rare_token_outweighs_common(self):
        corpus = ["madrid wins again"] * 50 + ["juventus appears once"]
        s = LexicalScorer(corpus)
        assert s("juventus", "juventus madrid") > s("madrid", "juventus madrid")

    @given(texts, texts)
    def test_bounded_and_symmetric(self, a, b):
        s = LexicalScorer([a, b, "abc xyz"])
        assert 0.0 <= s(a, b) <= 1.0
        assert s(a, b) == pytest.approx(s(b, a))


class TestSelection:
    def test_top_n_descending_with_ties_by_id(self, football_kg):
        scorer = LexicalScorer.from_kg(football_kg)
        facts = sorted(football_kg.facts.values(), key=lambda f: f.id)
        out = select_relevant_facts("ronaldo clubs", facts, scorer, n=3)
        assert len(out) == 3
        scores = [s.score for s in out]
        assert scores == sorted(scores, reverse=True)

    def test_cost_is_one_minus_score(self, football_kg):
        scorer = LexicalScorer.from_kg(football_kg)
        (top,) = select_relevant_facts(
            "real madrid", list(football_kg.facts.values()), scorer, n=1
        )
        assert top.cost == pytest.approx(1.0 - top.score)

    def test_select_temporal_rejects_non_temporal(self, football_kg):
        scorer = LexicalScorer.from_kg(football_kg)
        with pytest.raises(ValueError):
            select_temporal_facts("q", [football_kg.facts["f3"]], scorer)

    def test_score_out_of_range_rejected(self, football_kg):
        with pytest.raises(ScoringError):
            score_fact("q", football_kg.facts["f1"], lambda q, c: 1.5)


class TestTrainingPairs:
    def test_distant_supervision_labels(self, football_kg):
        facts = list(football_kg.facts.values())
        pairs = make_training_pairs("q", facts, gold={"E3"}, neg_ratio=2, seed=1)
        positives = [p for p in pairs if p.label == 1]
        negatives = [p for p in pairs if p.label == 0]
        assert len(positives) == 1
        assert len(negatives) == 2
        assert "Juventus" in positives[0].candidate

    def test_no_positives_yields_empty(self, football_kg):
        assert make_training_pairs("q", football_kg.facts.values(), {"zz"}) == []

    def test_seeded_sampling_is_stable(self, football_kg):
        facts = list(football_kg.facts.values())
        a = make_training_pairs("q", facts, {"E3"}, neg_ratio=2, seed=9)
        b = make_training_pairs("q", facts, {"E3"}, neg_ratio=2, seed=9)
        assert a == b

    def test_fact_contains_gold_checks_qualifiers(self, football_kg):
        assert fact_contains_gold(football_kg.facts["f1"], {"T1"})
        assert not fact_contains_gold(football_kg.facts["f1"], {"P2"})


class TestRemoteScorer:
    def _scorer(self, reply):
        return RemoteScorer(lambda line: reply)

    def test_parses_score(self):
        s = self._scorer('{"score": 0.25}\n')
        assert s("q", "c") == 0.25

    @pytest.mark.parametrize(
        "reply", ["", "not json", '{"other": 1}', '{"score": 1.5}', '{"score": "NaN"}']
    )
    def test_bad_replies_raise(self, reply):
        with pytest.raises(ScoringError):
            self._scorer(reply)("q", "c")

    def test_request_format(self):
        seen = {}

        def transport(line):
            seen.update(json.loads(line))
            return '{"score": 0.5}'

        RemoteScorer(transport)("my question", "my fact")
        assert seen == {"question": "my question", "candidate": "my fact"}

    def test_fallback_on_error(self):
        def broken(line):
            raise ScoringError("down")

        s = FallbackScorer(RemoteScorer(broken), lambda q, c: 0.75)
        assert s("q", "c") == 0.75


class TestPathScoring:
    def test_bounds_and_degenerate_case(self, football_kg):
        scorer = LexicalScorer.from_kg(football_kg)
        (path,) = football_kg.shortest_paths("E2", "E3")
        score = score_path("ronaldo madrid juventus", path, football_kg, scorer.encode)
        assert 0.0 <= score <= 1.0
        # A question with no indexable tokens encodes to the zero vector.
        assert score_path("???", path, football_kg, scorer.encode) == 0.5

    def test_matching_path_beats_unrelated(self, football_kg):
        scorer = LexicalScorer.from_kg(football_kg)
        (path,) = football_kg.shortest_paths("E2", "E3")
        related = score_path("real madrid juventus", path, football_kg, scorer.encode)
        unrelated = score_path("citizenship portugal", path, football_kg, scorer.encode)
        assert related > unrelated
