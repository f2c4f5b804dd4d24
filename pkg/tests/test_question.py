import pytest
from hypothesis import given, strategies as st

from tempoqa.kg import Timestamp
from tempoqa.question import (
    CATEGORIES,
    SIGNALS,
    GazetteerDetector,
    analyze_question,
    content_keywords,
    detect_entities,
    extract_explicit_expressions,
    tag_categories,
    tag_signals,
    tokenize,
)

# (question, category) — one reference set covering all four categories.
TAGGED_QUESTIONS = [
    ("who won oscar for best actress 1986?", "EXPLICIT"),
    ("which movie did jaco van dormael direct in 2009?", "EXPLICIT"),
    ("what currency is used in germany 2012?", "EXPLICIT"),
    ("who was king of france during the ninth crusade?", "IMPLICIT"),
    ("what did thomas jefferson do before he was president?", "IMPLICIT"),
    ("what club did cristiano ronaldo play for after manchester united?", "IMPLICIT"),
    ("what was the first film julie andrews starred in?", "ORDINAL"),
    ("what was the second position held by pierre de coubertin?", "ORDINAL"),
    ("who is elizabeth taylor's last husband?", "ORDINAL"),
    ("what year did lakers win their first championship?", "TEMPORAL-ANSWER"),
    ("when was james cagney's spouse born?", "TEMPORAL-ANSWER"),
    ("when was the last time the orioles won the world series?", "TEMPORAL-ANSWER"),
]

DUAL_CATEGORY_QUESTION = (
    "what was the first film julie andrews starred in after her divorce "
    "with tony walton?"
)


class TestTokenize:
    def test_keeps_compound_tokens(self):
        assert tokenize("the 9/11 attacks, o'brien's dog") == [
            "the", "9/11", "attacks", "o'brien's", "dog",
        ]

    def test_lowercases(self):
        assert tokenize("Real Madrid") == ["real", "madrid"]


class TestCategories:
    @pytest.mark.parametrize("question,category", TAGGED_QUESTIONS)
    def test_reference_questions(self, question, category):
        bits = tag_categories(question)
        assert bits[CATEGORIES.index(category)] == 1, (question, bits)

    def test_dual_category(self):
        bits = tag_categories(DUAL_CATEGORY_QUESTION)
        assert bits[CATEGORIES.index("IMPLICIT")] == 1
        assert bits[CATEGORIES.index("ORDINAL")] == 1

    def test_multi_hot_not_exclusive(self):
        bits = tag_categories("which club did he join after real madrid in 2018?")
        assert bits[CATEGORIES.index("EXPLICIT")] == 1
        assert bits[CATEGORIES.index("IMPLICIT")] == 1

    def test_before_explicit_date_is_not_implicit(self):
        bits = tag_categories("who was president before 2008?")
        assert bits[CATEGORIES.index("EXPLICIT")] == 1
        assert bits[CATEGORIES.index("IMPLICIT")] == 0

    def test_plain_question_gets_no_category(self):
        assert tag_categories("who is the mayor of london?") == (0, 0, 0, 0)


class TestSignals:
    def test_no_signal_is_exclusive(self):
        bits = tag_signals("when was obama born?")
        assert bits == tuple(int(s == "NO-SIGNAL") for s in SIGNALS)

    def test_question_initial_when_not_overlap(self):
        assert tag_signals("when did it happen?")[SIGNALS.index("OVERLAP")] == 0

    def test_non_initial_when_is_overlap(self):
        bits = tag_signals("who was president when the wall fell?")
        assert bits[SIGNALS.index("OVERLAP")] == 1

    def test_before_after_ordinal(self):
        bits = tag_signals("what was the first club he joined after 2010?")
        assert bits[SIGNALS.index("AFTER")] == 1
        assert bits[SIGNALS.index("ORDINAL")] == 1
        assert bits[SIGNALS.index("START")] == 1  # "joined"
        assert bits[SIGNALS.index("NO-SIGNAL")] == 0

    @given(st.text(max_size=60))
    def test_no_signal_iff_nothing_matched(self, text):
        bits = tag_signals(text)
        assert sum(bits) >= 1
        if bits[SIGNALS.index("NO-SIGNAL")]:
            assert sum(bits) == 1


class TestExplicitExpressions:
    def test_year(self):
        assert extract_explicit_expressions("champions in 1986") == [Timestamp(1986)]

    def test_month_year_and_full_date(self):
        assert extract_explicit_expressions("in january 2009") == [Timestamp(2009, 1)]
        assert extract_explicit_expressions("on 20 january 2009") == [
            Timestamp(2009, 1, 20)
        ]

    def test_decade(self):
        assert extract_explicit_expressions("hits of the 1980s") == [Timestamp(1980)]

    def test_date_alias(self):
        assert Timestamp(2001, 9, 11) in extract_explicit_expressions(
            "what happened after 9/11?"
        )

    def test_plain_small_number_is_not_a_year(self):
        assert extract_explicit_expressions("top 10 goals") == []


class TestEntityDetection:
    def test_longest_match_wins(self, football_kg):
        det = GazetteerDetector(football_kg)
        links = det("did cristiano ronaldo play for real madrid?")
        assert ("cristiano ronaldo", "E1") in links
        assert ("real madrid", "E2") in links

    def test_alias_and_possessive(self, football_kg):
        det = GazetteerDetector(football_kg)
        assert ("ronaldo", "E1") in det("ronaldo's clubs")

    def test_union_of_detectors(self, football_kg):
        det = GazetteerDetector(football_kg)
        extra = lambda text: {("x", "E5")}
        ids = detect_entities("ronaldo?", football_kg, [det, extra])
        assert ids == frozenset({"E1", "E5"})

    def test_requires_a_detector(self, football_kg):
        with pytest.raises(ValueError):
            detect_entities("ronaldo?", football_kg, [])


class TestAnalyze:
    def test_full_analysis(self, football_kg):
        qa = analyze_question(
            "which team did ronaldo join after real madrid?", football_kg
        )
        assert qa.entities == frozenset({"E1", "E2"})
        assert qa.has_category("IMPLICIT")
        assert qa.has_signal("AFTER")
        assert qa.has_signal("START")

    def test_empty_question_rejected(self):
        with pytest.raises(ValueError):
            analyze_question("???")

    def test_content_keywords_drop_stopwords(self):
        assert content_keywords(("what", "was", "ronaldo's", "club")) == [
            "ronaldo", "club",
        ]
