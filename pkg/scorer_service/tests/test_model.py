import numpy as np
import pytest

from scorer_service.model import ModelConfig, TransformerScorer
from scorer_service.nn import backprop_check
from scorer_service.tokenizer import SPECIALS, Tokenizer

SMALL = ModelConfig(dim=8, heads=2, layers=1, ffn_dim=16, max_len=16, seed=0)


@pytest.fixture
def tokenizer():
    return Tokenizer.fit(
        ["when did alba join fc arden", "alba member of sports team fc arden"]
    )


class TestTokenizer:
    def test_specials_lead_the_vocab(self, tokenizer):
        assert tokenizer.vocab[:4] == SPECIALS

    def test_pair_encoding_layout(self, tokenizer):
        ids = tokenizer.encode_pair("alba", "fc arden", max_len=16)
        idx = tokenizer.index
        assert ids == [idx["[CLS]"], idx["alba"], idx["[SEP]"],
                       idx["fc"], idx["arden"], idx["[SEP]"]]

    def test_unknown_words_map_to_unk(self, tokenizer):
        ids = tokenizer.encode_pair("zzz", "", max_len=8)
        assert tokenizer.index["[UNK]"] in ids

    def test_truncation(self, tokenizer):
        ids = tokenizer.encode_pair("alba " * 50, "arden", max_len=16)
        assert len(ids) == 16

    def test_vocab_must_start_with_specials(self):
        with pytest.raises(ValueError):
            Tokenizer(("a", "b", "c", "d"))


class TestModel:
    def test_score_in_unit_interval(self, tokenizer):
        model = TransformerScorer(SMALL, tokenizer)
        s = model.score("when did alba join fc arden?", "alba member of fc arden")
        assert 0.0 < s < 1.0

    def test_inference_is_deterministic(self, tokenizer):
        model = TransformerScorer(SMALL, tokenizer)
        a = model.score("q one", "candidate one")
        assert a == model.score("q one", "candidate one")

    def test_empty_candidate_scores_without_crash(self, tokenizer):
        model = TransformerScorer(SMALL, tokenizer)
        assert 0.0 <= model.score("when did alba join?", "") <= 1.0
        assert 0.0 <= model.score("", "") <= 1.0

    def test_dim_must_divide_heads(self):
        with pytest.raises(ValueError):
            ModelConfig(dim=10, heads=3)

    def test_full_gradient_check(self, tokenizer):
        model = TransformerScorer(SMALL, tokenizer)
        ids = tokenizer.encode_pair("when did alba join", "alba member of arden", 12)

        def loss():
            return model.loss(ids, 1)

        loss()
        err = backprop_check(loss, model.store.params.values(), epsilon=1e-5)
        assert err < 1e-4

    def test_save_load_roundtrip(self, tokenizer, tmp_path):
        model = TransformerScorer(SMALL, tokenizer)
        before = model.score("a question", "a candidate")
        path = tmp_path / "ck.bin"
        model.save(str(path))
        loaded = TransformerScorer.load(str(path))
        assert loaded.score("a question", "a candidate") == before
        assert loaded.tokenizer.vocab == tokenizer.vocab

    def test_same_seed_same_scores(self, tokenizer):
        a = TransformerScorer(SMALL, tokenizer)
        b = TransformerScorer(SMALL, tokenizer)
        assert a.score("x", "y") == b.score("x", "y")
