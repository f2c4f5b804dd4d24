import io
import json
from pathlib import Path

import pytest

from scorer_service.model import ModelConfig, TransformerScorer
from scorer_service.server import handle_line, serve_stdio
from scorer_service.tokenizer import Tokenizer

TRANSCRIPTS = Path(__file__).resolve().parents[2] / "tests" / "data" / "scorer_protocol.jsonl"


@pytest.fixture(scope="module")
def model():
    tokenizer = Tokenizer.fit(["when did alba join fc arden", "member of sports team"])
    return TransformerScorer(
        ModelConfig(dim=8, heads=2, layers=1, ffn_dim=16, max_len=32, seed=0),
        tokenizer,
    )


def load_transcripts():
    with open(TRANSCRIPTS, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


class TestHandleLine:
    def test_valid_request(self, model):
        reply = json.loads(handle_line(model, '{"question": "q", "candidate": "c"}'))
        assert set(reply) == {"score"}
        assert 0.0 <= reply["score"] <= 1.0

    def test_identical_requests_identical_scores(self, model):
        line = '{"question": "same", "candidate": "thing"}'
        assert handle_line(model, line) == handle_line(model, line)

    @pytest.mark.parametrize(
        "line",
        [
            "not json",
            "{}",
            '{"question": "q"}',
            '{"question": 1, "candidate": "c"}',
            '[1, 2]',
        ],
    )
    def test_malformed_request_yields_error_reply(self, model, line):
        reply = json.loads(handle_line(model, line))
        assert "error" in reply and "score" not in reply


class TestGoldenTranscripts:
    def test_every_transcript_request_is_answered(self, model):
        for rec in load_transcripts():
            reply = json.loads(handle_line(model, rec["request"]))
            assert set(reply) == {"score"}, rec["request"]
            score = reply["score"]
            assert isinstance(score, float) and 0.0 <= score <= 1.0

    def test_replies_are_single_lines(self, model):
        for rec in load_transcripts():
            assert "\n" not in handle_line(model, rec["request"])


class TestStdioLoop:
    def test_order_preserved_over_100_requests(self, model):
        lines = [
            json.dumps({"question": f"question {i}", "candidate": f"candidate {i}"})
            for i in range(100)
        ]
        out = io.StringIO()
        serve_stdio(model, io.StringIO("\n".join(lines) + "\n"), out)
        replies = out.getvalue().splitlines()
        assert len(replies) == 100
        expected = [handle_line(model, line) for line in lines]
        assert replies == expected

    def test_blank_lines_skipped_and_errors_non_fatal(self, model):
        stdin = io.StringIO(
            '\nnot json\n{"question": "q", "candidate": "c"}\n'
        )
        out = io.StringIO()
        serve_stdio(model, stdin, out)
        replies = [json.loads(r) for r in out.getvalue().splitlines()]
        assert len(replies) == 2
        assert "error" in replies[0]
        assert "score" in replies[1]
