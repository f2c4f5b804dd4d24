"""Line-delimited JSON scorer service over stdio or a local TCP socket.

One request per line: {"question": str, "candidate": str}.  One response
line per request, in order: {"score": float in [0, 1]}.  A malformed
request produces {"error": str} and the server keeps running.
"""

from __future__ import annotations

import json
import socketserver

from .model import TransformerScorer


def handle_line(model: TransformerScorer, line: str) -> str:
    try:
        payload = json.loads(line)
        question = payload["question"]
        candidate = payload["candidate"]
        if not isinstance(question, str) or not isinstance(candidate, str):
            raise TypeError("question and candidate must be strings")
    except (ValueError, KeyError, TypeError) as exc:
        return json.dumps({"error": f"bad request: {exc}"})
    score = model.score(question, candidate)
    return json.dumps({"score": score})


def serve_stdio(model: TransformerScorer, stdin, stdout):
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(handle_line(model, line) + "\n")
        stdout.flush()


def serve_tcp(model: TransformerScorer, host: str, port: int):
    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                line = raw.decode("utf-8")
                if not line.strip():
                    continue
                reply = handle_line(model, line) + "\n"
                self.wfile.write(reply.encode("utf-8"))

    class Server(socketserver.TCPServer):
        allow_reuse_address = True

    with Server((host, port), Handler) as server:
        server.serve_forever()
