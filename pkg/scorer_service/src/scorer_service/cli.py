"""Command-line entry point: `finetune` trains a scorer checkpoint from a
pairs file; `serve` answers scoring requests over stdio or TCP."""

from __future__ import annotations

import argparse
import sys

from .model import ModelConfig, TransformerScorer
from .nn import NnError
from .train import FineTuneJob, finetune


def cmd_finetune(args) -> int:
    job = FineTuneJob(
        pairs_path=args.pairs,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        val_fraction=args.val_fraction,
        seed=args.seed,
        config=ModelConfig(
            dim=args.dim,
            heads=args.heads,
            layers=args.layers,
            dropout=args.dropout,
            seed=args.seed,
        ),
    )
    result = finetune(
        job,
        log_fn=lambda e, loss, acc: print(
            f"epoch {e}: loss {loss:.4f}  val accuracy {acc:.3f}"
        ),
    )
    result.model.save(args.out)
    print(f"checkpoint written to {args.out}; val accuracy {result.val_accuracy:.3f}")
    return 0


def cmd_serve(args) -> int:
    model = TransformerScorer.load(args.checkpoint)
    if args.tcp:
        host, _, port = args.tcp.partition(":")
        from .server import serve_tcp

        print(f"serving on {host}:{port}", file=sys.stderr)
        serve_tcp(model, host, int(port))
    else:
        from .server import serve_stdio

        serve_stdio(model, sys.stdin, sys.stdout)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorer-service", description="question-fact relevance scorer"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("finetune", help="train a scorer checkpoint")
    f.add_argument("--pairs", required=True, help="JSONL pairs file")
    f.add_argument("--out", required=True, help="checkpoint output path")
    f.add_argument("--epochs", type=int, default=2)
    f.add_argument("--batch-size", type=int, default=16)
    f.add_argument("--learning-rate", type=float, default=1e-3)
    f.add_argument("--val-fraction", type=float, default=0.2)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--dim", type=int, default=32)
    f.add_argument("--heads", type=int, default=2)
    f.add_argument("--layers", type=int, default=2)
    f.add_argument("--dropout", type=float, default=0.1)
    f.set_defaults(fn=cmd_finetune)

    s = sub.add_parser("serve", help="answer scoring requests")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--tcp", metavar="HOST:PORT", help="serve over TCP instead of stdio")
    s.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (NnError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
