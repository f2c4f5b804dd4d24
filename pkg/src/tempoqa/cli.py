"""Command-line entry point: generate / build-graph / train / predict /
evaluate / report subcommands over the two-stage pipeline."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from . import rgcn
from .pipeline import PipelineConfig, PipelineError
from .question import GazetteerDetector
from .synth import SynthConfig, generate_synthetic


def _load_config(args) -> PipelineConfig:
    cfg = (
        PipelineConfig.from_yaml(args.config)
        if getattr(args, "config", None)
        else PipelineConfig()
    )
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "scorer", None):
        overrides["scorer"] = args.scorer
    if getattr(args, "data_dir", None):
        overrides["data_dir"] = args.data_dir
    if getattr(args, "out_dir", None):
        overrides["out_dir"] = args.out_dir
    if getattr(args, "ablate", None):
        overrides["ablations"] = tuple(sorted(set(cfg.ablations) | set(args.ablate)))
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--data-dir", help="override the benchmark data directory")
    p.add_argument("--out-dir", help="override the output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--scorer", choices=["lexical", "remote"], help="override scorer")
    p.add_argument(
        "--ablate",
        action="append",
        choices=["tce", "tse", "tee", "te", "atr"],
        help="disable a model component (repeatable)",
    )


def _stage1_all(cfg: PipelineConfig):
    from .synth import load_synthetic

    kg, questions = load_synthetic(cfg.data_dir)
    detector = GazetteerDetector(kg)
    scorer = pl.make_scorer(cfg, kg)
    results = [pl.run_stage1(q, kg, scorer, cfg, detector) for q in questions]
    return kg, questions, results


def cmd_generate(args) -> int:
    cfg = SynthConfig(
        seed=args.seed if args.seed is not None else 0,
        n_people=args.n_people,
        n_clubs=args.n_clubs,
        n_awards=args.n_awards,
        n_schools=args.n_schools,
        n_questions=args.n_questions,
        guaranteed_fraction=args.guaranteed_fraction,
    )
    kg, questions = generate_synthetic(cfg, args.out)
    print(
        f"wrote {len(kg.items)} items, {len(kg.facts)} facts, "
        f"{len(questions)} questions to {args.out}"
    )
    return 0


def cmd_build_graph(args) -> int:
    cfg = _load_config(args)
    kg, questions, results = _stage1_all(cfg)
    report = pl.stage_recall(results)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_path = args.dump_graphs or str(out / "graphs.jsonl")
    pl.dump_graphs(dump_path, results)
    print(report.render())
    print(f"answer graphs written to {dump_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    kg, questions, results = _stage1_all(cfg)
    examples = pl.build_examples(results, kg)
    splits = pl.split_dataset(questions, cfg.split, cfg.seed)
    train_examples = [examples[q.id] for q in splits["train"] if q.id in examples]
    if not train_examples:
        raise PipelineError("train", "no trainable questions in the train split")
    model = rgcn.Model(cfg.rgcn_config())
    history = rgcn.train(
        model,
        train_examples,
        log_fn=lambda e, loss: print(f"epoch {e}: loss {loss:.6f}"),
    )
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .numeric import save_checkpoint

    save_checkpoint(str(out / "checkpoint.bin"), model.store.state_dict(), {"seed": cfg.seed})
    print(f"checkpoint written to {out / 'checkpoint.bin'}; final loss {history[-1]:.6f}")
    return 0


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    kg, questions, results = _stage1_all(cfg)
    examples = pl.build_examples(results, kg)
    splits = pl.split_dataset(questions, cfg.split, cfg.seed)
    model = pl.load_model(cfg, Path(cfg.out_dir) / "checkpoint.bin")
    rankings = {
        q.id: rgcn.predict(model, examples[q.id])
        for q in splits[args.split]
        if q.id in examples
    }
    path = Path(cfg.out_dir) / f"predictions_{args.split}.jsonl"
    pl.dump_predictions(path, rankings)
    print(f"{len(rankings)} predictions written to {path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    from .synth import load_synthetic

    _, questions = load_synthetic(cfg.data_dir)
    splits = pl.split_dataset(questions, cfg.split, cfg.seed)
    path = Path(cfg.out_dir) / f"predictions_{args.split}.jsonl"
    rankings = pl.load_predictions(path)
    metrics = pl.evaluate_split(rankings, splits[args.split])
    if metrics is None:
        print(f"{args.split}: no evaluated questions")
    else:
        print(
            f"{args.split}: P@1 {metrics.p_at_1:.3f}  MRR {metrics.mrr:.3f}  "
            f"Hit@5 {metrics.hit_at_5:.3f}  ({metrics.n_questions} questions)"
        )
    return 0


def cmd_report(args) -> int:
    cfg = _load_config(args)
    report, metrics = pl.run_pipeline(cfg, dump_answer_graphs=bool(args.dump_graphs))
    print((Path(cfg.out_dir) / "report.txt").read_text(), end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tempoqa", description="temporal KGQA pipeline"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate the synthetic benchmark")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--n-people", type=int, default=120)
    g.add_argument("--n-clubs", type=int, default=15)
    g.add_argument("--n-awards", type=int, default=10)
    g.add_argument("--n-schools", type=int, default=10)
    g.add_argument("--n-questions", type=int, default=1000)
    g.add_argument("--guaranteed-fraction", type=float, default=1.0)
    g.set_defaults(fn=cmd_generate)

    b = sub.add_parser("build-graph", help="run Stage 1 only and dump answer graphs")
    _add_common(b)
    b.add_argument("--dump-graphs", metavar="PATH", help="answer-graph dump path")
    b.set_defaults(fn=cmd_build_graph)

    t = sub.add_parser("train", help="train the Stage-2 model")
    _add_common(t)
    t.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="rank answers for a split")
    _add_common(p)
    p.add_argument("--split", choices=pl.SPLIT_NAMES, default="test")
    p.set_defaults(fn=cmd_predict)

    e = sub.add_parser("evaluate", help="score a prediction dump")
    _add_common(e)
    e.add_argument("--split", choices=pl.SPLIT_NAMES, default="test")
    e.set_defaults(fn=cmd_evaluate)

    r = sub.add_parser("report", help="full pipeline run with reports")
    _add_common(r)
    r.add_argument("--dump-graphs", action="store_true")
    r.set_defaults(fn=cmd_report)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
