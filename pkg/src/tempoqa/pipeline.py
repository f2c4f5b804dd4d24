"""Two-stage pipeline orchestration: Stage-1 answer-graph construction with
per-stage recall reporting, Stage-2 training/prediction/evaluation, dataset
splitting, and deterministic report/prediction dumps.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from . import rgcn
from .answer_graph import (
    AnswerGraph,
    augment_temporal,
    complete_gsts,
    compute_gst_forest,
    induce_graph,
    inject_connectivity,
    match_terminals,
    scorer_fact_cost,
)
from .kg import KnowledgeGraph
from .numeric import load_checkpoint, save_checkpoint
from .question import GazetteerDetector, QuestionAnalysis, analyze_question
from .relevance import LexicalScorer, RemoteScorer, select_relevant_facts
from .rgcn import Metrics, Model, QAExample, RGCNConfig, build_relational_graph
from .synth import BenchmarkQuestion, load_benchmark, load_synthetic

log = logging.getLogger(__name__)

STAGE_NAMES = (
    "all facts of question entities",
    "facts selected by relevance",
    "shortest paths injected",
    "GSTs on largest component",
    "union of GSTs from all components",
    "completed GSTs",
    "temporal facts added",
)

SPLIT_NAMES = ("train", "dev", "test")


class PipelineError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class StageRow:
    name: str
    recall: float
    mean_candidates: float


@dataclass(frozen=True)
class StageReport:
    rows: tuple[StageRow, ...]
    n_questions: int
    n_failed: int

    def render(self) -> str:
        width = max(len(r.name) for r in self.rows)
        lines = [
            f"stage-1 recall over {self.n_questions} questions"
            + (f" ({self.n_failed} failed, excluded)" if self.n_failed else ""),
            f"{'stage':<{width}}  {'recall':>7}  {'mean #candidates':>16}",
        ]
        for r in self.rows:
            lines.append(f"{r.name:<{width}}  {r.recall:>7.3f}  {r.mean_candidates:>16.1f}")
        return "\n".join(lines)


@dataclass
class PipelineConfig:
    data_dir: str = "data/synth"
    out_dir: str = "out"
    scorer: str = "lexical"  # lexical | remote
    scorer_endpoint: str = ""  # host:port for remote
    top_facts: int = 12
    top_gsts: int = 25
    top_temporal: int = 8
    gst_state_cap: int | None = None
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    # Stage-2 hyperparameters
    dim: int = 48
    te_dim: int = 16
    layers: int = 3
    epochs: int = 40
    learning_rate: float = 3e-3
    lr_decay: float = 0.93
    batch_size: int = 16
    lstm_dropout: float = 0.3
    linear_dropout: float = 0.2
    fact_dropout: float = 0.1
    ablations: tuple[str, ...] = ()

    def __post_init__(self):
        if min(self.top_facts, self.top_gsts, self.top_temporal) < 1:
            raise ValueError("top-n counts must be >= 1")
        self.split = tuple(float(x) for x in self.split)
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split ratios must be three values summing to 1")
        if self.scorer not in ("lexical", "remote"):
            raise ValueError(f"unknown scorer: {self.scorer}")
        bad = set(self.ablations) - {"tce", "tse", "tee", "te", "atr"}
        if bad:
            raise ValueError(f"unknown ablation flags: {sorted(bad)}")

    @classmethod
    def from_yaml(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "split" in raw:
            raw["split"] = tuple(raw["split"])
        if "ablations" in raw:
            raw["ablations"] = tuple(raw["ablations"])
        return cls(**raw)

    def rgcn_config(self) -> RGCNConfig:
        return RGCNConfig(
            dim=self.dim,
            te_dim=self.te_dim,
            layers=self.layers,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            lr_decay=self.lr_decay,
            batch_size=self.batch_size,
            lstm_dropout=self.lstm_dropout,
            linear_dropout=self.linear_dropout,
            fact_dropout=self.fact_dropout,
            seed=self.seed,
            ablations=frozenset(self.ablations),
        )


def make_scorer(config: PipelineConfig, kg: KnowledgeGraph):
    if config.scorer == "lexical":
        return LexicalScorer.from_kg(kg)
    host, _, port = config.scorer_endpoint.partition(":")
    if not host or not port:
        raise PipelineError("scorer", "remote scorer needs endpoint host:port")
    return RemoteScorer.tcp(host, int(port))


def split_dataset(
    questions: list[BenchmarkQuestion], ratios: tuple[float, float, float], seed: int
) -> dict[str, list[BenchmarkQuestion]]:
    """Disjoint, exhaustive train/dev/test split by seeded shuffle."""
    order = list(questions)
    random.Random(seed).shuffle(order)
    n = len(order)
    n_train = round(n * ratios[0])
    n_dev = round(n * ratios[1])
    return {
        "train": order[:n_train],
        "dev": order[n_train : n_train + n_dev],
        "test": order[n_train + n_dev :],
    }


@dataclass
class Stage1Result:
    question: BenchmarkQuestion
    qa: QuestionAnalysis | None
    stage_items: list[set[str]]  # candidate item ids present after each stage
    graph: AnswerGraph | None
    failure: str | None = None


def _graph_items(g: AnswerGraph) -> set[str]:
    return {
        n.item_id
        for n in g.nodes.values()
        if n.kind in ("entity", "literal", "timestamp")
    }


def _fact_items(fact_ids, kg: KnowledgeGraph) -> set[str]:
    out: set[str] = set()
    for fid in fact_ids:
        for it in [kg.facts[fid].subject] + kg.facts[fid].objects():
            if it.kind in ("entity", "literal", "timestamp"):
                out.add(it.id)
    return out


def run_stage1(
    question: BenchmarkQuestion,
    kg: KnowledgeGraph,
    scorer,
    config: PipelineConfig,
    detector=None,
) -> Stage1Result:
    try:
        detectors = [detector] if detector is not None else None
        qa = analyze_question(question.text, kg, detectors)
        if not qa.entities:
            return Stage1Result(question, None, [], None, failure="nerd: no entities")
        fact_cost = scorer_fact_cost(qa.raw, scorer)
        stages: list[set[str]] = []

        nerd_facts: dict[str, object] = {}
        for ent in sorted(qa.entities):
            for f in kg.facts_of(ent):
                nerd_facts[f.id] = f
        if not nerd_facts:
            return Stage1Result(question, qa, [], None, failure="stage1: no facts")
        stages.append(_fact_items(sorted(nerd_facts), kg))

        scored = select_relevant_facts(
            qa.raw,
            [nerd_facts[fid] for fid in sorted(nerd_facts)],
            scorer,
            n=config.top_facts,
        )
        stages.append(_fact_items([s.fact_id for s in scored], kg))

        g = induce_graph(scored, kg)
        g = inject_connectivity(g, qa.raw, qa.entities, kg, scorer, fact_cost)
        stages.append(_graph_items(g))

        groups = match_terminals(qa, g, kg)
        if groups:
            forest = compute_gst_forest(
                g, groups, k=config.top_gsts, state_cap=config.gst_state_cap
            )
        else:
            forest = []
        if forest:
            largest_trees = forest[0][1]
            all_trees = [t for _, trees in forest for t in trees]
            stages.append(
                {
                    g.nodes[n].item_id
                    for t in largest_trees
                    for n in t.nodes
                    if g.nodes[n].kind in ("entity", "literal", "timestamp")
                }
            )
            stages.append(
                {
                    g.nodes[n].item_id
                    for t in all_trees
                    for n in t.nodes
                    if g.nodes[n].kind in ("entity", "literal", "timestamp")
                }
            )
            g = complete_gsts(all_trees, g, kg)
        else:
            # No terminal matched: keep the induced graph as the "trees".
            stages.append(_graph_items(g))
            stages.append(_graph_items(g))
        stages.append(_graph_items(g))

        g = augment_temporal(g, kg, qa.raw, scorer, fact_cost, n=config.top_temporal)
        stages.append(_graph_items(g))
        return Stage1Result(question, qa, stages, g)
    except PipelineError:
        raise
    except Exception as exc:  # per-question recoverable failure
        log.warning("question %s failed: %s", question.id, exc)
        return Stage1Result(question, None, [], None, failure=f"stage1: {exc}")


def stage_recall(results: list[Stage1Result]) -> StageReport:
    ok = [r for r in results if r.failure is None]
    n_failed = len(results) - len(ok)
    if not ok:
        return StageReport(
            tuple(StageRow(name, 0.0, 0.0) for name in STAGE_NAMES), 0, n_failed
        )
    rows = []
    for i, name in enumerate(STAGE_NAMES):
        hits = sum(
            1 for r in ok if set(r.question.answers) & r.stage_items[i]
        )
        mean_cand = sum(len(r.stage_items[i]) for r in ok) / len(ok)
        rows.append(StageRow(name, hits / len(ok), mean_cand))
    return StageReport(tuple(rows), len(ok), n_failed)


def build_examples(
    results: list[Stage1Result], kg: KnowledgeGraph
) -> dict[str, QAExample]:
    examples = {}
    for r in results:
        if r.failure is not None or r.graph is None or not r.graph.nodes:
            continue
        rg = build_relational_graph(r.graph, kg)
        examples[r.question.id] = QAExample(
            qa=r.qa, graph=rg, gold=frozenset(r.question.answers)
        )
    return examples


def dump_predictions(path: str | Path, rankings: dict[str, list[tuple[str, float]]]):
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(rankings):
            fh.write(
                json.dumps(
                    {"id": qid, "ranking": [[n, round(p, 12)] for n, p in rankings[qid]]},
                    sort_keys=True,
                )
                + "\n"
            )


def load_predictions(path: str | Path) -> dict[str, list[tuple[str, float]]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["id"]] = [(n, p) for n, p in rec["ranking"]]
    return out


def dump_graphs(path: str | Path, results: list[Stage1Result]):
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            if r.graph is None:
                continue
            rec = {
                "id": r.question.id,
                "nodes": [
                    {"id": n.id, "item": n.item_id, "kind": n.kind}
                    for n in sorted(r.graph.nodes.values(), key=lambda n: n.id)
                ],
                "edges": [
                    {"id": e.id, "src": e.src, "dst": e.dst, "cost": round(e.cost, 12)}
                    for e in sorted(r.graph.edges.values(), key=lambda e: e.id)
                ],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def evaluate_split(
    rankings: dict[str, list[tuple[str, float]]],
    questions: list[BenchmarkQuestion],
) -> Metrics | None:
    """Metrics over the questions that have a ranking; None when empty."""
    ranked, golds = [], []
    for q in questions:
        if q.id in rankings:
            ranked.append([n for n, _ in rankings[q.id]])
            golds.append(set(q.answers))
    if not ranked:
        return None
    return rgcn.evaluate(ranked, golds)


def _metrics_dict(m: Metrics | None):
    if m is None:
        return None
    return {
        "P@1": round(m.p_at_1, 10),
        "MRR": round(m.mrr, 10),
        "Hit@5": round(m.hit_at_5, 10),
        "questions": m.n_questions,
    }


def run_pipeline(
    config: PipelineConfig, dump_answer_graphs: bool = False
) -> tuple[StageReport, dict[str, Metrics | None]]:
    """Full run: Stage 1 on every question, train on the train split, predict
    and evaluate dev/test, write reports, predictions and checkpoint."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        kg, questions = load_synthetic(config.data_dir)
    except Exception as exc:
        raise PipelineError("load", str(exc)) from exc
    splits = split_dataset(questions, config.split, config.seed)
    detector = GazetteerDetector(kg)
    scorer = make_scorer(config, kg)

    results = [run_stage1(q, kg, scorer, config, detector) for q in questions]
    report = stage_recall(results)
    if dump_answer_graphs:
        dump_graphs(out / "graphs.jsonl", results)

    examples = build_examples(results, kg)
    by_split = {
        name: [q for q in qs if q.id in examples] for name, qs in splits.items()
    }
    train_examples = [examples[q.id] for q in by_split["train"]]
    if not train_examples:
        raise PipelineError("train", "no trainable questions in the train split")

    model = Model(config.rgcn_config())
    dev_examples = [examples[q.id] for q in by_split["dev"]]
    history = rgcn.train(model, train_examples, dev_examples=dev_examples or None)
    save_checkpoint(
        str(out / "checkpoint.bin"),
        model.store.state_dict(),
        meta={"seed": config.seed, "dim": config.dim, "layers": config.layers},
    )

    metrics: dict[str, Metrics | None] = {}
    for name in SPLIT_NAMES:
        rankings = {
            q.id: rgcn.predict(model, examples[q.id]) for q in by_split[name]
        }
        dump_predictions(out / f"predictions_{name}.jsonl", rankings)
        metrics[name] = evaluate_split(rankings, splits[name])

    report_json = {
        "stage_report": [
            {
                "stage": r.name,
                "recall": round(r.recall, 10),
                "mean_candidates": round(r.mean_candidates, 10),
            }
            for r in report.rows
        ],
        "n_questions": report.n_questions,
        "n_failed": report.n_failed,
        "loss": [round(x, 10) for x in history],
        "metrics": {name: _metrics_dict(metrics[name]) for name in SPLIT_NAMES},
        "seed": config.seed,
    }
    (out / "report.json").write_text(
        json.dumps(report_json, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    lines = [report.render(), ""]
    for name in SPLIT_NAMES:
        m = metrics[name]
        if m is None:
            lines.append(f"{name}: no evaluated questions")
        else:
            lines.append(
                f"{name}: P@1 {m.p_at_1:.3f}  MRR {m.mrr:.3f}  "
                f"Hit@5 {m.hit_at_5:.3f}  ({m.n_questions} questions)"
            )
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report, metrics


def load_model(config: PipelineConfig, checkpoint_path: str | Path) -> Model:
    state, _meta = load_checkpoint(str(checkpoint_path))
    model = Model(config.rgcn_config())
    model.store.load_state_dict(state)
    return model
