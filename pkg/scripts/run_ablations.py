#!/usr/bin/env python3
"""Ablation sweep: train the full model and one model per disabled
component on the same dataset, then compare test-split metrics and count
how many predictions change.

Usage:
    python3 scripts/run_ablations.py [--seed N] [--out DIR] [--epochs N]
"""

import argparse
import json
from pathlib import Path

from tempoqa.pipeline import PipelineConfig, load_predictions, run_pipeline
from tempoqa.synth import SynthConfig, generate_synthetic

ABLATIONS = ("tce", "tse", "tee", "te", "atr")


def top1(rankings):
    return {qid: ranking[0][0] for qid, ranking in rankings.items() if ranking}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/ablations")
    ap.add_argument("--epochs", type=int, default=10)
    args = ap.parse_args()

    out = Path(args.out)
    data_dir = out / "data"
    generate_synthetic(SynthConfig(seed=args.seed), data_dir)

    rows = []
    base_top1 = None
    for name in ("full",) + ABLATIONS:
        run_dir = out / name
        cfg = PipelineConfig(
            data_dir=str(data_dir),
            out_dir=str(run_dir),
            seed=args.seed,
            epochs=args.epochs,
            ablations=() if name == "full" else (name,),
        )
        _, metrics = run_pipeline(cfg)
        m = metrics["test"]
        preds = top1(load_predictions(run_dir / "predictions_test.jsonl"))
        if name == "full":
            base_top1 = preds
            changed = 0
        else:
            changed = sum(
                1 for qid in base_top1 if preds.get(qid) != base_top1[qid]
            )
        rows.append((name, m.p_at_1, m.mrr, m.hit_at_5, changed))
        print(f"{name:>5}: P@1 {m.p_at_1:.3f}  MRR {m.mrr:.3f}  "
              f"Hit@5 {m.hit_at_5:.3f}  top-1 changed vs full: {changed}")

    (out / "summary.json").write_text(
        json.dumps(
            [
                {"run": n, "P@1": p, "MRR": m, "Hit@5": h, "top1_changed": c}
                for n, p, m, h, c in rows
            ],
            indent=2,
        )
        + "\n"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
