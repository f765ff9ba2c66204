#!/usr/bin/env python3
"""
PullNet command line
synth / build / train / eval / sweep-recall / trace / settings; run as `python -m src.cli`
"""

import argparse
import json
import logging
import os
import re
import sys
from typing import List, Optional, Sequence

import pandas as pd

from config.config import Config, RunConfig
from reports.reports import (
    generate_eval_report,
    generate_history_report,
    generate_training_recall_report,
    generate_settings_report,
    generate_sweep_report,
    generate_timing_report,
    generate_trace_report,
    write_json,
)
from services.datasets import (
    IndexBundle,
    build_index,
    load_index,
    load_questions,
    questions_file,
    write_synth,
)
from services.runs import run_dir_for, write_manifest
from src.baselines import sweep_idf, sweep_ppr, sweep_pullnet
from src.data_visualization import (
    create_recall_curve,
    create_training_recall_chart,
    create_training_history,
    save_figure,
)
from src.engine import run_inference
from src.errors import CheckpointError, ConfigError, DataValidationError, PullNetError
from src.neural_core import ModelParams, load_checkpoint, save_checkpoint
from src.synth import synth_generate
from src.trainer import evaluate, train

logger = logging.getLogger(__name__)

# (column, mode, fact dropout)
SETTINGS = (
    ("kb", "kb_only", 0.0),
    ("text", "text_only", 0.0),
    ("kb_50", "kb_only", 0.5),
    ("kb_50_text", "hybrid", 0.5),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _budgets(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"budgets must be comma-separated integers: {text!r}")
    if not values or min(values) < 0:
        raise argparse.ArgumentTypeError("budgets must be non-negative and non-empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pullnet", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--config", help="run config JSON (defaults apply when omitted)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="DEBUG logging")
    verbosity.add_argument("--quiet", action="store_true", help="WARNING logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_engine_overrides(p):
        p.add_argument(
            "--T",
            default=None,
            help="iterations; an integer or 'auto' (hop count). Defaults to the config T, else "
            "the hop count in the questions file name",
        )
        p.add_argument("--mode", choices=("kb_only", "text_only", "hybrid"), default=None)
        p.add_argument("--drop", type=float, default=0.0, help="KB fact dropout for retrieval")
        p.add_argument("--jobs", type=int, default=Config.DEFAULT_JOBS)
        p.add_argument("--run-dir", default=None)

    p = sub.add_parser("synth", help="generate a synthetic movie KB, corpus and questions")
    p.add_argument("--out", required=True)

    p = sub.add_parser("build", help="validate raw files and write an index directory")
    p.add_argument("--data", required=True)
    p.add_argument("--index", required=True)

    p = sub.add_parser("train", help="train on a question file")
    p.add_argument("--index", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", default=None)
    with_engine_overrides(p)

    p = sub.add_parser("eval", help="Hits@1 / recall of a checkpoint on a question file")
    p.add_argument("--index", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--checkpoint", required=True)
    with_engine_overrides(p)

    p = sub.add_parser("sweep-recall", help="answer recall vs. subgraph size")
    p.add_argument("--index", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--retriever", choices=("ppr", "idf", "pullnet"), default="ppr")
    p.add_argument("--budgets", type=_budgets, required=True)
    p.add_argument("--text-budget", type=int, default=0)
    p.add_argument("--checkpoint", default=None)
    with_engine_overrides(p)

    p = sub.add_parser("trace", help="per-iteration expansion record for one question")
    p.add_argument("--index", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--qid", type=int, required=True)
    p.add_argument("--graph", action="store_true", help="also print the final subgraph")
    with_engine_overrides(p)

    p = sub.add_parser("settings", help="Hits@1 table over the four KB/text settings")
    p.add_argument("--index", required=True)
    p.add_argument("--data", required=True, help="directory holding questions_<h>hop_<split>.jsonl")
    p.add_argument("--hops", type=_budgets, default=[1, 2, 3])
    p.add_argument("--split", default="test")
    p.add_argument("--jobs", type=int, default=Config.DEFAULT_JOBS)
    p.add_argument("--run-dir", default=None)
    return parser


def configure_logging(args) -> None:
    level = Config.LOG_LEVEL
    if args.verbose:
        level = "DEBUG"
    elif args.quiet:
        level = "WARNING"
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _hops_from_name(path: str) -> Optional[int]:
    match = re.search(r"(\d+)hop", os.path.basename(path))
    return int(match.group(1)) if match else None


def _resolve(cfg: RunConfig, args, questions_path: Optional[str] = None) -> RunConfig:
    """Apply --mode and --T; with neither --T nor a config-file T, T is the file's hop count."""
    changes = {}
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    T = getattr(args, "T", None)
    hops = _hops_from_name(questions_path or "")
    if T == "auto":
        if hops is None:
            raise ConfigError(f"--T auto needs a questions_<h>hop file name, got {questions_path}")
        changes["T"] = hops
    elif T is not None:
        try:
            changes["T"] = int(T)
        except ValueError:
            raise ConfigError(f"--T must be an integer or 'auto', got {T!r}")
    elif hops is not None and "T" not in cfg.engine_keys:
        changes["T"] = hops
        logger.info(f"T={hops} from the hop count of {os.path.basename(questions_path)}")
    return cfg.with_engine(**changes) if changes else cfg


def _load_model(path: str, bundle: IndexBundle) -> ModelParams:
    params, _ = load_checkpoint(path)
    expected = {
        "num_words": len(bundle.words),
        "num_relations": bundle.kb.num_relations,
        "num_entities": bundle.kb.num_entities,
    }
    if params.sizes() != expected:
        raise CheckpointError(f"checkpoint sizes {params.sizes()} do not match index {expected}")
    return params


def _new_model(cfg: RunConfig, bundle: IndexBundle) -> ModelParams:
    return ModelParams.initialize(
        cfg.model, len(bundle.words), bundle.kb.num_relations, bundle.kb.num_entities
    )


# -- commands --------------------------------------------------------------------------


def cmd_synth(args, cfg: RunConfig) -> int:
    dataset = synth_generate(cfg.synth)
    outputs = write_synth(dataset, args.out)
    write_manifest(args.out, "synth", cfg, outputs=outputs)
    print(json.dumps(dataset.stats(), sort_keys=True))
    return Config.ExitCodes.OK


def cmd_build(args, cfg: RunConfig) -> int:
    bundle = build_index(args.data, args.index)
    write_manifest(args.index, "build", cfg, inputs={"data": args.data})
    print(json.dumps(bundle.stats, sort_keys=True))
    return Config.ExitCodes.OK


def cmd_train(args, cfg: RunConfig) -> int:
    cfg = _resolve(cfg, args, args.train)
    bundle = load_index(args.index)
    run_dir = args.run_dir or run_dir_for("train", cfg, tag=_stem(args.train))
    os.makedirs(run_dir, exist_ok=True)
    stores = bundle.stores(args.drop, cfg.model.seed)
    train_questions = load_questions(args.train, bundle)
    dev_questions = load_questions(args.dev, bundle) if args.dev else []

    params = _new_model(cfg, bundle)
    result = train(
        params, train_questions, stores, bundle.kb, cfg, dev_questions, run_dir, args.jobs
    )
    checkpoint = os.path.join(run_dir, Config.CHECKPOINT_NAME)
    save_checkpoint(
        checkpoint, result.params, {"epoch": result.best_epoch, "config_hash": cfg.config_hash()}
    )
    outputs = [
        checkpoint,
        generate_history_report(result.history, os.path.join(run_dir, "metrics.csv")),
        write_json(os.path.join(run_dir, "metrics.json"), result.history),
        generate_timing_report(result.timing, os.path.join(run_dir, "timing.csv")),
    ]
    if result.training_recall:
        outputs.append(
            generate_training_recall_report(
                result.training_recall, os.path.join(run_dir, "training_recall.csv")
            )
        )
    for fig, name in (
        (create_training_history(_frame(result.history)), "training_history.html"),
        (create_training_recall_chart(_frame(result.training_recall)), "training_recall.html"),
    ):
        path = save_figure(fig, os.path.join(run_dir, name))
        if path:
            outputs.append(path)
    write_manifest(
        run_dir,
        "train",
        cfg,
        inputs={"index": args.index, "train": args.train, "dev": args.dev, "drop": args.drop},
        outputs=outputs,
    )
    print(json.dumps({"run_dir": run_dir, "best_epoch": result.best_epoch}, sort_keys=True))
    return Config.ExitCodes.OK


def _frame(rows) -> pd.DataFrame:
    return pd.DataFrame(list(rows))


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def cmd_eval(args, cfg: RunConfig) -> int:
    cfg = _resolve(cfg, args, args.questions)
    bundle = load_index(args.index)
    params = _load_model(args.checkpoint, bundle)
    stores = bundle.stores(args.drop, cfg.model.seed)
    questions = load_questions(args.questions, bundle)
    report = evaluate(params, questions, stores, cfg.engine, args.jobs)
    run_dir = args.run_dir or run_dir_for("eval", cfg, tag=_stem(args.questions))
    outputs = list(generate_eval_report(report.metrics, report.per_question, run_dir))
    write_manifest(
        run_dir,
        "eval",
        cfg,
        inputs={
            "index": args.index,
            "questions": args.questions,
            "checkpoint": args.checkpoint,
            "drop": args.drop,
        },
        outputs=outputs,
    )
    print(json.dumps(report.metrics, sort_keys=True))
    return Config.ExitCodes.OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    cfg = _resolve(cfg, args, args.questions)
    bundle = load_index(args.index)
    stores = bundle.stores(args.drop, cfg.model.seed)
    questions = load_questions(args.questions, bundle)
    if args.retriever == "ppr":
        rows = sweep_ppr(stores, questions, cfg.ppr, args.budgets, args.text_budget)
    elif args.retriever == "idf":
        rows = sweep_idf(stores, questions, args.budgets)
    else:
        if not args.checkpoint:
            raise UsageError("--retriever pullnet needs --checkpoint")
        params = _load_model(args.checkpoint, bundle)
        rows = sweep_pullnet(params, stores, questions, cfg.engine, args.budgets)
    run_dir = args.run_dir or run_dir_for("sweep", cfg, tag=args.retriever)
    csv_path = generate_sweep_report(rows, os.path.join(run_dir, f"sweep_{args.retriever}.csv"))
    outputs = [csv_path]
    html = save_figure(
        create_recall_curve(_frame(rows)), os.path.join(run_dir, f"sweep_{args.retriever}.html")
    )
    if html:
        outputs.append(html)
    write_manifest(
        run_dir,
        "sweep-recall",
        cfg,
        inputs={"index": args.index, "questions": args.questions, "retriever": args.retriever},
        outputs=outputs,
    )
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return Config.ExitCodes.OK


def cmd_trace(args, cfg: RunConfig) -> int:
    cfg = _resolve(cfg, args, args.questions)
    bundle = load_index(args.index)
    params = _load_model(args.checkpoint, bundle)
    stores = bundle.stores(args.drop, cfg.model.seed)
    by_id = {q.qid: q for q in load_questions(args.questions, bundle)}
    if args.qid not in by_id:
        raise DataValidationError(
            f"question id {args.qid} not found (or not linkable) in {args.questions}"
        )
    question = by_id[args.qid]
    result = run_inference(question, params, stores, cfg.engine)
    records = [{"qid": question.qid, **record.to_dict()} for record in result.trace]

    run_dir = args.run_dir or run_dir_for("trace", cfg, tag=f"q{question.qid}")
    outputs = [generate_trace_report(records, os.path.join(run_dir, "trace.jsonl"))]
    answer = {
        "qid": question.qid,
        "top": bundle.kb.entity_vocab.name_of(result.top),
        "ranked": [[bundle.kb.entity_vocab.name_of(e), p] for e, p in result.ranked[:10]],
    }
    outputs.append(write_json(os.path.join(run_dir, "answer.json"), answer))
    for record in records:
        print(json.dumps(record, sort_keys=True))
    print(json.dumps(answer, sort_keys=True))
    if args.graph:
        graph = result.subgraph.to_json()
        path = os.path.join(run_dir, f"graph_{question.qid}.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write(graph + "\n")
        outputs.append(path)
        print(graph)
    write_manifest(
        run_dir,
        "trace",
        cfg,
        inputs={"index": args.index, "questions": args.questions, "checkpoint": args.checkpoint},
        outputs=outputs,
    )
    return Config.ExitCodes.OK


def cmd_settings(args, cfg: RunConfig) -> int:
    """Train and test one model per (hop count, setting); labels always use the complete KB."""
    bundle = load_index(args.index)
    run_dir = args.run_dir or run_dir_for("settings", cfg)
    rows = []
    for hops in args.hops:
        paths = {
            split: os.path.join(args.data, questions_file(hops, split))
            for split in ("train", "dev", args.split)
        }
        train_q = load_questions(paths["train"], bundle)
        dev_q = load_questions(paths["dev"], bundle)
        test_q = load_questions(paths[args.split], bundle)
        row = {"hops": hops}
        for column, mode, drop in SETTINGS:
            setting_cfg = cfg.with_engine(mode=mode, T=hops)
            stores = bundle.stores(drop, cfg.model.seed)
            setting_dir = os.path.join(run_dir, f"{hops}hop_{column}")
            os.makedirs(setting_dir, exist_ok=True)
            result = train(
                _new_model(setting_cfg, bundle),
                train_q,
                stores,
                bundle.kb,
                setting_cfg,
                dev_q,
                setting_dir,
                args.jobs,
            )
            report = evaluate(result.params, test_q, stores, setting_cfg.engine, args.jobs)
            row[column] = report.metrics["hits_at_1"]
            logger.info(f"{hops}-hop {column}: Hits@1 {row[column]:.3f}")
        rows.append(row)
    path = generate_settings_report(rows, os.path.join(run_dir, "settings.csv"))
    write_manifest(
        run_dir, "settings", cfg, inputs={"index": args.index, "data": args.data}, outputs=[path]
    )
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return Config.ExitCodes.OK


COMMANDS = {
    "synth": cmd_synth,
    "build": cmd_build,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-recall": cmd_sweep,
    "trace": cmd_trace,
    "settings": cmd_settings,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return Config.ExitCodes.USAGE_ERROR
    configure_logging(args)
    try:
        cfg = RunConfig.from_file(args.config)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError, DataValidationError, FileNotFoundError) as exc:
        logger.error(f"{exc}")
        print(f"error: {exc}", file=sys.stderr)
        return Config.ExitCodes.USAGE_ERROR
    except PullNetError as exc:
        logger.error(f"{exc}")
        print(f"error: {exc}", file=sys.stderr)
        return Config.ExitCodes.RUNTIME_ERROR
    except Exception as exc:
        logger.exception(f"Unexpected failure in '{args.command}': {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return Config.ExitCodes.RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
