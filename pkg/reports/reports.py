import json
import logging
import os
from typing import Dict, Iterable, List, Sequence

import pandas as pd

from src.baselines import SWEEP_COLUMNS

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = [
    "epoch",
    "loss",
    "pull",
    "relation",
    "answer",
    "dev_hits_at_1",
    "dev_answer_recall",
]
EVAL_COLUMNS = ["qid", "top", "hit", "recall", "entities", "facts", "docs"]
TIMING_COLUMNS = ["epoch", "seconds", "rss_mb"]
TRAINING_RECALL_COLUMNS = ["examples_seen", "answer_recall"]
SETTINGS_COLUMNS = ["hops", "kb", "text", "kb_50", "kb_50_text"]


def _frame(rows: Sequence[dict], columns: List[str]) -> pd.DataFrame:
    """Rows in a fixed column order; absent columns are left empty."""
    frame = pd.DataFrame(list(rows))
    return frame.reindex(columns=columns)


def _write_csv(frame: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {len(frame)} row(s) to {path}")
    return path


def generate_history_report(history: Sequence[dict], path: str) -> str:
    """Per-epoch training metrics as CSV"""
    return _write_csv(_frame(history, HISTORY_COLUMNS), path)


def generate_timing_report(timing: Sequence[dict], path: str) -> str:
    return _write_csv(_frame(timing, TIMING_COLUMNS), path)


def generate_training_recall_report(rows: Sequence[dict], path: str) -> str:
    return _write_csv(_frame(rows, TRAINING_RECALL_COLUMNS), path)


def generate_sweep_report(rows: Sequence[dict], path: str) -> str:
    return _write_csv(_frame(rows, SWEEP_COLUMNS), path)


def generate_settings_report(rows: Sequence[dict], path: str) -> str:
    """Hits@1 table: one row per hop count, one column per retrieval setting"""
    return _write_csv(_frame(rows, SETTINGS_COLUMNS), path)


def generate_eval_report(metrics: Dict[str, float], per_question: Sequence[dict], out_dir: str):
    """eval.json (aggregate metrics) plus eval_questions.csv (one row per question)"""
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "eval.json")
    write_json(metrics_path, metrics)
    questions_path = _write_csv(
        _frame(per_question, EVAL_COLUMNS), os.path.join(out_dir, "eval_questions.csv")
    )
    return metrics_path, questions_path


def generate_trace_report(records: Iterable[dict], path: str) -> str:
    """One JSON object per line, one line per (question, iteration)"""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")
            count += 1
    logger.info(f"Wrote {count} trace record(s) to {path}")
    return path


def write_json(path: str, payload) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_report(path: str) -> pd.DataFrame:
    """Load a CSV report written by this module."""
    return pd.read_csv(path)
