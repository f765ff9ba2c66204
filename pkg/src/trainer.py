#!/usr/bin/env python3
"""
Trainer
Adam, the three-part weakly supervised loss, the minibatch training loop and evaluation
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import psutil
from scipy.special import expit
from tqdm import tqdm

from config.config import Config, EngineConfig, LossWeights, RunConfig, TrainConfig
from src.autograd import Tensor, bce_with_logits, concat, weighted_sum
from src.engine import (
    expand_for_training,
    question_encoding,
    run_inference,
    select_above_threshold,
)
from src.errors import TrainingDivergedError
from src.kb_store import KbIndex, candidate_facts
from src.neural_core import (
    ModelParams,
    answer_logits,
    encode_graph,
    fact_logits,
    pull_logits,
    save_checkpoint,
)
from src.question_graph import Question, Stores, answer_in_graph, init_graph
from src.weak_supervision import (
    SupervisionLabels,
    answer_targets,
    build_labels,
    forced_entities,
    pull_targets,
    relation_targets,
)

logger = logging.getLogger(__name__)


class Adam:
    """Adam with optional L2 weight decay folded into the gradient"""

    def __init__(self, params: ModelParams, cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.named()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.named()}

    def step(self) -> None:
        cfg = self.cfg
        self.step_count += 1
        bias1 = 1.0 - cfg.adam_beta1**self.step_count
        bias2 = 1.0 - cfg.adam_beta2**self.step_count
        for name, tensor in self.params.named():
            grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
            if cfg.weight_decay:
                grad = grad + cfg.weight_decay * tensor.data
            self.m[name] = cfg.adam_beta1 * self.m[name] + (1.0 - cfg.adam_beta1) * grad
            self.v[name] = cfg.adam_beta2 * self.v[name] + (1.0 - cfg.adam_beta2) * grad * grad
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            tensor.data = tensor.data - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


@dataclass
class LossBreakdown:
    total: Tensor
    components: Dict[str, float]
    counts: Dict[str, int]


def _row_positions(entity_ids: np.ndarray, entities: Sequence[int]) -> np.ndarray:
    return np.searchsorted(entity_ids, np.asarray(entities, dtype=np.int64))


def loss(
    params: ModelParams,
    question: Question,
    labels: SupervisionLabels,
    stores: Stores,
    kb_complete: KbIndex,
    engine_cfg: EngineConfig,
    weights: LossWeights = LossWeights(),
) -> Optional[LossBreakdown]:
    """Training-mode expansion plus the weighted BCE; None when the question is skipped."""
    if labels.skip:
        return None
    h_q = question_encoding(params, stores, question.tokens)
    g = init_graph(question.tokens, question.q_entities)

    pull_terms: List[Tensor] = []
    pull_labels: List[int] = []
    relation_ids: List[int] = []
    relation_labels: List[int] = []

    for t in range(1, engine_cfg.T + 1):
        eligible = g.unpulled()
        probs = None
        if eligible:
            eg = encode_graph(params, g, stores, h_q)
            logits = pull_logits(params, eg)
            targets = pull_targets(labels, g, kb_complete, t)
            pull_terms.append(logits[_row_positions(eg.entity_ids, eligible)])
            pull_labels.extend(targets[e] for e in eligible)
            probs = {int(e): float(p) for e, p in zip(eg.entity_ids, expit(logits.data))}
            if engine_cfg.uses_kb:
                for e in select_above_threshold(probs, eligible, engine_cfg.epsilon):
                    facts = candidate_facts(stores.kb, e)
                    fact_labels = relation_targets(labels, facts, t)
                    relation_ids.extend(f.relation for f in facts)
                    relation_labels.extend(fact_labels[f.fact_id] for f in facts)
        expand_for_training(
            g,
            params,
            stores,
            engine_cfg,
            forced_entities(labels, t),
            h_q=h_q,
            iteration=t,
            pull_probs=probs,
        )

    eg = encode_graph(params, g, stores, h_q)
    final_targets = answer_targets(labels, g)

    terms = {}
    if pull_labels:
        terms["pull"] = bce_with_logits(concat(pull_terms), pull_labels)
    if relation_labels:
        terms["relation"] = bce_with_logits(fact_logits(params, relation_ids, h_q), relation_labels)
    terms["answer"] = bce_with_logits(
        answer_logits(params, eg), [final_targets[int(e)] for e in eg.entity_ids]
    )
    total = weighted_sum((getattr(weights, name), term) for name, term in terms.items())
    if total is None:
        return None
    return LossBreakdown(
        total=total,
        components={name: term.item() for name, term in terms.items()},
        counts={
            "pull": len(pull_labels),
            "relation": len(relation_labels),
            "answer": len(final_targets),
        },
    )


@dataclass
class EvalReport:
    metrics: Dict[str, float]
    per_question: List[dict] = field(default_factory=list)


def _evaluate_one(params: ModelParams, question: Question, stores: Stores, cfg: EngineConfig):
    result = run_inference(question, params, stores, cfg)
    sizes = result.subgraph.sizes()
    return {
        "qid": question.qid,
        "top": result.top,
        "hit": int(result.top in question.answers),
        "recall": int(answer_in_graph(result.subgraph, question.answers)),
        **sizes,
    }


def evaluate(
    params: ModelParams,
    questions: Sequence[Question],
    stores: Stores,
    engine_cfg: EngineConfig,
    jobs: int = 1,
    desc: str = "evaluate",
) -> EvalReport:
    """Hits@1, answer recall and mean subgraph sizes over the questions."""
    if not questions:
        empty = dict.fromkeys(
            ("hits_at_1", "answer_recall", "mean_entities", "mean_facts", "mean_docs"), 0.0
        )
        return EvalReport(metrics={**empty, "questions": 0})

    def run(q):
        return _evaluate_one(params, q, stores, engine_cfg)

    progress = dict(total=len(questions), desc=desc, disable=not Config.PROGRESS, leave=False)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(tqdm(pool.map(run, questions), **progress))
    else:
        rows = [run(q) for q in tqdm(questions, **progress)]

    count = len(rows)
    metrics = {
        "hits_at_1": sum(r["hit"] for r in rows) / count,
        "answer_recall": sum(r["recall"] for r in rows) / count,
        "mean_entities": sum(r["entities"] for r in rows) / count,
        "mean_facts": sum(r["facts"] for r in rows) / count,
        "mean_docs": sum(r["docs"] for r in rows) / count,
        "questions": count,
    }
    return EvalReport(metrics=metrics, per_question=rows)


@dataclass
class TrainResult:
    params: ModelParams
    history: List[dict] = field(default_factory=list)
    training_recall: List[dict] = field(default_factory=list)
    timing: List[dict] = field(default_factory=list)
    best_epoch: Optional[int] = None


def _rss_mb() -> float:
    return psutil.Process(os.getpid()).memory_info().rss / (1024 * 1024)


def _check_finite(value: float, diagnostics: dict) -> None:
    if not np.isfinite(value):
        raise TrainingDivergedError(f"non-finite loss {value}", diagnostics=diagnostics)


def train(
    params: ModelParams,
    dataset: Sequence[Question],
    stores: Stores,
    kb_complete: KbIndex,
    run_cfg: RunConfig,
    dev: Sequence[Question] = (),
    checkpoint_dir: Optional[str] = None,
    jobs: int = 1,
) -> TrainResult:
    """Minibatch Adam training with full retrieval per example and best-dev selection."""
    cfg = run_cfg.train
    engine_cfg = run_cfg.engine
    optimizer = Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(params=params)

    labels = [build_labels(kb_complete, q) for q in dataset]
    usable = [i for i, lab in enumerate(labels) if not lab.skip]
    if len(usable) < len(dataset):
        logger.warning(
            f"Skipping {len(dataset) - len(usable)} training question(s) with no reachable answer"
        )

    best_hits = -1.0
    best_params = params
    seen = 0
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = [usable[i] for i in rng.permutation(len(usable))]
        totals = {"loss": 0.0, "pull": 0.0, "relation": 0.0, "answer": 0.0}
        counted = 0
        batches = range(0, len(order), cfg.batch_size)
        for start in tqdm(
            batches, desc=f"epoch {epoch}", disable=not Config.PROGRESS, leave=False
        ):
            batch = order[start : start + cfg.batch_size]
            params.zero_grad()
            in_batch = 0
            for idx in batch:
                question = dataset[idx]
                breakdown = loss(
                    params, question, labels[idx], stores, kb_complete, engine_cfg,
                    run_cfg.loss_weights,
                )
                if breakdown is None:
                    continue
                value = breakdown.total.item()
                _check_finite(
                    value,
                    {"epoch": epoch, "qid": question.qid, "components": breakdown.components},
                )
                breakdown.total.backward()
                in_batch += 1
                totals["loss"] += value
                for name, component in breakdown.components.items():
                    totals[name] += component
                seen += 1
                if (
                    cfg.training_recall_interval
                    and dev
                    and seen % cfg.training_recall_interval == 0
                ):
                    interim = evaluate(params, dev, stores, engine_cfg, jobs, desc="dev recall")
                    result.training_recall.append(
                        {"examples_seen": seen, "answer_recall": interim.metrics["answer_recall"]}
                    )
            if in_batch == 0:
                continue
            for _, tensor in params.named():
                if tensor.grad is not None:
                    tensor.grad /= in_batch
            optimizer.step()
            counted += in_batch

        row = {"epoch": epoch}
        row.update({name: value / max(counted, 1) for name, value in totals.items()})
        if dev:
            report = evaluate(params, dev, stores, engine_cfg, jobs, desc="dev")
            row["dev_hits_at_1"] = report.metrics["hits_at_1"]
            row["dev_answer_recall"] = report.metrics["answer_recall"]
            if report.metrics["hits_at_1"] > best_hits:
                best_hits = report.metrics["hits_at_1"]
                best_params = params.copy()
                result.best_epoch = epoch
                if checkpoint_dir:
                    save_checkpoint(
                        os.path.join(checkpoint_dir, Config.CHECKPOINT_NAME),
                        best_params,
                        {"epoch": epoch, "config_hash": run_cfg.config_hash()},
                    )
        seconds = time.perf_counter() - started
        result.history.append(row)
        result.timing.append({"epoch": epoch, "seconds": seconds, "rss_mb": _rss_mb()})
        logger.info(
            f"Epoch {epoch}: loss={row['loss']:.4f}"
            + (f" dev_hits@1={row['dev_hits_at_1']:.3f}" if dev else "")
            + f" ({seconds:.1f}s)"
        )
        if checkpoint_dir and epoch % cfg.checkpoint_interval == 0:
            save_checkpoint(
                os.path.join(checkpoint_dir, "last.ckpt"),
                params,
                {"epoch": epoch, "config_hash": run_cfg.config_hash()},
            )

    if not dev:
        best_params = params
        result.best_epoch = cfg.epochs or None
        if checkpoint_dir:
            save_checkpoint(
                os.path.join(checkpoint_dir, Config.CHECKPOINT_NAME),
                params,
                {"epoch": cfg.epochs, "config_hash": run_cfg.config_hash()},
            )
    result.params = best_params
    return result
