#!/usr/bin/env python3
"""
Retrieval engine
Iterative pull/classify expansion of a question subgraph and final answer selection,
in KB-only, text-only or hybrid mode
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config.config import EngineConfig
from src.autograd import Tensor, no_grad
from src.corpus_index import pull_docs, pull_entities
from src.errors import GraphError
from src.kb_store import Fact, KbIndex, candidate_facts, pull_headtail
from src.neural_core import (
    ModelParams,
    classify_answer,
    classify_pullnodes,
    encode_graph,
    encode_question,
)
from src.question_graph import (
    Question,
    QuestionSubgraph,
    Stores,
    answer_in_graph,
    init_graph,
    mark_pulled,
    update,
)

logger = logging.getLogger(__name__)


@dataclass
class IterationRecord:
    """What one iteration expanded and retrieved"""

    iteration: int
    expanded: List[int]
    new_entities: int
    new_facts: int
    new_docs: int
    entities: int
    facts: int
    docs: int
    answer_in_graph: Optional[bool] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AnswerResult:
    ranked: List[Tuple[int, float]]
    subgraph: QuestionSubgraph
    trace: List[IterationRecord] = field(default_factory=list)

    @property
    def top(self) -> int:
        return self.ranked[0][0]


def rank(probabilities: Dict[int, float]) -> List[Tuple[int, float]]:
    """Descending probability, ties broken by ascending entity id."""
    return sorted(probabilities.items(), key=lambda pair: (-pair[1], pair[0]))


def question_encoding(params: ModelParams, stores: Stores, tokens: Sequence[str]) -> Tensor:
    return encode_question(params, stores.words.encode(tokens))


def pull_facts(kb: KbIndex, params: ModelParams, e: int, h_q: Tensor, N_f: int) -> List[Fact]:
    """Top-N_f incident facts of `e` by relevance score; ties by ascending fact id."""
    candidates = candidate_facts(kb, e)
    if N_f <= 0 or not candidates:
        return []
    relations = np.array([f.relation for f in candidates], dtype=np.int64)
    scores = params["relation_emb"].data[relations] @ h_q.data
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i].fact_id))
    return [candidates[i] for i in order[:N_f]]


def expand_once(
    g: QuestionSubgraph,
    params: ModelParams,
    stores: Stores,
    cfg: EngineConfig,
    selected_entities: Iterable[int],
    h_q: Optional[Tensor] = None,
    iteration: Optional[int] = None,
) -> QuestionSubgraph:
    """Pull facts and/or documents for the selected entities and add everything found."""
    selected = sorted(set(selected_entities))
    unpulled = set(g.unpulled())
    stale = [e for e in selected if e not in unpulled]
    if stale:
        raise GraphError(f"entities {stale} are not unpulled nodes of the subgraph")
    if iteration is None:
        iteration = g.iteration + 1
    if h_q is None and cfg.uses_kb:
        with no_grad():
            h_q = question_encoding(params, stores, g.question)

    new_facts: List[int] = []
    new_docs: List[int] = []
    new_entities = set()
    for e in selected:
        if cfg.uses_kb:
            for fact in pull_facts(stores.kb, params, e, h_q, cfg.N_f):
                new_facts.append(fact.fact_id)
                new_entities |= pull_headtail(fact)
        if cfg.uses_text:
            for d in pull_docs(stores.corpus, e, g.question, cfg.N_d):
                new_docs.append(d)
                new_entities |= pull_entities(stores.corpus, d)

    update(g, new_entities, new_facts, new_docs, iteration, stores)
    mark_pulled(g, selected)
    return g


def select_top_k(probabilities: Dict[int, float], eligible: Iterable[int], k: int) -> List[int]:
    eligible = set(eligible)
    ranked = rank({e: p for e, p in probabilities.items() if e in eligible})
    return sorted(e for e, _ in ranked[:k])


def select_above_threshold(
    probabilities: Dict[int, float], eligible: Iterable[int], epsilon: float
) -> List[int]:
    return sorted(e for e in set(eligible) if probabilities[e] > epsilon)


def _record(
    iteration: int,
    expanded: List[int],
    before: Dict[str, int],
    g: QuestionSubgraph,
    answers: Optional[Iterable[int]],
) -> IterationRecord:
    after = g.sizes()
    return IterationRecord(
        iteration=iteration,
        expanded=list(expanded),
        new_entities=after["entities"] - before["entities"],
        new_facts=after["facts"] - before["facts"],
        new_docs=after["docs"] - before["docs"],
        entities=after["entities"],
        facts=after["facts"],
        docs=after["docs"],
        answer_in_graph=answer_in_graph(g, answers) if answers else None,
    )


def run_inference(
    question: Question, params: ModelParams, stores: Stores, cfg: EngineConfig
) -> AnswerResult:
    """T pull/classify iterations with top-k selection, then answer ranking on the final graph."""
    with no_grad():
        h_q = question_encoding(params, stores, question.tokens)
        g = init_graph(question.tokens, question.q_entities)
        trace: List[IterationRecord] = []
        for t in range(1, cfg.T + 1):
            before = g.sizes()
            eligible = g.unpulled()
            selected: List[int] = []
            if eligible:
                probs = classify_pullnodes(params, encode_graph(params, g, stores, h_q))
                selected = select_top_k(probs, eligible, cfg.k)
                expand_once(g, params, stores, cfg, selected, h_q=h_q, iteration=t)
            record = _record(t, selected, before, g, question.answers)
            trace.append(record)
            logger.debug(f"q{question.qid} t={t}: expanded {selected}, sizes {g.sizes()}")

        if not g.entity_nodes:
            raise GraphError(f"question {question.qid}: final subgraph has no entity nodes")
        answer_probs = classify_answer(params, encode_graph(params, g, stores, h_q))
    return AnswerResult(ranked=rank(answer_probs), subgraph=g, trace=trace)


def expand_for_training(
    g: QuestionSubgraph,
    params: ModelParams,
    stores: Stores,
    cfg: EngineConfig,
    forced_entities: Iterable[int],
    h_q: Optional[Tensor] = None,
    iteration: Optional[int] = None,
    pull_probs: Optional[Dict[int, float]] = None,
) -> QuestionSubgraph:
    """Threshold expansion followed by injection of forced candidate entities.

    `pull_probs` lets the trainer reuse the probabilities it already computed on the tape.
    """
    if iteration is None:
        iteration = g.iteration + 1
    with no_grad():
        if h_q is None:
            h_q = question_encoding(params, stores, g.question)
        eligible = g.unpulled()
        if eligible:
            if pull_probs is None:
                pull_probs = classify_pullnodes(params, encode_graph(params, g, stores, h_q))
            selected = select_above_threshold(pull_probs, eligible, cfg.epsilon)
            expand_once(g, params, stores, cfg, selected, h_q=h_q, iteration=iteration)
    missing = sorted(e for e in set(forced_entities) if e not in g.entity_nodes)
    if missing:
        update(g, missing, (), (), iteration, stores)
        logger.debug(f"t={iteration}: injected forced entities {missing}")
    g.iteration = max(g.iteration, iteration)
    return g
