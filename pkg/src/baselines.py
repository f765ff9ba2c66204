#!/usr/bin/env python3
"""
One-shot retrieval baselines
PageRank-Nibble KB neighbourhoods, single-shot IDF text retrieval and the recall sweeps
that compare them with iterative retrieval
"""

import logging
from dataclasses import replace
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from pqdict import pqdict

from config.config import EngineConfig, PprConfig
from src.corpus_index import CorpusIndex, pull_entities, search
from src.engine import run_inference
from src.errors import DataValidationError
from src.kb_store import KbIndex, k_hop_ball
from src.neural_core import ModelParams
from src.question_graph import (
    Question,
    QuestionSubgraph,
    Stores,
    answer_in_graph,
    init_graph,
    update,
)
from src.text import WordVocabulary

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["retriever", "budget", "mean_recall", "mean_entities", "mean_facts", "mean_docs"]


def push_ppr(
    kb: KbIndex, seeds: Set[int], cfg: PprConfig
) -> Tuple[Dict[int, float], Dict[int, float]]:
    """Lazy-walk push loop returning (p, r).

    Residual starts uniform over the seeds. A node is pushed while r(v) >= eps * deg(v);
    the worklist always pops the smallest entity id. Isolated nodes move their whole
    residual into p.
    """
    if not seeds:
        raise DataValidationError("pagerank_nibble needs at least one seed")
    alpha, eps = cfg.alpha, cfg.epsilon_ppr
    p: Dict[int, float] = {}
    r: Dict[int, float] = {}
    for s in sorted(seeds):
        kb.check_entity(s)
        r[s] = 1.0 / len(seeds)

    def active(v: int) -> bool:
        return r.get(v, 0.0) > 0.0 and r[v] >= eps * kb.degree(v)

    # entity id doubles as priority: smallest id pops first
    queue = pqdict({v: v for v in r if active(v)})
    pushes = 0
    while queue:
        v = queue.pop()
        if not active(v):
            continue
        neighbors = kb.neighbors.get(v, ())
        residual = r[v]
        if not neighbors:
            p[v] = p.get(v, 0.0) + residual
            r[v] = 0.0
            continue
        pushes += 1
        p[v] = p.get(v, 0.0) + alpha * residual
        share = (1.0 - alpha) * residual / (2.0 * len(neighbors))
        r[v] = (1.0 - alpha) * residual / 2.0
        for u in neighbors:
            r[u] = r.get(u, 0.0) + share
            if u not in queue and active(u):
                queue[u] = u
        if v not in queue and active(v):
            queue[v] = v
    logger.debug(f"pagerank_nibble: {pushes} pushes, support {len(p)}")
    return p, r


def pagerank_nibble(kb: KbIndex, seeds: Set[int], cfg: PprConfig) -> Dict[int, float]:
    """Approximate personalized PageRank mass per entity, seeded at `seeds`."""
    return push_ppr(kb, seeds, cfg)[0]


def top_entities(mass: Dict[int, float], m: int) -> List[int]:
    ranked = sorted((e for e, v in mass.items() if v > 0.0), key=lambda e: (-mass[e], e))
    return ranked[:m]


def _facts_within(kb: KbIndex, entities: Set[int]) -> List[int]:
    facts = set()
    for e in entities:
        for f in kb.by_entity.get(e, ()):
            fact = kb.facts[f]
            if fact.subject in entities and fact.object in entities:
                facts.add(f)
    return sorted(facts)


def _stores_for(kb: KbIndex, corpus: CorpusIndex, stores: Optional[Stores]) -> Stores:
    return stores if stores is not None else Stores(kb, corpus, WordVocabulary())


def heuristic_subgraph(
    kb: KbIndex,
    corpus: CorpusIndex,
    question: Question,
    cfg: PprConfig,
    text_budget: int,
    stores: Optional[Stores] = None,
) -> QuestionSubgraph:
    """Top-m PPR entities inside the k-hop ball, the facts among them and top IDF documents.

    Entities mentioned in the retrieved documents join the graph as well.
    """
    seeds = set(question.q_entities)
    mass = pagerank_nibble(kb, seeds, cfg)
    ball = k_hop_ball(kb, seeds, cfg.k_hops)
    entities = set(top_entities(mass, cfg.m)) & ball
    facts = _facts_within(kb, entities | seeds)
    docs = search(corpus, question.tokens, text_budget)
    for d in docs:
        entities |= pull_entities(corpus, d)
    g = init_graph(question.tokens, seeds)
    return update(g, entities, facts, docs, 1, _stores_for(kb, corpus, stores))


def idf_subgraph(
    corpus: CorpusIndex, question: Question, text_budget: int, stores: Stores
) -> QuestionSubgraph:
    """Top `text_budget` documents by IDF over the whole corpus plus the entities they mention."""
    docs = search(corpus, question.tokens, text_budget)
    entities = set()
    for d in docs:
        entities |= pull_entities(corpus, d)
    g = init_graph(question.tokens, question.q_entities)
    return update(g, entities, (), docs, 1, stores)


def summarize(retriever: str, budget: int, graphs: Iterable[QuestionSubgraph], questions) -> dict:
    graphs = list(graphs)
    count = max(len(graphs), 1)
    return {
        "retriever": retriever,
        "budget": budget,
        "mean_recall": sum(answer_in_graph(g, q.answers) for g, q in zip(graphs, questions))
        / count,
        "mean_entities": sum(len(g.entity_nodes) for g in graphs) / count,
        "mean_facts": sum(len(g.fact_nodes) for g in graphs) / count,
        "mean_docs": sum(len(g.text_nodes) for g in graphs) / count,
    }


def sweep_ppr(
    stores: Stores,
    questions: Sequence[Question],
    cfg: PprConfig,
    budgets: Sequence[int],
    text_budget: int = 0,
) -> List[dict]:
    rows = []
    for m in budgets:
        budget_cfg = replace(cfg, m=m).validate()
        graphs = [
            heuristic_subgraph(stores.kb, stores.corpus, q, budget_cfg, text_budget, stores)
            for q in questions
        ]
        rows.append(summarize("ppr", m, graphs, questions))
        logger.info(f"PPR m={m}: recall {rows[-1]['mean_recall']:.3f}")
    return rows


def sweep_idf(stores: Stores, questions: Sequence[Question], budgets: Sequence[int]) -> List[dict]:
    rows = []
    for budget in budgets:
        graphs = [idf_subgraph(stores.corpus, q, budget, stores) for q in questions]
        rows.append(summarize("idf", budget, graphs, questions))
        logger.info(f"IDF budget={budget}: recall {rows[-1]['mean_recall']:.3f}")
    return rows


def sweep_pullnet(
    params: ModelParams,
    stores: Stores,
    questions: Sequence[Question],
    engine_cfg: EngineConfig,
    budgets: Sequence[int],
) -> List[dict]:
    """Iterative retrieval recall with the per-iteration expansion budget k swept."""
    rows = []
    for k in budgets:
        cfg = replace(engine_cfg, k=k).validate()
        graphs = [run_inference(q, params, stores, cfg).subgraph for q in questions]
        rows.append(summarize(f"pullnet_{cfg.mode}", k, graphs, questions))
        logger.info(f"PullNet k={k}: recall {rows[-1]['mean_recall']:.3f}")
    return rows
