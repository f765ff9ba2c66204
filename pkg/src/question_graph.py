#!/usr/bin/env python3
"""
Question subgraph
Heterogeneous entity / fact / text graph grown per question, with edge closure on update
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

from src.corpus_index import CorpusIndex
from src.errors import GraphError, UnknownKeyError
from src.kb_store import KbIndex
from src.text import WordVocabulary

logger = logging.getLogger(__name__)


class NodeKind(str, Enum):
    ENTITY = "entity"
    FACT = "fact"
    TEXT = "text"


class NodeRef(NamedTuple):
    kind: NodeKind
    key: int


@dataclass
class EntityNode:
    added_at: int
    pulled: bool = False


@dataclass(frozen=True)
class Question:
    """A linked question: tokens, question entities and (when known) gold answers"""

    qid: int
    tokens: Tuple[str, ...]
    q_entities: frozenset
    answers: frozenset = frozenset()
    text: str = ""


@dataclass(frozen=True)
class Stores:
    """The backing stores a subgraph's keys point into"""

    kb: KbIndex
    corpus: CorpusIndex
    words: WordVocabulary


@dataclass
class QuestionSubgraph:
    question: Tuple[str, ...]
    q_entities: frozenset
    entity_nodes: Dict[int, EntityNode] = field(default_factory=dict)
    fact_nodes: Set[int] = field(default_factory=set)
    text_nodes: Set[int] = field(default_factory=set)
    fact_edges: Set[Tuple[int, int]] = field(default_factory=set)  # (fact_id, entity)
    text_edges: Set[Tuple[int, int]] = field(default_factory=set)  # (doc_id, entity)
    iteration: int = 0

    @property
    def edges(self) -> Set[Tuple[NodeRef, NodeRef]]:
        out = {(NodeRef(NodeKind.FACT, f), NodeRef(NodeKind.ENTITY, e)) for f, e in self.fact_edges}
        out |= {
            (NodeRef(NodeKind.TEXT, d), NodeRef(NodeKind.ENTITY, e)) for d, e in self.text_edges
        }
        return out

    def entities(self) -> List[int]:
        return sorted(self.entity_nodes)

    def unpulled(self) -> List[int]:
        return sorted(e for e, node in self.entity_nodes.items() if not node.pulled)

    def sizes(self) -> Dict[str, int]:
        return {
            "entities": len(self.entity_nodes),
            "facts": len(self.fact_nodes),
            "docs": len(self.text_nodes),
        }

    def to_json(self) -> str:
        """Canonical debug serialization (keys ascending within each kind)."""
        payload = {
            "question": list(self.question),
            "iteration": self.iteration,
            "entities": [
                {"id": e, "added_at": node.added_at, "pulled": node.pulled}
                for e, node in sorted(self.entity_nodes.items())
            ],
            "facts": sorted(self.fact_nodes),
            "docs": sorted(self.text_nodes),
            "edges": [["fact", f, e] for f, e in sorted(self.fact_edges)]
            + [["text", d, e] for d, e in sorted(self.text_edges)],
        }
        return json.dumps(payload, sort_keys=True)


def init_graph(question_tokens: Sequence[str], q_entities: Iterable[int]) -> QuestionSubgraph:
    """Graph holding only the question entities."""
    q_set = frozenset(q_entities)
    if not q_set:
        raise GraphError("question has no linked entities")
    return QuestionSubgraph(
        question=tuple(question_tokens),
        q_entities=q_set,
        entity_nodes={e: EntityNode(added_at=0) for e in sorted(q_set)},
    )


def update(
    g: QuestionSubgraph,
    new_entities: Iterable[int],
    new_facts: Iterable[int],
    new_docs: Iterable[int],
    iteration: int,
    stores: Stores,
) -> QuestionSubgraph:
    """Add nodes (first discovery wins) and close edges over old and new nodes. Mutates `g`."""
    kb, corpus = stores.kb, stores.corpus
    added_entities = []
    for e in sorted(set(new_entities)):
        kb.check_entity(e)
        if e not in g.entity_nodes:
            g.entity_nodes[e] = EntityNode(added_at=iteration)
            added_entities.append(e)
    added_facts = []
    for f in sorted(set(new_facts)):
        kb.fact(f)
        if f not in g.fact_nodes:
            g.fact_nodes.add(f)
            added_facts.append(f)
    added_docs = []
    for d in sorted(set(new_docs)):
        corpus.doc(d)
        if d not in g.text_nodes:
            g.text_nodes.add(d)
            added_docs.append(d)

    for f in added_facts:
        fact = kb.facts[f]
        for e in (fact.subject, fact.object):
            if e in g.entity_nodes:
                g.fact_edges.add((f, e))
    for d in added_docs:
        for m in corpus.docs[d].mentions:
            if m.entity in g.entity_nodes:
                g.text_edges.add((d, m.entity))
    for e in added_entities:
        for f in kb.by_entity.get(e, ()):
            if f in g.fact_nodes:
                g.fact_edges.add((f, e))
        for d in corpus.by_entity.get(e, ()):
            if d in g.text_nodes:
                g.text_edges.add((d, e))

    g.iteration = max(g.iteration, iteration)
    logger.debug(
        f"update t={iteration}: +{len(added_entities)} entities, +{len(added_facts)} facts, "
        f"+{len(added_docs)} docs"
    )
    return g


def mark_pulled(g: QuestionSubgraph, entities: Iterable[int]) -> QuestionSubgraph:
    """Flag entities as expanded; idempotent."""
    entities = list(entities)
    missing = [e for e in entities if e not in g.entity_nodes]
    if missing:
        raise UnknownKeyError(f"entities {missing} are not in the subgraph")
    for e in entities:
        g.entity_nodes[e].pulled = True
    return g


def closure_edges(
    entity_nodes: Iterable[int],
    fact_nodes: Iterable[int],
    text_nodes: Iterable[int],
    stores: Stores,
) -> Tuple[Set[Tuple[int, int]], Set[Tuple[int, int]]]:
    """Edges mandated by the node sets alone, recomputed from scratch."""
    entities = set(entity_nodes)
    fact_edges = set()
    for f in fact_nodes:
        fact = stores.kb.facts[f]
        fact_edges |= {(f, e) for e in (fact.subject, fact.object) if e in entities}
    text_edges = set()
    for d in text_nodes:
        mentions = stores.corpus.docs[d].mentions
        text_edges |= {(d, m.entity) for m in mentions if m.entity in entities}
    return fact_edges, text_edges


def answer_in_graph(g: QuestionSubgraph, answers: Optional[Iterable[int]]) -> bool:
    return bool(answers) and any(a in g.entity_nodes for a in answers)
