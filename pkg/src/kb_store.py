#!/usr/bin/env python3
"""
Knowledge-base store
Immutable triple index with per-entity fact lookup, fact dropout and BFS utilities
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from config.config import Config
from src.errors import DataValidationError, UnknownKeyError
from src.text import Vocabulary

logger = logging.getLogger(__name__)


class Fact(NamedTuple):
    """A KB triple (subject, relation, object) with its dense id"""

    subject: int
    relation: int
    object: int
    fact_id: int


@dataclass(frozen=True)
class KbIndex:
    """Facts plus the entity -> incident-fact adjacency"""

    facts: Tuple[Fact, ...]
    by_entity: Mapping[int, Tuple[int, ...]]
    neighbors: Mapping[int, Tuple[int, ...]]
    entity_vocab: Vocabulary
    relation_vocab: Vocabulary

    @property
    def num_entities(self) -> int:
        return len(self.entity_vocab)

    @property
    def num_relations(self) -> int:
        return len(self.relation_vocab)

    def check_entity(self, e: int) -> int:
        if not 0 <= e < len(self.entity_vocab):
            raise UnknownKeyError(f"entity id {e} outside 0..{len(self.entity_vocab) - 1}")
        return e

    def fact(self, fact_id: int) -> Fact:
        if not 0 <= fact_id < len(self.facts):
            raise UnknownKeyError(f"fact id {fact_id} outside 0..{len(self.facts) - 1}")
        return self.facts[fact_id]

    def degree(self, e: int) -> int:
        return len(self.neighbors.get(e, ()))

    def triples(self) -> List[Tuple[str, str, str]]:
        name = self.entity_vocab.name_of
        rel = self.relation_vocab.name_of
        return [(name(f.subject), rel(f.relation), name(f.object)) for f in self.facts]


def _index_facts(
    facts: Sequence[Fact], entity_vocab: Vocabulary, relation_vocab: Vocabulary
) -> KbIndex:
    by_entity: Dict[int, List[int]] = {}
    neighbor_sets: Dict[int, Set[int]] = {}
    for f in facts:
        by_entity.setdefault(f.subject, []).append(f.fact_id)
        if f.object != f.subject:
            by_entity.setdefault(f.object, []).append(f.fact_id)
            neighbor_sets.setdefault(f.subject, set()).add(f.object)
            neighbor_sets.setdefault(f.object, set()).add(f.subject)
    # fact ids are appended in ascending order, so the lists are already sorted
    return KbIndex(
        facts=tuple(facts),
        by_entity={e: tuple(ids) for e, ids in by_entity.items()},
        neighbors={e: tuple(sorted(ns)) for e, ns in neighbor_sets.items()},
        entity_vocab=entity_vocab,
        relation_vocab=relation_vocab,
    )


def build_kb(
    triples: Sequence[Tuple[str, str, str]],
    extra_entities: Iterable[str] = (),
    line_numbers: Optional[Sequence[int]] = None,
) -> KbIndex:
    """Build a KbIndex; vocabularies follow first occurrence.

    `extra_entities` (e.g. lexicon entities absent from the triples) get ids
    after every triple entity. `line_numbers` only improves diagnostics.
    """
    entity_vocab = Vocabulary()
    relation_vocab = Vocabulary()
    seen: Dict[Tuple[int, int, int], int] = {}
    facts: List[Fact] = []

    for i, triple in enumerate(triples):
        line = line_numbers[i] if line_numbers is not None else i + 1
        if len(triple) != 3 or not all(isinstance(part, str) and part for part in triple):
            raise DataValidationError(f"line {line}: triple must hold three non-empty strings")
        subject, relation, obj = triple
        key = (entity_vocab.add(subject), relation_vocab.add(relation), entity_vocab.add(obj))
        if key in seen:
            raise DataValidationError(
                f"line {line}: duplicate triple {triple} (first seen on line {seen[key]})",
                code=Config.ErrorCodes.DUPLICATE_TRIPLE,
            )
        seen[key] = line
        facts.append(Fact(key[0], key[1], key[2], len(facts)))

    for name in extra_entities:
        entity_vocab.add(name)

    kb = _index_facts(facts, entity_vocab, relation_vocab)
    logger.info(
        f"KB built: {len(entity_vocab)} entities, {len(relation_vocab)} relations, "
        f"{len(facts)} facts"
    )
    return kb


def candidate_facts(kb: KbIndex, e: int) -> List[Fact]:
    """Facts with `e` as subject or object, ascending fact_id."""
    kb.check_entity(e)
    return [kb.facts[fid] for fid in kb.by_entity.get(e, ())]


def pull_headtail(fact: Fact) -> Set[int]:
    """Subject and object entity of a fact."""
    return {fact.subject, fact.object}


def drop_facts(kb: KbIndex, p: float, seed: int) -> KbIndex:
    """Keep each fact independently with probability 1-p; vocabularies are shared."""
    if not 0.0 <= p <= 1.0:
        raise DataValidationError(f"dropout probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    keep = rng.random(len(kb.facts)) >= p
    kept: List[Fact] = []
    for f, keep_it in zip(kb.facts, keep):
        if keep_it:
            kept.append(Fact(f.subject, f.relation, f.object, len(kept)))
    logger.info(f"Fact dropout p={p}: kept {len(kept)}/{len(kb.facts)} facts")
    return _index_facts(kept, kb.entity_vocab, kb.relation_vocab)


def _bfs(kb: KbIndex, sources: Iterable[int], max_depth: Optional[int] = None) -> Dict[int, int]:
    dist: Dict[int, int] = {}
    queue = deque()
    for s in sorted(set(sources)):
        kb.check_entity(s)
        dist[s] = 0
        queue.append(s)
    while queue:
        u = queue.popleft()
        d = dist[u]
        if max_depth is not None and d >= max_depth:
            continue
        for v in kb.neighbors.get(u, ()):
            if v not in dist:
                dist[v] = d + 1
                queue.append(v)
    return dist


def shortest_distances(kb: KbIndex, sources: Set[int]) -> Dict[int, int]:
    """Multi-source BFS over the undirected entity graph."""
    if not sources:
        raise DataValidationError("shortest_distances needs at least one source")
    return _bfs(kb, sources)


def k_hop_ball(kb: KbIndex, sources: Set[int], k: int) -> Set[int]:
    """Entities within k hops of any source."""
    return set(_bfs(kb, sources, max_depth=k))


def entities_on_shortest_paths(
    kb: KbIndex, q_entities: Set[int], answers: Set[int]
) -> List[Tuple[int, int]]:
    """Entities on some shortest path from the question entities to a reachable answer.

    Returns (entity, t_e) pairs sorted by (t_e, entity); empty when no answer is reachable.
    """
    if not q_entities or not answers:
        raise DataValidationError("entities_on_shortest_paths needs question entities and answers")
    forward = _bfs(kb, q_entities)
    on_path: Set[int] = set()
    for a in sorted(answers):
        kb.check_entity(a)
        if a not in forward:
            continue
        target = forward[a]
        backward = _bfs(kb, {a}, max_depth=target)
        for e, d_back in backward.items():
            d_fwd = forward.get(e)
            if d_fwd is not None and d_fwd + d_back == target:
                on_path.add(e)
    return sorted(((e, forward[e]) for e in on_path), key=lambda pair: (pair[1], pair[0]))
