#!/usr/bin/env python3
"""
Weak supervision
Per-iteration pull, relation and answer labels derived from shortest KB paths
between question entities and answers
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Set

from src.errors import DataValidationError
from src.kb_store import Fact, KbIndex, entities_on_shortest_paths
from src.question_graph import Question, QuestionSubgraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SupervisionLabels:
    candidates: Dict[int, int]  # entity -> t_e
    answer_set: frozenset

    @property
    def skip(self) -> bool:
        """True when no answer is reachable from the question entities."""
        return not self.candidates

    @property
    def max_distance(self) -> int:
        return max(self.candidates.values(), default=0)

    def ring(self, t: int) -> Set[int]:
        return {e for e, d in self.candidates.items() if d == t}


def build_labels(kb_complete: KbIndex, question: Question) -> SupervisionLabels:
    """Candidate intermediate entities with their distance from the question entities."""
    if not question.q_entities or not question.answers:
        raise DataValidationError(
            f"question {question.qid}: labels need linked entities and gold answers"
        )
    pairs = entities_on_shortest_paths(kb_complete, set(question.q_entities), set(question.answers))
    if not pairs:
        logger.debug(f"question {question.qid}: no answer reachable in the complete KB")
    return SupervisionLabels(candidates=dict(pairs), answer_set=frozenset(question.answers))


def pull_targets(
    labels: SupervisionLabels, g: QuestionSubgraph, kb_complete: KbIndex, t: int
) -> Dict[int, int]:
    """1 for unpulled entities adjacent (complete KB) to a ring-t candidate, else 0."""
    ring = labels.ring(t)
    targets = {}
    for e in g.unpulled():
        neighbors = kb_complete.neighbors.get(e, ())
        targets[e] = int(any(v in ring for v in neighbors))
    return targets


def relation_targets(
    labels: SupervisionLabels, retrieved_facts: Iterable[Fact], t: int
) -> Dict[int, int]:
    """1 for facts joining a ring t-1 candidate to a ring t candidate, else 0."""
    previous, current = labels.ring(t - 1), labels.ring(t)
    targets = {}
    for f in retrieved_facts:
        forward = f.subject in previous and f.object in current
        backward = f.object in previous and f.subject in current
        targets[f.fact_id] = int(forward or backward)
    return targets


def answer_targets(labels: SupervisionLabels, g_final: QuestionSubgraph) -> Dict[int, int]:
    return {e: int(e in labels.answer_set) for e in g_final.entities()}


def forced_entities(labels: SupervisionLabels, t: int) -> List[int]:
    """Candidates the graph must hold once iteration t has run."""
    return sorted(labels.ring(t))
