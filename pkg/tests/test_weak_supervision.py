#!/usr/bin/env python3
"""
Weak supervision tests over the path KB 0-1-2-3-4
"""

import unittest

from src.errors import DataValidationError
from src.question_graph import Question, init_graph, update
from src.weak_supervision import (
    answer_targets,
    build_labels,
    forced_entities,
    pull_targets,
    relation_targets,
)
from tests.fixtures import tiny_stores


def question(q_entities, answers):
    return Question(
        qid=1, tokens=("q",), q_entities=frozenset(q_entities), answers=frozenset(answers)
    )


class TestLabels(unittest.TestCase):
    def setUp(self):
        self.stores = tiny_stores(extra_entities=["Lonely"])
        self.kb = self.stores.kb
        self.labels = build_labels(self.kb, question({0}, {3}))

    def test_candidates_and_rings(self):
        self.assertFalse(self.labels.skip)
        self.assertEqual(self.labels.candidates, {0: 0, 1: 1, 2: 2, 3: 3})
        self.assertEqual(self.labels.max_distance, 3)
        self.assertEqual(self.labels.ring(2), {2})
        self.assertEqual(forced_entities(self.labels, 1), [1])
        self.assertEqual(forced_entities(self.labels, 4), [])

    def test_unreachable_answer_is_skipped(self):
        lonely = self.kb.entity_vocab.id_of("Lonely")
        self.assertTrue(build_labels(self.kb, question({0}, {lonely})).skip)

    def test_missing_answers(self):
        with self.assertRaises(DataValidationError):
            build_labels(self.kb, question({0}, set()))

    def test_pull_targets(self):
        g = init_graph(["q"], {0})
        self.assertEqual(pull_targets(self.labels, g, self.kb, 1), {0: 1})
        self.assertEqual(pull_targets(self.labels, g, self.kb, 2), {0: 0})
        update(g, {1}, {0}, (), 1, self.stores)
        g.entity_nodes[0].pulled = True
        self.assertEqual(pull_targets(self.labels, g, self.kb, 2), {1: 1})

    def test_relation_targets(self):
        facts = self.kb.facts
        self.assertEqual(relation_targets(self.labels, facts[:2], 1), {0: 1, 1: 0})
        # fact 1 is stored as (Beta Film, directed_by, Ann Lee): object -> subject direction
        self.assertEqual(relation_targets(self.labels, facts, 2), {0: 0, 1: 1, 2: 0, 3: 0})
        self.assertEqual(relation_targets(self.labels, facts, 3)[2], 1)

    def test_answer_targets(self):
        g = init_graph(["q"], {0})
        update(g, {2, 3}, (), (), 1, self.stores)
        self.assertEqual(answer_targets(self.labels, g), {0: 0, 2: 0, 3: 1})


if __name__ == "__main__":
    unittest.main()
