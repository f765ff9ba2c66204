#!/usr/bin/env python3
"""
Retrieval engine tests
"""

import unittest

from config.config import EngineConfig
from src.errors import GraphError
from src.engine import (
    expand_for_training,
    expand_once,
    pull_facts,
    question_encoding,
    rank,
    run_inference,
    select_above_threshold,
    select_top_k,
)
from src.corpus_index import build_corpus
from src.kb_store import drop_facts, entities_on_shortest_paths
from src.question_graph import Stores, init_graph
from src.weak_supervision import build_labels, forced_entities, pull_targets
from tests.fixtures import (
    make_params,
    make_question,
    synth_bundle,
    synth_questions,
    tiny_stores,
)


class TestSelection(unittest.TestCase):
    def test_rank_breaks_ties_by_entity_id(self):
        self.assertEqual(rank({4: 0.5, 1: 0.5, 2: 0.9}), [(2, 0.9), (1, 0.5), (4, 0.5)])

    def test_select_top_k(self):
        probs = {0: 0.1, 1: 0.7, 2: 0.7, 3: 0.9}
        self.assertEqual(select_top_k(probs, [0, 1, 2, 3], 2), [1, 3])
        self.assertEqual(select_top_k(probs, [0, 2], 5), [0, 2])

    def test_threshold_is_strict(self):
        probs = {0: 0.5, 1: 0.51, 2: 0.2}
        self.assertEqual(select_above_threshold(probs, [0, 1, 2], 0.5), [1])
        self.assertEqual(select_above_threshold(probs, [0, 1, 2], 0.0), [0, 1, 2])
        self.assertEqual(select_above_threshold(probs, [0, 1, 2], 1.0), [])


class TestInference(unittest.TestCase):
    """Pull/classify iterations over the path KB, seeded at Beta Film (2)"""

    def setUp(self):
        self.stores = tiny_stores()
        self.question = make_question(self.stores)
        self.zero = make_params(self.stores, zeros=True)
        self.params = make_params(self.stores, seed=11)

    def test_pull_facts_ties_by_fact_id(self):
        h_q = question_encoding(self.zero, self.stores, self.question.tokens)
        facts = pull_facts(self.stores.kb, self.zero, 1, h_q, 1)
        self.assertEqual([f.fact_id for f in facts], [0])
        self.assertEqual(pull_facts(self.stores.kb, self.zero, 1, h_q, 0), [])

    def test_kb_only_expansion(self):
        result = run_inference(self.question, self.zero, self.stores, EngineConfig(T=2, k=2))
        first, second = result.trace
        self.assertEqual((first.expanded, first.new_entities, first.new_facts), ([2], 2, 2))
        self.assertEqual((second.expanded, second.new_entities, second.new_facts), ([1, 3], 2, 2))
        self.assertEqual(result.subgraph.sizes(), {"entities": 5, "facts": 4, "docs": 0})
        self.assertTrue(second.answer_in_graph)
        # all answer probabilities tie at 0.5
        self.assertEqual(result.top, 0)

    def test_text_only_expansion(self):
        cfg = EngineConfig(T=2, k=2, mode="text_only")
        result = run_inference(self.question, self.zero, self.stores, cfg)
        self.assertEqual(result.subgraph.sizes(), {"entities": 3, "facts": 0, "docs": 2})
        self.assertEqual(result.trace[0].new_docs, 1)
        self.assertEqual(result.trace[1].expanded, [3])

    def test_hybrid_expansion(self):
        cfg = EngineConfig(T=1, k=1, mode="hybrid")
        result = run_inference(self.question, self.zero, self.stores, cfg)
        self.assertEqual(result.subgraph.sizes(), {"entities": 3, "facts": 2, "docs": 1})

    def test_iterations_continue_when_nothing_is_eligible(self):
        cfg = EngineConfig(T=3, k=2, N_f=0)
        result = run_inference(self.question, self.params, self.stores, cfg)
        self.assertEqual(len(result.trace), 3)
        self.assertEqual(result.trace[0].expanded, [2])
        self.assertEqual([r.expanded for r in result.trace[1:]], [[], []])
        self.assertEqual(result.subgraph.sizes(), {"entities": 1, "facts": 0, "docs": 0})

    def test_deterministic(self):
        cfg = EngineConfig(T=2, k=1, mode="hybrid")
        a = run_inference(self.question, self.params, self.stores, cfg)
        b = run_inference(self.question, self.params, self.stores, cfg)
        self.assertEqual(a.ranked, b.ranked)
        self.assertEqual(a.subgraph.to_json(), b.subgraph.to_json())

    def test_budgets_bound_each_iteration(self):
        cfg = EngineConfig(T=3, k=1, N_f=1, N_d=1, mode="hybrid")
        result = run_inference(self.question, self.params, self.stores, cfg)
        for record in result.trace:
            self.assertLessEqual(len(record.expanded), cfg.k)
            self.assertLessEqual(record.new_facts, cfg.k * cfg.N_f)
            self.assertLessEqual(record.new_docs, cfg.k * cfg.N_d)

    def test_ranked_covers_every_entity(self):
        result = run_inference(self.question, self.params, self.stores, EngineConfig(T=2))
        self.assertEqual(sorted(e for e, _ in result.ranked), result.subgraph.entities())
        probs = [p for _, p in result.ranked]
        self.assertEqual(probs, sorted(probs, reverse=True))


class TestExpansion(unittest.TestCase):
    def setUp(self):
        self.stores = tiny_stores()
        self.question = make_question(self.stores)
        self.zero = make_params(self.stores, zeros=True)

    def test_pulled_entities_cannot_be_expanded_again(self):
        g = init_graph(self.question.tokens, self.question.q_entities)
        expand_once(g, self.zero, self.stores, EngineConfig(), [2])
        with self.assertRaises(GraphError):
            expand_once(g, self.zero, self.stores, EngineConfig(), [2])
        with self.assertRaises(GraphError):
            expand_once(g, self.zero, self.stores, EngineConfig(), [0])

    def test_threshold_one_only_injects_forced_entities(self):
        g = init_graph(self.question.tokens, self.question.q_entities)
        expand_for_training(g, self.zero, self.stores, EngineConfig(epsilon=1.0), [1], iteration=1)
        self.assertEqual(g.entities(), [1, 2])
        self.assertEqual(g.unpulled(), [1, 2])
        self.assertEqual(g.fact_nodes, set())

    def test_threshold_zero_expands_everything(self):
        g = init_graph(self.question.tokens, self.question.q_entities)
        expand_for_training(g, self.zero, self.stores, EngineConfig(epsilon=0.0), [], iteration=1)
        self.assertEqual(g.unpulled(), [1, 3])
        self.assertEqual(g.fact_nodes, {1, 2})
        self.assertEqual(g.iteration, 1)


class TestModeDegeneracy(unittest.TestCase):
    """Hybrid retrieval with one source emptied behaves like the other single-source mode"""

    @classmethod
    def setUpClass(cls):
        dataset, bundle = synth_bundle()
        cls.full = bundle.stores()
        cls.no_corpus = Stores(
            kb=cls.full.kb,
            corpus=build_corpus([], cls.full.corpus.lexicon),
            words=cls.full.words,
        )
        cls.no_kb = Stores(
            kb=drop_facts(cls.full.kb, 1.0, seed=0), corpus=cls.full.corpus, words=cls.full.words
        )
        cls.questions = [
            q for hops in (1, 2, 3) for q in synth_questions(dataset, bundle, hops)[:4]
        ]
        cls.params = make_params(cls.full, seed=5)

    def assert_same_run(self, a, b):
        self.assertEqual(a.ranked, b.ranked)
        self.assertEqual(a.subgraph.to_json(), b.subgraph.to_json())
        self.assertEqual([r.to_dict() for r in a.trace], [r.to_dict() for r in b.trace])

    def run_mode(self, question, stores, mode):
        return run_inference(question, self.params, stores, EngineConfig(T=3, k=2, mode=mode))

    def test_both_sources_contribute(self):
        self.assertGreater(len(self.questions), 0)
        self.assertEqual(len(self.no_kb.kb.facts), 0)
        sizes = [self.run_mode(q, self.full, "hybrid").subgraph.sizes() for q in self.questions]
        self.assertTrue(any(s["facts"] for s in sizes))
        self.assertTrue(any(s["docs"] for s in sizes))

    def test_hybrid_without_corpus_equals_kb_only(self):
        for q in self.questions:
            with self.subTest(qid=q.qid):
                self.assert_same_run(
                    self.run_mode(q, self.no_corpus, "hybrid"),
                    self.run_mode(q, self.full, "kb_only"),
                )

    def test_hybrid_without_kb_equals_text_only(self):
        for q in self.questions:
            with self.subTest(qid=q.qid):
                self.assert_same_run(
                    self.run_mode(q, self.no_kb, "hybrid"),
                    self.run_mode(q, self.full, "text_only"),
                )


class TestTeacherForcedReachability(unittest.TestCase):
    """Shortest-path labels drive the graph to every reachable answer on the complete KB"""

    @classmethod
    def setUpClass(cls):
        dataset, bundle = synth_bundle()
        cls.stores = bundle.stores()
        cls.kb = cls.stores.kb
        cls.params = make_params(cls.stores, seed=3)
        cls.labelled = {}
        for hops in (1, 2, 3):
            pairs = [(q, build_labels(cls.kb, q)) for q in synth_questions(dataset, bundle, hops)]
            cls.labelled[hops] = [(q, labels) for q, labels in pairs if not labels.skip]

    def reachable_answers(self, labels):
        return set(labels.answer_set) & set(labels.candidates)

    def test_positive_pulls_reach_every_answer(self):
        cfg = EngineConfig(N_f=len(self.kb.facts), mode="kb_only")
        for hops, pairs in self.labelled.items():
            self.assertGreater(len(pairs), 0)
            for q, labels in pairs:
                with self.subTest(hops=hops, qid=q.qid):
                    g = init_graph(q.tokens, q.q_entities)
                    for t in range(1, labels.max_distance + 1):
                        targets = pull_targets(labels, g, self.kb, t)
                        positives = [e for e, y in targets.items() if y]
                        expand_once(g, self.params, self.stores, cfg, positives, iteration=t)
                        self.assertLessEqual(labels.ring(t), set(g.entities()))
                    answers = self.reachable_answers(labels)
                    self.assertTrue(answers)
                    self.assertLessEqual(answers, set(g.entities()))

    def test_injected_entities_lie_on_shortest_paths(self):
        cfg = EngineConfig(epsilon=1.0, mode="kb_only")
        for q, labels in self.labelled[3]:
            with self.subTest(qid=q.qid):
                on_paths = entities_on_shortest_paths(self.kb, set(q.q_entities), set(q.answers))
                g = init_graph(q.tokens, q.q_entities)
                for t in range(1, labels.max_distance + 1):
                    before = set(g.entities())
                    expand_for_training(
                        g, self.params, self.stores, cfg, forced_entities(labels, t), iteration=t
                    )
                    injected = set(g.entities()) - before
                    self.assertEqual(injected, labels.ring(t))
                    self.assertLessEqual(injected, {e for e, d in on_paths if d <= t})
                self.assertLessEqual(self.reachable_answers(labels), set(g.entities()))

    def test_threshold_expansion_keeps_every_ring(self):
        cfg = EngineConfig(epsilon=0.5, mode="kb_only")
        for q, labels in self.labelled[3]:
            with self.subTest(qid=q.qid):
                g = init_graph(q.tokens, q.q_entities)
                for t in range(1, labels.max_distance + 1):
                    expand_for_training(
                        g, self.params, self.stores, cfg, forced_entities(labels, t), iteration=t
                    )
                    reached = {e for e, d in labels.candidates.items() if d <= t}
                    self.assertLessEqual(reached, set(g.entities()))
                self.assertLessEqual(self.reachable_answers(labels), set(g.entities()))


if __name__ == "__main__":
    unittest.main()
