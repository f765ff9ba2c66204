#!/usr/bin/env python3
"""
Corpus index tests
"""

import math
import unittest

import numpy as np

from src.corpus_index import (
    Document,
    Lexicon,
    Mention,
    build_corpus,
    idf_score,
    link_entities,
    pull_docs,
    pull_entities,
    search,
)
from src.errors import DataValidationError, UnknownKeyError
from src.text import tokenize
from tests.fixtures import tiny_stores


class TestEntityLinking(unittest.TestCase):
    def test_longest_match_wins(self):
        lexicon = Lexicon.from_pairs([("Ann", 0), ("Ann Lee", 1)])
        mentions = link_entities(["ann", "lee", "met", "ann"], lexicon)
        self.assertEqual(mentions, [Mention(0, 2, 1), Mention(3, 4, 0)])

    def test_conflicting_surface_keeps_first(self):
        lexicon = Lexicon.from_pairs([("Noir", 3), ("noir", 7)])
        self.assertEqual(lexicon.lookup(["noir"]), 3)
        self.assertEqual(len(lexicon), 1)

    def test_bad_mention_span(self):
        with self.assertRaises(DataValidationError):
            Document(0, ("a", "b"), (Mention(1, 3, 0),))


class TestCorpusIndex(unittest.TestCase):
    """Indexing and IDF ranking over the tiny corpus"""

    def setUp(self):
        self.corpus = tiny_stores().corpus

    def test_documents_are_linked(self):
        self.assertEqual(self.corpus.size, 3)
        self.assertEqual(pull_entities(self.corpus, 0), {0, 1})
        self.assertEqual(pull_entities(self.corpus, 1), {2, 3})
        self.assertEqual(self.corpus.by_entity[3], (1, 2))

    def test_empty_sentences_are_dropped(self):
        corpus = build_corpus(["", "Noir", "!!"], Lexicon.from_pairs([("Noir", 0)]))
        self.assertEqual(corpus.size, 1)
        self.assertEqual(corpus.docs[0].doc_id, 0)

    def test_idf(self):
        self.assertAlmostEqual(self.corpus.idf("noir"), math.log(4 / 3) + 1.0)
        self.assertAlmostEqual(self.corpus.idf("unseen"), math.log(4 / 1) + 1.0)
        expected = self.corpus.idf("beta") + self.corpus.idf("noir")
        self.assertAlmostEqual(idf_score(self.corpus, 1, ["beta", "noir", "noir", "zzz"]), expected)

    def test_pull_docs_ranking_and_ties(self):
        self.assertEqual(pull_docs(self.corpus, 3, tokenize("beta noir"), 1), [1])
        self.assertEqual(pull_docs(self.corpus, 3, tokenize("gamma"), 1), [2])
        self.assertEqual(pull_docs(self.corpus, 3, ["noir"], 2), [1, 2])
        self.assertEqual(pull_docs(self.corpus, 3, ["noir"], 0), [])
        self.assertEqual(pull_docs(self.corpus, 42, ["noir"], 3), [])

    def test_pull_docs_negative_entity(self):
        with self.assertRaises(UnknownKeyError):
            pull_docs(self.corpus, -1, ["noir"], 1)

    def test_search(self):
        self.assertEqual(search(self.corpus, ["gamma"], 5), [2])
        self.assertEqual(search(self.corpus, ["zzz"], 5), [])
        self.assertEqual(search(self.corpus, ["film"], 2), [0, 1])
        self.assertEqual(search(self.corpus, ["film"], 0), [])

    def test_unknown_doc(self):
        with self.assertRaises(UnknownKeyError):
            pull_entities(self.corpus, 3)


def random_corpus(seed: int, num_docs: int = 60, num_words: int = 15, num_entities: int = 8):
    rng = np.random.default_rng(seed)
    lexicon = Lexicon.from_pairs((f"ent{j}", j) for j in range(num_entities))
    pool = [f"w{i}" for i in range(num_words)] + [f"ent{j}" for j in range(num_entities)]
    sentences = [
        " ".join(rng.choice(pool, size=int(rng.integers(3, 9)))) for _ in range(num_docs)
    ]
    return build_corpus(sentences, lexicon), pool, rng


class TestRandomCorpora(unittest.TestCase):
    """Index statistics and rankings against brute force over random corpora"""

    SEEDS = range(10)

    def test_document_frequencies(self):
        for seed in self.SEEDS:
            corpus, pool, _ = random_corpus(seed)
            with self.subTest(seed=seed):
                for word in pool:
                    df = sum(word in doc.tokens for doc in corpus.docs)
                    self.assertEqual(corpus.df.get(word, 0), df)
                    expected = math.log((corpus.size + 1) / (df + 1)) + 1.0
                    self.assertAlmostEqual(corpus.idf(word), expected)

    def test_idf_score_matches_naive_sum(self):
        for seed in self.SEEDS:
            corpus, pool, rng = random_corpus(seed)
            question = [str(w) for w in rng.choice(pool + ["unseen"], size=6)]
            with self.subTest(seed=seed):
                for doc in corpus.docs:
                    shared = set(question) & set(doc.tokens)
                    naive = math.fsum(corpus.idf(w) for w in shared)
                    self.assertAlmostEqual(idf_score(corpus, doc.doc_id, question), naive)

    def test_pull_docs_matches_full_sort(self):
        for seed in self.SEEDS:
            corpus, pool, rng = random_corpus(seed)
            question = [str(w) for w in rng.choice(pool, size=5)]
            scores = {d.doc_id: idf_score(corpus, d.doc_id, question) for d in corpus.docs}
            with self.subTest(seed=seed):
                for e in range(8):
                    linked = [d.doc_id for d in corpus.docs if e in {m.entity for m in d.mentions}]
                    expected = sorted(linked, key=lambda d: (-scores[d], d))
                    for budget in (1, 3, len(linked) + 2):
                        self.assertEqual(
                            pull_docs(corpus, e, question, budget), expected[:budget]
                        )

    def test_search_matches_full_sort(self):
        for seed in self.SEEDS:
            corpus, pool, rng = random_corpus(seed)
            question = [str(w) for w in rng.choice(pool, size=4)]
            scores = {d.doc_id: idf_score(corpus, d.doc_id, question) for d in corpus.docs}
            matched = [d for d, s in scores.items() if s > 0]
            expected = sorted(matched, key=lambda d: (-scores[d], d))
            with self.subTest(seed=seed):
                self.assertEqual(search(corpus, question, 10), expected[:10])


if __name__ == "__main__":
    unittest.main()
