"""Tiny KB / corpus shared by the unit tests.

Entity ids follow first occurrence in TRIPLES, so the KB is the path
Alpha Film(0) - Ann Lee(1) - Beta Film(2) - Noir(3) - Gamma Film(4).
"""

import os
import tempfile

import pandas as pd

from config.config import ModelConfig, SynthConfig
from services.datasets import IndexBundle, build_index, link_questions, write_synth
from src.corpus_index import Lexicon, build_corpus, link_entities
from src.kb_store import build_kb
from src.neural_core import ModelParams
from src.question_graph import Question, Stores
from src.synth import SynthDataset, synth_generate
from src.text import WordVocabulary, tokenize

TRIPLES = [
    ("Alpha Film", "directed_by", "Ann Lee"),
    ("Beta Film", "directed_by", "Ann Lee"),
    ("Beta Film", "has_genre", "Noir"),
    ("Gamma Film", "has_genre", "Noir"),
]

SENTENCES = [
    "Alpha Film was directed by Ann Lee.",
    "Beta Film is a Noir film.",
    "Gamma Film is a Noir film.",
]

QUESTION_TEXT = "what is the genre of Beta Film"


def tiny_stores(triples=TRIPLES, sentences=SENTENCES, extra_entities=()) -> Stores:
    kb = build_kb(triples, extra_entities=extra_entities)
    lexicon = Lexicon.from_pairs((name, kb.entity_vocab.id_of(name)) for name in kb.entity_vocab)
    corpus = build_corpus(sentences, lexicon)
    words = WordVocabulary.from_token_lists(
        [doc.tokens for doc in corpus.docs] + [tokenize(QUESTION_TEXT)]
    )
    return Stores(kb=kb, corpus=corpus, words=words)


def make_question(stores: Stores, text: str = QUESTION_TEXT, answers=("Noir",), qid: int = 0):
    tokens = tokenize(text)
    mentions = link_entities(tokens, stores.corpus.lexicon)
    return Question(
        qid=qid,
        tokens=tuple(tokens),
        q_entities=frozenset(m.entity for m in mentions),
        answers=frozenset(stores.kb.entity_vocab.id_of(a) for a in answers),
        text=text,
    )


def make_params(stores: Stores, n: int = 4, L: int = 1, seed: int = 0, zeros: bool = False):
    build = ModelParams.zeros if zeros else ModelParams.initialize
    return build(
        ModelConfig(n=n, L=L, seed=seed),
        len(stores.words),
        stores.kb.num_relations,
        stores.kb.num_entities,
    )


SMALL_SYNTH = SynthConfig(n_entities=60, n_relations=3, n_facts=120, hops=3, n_questions=12, seed=1)


def synth_bundle(cfg: SynthConfig = SMALL_SYNTH):
    """Generate a synthetic dataset and index it through the raw-file pipeline."""
    dataset = synth_generate(cfg)
    with tempfile.TemporaryDirectory() as tmp:
        data_dir = os.path.join(tmp, "data")
        write_synth(dataset, data_dir)
        bundle = build_index(data_dir, os.path.join(tmp, "index"))
    return dataset, bundle


def synth_questions(
    dataset: SynthDataset, bundle: IndexBundle, hops: int, splits=("train", "dev", "test")
):
    rows = [row for split in splits for row in dataset.questions[hops][split]]
    questions, _ = link_questions(pd.DataFrame(rows), bundle)
    return questions
