"""Dataset and index file IO: triples TSV, JSON Lines corpus/lexicon/questions, index dirs."""

from __future__ import annotations

import glob
import json
import logging
import os
from dataclasses import dataclass, field

import pandas as pd

from src.corpus_index import CorpusIndex, Lexicon, build_corpus, link_entities
from src.errors import DataValidationError
from src.kb_store import KbIndex, build_kb, drop_facts
from src.question_graph import Question, Stores
from src.text import UNK, WordVocabulary, tokenize

LOGGER = logging.getLogger(__name__)

TRIPLES_FILE = "triples.tsv"
CORPUS_FILE = "corpus.jsonl"
LEXICON_FILE = "lexicon.jsonl"
INDEX_KB_FILE = "kb.tsv"
VOCAB_FILE = "vocab.json"
STATS_FILE = "stats.json"


def questions_file(hops: int, split: str) -> str:
    return f"questions_{hops}hop_{split}.jsonl"


# -- raw files ---------------------------------------------------------------------


def read_triples(path: str) -> tuple[list[tuple[str, str, str]], list[int]]:
    """Read `subject<TAB>relation<TAB>object` lines; blank and `#` lines are skipped."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"triples file not found: {path}")
    triples: list[tuple[str, str, str]] = []
    lines: list[int] = []
    with open(path, encoding="utf-8") as f:
        for number, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataValidationError(
                    f"{path}:{number}: expected 3 tab-separated fields, got {len(parts)}"
                )
            triples.append((parts[0], parts[1], parts[2]))
            lines.append(number)
    return triples, lines


def write_triples(path: str, triples) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for subject, relation, obj in triples:
            f.write(f"{subject}\t{relation}\t{obj}\n")


def read_jsonl(path: str, required: tuple[str, ...] = ()) -> pd.DataFrame:
    """JSON Lines -> DataFrame without type coercion; checks required columns."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"file not found: {path}")
    if os.path.getsize(path) == 0:
        return pd.DataFrame(columns=list(required))
    try:
        frame = pd.read_json(path, lines=True, dtype=False, convert_dates=False)
    except ValueError as exc:
        raise DataValidationError(f"{path}: invalid JSON Lines ({exc})") from exc
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise DataValidationError(f"{path}: missing required field(s) {missing}")
    return frame


def write_jsonl(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def write_synth(dataset, out_dir: str) -> list[str]:
    """Write a generated dataset as raw files; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, name) for name in (TRIPLES_FILE, CORPUS_FILE, LEXICON_FILE)]
    write_triples(paths[0], dataset.triples)
    write_jsonl(
        paths[1],
        [
            {"id": i, "text": text, "source_fact": source}
            for i, (text, source) in enumerate(zip(dataset.sentences, dataset.source_ids))
        ],
    )
    write_jsonl(paths[2], [{"surface": s, "entity": e} for s, e in dataset.lexicon])
    for hops, splits in dataset.questions.items():
        for split, rows in splits.items():
            path = os.path.join(out_dir, questions_file(hops, split))
            write_jsonl(path, rows)
            paths.append(path)
    write_json(os.path.join(out_dir, STATS_FILE), dataset.stats())
    LOGGER.info("Wrote synthetic dataset to %s (%d files)", out_dir, len(paths))
    return paths


# -- index -------------------------------------------------------------------------


@dataclass
class IndexBundle:
    """The complete KB, the corpus and the word vocabulary of one index directory"""

    kb: KbIndex
    corpus: CorpusIndex
    words: WordVocabulary
    stats: dict = field(default_factory=dict)

    def stores(self, drop_p: float = 0.0, seed: int = 0) -> Stores:
        """Retrieval stores over the KB with facts dropped at rate `drop_p`."""
        kb = drop_facts(self.kb, drop_p, seed) if drop_p > 0 else self.kb
        return Stores(kb=kb, corpus=self.corpus, words=self.words)


def _build_parts(triples, lines, corpus_rows: pd.DataFrame, lexicon_rows: pd.DataFrame):
    lexicon_pairs = list(zip(lexicon_rows["surface"], lexicon_rows["entity"]))
    kb = build_kb(triples, extra_entities=[e for _, e in lexicon_pairs], line_numbers=lines)
    lexicon = Lexicon.from_pairs((s, kb.entity_vocab.id_of(e)) for s, e in lexicon_pairs)
    sources = None
    if "source_fact" in corpus_rows.columns:
        sources = [None if pd.isna(v) else int(v) for v in corpus_rows["source_fact"]]
    corpus = build_corpus(list(corpus_rows["text"]), lexicon, sources)
    return kb, lexicon, corpus


def _clean(row: dict) -> dict:
    """Drop NaN cells pandas fills in for absent optional fields."""
    return {
        key: value
        for key, value in row.items()
        if not (isinstance(value, float) and pd.isna(value))
    }


def build_index(data_dir: str, index_dir: str) -> IndexBundle:
    """Validate the raw files of `data_dir` and write a normalized index directory."""
    triples, lines = read_triples(os.path.join(data_dir, TRIPLES_FILE))
    corpus_rows = read_jsonl(os.path.join(data_dir, CORPUS_FILE), ("id", "text"))
    lexicon_rows = read_jsonl(os.path.join(data_dir, LEXICON_FILE), ("surface", "entity"))
    kb, lexicon, corpus = _build_parts(triples, lines, corpus_rows, lexicon_rows)

    token_lists = [doc.tokens for doc in corpus.docs]
    token_lists += [tokenize(s) for s, _ in lexicon.entries()]
    for path in sorted(glob.glob(os.path.join(data_dir, "questions_*.jsonl"))):
        token_lists += [tokenize(t) for t in read_jsonl(path, ("id", "text"))["text"]]
    words = WordVocabulary.from_token_lists(token_lists)

    stats = {
        "entities": kb.num_entities,
        "relations": kb.num_relations,
        "facts": len(kb.facts),
        "docs": corpus.size,
        "words": len(words),
        "lexicon": len(lexicon),
    }
    os.makedirs(index_dir, exist_ok=True)
    write_triples(os.path.join(index_dir, INDEX_KB_FILE), triples)
    columns = [c for c in ("id", "text", "source_fact") if c in corpus_rows.columns]
    write_jsonl(
        os.path.join(index_dir, CORPUS_FILE),
        [_clean(row) for row in corpus_rows[columns].to_dict(orient="records")],
    )
    write_jsonl(
        os.path.join(index_dir, LEXICON_FILE),
        lexicon_rows[["surface", "entity"]].to_dict(orient="records"),
    )
    write_json(os.path.join(index_dir, VOCAB_FILE), words.items())
    write_json(os.path.join(index_dir, STATS_FILE), stats)
    LOGGER.info("Index written to %s: %s", index_dir, stats)
    return IndexBundle(kb=kb, corpus=corpus, words=words, stats=stats)


def load_index(index_dir: str) -> IndexBundle:
    """Rebuild the in-memory stores from an index directory."""
    triples, lines = read_triples(os.path.join(index_dir, INDEX_KB_FILE))
    corpus_rows = read_jsonl(os.path.join(index_dir, CORPUS_FILE), ("id", "text"))
    lexicon_rows = read_jsonl(os.path.join(index_dir, LEXICON_FILE), ("surface", "entity"))
    kb, _, corpus = _build_parts(triples, lines, corpus_rows, lexicon_rows)
    vocab_path = os.path.join(index_dir, VOCAB_FILE)
    if not os.path.exists(vocab_path):
        raise FileNotFoundError(f"vocabulary not found: {vocab_path}")
    with open(vocab_path, encoding="utf-8") as f:
        items = json.load(f)
    if not items or items[0] != UNK:
        raise DataValidationError(f"{vocab_path}: first entry must be {UNK!r}")
    stats_path = os.path.join(index_dir, STATS_FILE)
    stats = {}
    if os.path.exists(stats_path):
        with open(stats_path, encoding="utf-8") as f:
            stats = json.load(f)
    return IndexBundle(kb=kb, corpus=corpus, words=WordVocabulary.from_items(items), stats=stats)


# -- questions ---------------------------------------------------------------------


@dataclass
class LinkReport:
    loaded: int = 0
    no_entities: int = 0
    no_answers: int = 0


def link_questions(rows: pd.DataFrame, bundle: IndexBundle) -> tuple[list[Question], LinkReport]:
    """Link question text against the lexicon and map answer names to entity ids."""
    report = LinkReport()
    questions: list[Question] = []
    vocab = bundle.kb.entity_vocab
    for row in rows.to_dict(orient="records"):
        tokens = tokenize(str(row["text"]))
        q_entities = frozenset(m.entity for m in link_entities(tokens, bundle.corpus.lexicon))
        answers = frozenset(
            vocab.get(name) for name in (row.get("answers") or []) if vocab.get(name) is not None
        )
        if not q_entities:
            report.no_entities += 1
            continue
        if not answers:
            report.no_answers += 1
            continue
        questions.append(
            Question(
                qid=int(row["id"]),
                tokens=tuple(tokens),
                q_entities=q_entities,
                answers=answers,
                text=str(row["text"]),
            )
        )
    report.loaded = len(questions)
    if report.no_entities or report.no_answers:
        LOGGER.warning(
            "Skipped questions: %d without linked entities, %d without known answers",
            report.no_entities,
            report.no_answers,
        )
    return questions, report


def load_questions(path: str, bundle: IndexBundle) -> list[Question]:
    rows = read_jsonl(path, ("id", "text", "answers"))
    questions, _ = link_questions(rows, bundle)
    LOGGER.info("Loaded %d questions from %s", len(questions), path)
    return questions
