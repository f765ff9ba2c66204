#!/usr/bin/env python3
"""
Corpus index
Entity-linked single-sentence documents with an inverted index and IDF ranking
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Tuple

from src.errors import DataValidationError, UnknownKeyError
from src.text import tokenize

logger = logging.getLogger(__name__)


class Mention(NamedTuple):
    """Token span [start, end) grounded to an entity id"""

    start: int
    end: int
    entity: int


@dataclass(frozen=True)
class Document:
    doc_id: int
    tokens: Tuple[str, ...]
    mentions: Tuple[Mention, ...]
    source_id: Optional[int] = None

    def __post_init__(self):
        if not self.tokens:
            raise DataValidationError(f"document {self.doc_id} has no tokens")
        previous_end = 0
        for m in self.mentions:
            if not (0 <= m.start < m.end <= len(self.tokens)) or m.start < previous_end:
                raise DataValidationError(f"document {self.doc_id}: bad mention {m}")
            previous_end = m.end


class Lexicon:
    """Surface form -> entity table, keyed by the tokenized surface"""

    def __init__(self):
        self._spans: Dict[Tuple[str, ...], int] = {}
        self.max_span = 0

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, int]]) -> "Lexicon":
        lexicon = cls()
        for surface, entity in pairs:
            lexicon.add(surface, entity)
        return lexicon

    def add(self, surface: str, entity: int) -> None:
        key = tuple(tokenize(surface))
        if not key:
            logger.warning(f"Lexicon surface {surface!r} has no tokens; ignored")
            return
        existing = self._spans.get(key)
        if existing is not None and existing != entity:
            logger.warning(
                f"Surface {surface!r} already maps to entity {existing}; keeping the first entry"
            )
            return
        self._spans[key] = entity
        self.max_span = max(self.max_span, len(key))

    def lookup(self, span: Sequence[str]) -> Optional[int]:
        return self._spans.get(tuple(span))

    def __len__(self) -> int:
        return len(self._spans)

    def entries(self) -> List[Tuple[str, int]]:
        return [(" ".join(span), entity) for span, entity in self._spans.items()]


@dataclass(frozen=True)
class CorpusIndex:
    docs: Tuple[Document, ...]
    postings: Mapping[str, Tuple[int, ...]]
    df: Mapping[str, int]
    by_entity: Mapping[int, Tuple[int, ...]]
    lexicon: Lexicon
    doc_terms: Tuple[frozenset, ...]

    @property
    def size(self) -> int:
        return len(self.docs)

    def doc(self, doc_id: int) -> Document:
        if not 0 <= doc_id < len(self.docs):
            raise UnknownKeyError(f"doc id {doc_id} outside corpus of size {len(self.docs)}")
        return self.docs[doc_id]

    def idf(self, word: str) -> float:
        return math.log((len(self.docs) + 1) / (self.df.get(word, 0) + 1)) + 1.0


def link_entities(tokens: Sequence[str], lexicon: Lexicon) -> List[Mention]:
    """Greedy left-to-right longest match against the lexicon."""
    mentions: List[Mention] = []
    i = 0
    n = len(tokens)
    while i < n:
        match = None
        for length in range(min(lexicon.max_span, n - i), 0, -1):
            entity = lexicon.lookup(tokens[i : i + length])
            if entity is not None:
                match = Mention(i, i + length, entity)
                break
        if match is None:
            i += 1
        else:
            mentions.append(match)
            i = match.end
    return mentions


def build_corpus(
    sentences: Sequence[str], lexicon: Lexicon, source_ids: Optional[Sequence[int]] = None
) -> CorpusIndex:
    """Tokenize, link and index sentences; empty sentences are dropped."""
    docs: List[Document] = []
    postings: Dict[str, List[int]] = {}
    by_entity: Dict[int, List[int]] = {}
    dropped = 0

    for i, sentence in enumerate(sentences):
        tokens = tokenize(sentence)
        if not tokens:
            dropped += 1
            continue
        doc_id = len(docs)
        mentions = link_entities(tokens, lexicon)
        source_id = source_ids[i] if source_ids is not None else None
        docs.append(Document(doc_id, tuple(tokens), tuple(mentions), source_id))
        for word in dict.fromkeys(tokens):
            postings.setdefault(word, []).append(doc_id)
        for entity in dict.fromkeys(m.entity for m in mentions):
            by_entity.setdefault(entity, []).append(doc_id)

    if dropped:
        logger.warning(f"Dropped {dropped} sentence(s) with no tokens")
    logger.info(f"Corpus built: {len(docs)} documents, {len(postings)} distinct words")
    return CorpusIndex(
        docs=tuple(docs),
        postings={w: tuple(ids) for w, ids in postings.items()},
        df={w: len(ids) for w, ids in postings.items()},
        by_entity={e: tuple(ids) for e, ids in by_entity.items()},
        lexicon=lexicon,
        doc_terms=tuple(frozenset(d.tokens) for d in docs),
    )


def idf_score(index: CorpusIndex, doc_id: int, question_tokens: Sequence[str]) -> float:
    """Sum of idf over distinct question tokens that occur in the document."""
    terms = index.doc_terms[index.doc(doc_id).doc_id]
    return sum(index.idf(w) for w in sorted(set(question_tokens)) if w in terms)


def _top_by_score(scored: Iterable[Tuple[int, float]], budget: int) -> List[int]:
    ranked = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    return [doc_id for doc_id, _ in ranked[:budget]]


def pull_docs(
    index: CorpusIndex, e: int, question_tokens: Sequence[str], N_d: int
) -> List[int]:
    """Top-N_d documents linked to `e`, ranked by IDF similarity to the question."""
    if e < 0:
        raise UnknownKeyError(f"entity id {e} is negative")
    if N_d <= 0:
        return []
    candidates = index.by_entity.get(e, ())
    return _top_by_score(((d, idf_score(index, d, question_tokens)) for d in candidates), N_d)


def search(index: CorpusIndex, question_tokens: Sequence[str], budget: int) -> List[int]:
    """Single-shot IDF retrieval over the whole corpus; zero-score documents are skipped."""
    if budget <= 0:
        return []
    scores: Dict[int, float] = {}
    for word in sorted(set(question_tokens)):
        postings = index.postings.get(word)
        if not postings:
            continue
        weight = index.idf(word)
        for doc_id in postings:
            scores[doc_id] = scores.get(doc_id, 0.0) + weight
    return _top_by_score(scores.items(), budget)


def pull_entities(index: CorpusIndex, doc_id: int) -> Set[int]:
    """Entities mentioned in a document (linking is done at index time)."""
    return {m.entity for m in index.doc(doc_id).mentions}
