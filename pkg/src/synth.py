#!/usr/bin/env python3
"""
Synthetic movie-KB generator
Random movie/person/genre knowledge base, sentence restatements of its facts and
compositional 1-3 hop questions with verified gold answers
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Set, Tuple

import numpy as np

from config.config import SynthConfig
from src.errors import ConfigError, DataValidationError
from src.text import tokenize

logger = logging.getLogger(__name__)

MAX_ANSWERS = 50
SPLITS = (("train", 0.8), ("dev", 0.1), ("test", 0.1))

# relation, object pool, sentence template, forward phrase, inverse phrase
RELATIONS = (
    (
        "directed_by",
        "person",
        "{s} was directed by {o}.",
        "the director of",
        "the films directed by",
    ),
    ("written_by", "person", "{s} was written by {o}.", "the writer of", "the films written by"),
    ("starred_actors", "person", "{o} starred in {s}.", "the actors in", "the films starring"),
    ("has_genre", "genre", "{s} is a {o} film.", "the genre of", "the films with genre"),
    (
        "release_year",
        "year",
        "{s} was released in {o}.",
        "the release year of",
        "the films released in",
    ),
    ("in_language", "language", "{s} is in {o}.", "the language of", "the films in language"),
)

_SYLLABLES = (
    "ka ro mi tan vel sor in da lu mek zar po fen ri cal bo nu sha ter gil "
    "ova ren lo mar tis qua hel dru ya wen pra sto lin gor fe"
).split()
_RESERVED = {
    word
    for row in RELATIONS
    for text in row[2:]
    for word in tokenize(text.format(s="", o=""))
} | {"what", "is", "who", "which"}


@dataclass
class SynthDataset:
    triples: List[Tuple[str, str, str]]
    sentences: List[str]
    source_ids: List[int]
    lexicon: List[Tuple[str, str]]
    questions: Dict[int, Dict[str, List[dict]]] = field(default_factory=dict)

    def stats(self) -> dict:
        return {
            "facts": len(self.triples),
            "sentences": len(self.sentences),
            "entities": len(self.lexicon),
            "questions": {
                hop: {split: len(rows) for split, rows in splits.items()}
                for hop, splits in self.questions.items()
            },
        }


class _NameMaker:
    """Unique syllable names; uniqueness is checked on the tokenized form"""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.used: Set[Tuple[str, ...]] = set()

    def word(self) -> str:
        count = int(self.rng.integers(2, 4))
        return "".join(self.rng.choice(_SYLLABLES, size=count)).capitalize()

    def make(self, words: int) -> str:
        while True:
            name = " ".join(self.word() for _ in range(words))
            key = tuple(tokenize(name))
            if key not in self.used and not set(key) & _RESERVED:
                self.used.add(key)
                return name


def _pool_sizes(cfg: SynthConfig, pools: Set[str]) -> Dict[str, int]:
    remaining = cfg.n_entities
    sizes = {}
    for pool, cap in (("genre", 20), ("year", 50), ("language", 12)):
        if pool in pools:
            sizes[pool] = max(1, min(cap, remaining // 10))
            remaining -= sizes[pool]
    sizes["movie"] = max(1, int(remaining * 0.4)) if "person" in pools else max(1, remaining // 2)
    sizes["person"] = remaining - sizes["movie"] if "person" in pools else 0
    if remaining < 2 or ("person" in pools and sizes["person"] < 1):
        raise ConfigError(f"n_entities={cfg.n_entities} is too small for the chosen relations")
    return sizes


def _make_entities(cfg: SynthConfig, rng, pools: Set[str]) -> Dict[str, List[str]]:
    names = _NameMaker(rng)
    sizes = _pool_sizes(cfg, pools)
    entities: Dict[str, List[str]] = {}
    entities["movie"] = [names.make(2) for _ in range(sizes["movie"])]
    if sizes.get("person"):
        entities["person"] = [names.make(2) for _ in range(sizes["person"])]
    if "genre" in sizes:
        entities["genre"] = [names.make(1) for _ in range(sizes["genre"])]
    if "year" in sizes:
        years = [str(1950 + i) for i in range(sizes["year"])]
        names.used |= {(y,) for y in years}
        entities["year"] = years
    if "language" in sizes:
        entities["language"] = [names.make(1) for _ in range(sizes["language"])]
    return entities


def _sample_facts(cfg: SynthConfig, rng, entities, relations) -> List[Tuple[int, int, int]]:
    """(movie index, relation index, object index) triples without repeats"""
    movies = len(entities["movie"])
    targets = [len(entities[rel[1]]) for rel in relations]
    per_movie = sum(targets)
    capacity = movies * per_movie
    if cfg.n_facts > capacity:
        raise ConfigError(
            f"n_facts={cfg.n_facts} exceeds the {capacity} distinct (movie, relation, object) pairs"
        )
    offsets = np.cumsum([0] + targets)

    def decode(flat: int) -> Tuple[int, int, int]:
        movie, rest = divmod(int(flat), per_movie)
        r = int(np.searchsorted(offsets, rest, side="right") - 1)
        return movie, r, rest - int(offsets[r])

    if cfg.n_facts * 2 > capacity:
        picks = rng.choice(capacity, size=cfg.n_facts, replace=False)
        return [decode(flat) for flat in picks]
    chosen: Set[int] = set()
    ordered: List[int] = []
    while len(ordered) < cfg.n_facts:
        flat = int(rng.integers(capacity))
        if flat not in chosen:
            chosen.add(flat)
            ordered.append(flat)
    return [decode(flat) for flat in ordered]


def _traverse(adjacency, start: str, path: Sequence[Tuple[str, bool]]) -> Set[str]:
    frontier = {start}
    for relation, forward in path:
        frontier = {o for e in frontier for o in adjacency.get((e, relation, forward), ())}
    return frontier - {start}


def _scan_traverse(triples, start: str, path: Sequence[Tuple[str, bool]]) -> Set[str]:
    """Independent answer check: linear scans over the triple list."""
    frontier = {start}
    for relation, forward in path:
        nxt = set()
        for s, r, o in triples:
            if r != relation:
                continue
            if forward and s in frontier:
                nxt.add(o)
            elif not forward and o in frontier:
                nxt.add(s)
        frontier = nxt
    return frontier - {start}


def _question_text(topic: str, path: Sequence[Tuple[str, bool]], phrases) -> str:
    parts = [phrases[rel][0 if forward else 1] for rel, forward in reversed(path)]
    return f"what is {' '.join(parts)} {topic}"


def _make_questions(cfg, rng, entities, relations, triples) -> Dict[int, Dict[str, List[dict]]]:
    adjacency: Dict[Tuple[str, str, bool], List[str]] = {}
    for s, r, o in triples:
        adjacency.setdefault((s, r, True), []).append(o)
        adjacency.setdefault((o, r, False), []).append(s)
    phrases = {rel[0]: (rel[3], rel[4]) for rel in relations}
    non_movie = [(rel[0], rel[1]) for rel in relations]

    questions: Dict[int, Dict[str, List[dict]]] = {}
    next_id = 0
    for hops in range(1, cfg.hops + 1):
        rows: List[dict] = []
        seen = set()
        attempts = 0
        while len(rows) < cfg.n_questions and attempts < cfg.n_questions * 50:
            attempts += 1
            # odd hop counts start at a movie, even ones at a non-movie entity
            if hops % 2:
                topic = str(rng.choice(entities["movie"]))
            else:
                rel, pool = non_movie[int(rng.integers(len(non_movie)))]
                topic = str(rng.choice(entities[pool]))
            on_movie = hops % 2 == 1
            path = []
            for step in range(hops):
                if step == 0 and not on_movie:
                    path.append((rel, False))
                else:
                    path.append((relations[int(rng.integers(len(relations)))][0], on_movie))
                on_movie = not on_movie
            key = (topic, tuple(path))
            if key in seen:
                continue
            seen.add(key)
            answers = _traverse(adjacency, topic, path)
            if not answers or len(answers) > MAX_ANSWERS:
                continue
            rows.append(
                {
                    "id": next_id,
                    "text": _question_text(topic, path, phrases),
                    "answers": sorted(answers),
                    "topic": topic,
                    "path": [[r, f] for r, f in path],
                }
            )
            next_id += 1
        if len(rows) < cfg.n_questions:
            logger.warning(f"{hops}-hop: generated {len(rows)}/{cfg.n_questions} questions")
        questions[hops] = _split(rows)
    return questions


def _split(rows: List[dict]) -> Dict[str, List[dict]]:
    out = {}
    start = 0
    for i, (name, share) in enumerate(SPLITS):
        end = len(rows) if i == len(SPLITS) - 1 else start + int(round(share * len(rows)))
        out[name] = rows[start:end]
        start = end
    return out


def self_check(dataset: SynthDataset) -> int:
    """Re-derive every gold answer set by scanning the triples; returns the number checked."""
    checked = 0
    for hops, splits in dataset.questions.items():
        for rows in splits.values():
            for row in rows:
                path = [(r, bool(f)) for r, f in row["path"]]
                expected = _scan_traverse(dataset.triples, row["topic"], path)
                if expected != set(row["answers"]):
                    raise DataValidationError(
                        f"question {row['id']} ({hops}-hop): gold answers disagree with traversal"
                    )
                checked += 1
    return checked


def synth_generate(cfg: SynthConfig) -> SynthDataset:
    """Generate a KB, its sentence corpus, the lexicon and questions for hops 1..cfg.hops."""
    cfg.validate()
    if cfg.n_relations > len(RELATIONS):
        raise ConfigError(f"n_relations must be <= {len(RELATIONS)}, got {cfg.n_relations}")
    rng = np.random.default_rng(cfg.seed)
    relations = RELATIONS[: cfg.n_relations]
    entities = _make_entities(cfg, rng, {rel[1] for rel in relations})

    triples = []
    for movie, r, obj in _sample_facts(cfg, rng, entities, relations):
        name, pool = relations[r][0], relations[r][1]
        triples.append((entities["movie"][movie], name, entities[pool][obj]))

    templates = {rel[0]: rel[2] for rel in relations}
    sentences, source_ids = [], []
    restate = rng.random(len(triples)) < cfg.corpus_coverage
    for fact_id, ((s, r, o), keep) in enumerate(zip(triples, restate)):
        if keep:
            sentences.append(templates[r].format(s=s, o=o))
            source_ids.append(fact_id)

    lexicon = [(name, name) for pool in entities.values() for name in pool]
    dataset = SynthDataset(triples, sentences, source_ids, lexicon)
    dataset.questions = _make_questions(cfg, rng, entities, relations, triples)
    checked = self_check(dataset)
    logger.info(
        f"Synthetic dataset: {len(triples)} facts, {len(sentences)} sentences, "
        f"{len(lexicon)} entities, {checked} verified questions"
    )
    return dataset
