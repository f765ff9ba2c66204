"""
Tokenizer and string<->id vocabularies
The tokenizer is shared by retrieval, entity linking and the LSTM encoder, so it is frozen.
"""

import re
from typing import Dict, Iterable, List, Optional, Sequence

from src.errors import UnknownKeyError

_TOKEN_RE = re.compile(r"[^\W_]+")

UNK = "<unk>"


def tokenize(text: str) -> List[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Dense string<->id table assigned in first-occurrence order"""

    def __init__(self, items: Iterable[str] = ()):
        self._ids: Dict[str, int] = {}
        self._items: List[str] = []
        for item in items:
            self.add(item)

    def add(self, item: str) -> int:
        idx = self._ids.get(item)
        if idx is None:
            idx = len(self._items)
            self._ids[item] = idx
            self._items.append(item)
        return idx

    def id_of(self, item: str) -> int:
        try:
            return self._ids[item]
        except KeyError:
            raise UnknownKeyError(f"unknown vocabulary item {item!r}") from None

    def get(self, item: str, default: Optional[int] = None) -> Optional[int]:
        return self._ids.get(item, default)

    def name_of(self, idx: int) -> str:
        if not 0 <= idx < len(self._items):
            raise UnknownKeyError(f"id {idx} outside vocabulary of size {len(self._items)}")
        return self._items[idx]

    def __contains__(self, item: str) -> bool:
        return item in self._ids

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._items == other._items

    def items(self) -> List[str]:
        return list(self._items)


class WordVocabulary(Vocabulary):
    """Word table for the LSTM; id 0 is reserved for unknown words"""

    def __init__(self, words: Iterable[str] = ()):
        super().__init__([UNK])
        for word in words:
            self.add(word)

    @classmethod
    def from_token_lists(cls, token_lists: Iterable[Sequence[str]]) -> "WordVocabulary":
        vocab = cls()
        for tokens in token_lists:
            for token in tokens:
                vocab.add(token)
        return vocab

    @classmethod
    def from_items(cls, items: Sequence[str]) -> "WordVocabulary":
        if not items or items[0] != UNK:
            raise UnknownKeyError(f"word vocabulary must start with {UNK!r}")
        return cls(items[1:])

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self._ids.get(token, 0) for token in tokens]
