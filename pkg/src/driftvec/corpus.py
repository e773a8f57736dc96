"""Corpus ingestion: tokenization, time slicing, and vocabulary construction."""

from __future__ import annotations

import json
import string
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import EmptyVocabulary, OutOfSpan

_STRIP_CHARS = string.punctuation + string.whitespace


@dataclass(frozen=True)
class Document:
    """One timestamped input text (seconds since epoch, UTC)."""

    timestamp: int
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("document text is empty")


@dataclass(frozen=True)
class SliceSpec:
    """Half-open time interval [start, end) with a 0-based slice index."""

    start: int
    end: int
    index: int

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"slice {self.index}: start {self.start} >= end {self.end}")

    def contains(self, timestamp: int) -> bool:
        return self.start <= timestamp < self.end


@dataclass(frozen=True)
class TokenizerConfig:
    """Tokenizer options.

    Stop-word removal is off unless a stop list is supplied. Leading and
    trailing punctuation is always stripped; intra-word punctuation (hyphens,
    digits, apostrophes) is preserved.
    """

    stop_words: frozenset[str] | None = None


_DEFAULT_TOKENIZER = TokenizerConfig()


@dataclass(frozen=True)
class Vocabulary:
    """Word <-> id bijection shared by every slice.

    Words are ordered by descending total corpus frequency, ties broken
    lexicographically, so two ingestion runs over the same documents produce
    an identical vocabulary regardless of document order.
    """

    words: tuple[str, ...]
    counts: tuple[int, ...]
    index: dict[str, int]
    min_count: int

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def id_of(self, word: str) -> int:
        return self.index[word]


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    """Lowercase, whitespace-split, and strip surrounding punctuation.

    Deterministic for a fixed config; an empty input yields an empty list.
    """
    if config is None:
        config = _DEFAULT_TOKENIZER
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_STRIP_CHARS)
        if not token:
            continue
        if config.stop_words is not None and token in config.stop_words:
            continue
        tokens.append(token)
    return tokens


def make_slice_specs(start: int, end: int, width: int) -> list[SliceSpec]:
    """Contiguous half-open slices of `width` seconds covering [start, end).

    The final slice is truncated at `end` when the span is not an exact
    multiple of the width.
    """
    if end <= start:
        raise ValueError(f"corpus span is empty: start={start} end={end}")
    if width <= 0:
        raise ValueError(f"slice width must be positive, got {width}")
    specs = []
    lo = start
    index = 0
    while lo < end:
        hi = min(lo + width, end)
        specs.append(SliceSpec(start=lo, end=hi, index=index))
        lo = hi
        index += 1
    return specs


def specs_from_boundaries(boundaries: Sequence[int]) -> list[SliceSpec]:
    """Build slice specs from an ascending boundary list [b0, b1, ..., bT]."""
    if len(boundaries) < 2:
        raise ValueError("need at least two slice boundaries")
    return [
        SliceSpec(start=boundaries[i], end=boundaries[i + 1], index=i)
        for i in range(len(boundaries) - 1)
    ]


def slice_corpus(docs: Iterable[Document], specs: Sequence[SliceSpec]) -> list[list[Document]]:
    """Assign each document to exactly one slice by half-open membership.

    Raises OutOfSpan if a document's timestamp falls outside every slice.
    """
    specs = sorted(specs, key=lambda s: s.start)
    starts = [s.start for s in specs]
    slices: list[list[Document]] = [[] for _ in specs]
    for doc in docs:
        pos = bisect_right(starts, doc.timestamp) - 1
        if pos < 0 or doc.timestamp >= specs[pos].end:
            raise OutOfSpan(
                f"document timestamp {doc.timestamp} outside every slice "
                f"[{specs[0].start}, {specs[-1].end})"
            )
        slices[pos].append(doc)
    return slices


def tokenize_documents(
    docs: Sequence[Document], config: TokenizerConfig | None = None
) -> list[list[str]]:
    """Tokenize a document collection, preserving document order."""
    return [tokenize(doc.text, config) for doc in docs]


def build_vocabulary(
    token_slices: Sequence[Sequence[Sequence[str]]],
    min_count: int = 1,
    max_size: int | None = None,
) -> Vocabulary:
    """Union vocabulary over all slices, filtered by total corpus frequency.

    Args:
        token_slices: per-slice collections of tokenized documents.
        min_count: minimum total frequency for a word to be kept (>= 1).
        max_size: optional cap; the deterministic order decides what survives.

    Raises EmptyVocabulary if no token passes the threshold.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    total: Counter[str] = Counter()
    for slice_docs in token_slices:
        shard: Counter[str] = Counter()
        for tokens in slice_docs:
            shard.update(tokens)
        total.update(shard)
    eligible = [(word, count) for word, count in total.items() if count >= min_count]
    if not eligible:
        raise EmptyVocabulary(f"empty vocabulary: no token occurs at least {min_count} times")
    eligible.sort(key=lambda item: (-item[1], item[0]))
    if max_size is not None:
        eligible = eligible[:max_size]
    words = tuple(word for word, _ in eligible)
    counts = tuple(count for _, count in eligible)
    index = {word: i for i, word in enumerate(words)}
    return Vocabulary(words=words, counts=counts, index=index, min_count=min_count)


def read_ndjson(path: str | Path) -> Iterator[Document]:
    """Read newline-delimited JSON documents with fields "ts" and "text"."""
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                yield Document(timestamp=int(record["ts"]), text=record["text"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad corpus record: {exc}") from exc


def write_ndjson(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(json.dumps({"ts": doc.timestamp, "text": doc.text}))
            handle.write("\n")


def read_slice_directory(path: str | Path) -> tuple[list[list[Document]], list[SliceSpec]]:
    """Timestamp-free mode: one <sliceindex>.txt per slice, one document per line.

    Slices are ordered by the numeric file stem; synthetic timestamps equal
    the slice position so the usual invariants hold.
    """
    directory = Path(path)
    numbered = []
    for child in directory.glob("*.txt"):
        try:
            numbered.append((int(child.stem), child))
        except ValueError:
            raise ValueError(f"non-numeric slice file name: {child.name}") from None
    if not numbered:
        raise ValueError(f"no <sliceindex>.txt files in {directory}")
    numbered.sort()
    slices = []
    specs = []
    for pos, (_, child) in enumerate(numbered):
        docs = []
        with open(child, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    docs.append(Document(timestamp=pos, text=line.rstrip("\n")))
        slices.append(docs)
        specs.append(SliceSpec(start=pos, end=pos + 1, index=pos))
    return slices, specs


def load_stop_words(path: str | Path) -> frozenset[str]:
    """Load a stop-word list, one word per line, blank lines ignored."""
    with open(path, encoding="utf-8") as handle:
        return frozenset(word for word in (line.strip().lower() for line in handle) if word)


def write_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    """Write "word count" lines in vocabulary order."""
    with open(path, "w", encoding="utf-8") as handle:
        for word, count in zip(vocab.words, vocab.counts):
            handle.write(f"{word} {count}\n")


def read_vocabulary(path: str | Path, min_count: int = 1) -> Vocabulary:
    words = []
    counts = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'word count'")
            words.append(parts[0])
            counts.append(int(parts[1]))
    if not words:
        raise EmptyVocabulary(f"empty vocabulary file: {path}")
    return Vocabulary(
        words=tuple(words),
        counts=tuple(counts),
        index={word: i for i, word in enumerate(words)},
        min_count=min_count,
    )
