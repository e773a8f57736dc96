"""Synthetic diachronic corpora with planted semantic phenomena.

Documents are bags of words drawn from per-topic distributions, so every
planted phenomenon is verifiable from raw co-occurrence counts alone. That
makes the generator an independent oracle for the embedding pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document
from .errors import InvalidScenario

SCENARIO_KINDS = ("pivot", "gradual-drift", "association-strengthen", "stable-only")


@dataclass(frozen=True)
class DriftScenario:
    """Parameters of one synthetic corpus.

    `vocab_size` counts all planted words including pivots. Pivot words draw
    their document contexts exclusively from `cluster_a` in early slices and
    from `cluster_b` later (the switch is at ceil(n_slices / 2)); gradual
    drift interpolates the two linearly instead. The association scenario
    raises the joint-draw probability of `pair` by `pair_rate_step` per slice.
    """

    kind: str
    vocab_size: int
    n_slices: int
    docs_per_slice: int
    doc_length: int = 10
    seed: int = 0
    n_topics: int = 4
    pivot_words: tuple[str, ...] = ()
    cluster_a: tuple[str, ...] = ()
    cluster_b: tuple[str, ...] = ()
    pivot_doc_rate: float = 0.08
    pair: tuple[str, str] | None = None
    pair_rate_start: float = 0.02
    pair_rate_step: float = 0.04
    slice_seconds: int = 86400


@dataclass(frozen=True)
class GroundTruth:
    """What was planted, expressed in terms checkable from raw counts."""

    kind: str
    n_slices: int
    slice_seconds: int
    topics: tuple[tuple[str, ...], ...]
    pivot_words: tuple[str, ...]
    cluster_a: tuple[str, ...]
    cluster_b: tuple[str, ...]
    switch_at: int
    pair: tuple[str, str] | None
    pair_rates: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_slices": self.n_slices,
            "slice_seconds": self.slice_seconds,
            "topics": [list(t) for t in self.topics],
            "pivot_words": list(self.pivot_words),
            "cluster_a": list(self.cluster_a),
            "cluster_b": list(self.cluster_b),
            "switch_at": self.switch_at,
            "pair": list(self.pair) if self.pair else None,
            "pair_rates": list(self.pair_rates),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _background_words(scenario: DriftScenario) -> list[str]:
    n_background = scenario.vocab_size - len(scenario.pivot_words)
    return [f"w{i:03d}" for i in range(n_background)]


def _topics(scenario: DriftScenario) -> list[list[str]]:
    """Partition the background words into n_topics contiguous blocks."""
    words = _background_words(scenario)
    base, extra = divmod(len(words), scenario.n_topics)
    topics = []
    lo = 0
    for t in range(scenario.n_topics):
        hi = lo + base + (1 if t < extra else 0)
        topics.append(words[lo:hi])
        lo = hi
    return topics


def _validate(scenario: DriftScenario) -> list[list[str]]:
    if scenario.kind not in SCENARIO_KINDS:
        raise InvalidScenario(f"unknown scenario kind: {scenario.kind!r}")
    for name in ("vocab_size", "n_slices", "docs_per_slice", "doc_length", "n_topics"):
        if getattr(scenario, name) < 1:
            raise InvalidScenario(f"{name} must be positive")
    if scenario.doc_length < 2:
        raise InvalidScenario("doc_length must be at least 2 to produce co-occurrences")
    n_background = scenario.vocab_size - len(scenario.pivot_words)
    if n_background < scenario.n_topics:
        raise InvalidScenario("vocabulary too small for the requested topic count")
    topics = _topics(scenario)
    background = set(_background_words(scenario))
    if scenario.kind in ("pivot", "gradual-drift"):
        if not scenario.pivot_words:
            raise InvalidScenario("pivot scenarios need at least one pivot word")
        if not scenario.cluster_a or not scenario.cluster_b:
            raise InvalidScenario("pivot scenarios need both context clusters")
        if set(scenario.cluster_a) & set(scenario.cluster_b):
            raise InvalidScenario("context clusters overlap")
        for cluster in (scenario.cluster_a, scenario.cluster_b):
            if not set(cluster) <= background:
                raise InvalidScenario("cluster words must be background words")
        if set(scenario.pivot_words) & background:
            raise InvalidScenario("pivot words collide with background words")
        if not 0.0 < scenario.pivot_doc_rate < 1.0:
            raise InvalidScenario("pivot_doc_rate must be in (0, 1)")
    if scenario.kind == "association-strengthen":
        if scenario.pair is None or scenario.pair[0] == scenario.pair[1]:
            raise InvalidScenario("association scenario needs a pair of distinct words")
        if not set(scenario.pair) <= background:
            raise InvalidScenario("pair words must be background words")
        last_rate = scenario.pair_rate_start + scenario.pair_rate_step * (scenario.n_slices - 1)
        if scenario.pair_rate_start <= 0 or last_rate >= 1.0:
            raise InvalidScenario("pair rates must stay inside (0, 1) on every slice")
    return topics


def _topic_of(topics: list[list[str]], word: str) -> list[str]:
    for topic in topics:
        if word in topic:
            return topic
    raise InvalidScenario(f"word {word!r} not in any topic")


def generate(scenario: DriftScenario) -> tuple[list[Document], GroundTruth]:
    """Sample the corpus; identical scenario and seed give identical bytes."""
    topics = _validate(scenario)
    switch_at = (scenario.n_slices + 1) // 2
    topic_arrays = [np.array(topic) for topic in topics]
    cluster_arrays = (np.array(scenario.cluster_a or [""]), np.array(scenario.cluster_b or [""]))
    pivot_array = np.array(scenario.pivot_words or [""])
    if scenario.pair is not None:
        union = sorted(
            set(_topic_of(topics, scenario.pair[0])) | set(_topic_of(topics, scenario.pair[1]))
        )
        pair_filler = np.array(union)
    else:
        pair_filler = None

    length = scenario.doc_length
    docs: list[Document] = []
    pair_rates = []
    for t in range(scenario.n_slices):
        rng = np.random.default_rng([scenario.seed, t])
        if scenario.kind in ("pivot", "gradual-drift"):
            special_rate = scenario.pivot_doc_rate
        elif scenario.kind == "association-strengthen":
            special_rate = scenario.pair_rate_start + scenario.pair_rate_step * t
        else:
            special_rate = 0.0
        pair_rates.append(special_rate)
        if scenario.kind == "gradual-drift" and scenario.n_slices > 1:
            b_weight = t / (scenario.n_slices - 1)
        else:
            b_weight = 0.0 if t < switch_at else 1.0
        for i in range(scenario.docs_per_slice):
            if rng.random() < special_rate:
                if scenario.kind == "association-strengthen":
                    filler = pair_filler[rng.integers(0, len(pair_filler), size=length - 2)]
                    tokens = np.concatenate((np.array(scenario.pair), filler))
                else:
                    cluster = cluster_arrays[1] if rng.random() < b_weight else cluster_arrays[0]
                    pivot = pivot_array[rng.integers(0, len(pivot_array))]
                    context = cluster[rng.integers(0, len(cluster), size=length - 1)]
                    tokens = np.concatenate((np.array([pivot]), context))
                rng.shuffle(tokens)
            else:
                topic = topic_arrays[rng.integers(0, len(topic_arrays))]
                tokens = topic[rng.integers(0, len(topic), size=length)]
            docs.append(
                Document(
                    timestamp=t * scenario.slice_seconds + (i % scenario.slice_seconds),
                    text=" ".join(tokens),
                )
            )
    truth = GroundTruth(
        kind=scenario.kind,
        n_slices=scenario.n_slices,
        slice_seconds=scenario.slice_seconds,
        topics=tuple(tuple(topic) for topic in topics),
        pivot_words=scenario.pivot_words,
        cluster_a=scenario.cluster_a,
        cluster_b=scenario.cluster_b,
        switch_at=switch_at,
        pair=scenario.pair,
        pair_rates=tuple(pair_rates) if scenario.kind == "association-strengthen" else (),
    )
    return docs, truth


def pivot_scenario(
    vocab_size: int = 80,
    n_slices: int = 6,
    docs_per_slice: int = 3000,
    doc_length: int = 10,
    seed: int = 0,
    cluster_size: int = 8,
    pivot_doc_rate: float = 0.08,
) -> DriftScenario:
    """Standard single-pivot scenario: context flips from topic-0 words to topic-1 words."""
    base = DriftScenario(
        kind="pivot",
        vocab_size=vocab_size,
        n_slices=n_slices,
        docs_per_slice=docs_per_slice,
        doc_length=doc_length,
        seed=seed,
        pivot_words=("pivot",),
    )
    topics = _topics(base)
    return DriftScenario(
        kind="pivot",
        vocab_size=vocab_size,
        n_slices=n_slices,
        docs_per_slice=docs_per_slice,
        doc_length=doc_length,
        seed=seed,
        pivot_words=("pivot",),
        cluster_a=tuple(topics[0][:cluster_size]),
        cluster_b=tuple(topics[1][:cluster_size]),
        pivot_doc_rate=pivot_doc_rate,
    )


def gradual_drift_scenario(
    vocab_size: int = 80,
    n_slices: int = 6,
    docs_per_slice: int = 3000,
    doc_length: int = 10,
    seed: int = 0,
    cluster_size: int = 8,
    pivot_doc_rate: float = 0.08,
) -> DriftScenario:
    pivot = pivot_scenario(
        vocab_size=vocab_size,
        n_slices=n_slices,
        docs_per_slice=docs_per_slice,
        doc_length=doc_length,
        seed=seed,
        cluster_size=cluster_size,
        pivot_doc_rate=pivot_doc_rate,
    )
    return DriftScenario(
        kind="gradual-drift",
        vocab_size=pivot.vocab_size,
        n_slices=pivot.n_slices,
        docs_per_slice=pivot.docs_per_slice,
        doc_length=pivot.doc_length,
        seed=pivot.seed,
        pivot_words=pivot.pivot_words,
        cluster_a=pivot.cluster_a,
        cluster_b=pivot.cluster_b,
        pivot_doc_rate=pivot.pivot_doc_rate,
    )


def stable_scenario(
    vocab_size: int = 60,
    n_slices: int = 4,
    docs_per_slice: int = 2000,
    doc_length: int = 10,
    seed: int = 0,
) -> DriftScenario:
    return DriftScenario(
        kind="stable-only",
        vocab_size=vocab_size,
        n_slices=n_slices,
        docs_per_slice=docs_per_slice,
        doc_length=doc_length,
        seed=seed,
    )


def association_scenario(
    vocab_size: int = 60,
    n_slices: int = 5,
    docs_per_slice: int = 2000,
    doc_length: int = 10,
    seed: int = 0,
    pair_rate_start: float = 0.02,
    pair_rate_step: float = 0.04,
) -> DriftScenario:
    """Designated pair drawn jointly with per-slice increasing probability."""
    base = DriftScenario(
        kind="association-strengthen",
        vocab_size=vocab_size,
        n_slices=n_slices,
        docs_per_slice=docs_per_slice,
        doc_length=doc_length,
        seed=seed,
    )
    topics = _topics(base)
    return DriftScenario(
        kind="association-strengthen",
        vocab_size=vocab_size,
        n_slices=n_slices,
        docs_per_slice=docs_per_slice,
        doc_length=doc_length,
        seed=seed,
        pair=(topics[0][0], topics[1][0]),
        pair_rate_start=pair_rate_start,
        pair_rate_step=pair_rate_step,
    )
