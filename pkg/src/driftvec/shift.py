"""Semantic shift scores, word trajectories, and pairwise association series.

All operations are pure reads over a list of aligned embeddings (one per
merged slice, in slice order) plus the shared vocabulary.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Vocabulary
from .embed import EmbeddingMatrix
from .errors import UnknownWord


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-word shift record: adjacent-slice displacements and total shift.

    A displacement is 1 - cosine between the word's vectors in consecutive
    aligned slices; total shift compares the first and last slices.
    """

    word: str
    displacements: tuple[float, ...]
    total_shift: float


@dataclass
class ShiftReport:
    slice_labels: list[str]
    records: list[TrajectoryRecord]


@dataclass(frozen=True)
class PairSeries:
    """Cosine similarity of one word pair across aligned slices, in order."""

    word_a: str
    word_b: str
    values: tuple[float, ...]


@dataclass
class AssociationNetwork:
    """Per-slice pairwise cosine matrices over a user-supplied node list."""

    nodes: list[str]
    slice_labels: list[str]
    matrices: list[np.ndarray]


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


def _rowwise_cosine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cos = np.sum(_unit_rows(a) * _unit_rows(b), axis=1)
    return np.clip(cos, -1.0, 1.0)


def _require_words(vocab: Vocabulary, words: Sequence[str]) -> list[int]:
    missing = [w for w in words if w not in vocab.index]
    if missing:
        raise UnknownWord(missing)
    return [vocab.index[w] for w in words]


def shift_report(embeddings: Sequence[EmbeddingMatrix], vocab: Vocabulary) -> ShiftReport:
    """Trajectories for every vocabulary word over the aligned slices."""
    if not embeddings:
        raise ValueError("no embeddings")
    mats = [e.vectors for e in embeddings]
    steps = [_rowwise_cosine(mats[t], mats[t + 1]) for t in range(len(mats) - 1)]
    total = 1.0 - _rowwise_cosine(mats[0], mats[-1])
    records = [
        TrajectoryRecord(
            word=word,
            displacements=tuple(float(1.0 - step[i]) for step in steps),
            total_shift=float(total[i]),
        )
        for i, word in enumerate(vocab.words)
    ]
    return ShiftReport(slice_labels=[e.slice_id for e in embeddings], records=records)


def word_trajectory(
    word: str, embeddings: Sequence[EmbeddingMatrix], vocab: Vocabulary
) -> TrajectoryRecord:
    """Displacement series and total shift for one word."""
    (row,) = _require_words(vocab, [word])
    vectors = [e.vectors[row] for e in embeddings]
    displacements = tuple(
        float(1.0 - _cosine(vectors[t], vectors[t + 1])) for t in range(len(vectors) - 1)
    )
    total = float(1.0 - _cosine(vectors[0], vectors[-1]))
    return TrajectoryRecord(word=word, displacements=displacements, total_shift=total)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def pair_series(
    word_a: str, word_b: str, embeddings: Sequence[EmbeddingMatrix], vocab: Vocabulary
) -> PairSeries:
    """Cosine of the two words' vectors in every slice, in slice order."""
    row_a, row_b = _require_words(vocab, [word_a, word_b])
    values = tuple(_cosine(e.vectors[row_a], e.vectors[row_b]) for e in embeddings)
    return PairSeries(word_a=word_a, word_b=word_b, values=values)


def association_network(
    nodes: Sequence[str], embeddings: Sequence[EmbeddingMatrix], vocab: Vocabulary
) -> AssociationNetwork:
    """Symmetric unit-diagonal cosine matrix over the node words, per slice."""
    rows = _require_words(vocab, nodes)
    matrices = []
    for emb in embeddings:
        unit = _unit_rows(emb.vectors[rows])
        cos = np.clip(unit @ unit.T, -1.0, 1.0)
        cos = (cos + cos.T) / 2.0  # exact symmetry despite float summation order
        np.fill_diagonal(cos, 1.0)
        matrices.append(cos)
    return AssociationNetwork(
        nodes=list(nodes), slice_labels=[e.slice_id for e in embeddings], matrices=matrices
    )


def top_shifted(
    embeddings: Sequence[EmbeddingMatrix],
    vocab: Vocabulary,
    k: int,
    min_freq: int = 20,
) -> list[tuple[str, float]]:
    """Words ranked by total shift, low-frequency words filtered out.

    The min_freq guard drops words whose vectors are dominated by smoothing
    rather than evidence. Ties break lexicographically; the full ranked list
    is returned when k exceeds the eligible vocabulary.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    total = 1.0 - _rowwise_cosine(embeddings[0].vectors, embeddings[-1].vectors)
    ranked = sorted(
        (
            (word, float(total[i]))
            for i, word in enumerate(vocab.words)
            if vocab.counts[i] >= min_freq
        ),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:k]


def neighbors(
    word: str,
    slice_index: int,
    embeddings: Sequence[EmbeddingMatrix],
    vocab: Vocabulary,
    k: int,
) -> list[tuple[str, float]]:
    """Top-k words by cosine to the query in one slice, query excluded."""
    (row,) = _require_words(vocab, [word])
    if k <= 0:
        return []
    matrix = embeddings[slice_index].vectors
    query = matrix[row]
    nq = np.linalg.norm(query)
    norms = np.linalg.norm(matrix, axis=1)
    denom = norms * (nq if nq > 0 else 1.0)
    denom[denom == 0.0] = 1.0
    cos = np.clip(matrix @ query / denom, -1.0, 1.0)
    candidates = [
        (word_i, float(cos[i])) for i, word_i in enumerate(vocab.words) if i != row
    ]
    candidates.sort(key=lambda item: (-item[1], item[0]))
    return candidates[:k]


def write_shift_report(report: ShiftReport, path: str | Path) -> None:
    """CSV with one row per word: total shift then each adjacent displacement."""
    labels = report.slice_labels
    step_names = [f"step_{labels[t]}_to_{labels[t + 1]}" for t in range(len(labels) - 1)]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["word", "total_shift"] + step_names)
        for record in report.records:
            writer.writerow(
                [record.word, repr(record.total_shift)]
                + [repr(v) for v in record.displacements]
            )


def write_pair_series(series: PairSeries, labels: Sequence[str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["slice", "cosine"])
        for label, value in zip(labels, series.values):
            writer.writerow([label, repr(value)])


def write_association_network(
    network: AssociationNetwork, out_dir: str | Path, prefix: str = "network"
) -> Path:
    """One CSV per slice plus a JSON manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for label, matrix in zip(network.slice_labels, network.matrices):
        name = f"{prefix}_{label}.csv"
        with open(out_dir / name, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["node"] + network.nodes)
            for node, row in zip(network.nodes, matrix):
                writer.writerow([node] + [repr(float(v)) for v in row])
        files.append(name)
    manifest = {
        "nodes": network.nodes,
        "slices": [
            {"label": label, "file": name}
            for label, name in zip(network.slice_labels, files)
        ],
    }
    manifest_path = out_dir / f"{prefix}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path
