"""Orthogonal Procrustes alignment of slice embeddings into one space."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .embed import PROVENANCE_ALIGNED, EmbeddingMatrix
from .errors import DegenerateInput, DimensionMismatch


@dataclass(frozen=True)
class AlignmentTransform:
    """Orthogonal d x d rotation mapping the source slice onto the target."""

    source: str
    target: str
    rotation: np.ndarray


def procrustes(a: EmbeddingMatrix, b: EmbeddingMatrix) -> AlignmentTransform:
    """Rotation R minimizing |A R - B|_F: R = U V^T from the SVD of A^T B.

    Rotation only, no translation or scaling; raises DegenerateInput when
    A^T B is the zero matrix (every rotation is then equally bad).
    """
    if a.vectors.shape != b.vectors.shape:
        raise DimensionMismatch(
            f"embedding shapes differ: {a.vectors.shape} vs {b.vectors.shape}"
        )
    cross = a.vectors.T @ b.vectors
    if not cross.any():
        raise DegenerateInput(f"zero cross-covariance between {a.slice_id} and {b.slice_id}")
    u, _, vt = np.linalg.svd(cross)
    return AlignmentTransform(source=a.slice_id, target=b.slice_id, rotation=u @ vt)


def align_with_transforms(
    embeddings: Sequence[EmbeddingMatrix],
) -> tuple[list[EmbeddingMatrix], list[AlignmentTransform]]:
    """Align every earlier slice directly onto the last (the reference).

    Returns the aligned embeddings plus the rotation used for each non-final
    slice. The reference keeps its vectors unchanged.
    """
    if not embeddings:
        raise ValueError("nothing to align")
    reference = embeddings[-1]
    aligned: list[EmbeddingMatrix] = []
    transforms: list[AlignmentTransform] = []
    for t, emb in enumerate(embeddings[:-1]):
        try:
            transform = procrustes(emb, reference)
        except DegenerateInput as exc:
            raise DegenerateInput(f"slice index {t}: {exc}") from exc
        aligned.append(
            EmbeddingMatrix(
                slice_id=emb.slice_id,
                vectors=emb.vectors @ transform.rotation,
                provenance=PROVENANCE_ALIGNED,
            )
        )
        transforms.append(transform)
    aligned.append(
        EmbeddingMatrix(
            slice_id=reference.slice_id,
            vectors=reference.vectors,
            provenance=PROVENANCE_ALIGNED,
        )
    )
    return aligned, transforms


def align_sequence(embeddings: Sequence[EmbeddingMatrix]) -> list[EmbeddingMatrix]:
    """Map all slices into the last slice's space; see align_with_transforms."""
    aligned, _ = align_with_transforms(embeddings)
    return aligned


def write_transform(transform: AlignmentTransform, path: str | Path) -> None:
    """Dense text format, header "<d> <d>" then one row per line."""
    d = transform.rotation.shape[0]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{d} {d}\n")
        for row in transform.rotation:
            handle.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_transform(path: str | Path) -> np.ndarray:
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2 or header[0] != header[1]:
            raise ValueError(f"{path}: bad transform header")
        d = int(header[0])
        rotation = np.empty((d, d), dtype=np.float64)
        for r in range(d):
            rotation[r] = [float(v) for v in handle.readline().split()]
    return rotation
