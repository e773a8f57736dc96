"""Sparse co-occurrence matrices, smoothing and log normalization, slice similarity.

Smoothing adds a constant to every cell of a |V| x |V| matrix, which would
densify it if applied literally. Everything downstream therefore works on the
decomposition

    normalized = background * ones(|V|, |V|) + deviation

where `background` is the smoothed-and-logged value of an unobserved pair and
`deviation` is sparse (nonzero only at observed pairs). All inner products and
matrix actions honor the dense semantics through this decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .corpus import Vocabulary
from .errors import DimensionMismatch, InvalidAlpha


@dataclass
class SliceCooc:
    """Symmetric raw co-occurrence counts for one (possibly merged) slice.

    `entries` maps (i, j) with i <= j to the raw count; absent pairs are zero.
    Symmetry is by construction: the (j, i) count is the stored (i, j) count.
    """

    slice_id: str
    size: int
    window: int
    entries: dict[tuple[int, int], int]
    total_tokens: int

    def count(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return self.entries.get((i, j), 0)

    @property
    def nnz(self) -> int:
        return len(self.entries)


class BackgroundSparseMatrix:
    """Symmetric matrix with dense semantics `background + sparse deviation`.

    `entries` maps (i, j) with i <= j to the dense value at that cell; every
    unlisted cell equals `background`. Derived quantities (the deviation CSR
    matrix and its sums) are cached on first use; instances are treated as
    immutable after construction.
    """

    def __init__(self, size: int, background: float, entries: dict[tuple[int, int], float]):
        self.size = size
        self.background = background
        self.entries = entries
        self._deviation: sparse.csr_matrix | None = None
        self._dev_sums: tuple[float, float] | None = None

    def value_at(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        return self.entries.get((i, j), self.background)

    def deviation(self) -> sparse.csr_matrix:
        """Sparse symmetric matrix of (value - background) at observed cells."""
        if self._deviation is None:
            rows = []
            cols = []
            data = []
            bg = self.background
            for (i, j), value in self.entries.items():
                d = value - bg
                rows.append(i)
                cols.append(j)
                data.append(d)
                if i != j:
                    rows.append(j)
                    cols.append(i)
                    data.append(d)
            self._deviation = sparse.csr_matrix(
                (data, (rows, cols)), shape=(self.size, self.size), dtype=np.float64
            )
        return self._deviation

    def _sums(self) -> tuple[float, float]:
        if self._dev_sums is None:
            bg = self.background
            total = 0.0
            total_sq = 0.0
            for (i, j), value in self.entries.items():
                d = value - bg
                weight = 1.0 if i == j else 2.0
                total += weight * d
                total_sq += weight * d * d
            self._dev_sums = (total, total_sq)
        return self._dev_sums

    @property
    def dev_sum(self) -> float:
        """Full-matrix sum of deviations (off-diagonal cells counted twice)."""
        return self._sums()[0]

    @property
    def dev_sq_sum(self) -> float:
        """Full-matrix sum of squared deviations."""
        return self._sums()[1]

    def frobenius_sq(self) -> float:
        """Squared Frobenius norm of the dense-semantics matrix."""
        bg = self.background
        n = float(self.size)
        return bg * bg * n * n + 2.0 * bg * self.dev_sum + self.dev_sq_sum

    def matmul(self, other: np.ndarray) -> np.ndarray:
        """Dense-semantics product `X @ other` without materializing X."""
        colsum = other.sum(axis=0)
        return self.deviation() @ other + self.background * colsum

    def gram_inner(self, w: np.ndarray) -> float:
        """Inner product <X, W W^T> evaluated through the decomposition."""
        return float(np.sum(self.matmul(w) * w))

    def to_dense(self) -> np.ndarray:
        """Materialize the full matrix; intended for small sizes and tests."""
        dense = np.full((self.size, self.size), self.background, dtype=np.float64)
        for (i, j), value in self.entries.items():
            dense[i, j] = value
            dense[j, i] = value
        return dense


class NormalizedCooc(BackgroundSparseMatrix):
    """Smoothed and log-normalized co-occurrence matrix for one slice.

    Dense semantics: cell (i, j) is log(1 + raw_count + alpha), so the
    background (raw count zero) is log(1 + alpha) exactly.
    """

    def __init__(self, slice_id: str, size: int, alpha: float, entries: dict[tuple[int, int], float]):
        super().__init__(size=size, background=math.log1p(alpha), entries=entries)
        self.slice_id = slice_id
        self.alpha = alpha

    @classmethod
    def from_dense(
        cls, matrix: np.ndarray, slice_id: str = "dense", alpha: float = 0.0
    ) -> "NormalizedCooc":
        """Wrap an explicit symmetric matrix (used by tests and importers).

        Cells equal to log(1 + alpha) are treated as background and left
        implicit; with the default alpha of 0 every nonzero cell is stored.
        """
        matrix = np.asarray(matrix, dtype=np.float64)
        n = matrix.shape[0]
        if matrix.shape != (n, n):
            raise DimensionMismatch(f"expected a square matrix, got {matrix.shape}")
        if not np.array_equal(matrix, matrix.T):
            raise ValueError("matrix is not symmetric")
        background = math.log1p(alpha)
        entries = {}
        for i in range(n):
            for j in range(i, n):
                if matrix[i, j] != background:
                    entries[(i, j)] = float(matrix[i, j])
        return cls(slice_id=slice_id, size=n, alpha=alpha, entries=entries)


def count_cooccurrences(
    docs: Iterable[Sequence[str]],
    vocab: Vocabulary,
    window: int,
    slice_id: str = "0",
) -> SliceCooc:
    """Count within-window unordered pairs over tokenized documents.

    Every position pair (p, q) with 0 < q - p <= window and both tokens in the
    vocabulary contributes 1. Out-of-vocabulary tokens still occupy positions.
    Self-pairs from distinct positions of the same word are counted; the
    window never crosses document boundaries.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    index = vocab.index
    counts: dict[tuple[int, int], int] = {}
    get = counts.get
    total_tokens = 0
    for tokens in docs:
        n = len(tokens)
        total_tokens += n
        ids = [index.get(token, -1) for token in tokens]
        for p in range(n - 1):
            i = ids[p]
            if i < 0:
                continue
            for q in range(p + 1, min(n, p + window + 1)):
                j = ids[q]
                if j < 0:
                    continue
                key = (i, j) if i <= j else (j, i)
                counts[key] = get(key, 0) + 1
    return SliceCooc(
        slice_id=slice_id,
        size=len(vocab),
        window=window,
        entries=counts,
        total_tokens=total_tokens,
    )


def smooth_and_normalize(raw: SliceCooc, alpha: float) -> NormalizedCooc:
    """Apply add-alpha smoothing followed by log scaling: log(1 + count + alpha)."""
    if not alpha > 0:
        raise InvalidAlpha(f"alpha must be > 0, got {alpha}")
    entries = {key: math.log1p(count + alpha) for key, count in raw.entries.items()}
    return NormalizedCooc(slice_id=raw.slice_id, size=raw.size, alpha=alpha, entries=entries)


def matrix_similarity(a: BackgroundSparseMatrix, b: BackgroundSparseMatrix) -> float:
    """Cosine similarity of the flattened dense-semantics matrices.

    The inner product expands into four terms under the decomposition:
    background*background*|V|^2, the two background-times-deviation-sum cross
    terms, and the sparse deviation-deviation dot product. No dense matrix is
    ever formed.
    """
    if a.size != b.size:
        raise DimensionMismatch(f"vocabulary sizes differ: {a.size} vs {b.size}")
    alpha_a = getattr(a, "alpha", None)
    alpha_b = getattr(b, "alpha", None)
    if alpha_a is not None and alpha_b is not None and alpha_a != alpha_b:
        raise ValueError(f"smoothing constants differ: {alpha_a} vs {alpha_b}")
    n = float(a.size)
    cross = _deviation_dot(a, b)
    dot = a.background * b.background * n * n + a.background * b.dev_sum + b.background * a.dev_sum + cross
    norm_a = math.sqrt(a.frobenius_sq())
    norm_b = math.sqrt(b.frobenius_sq())
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("similarity undefined for an all-zero matrix")
    return min(dot / (norm_a * norm_b), 1.0)


def _deviation_dot(a: BackgroundSparseMatrix, b: BackgroundSparseMatrix) -> float:
    small, big = (a, b) if len(a.entries) <= len(b.entries) else (b, a)
    big_entries = big.entries
    big_bg = big.background
    small_bg = small.background
    total = 0.0
    for key, value in small.entries.items():
        other = big_entries.get(key)
        if other is None:
            continue
        weight = 1.0 if key[0] == key[1] else 2.0
        total += weight * (value - small_bg) * (other - big_bg)
    return total


def write_cooc(cooc: SliceCooc, alpha: float, path: str | Path) -> None:
    """Write the COOC v1 format: raw integer counts plus the configured alpha.

    Header "COOC v1 <|V|> <alpha> <nnz>", then one "i j count" line per stored
    entry in ascending (i, j). Byte-for-byte deterministic for a fixed input;
    raw counts are stored so that merged matrices stay exact integer sums.
    """
    lines = [f"COOC v1 {cooc.size} {alpha!r} {cooc.nnz}\n"]
    for (i, j) in sorted(cooc.entries):
        lines.append(f"{i} {j} {cooc.entries[(i, j)]}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_cooc(
    path: str | Path,
    slice_id: str = "0",
    window: int = 0,
    total_tokens: int = 0,
) -> tuple[SliceCooc, float]:
    """Read a COOC v1 file; slice metadata not in the format comes from the caller."""
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 5 or header[0] != "COOC" or header[1] != "v1":
            raise ValueError(f"{path}: not a COOC v1 file")
        size = int(header[2])
        alpha = float(header[3])
        nnz = int(header[4])
        entries: dict[tuple[int, int], int] = {}
        for _ in range(nnz):
            i_str, j_str, count_str = handle.readline().split()
            i, j = int(i_str), int(j_str)
            if not 0 <= i <= j < size:
                raise ValueError(f"{path}: entry ({i}, {j}) outside upper triangle of {size}")
            entries[(i, j)] = int(count_str)
    cooc = SliceCooc(
        slice_id=slice_id,
        size=size,
        window=window,
        entries=entries,
        total_tokens=total_tokens,
    )
    return cooc, alpha
