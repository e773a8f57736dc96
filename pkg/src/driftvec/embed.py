"""Per-slice embedding initialization and the anchored dynamic update recurrence.

The training objective for slice t is

    |normalized_cooc - W W^T|_F^2
      + lambda1 * |W - gamma * W_prev|_F^2
      + lambda2 * |W W^T - mean_cooc|_F^2

minimized by full-batch gradient descent with backtracking line search. All
Frobenius terms that involve a co-occurrence matrix are evaluated through the
background-plus-sparse decomposition; W W^T is never formed for |V| > d.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .cooccur import BackgroundSparseMatrix, NormalizedCooc
from .corpus import Vocabulary
from .errors import ConvergenceFailure, DimensionMismatch

PROVENANCE_STATIC = "static-init"
PROVENANCE_DYNAMIC = "dynamic-update"
PROVENANCE_ALIGNED = "aligned"

# Below this vocabulary size a full dense eigendecomposition is cheaper and
# more robust than the iterative solver.
DENSE_EIGEN_CUTOFF = 512


@dataclass
class EmbeddingMatrix:
    """Dense |V| x d embedding for one slice, tagged with its provenance."""

    slice_id: str
    vectors: np.ndarray
    provenance: str = PROVENANCE_STATIC

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError(f"expected a 2-d matrix, got shape {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError(f"slice {self.slice_id}: non-finite embedding entries")

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    @property
    def rows(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the dynamic update; all ranges validated eagerly."""

    d: int = 100
    lambda1: float = 0.1
    lambda2: float = 0.01
    gamma: float = 0.9
    learning_rate: float = 1e-3
    max_iters: int = 500
    grad_tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be >= 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")


class MeanCooc(BackgroundSparseMatrix):
    """Mean of normalized co-occurrence matrices over all merged slices."""

    def __init__(
        self,
        size: int,
        alpha: float,
        background: float,
        entries: dict[tuple[int, int], float],
        t_count: int,
    ):
        super().__init__(size=size, background=background, entries=entries)
        self.alpha = alpha
        self.t_count = t_count


def mean_cooc(coocs: Sequence[NormalizedCooc]) -> MeanCooc:
    """Exact elementwise mean under the background-plus-sparse decomposition."""
    if not coocs:
        raise ValueError("mean of an empty slice list")
    size = coocs[0].size
    alpha = coocs[0].alpha
    for cooc in coocs[1:]:
        if cooc.size != size:
            raise DimensionMismatch(f"vocabulary sizes differ: {size} vs {cooc.size}")
        if cooc.alpha != alpha:
            raise ValueError(f"smoothing constants differ: {alpha} vs {cooc.alpha}")
    t_count = len(coocs)
    background = sum(c.background for c in coocs) / t_count
    deviation_sums: dict[tuple[int, int], float] = {}
    for cooc in coocs:
        bg = cooc.background
        for key, value in cooc.entries.items():
            deviation_sums[key] = deviation_sums.get(key, 0.0) + (value - bg)
    entries = {key: background + dev / t_count for key, dev in deviation_sums.items()}
    return MeanCooc(size=size, alpha=alpha, background=background, entries=entries, t_count=t_count)


def static_init(
    cooc: BackgroundSparseMatrix, d: int, seed: int, method: str = "auto"
) -> EmbeddingMatrix:
    """Rank-d symmetric eigenfactorization seed for one slice.

    Column k of W is u_k * sqrt(max(eigenvalue_k, 0)) for the top-d eigenpairs
    of the dense-semantics matrix, so W W^T is the best rank-d positive
    semidefinite reconstruction. Deterministic up to sign; each eigenvector's
    sign is fixed by making its largest-magnitude entry positive.

    `method` is "auto", "dense", or "iterative"; auto uses the dense solver
    for small matrices and Lanczos iteration against the decomposition
    otherwise. Raises ConvergenceFailure if the iterative solver exhausts its
    budget.
    """
    n = cooc.size
    if d > n:
        raise ValueError(f"d={d} exceeds vocabulary size {n}")
    if method not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown eigensolver method: {method}")
    if method == "auto":
        method = "dense" if (n <= DENSE_EIGEN_CUTOFF or d >= n - 1) else "iterative"
    if method == "dense":
        values, vectors = np.linalg.eigh(cooc.to_dense())
        order = np.argsort(-values, kind="stable")[:d]
        values = values[order]
        vectors = vectors[:, order]
    else:
        deviation = cooc.deviation()
        background = cooc.background

        def matvec(v):
            return deviation @ v + background * v.sum()

        operator = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            values, vectors = eigsh(operator, k=d, which="LA", v0=v0)
        except ArpackNoConvergence as exc:
            raise ConvergenceFailure(
                f"eigensolver did not converge for slice {getattr(cooc, 'slice_id', '?')}: {exc}"
            ) from exc
        order = np.argsort(-values, kind="stable")
        values = values[order]
        vectors = vectors[:, order]
    for k in range(vectors.shape[1]):
        peak = np.argmax(np.abs(vectors[:, k]))
        if vectors[peak, k] < 0:
            vectors[:, k] = -vectors[:, k]
    w = vectors * np.sqrt(np.maximum(values, 0.0))
    return EmbeddingMatrix(
        slice_id=getattr(cooc, "slice_id", "mean"), vectors=w, provenance=PROVENANCE_STATIC
    )


def decayed_anchor(prev: np.ndarray, gamma: float) -> np.ndarray:
    """Forgetting-factor decay of the previous slice's vectors.

    gamma == 1 returns the previous matrix itself, bit for bit.
    """
    if gamma == 1.0:
        return prev
    return gamma * prev


def _check_shapes(w: np.ndarray, cooc, prev, mean, cfg: TrainConfig) -> None:
    if w.shape[0] != cooc.size:
        raise DimensionMismatch(f"W has {w.shape[0]} rows but |V| = {cooc.size}")
    if prev is not None and prev.vectors.shape != w.shape:
        raise DimensionMismatch(
            f"previous embedding shape {prev.vectors.shape} != {w.shape}"
        )
    if mean is not None and mean.size != cooc.size:
        raise DimensionMismatch(f"mean matrix size {mean.size} != |V| = {cooc.size}")
    if cfg.lambda2 > 0 and mean is None:
        raise ValueError("lambda2 > 0 requires the mean co-occurrence matrix")


def objective(
    w: np.ndarray,
    cooc: NormalizedCooc,
    prev: EmbeddingMatrix | None,
    mean: MeanCooc | None,
    cfg: TrainConfig,
) -> float:
    """Evaluate the full training objective without densifying any matrix.

    Uses |X - W W^T|_F^2 = |X|_F^2 - 2 <X, W W^T> + |W^T W|_F^2, where the
    inner product goes through the decomposition and the last term is a d x d
    computation.
    """
    _check_shapes(w, cooc, prev, mean, cfg)
    gram = w.T @ w
    gram_sq = float(np.sum(gram * gram))
    value = cooc.frobenius_sq() - 2.0 * cooc.gram_inner(w) + gram_sq
    if prev is not None and cfg.lambda1 > 0:
        diff = w - decayed_anchor(prev.vectors, cfg.gamma)
        value += cfg.lambda1 * float(np.sum(diff * diff))
    if mean is not None and cfg.lambda2 > 0:
        value += cfg.lambda2 * (mean.frobenius_sq() - 2.0 * mean.gram_inner(w) + gram_sq)
    return value


def gradient(
    w: np.ndarray,
    cooc: NormalizedCooc,
    prev: EmbeddingMatrix | None,
    mean: MeanCooc | None,
    cfg: TrainConfig,
) -> np.ndarray:
    """Analytic gradient of the training objective.

    For symmetric X the reconstruction term differentiates to -4 (X - W W^T) W;
    (W W^T) W is computed as W (W^T W) and X W through the decomposition.
    """
    _check_shapes(w, cooc, prev, mean, cfg)
    ww_w = w @ (w.T @ w)
    grad = -4.0 * (cooc.matmul(w) - ww_w)
    if prev is not None and cfg.lambda1 > 0:
        grad += (2.0 * cfg.lambda1) * (w - decayed_anchor(prev.vectors, cfg.gamma))
    if mean is not None and cfg.lambda2 > 0:
        grad += (4.0 * cfg.lambda2) * (ww_w - mean.matmul(w))
    return grad


def train_slice(
    cooc: NormalizedCooc,
    prev: EmbeddingMatrix | None,
    mean: MeanCooc | None,
    init: EmbeddingMatrix,
    cfg: TrainConfig,
    trace: list[float] | None = None,
) -> EmbeddingMatrix:
    """Gradient descent with backtracking line search from the given init.

    Each iteration starts at the base learning rate and halves the step until
    the objective does not increase. Stops when the gradient Frobenius norm
    drops below grad_tol or max_iters is reached; the result's objective never
    exceeds the init's. Raises ConvergenceFailure only if no non-increasing
    step exists at machine precision.
    """
    w = init.vectors.copy()
    f_current = objective(w, cooc, prev, mean, cfg)
    if trace is not None:
        trace.append(f_current)
    for _ in range(cfg.max_iters):
        grad = gradient(w, cooc, prev, mean, cfg)
        if np.linalg.norm(grad) < cfg.grad_tol:
            break
        step = cfg.learning_rate
        w_new = w - step * grad
        f_new = objective(w_new, cooc, prev, mean, cfg)
        halvings = 0
        while f_new > f_current:
            halvings += 1
            if halvings > 100:
                raise ConvergenceFailure(
                    f"slice {cooc.slice_id}: line search found no non-increasing step"
                )
            step *= 0.5
            w_new = w - step * grad
            f_new = objective(w_new, cooc, prev, mean, cfg)
        if trace is not None:
            trace.append(f_new)
        if f_new == f_current and np.array_equal(w_new, w):
            break  # step underflowed; converged at machine precision
        w, f_current = w_new, f_new
    return EmbeddingMatrix(slice_id=cooc.slice_id, vectors=w, provenance=PROVENANCE_DYNAMIC)


def train_sequence(
    coocs: Sequence[NormalizedCooc],
    cfg: TrainConfig,
    traces: list[list[float]] | None = None,
) -> list[EmbeddingMatrix]:
    """Progressive dynamic update over merged slices.

    Slice 0 trains from the eigenfactorization seed with no anchor term;
    every later slice anchors to (and warm-starts from) the previous result.
    The global-stability term uses the mean matrix over all slices throughout.
    """
    if not coocs:
        raise ValueError("no slices to train on")
    mean = mean_cooc(coocs)
    results: list[EmbeddingMatrix] = []
    prev: EmbeddingMatrix | None = None
    for t, cooc in enumerate(coocs):
        init = static_init(cooc, cfg.d, cfg.seed) if prev is None else prev
        trace: list[float] | None = [] if traces is not None else None
        try:
            result = train_slice(cooc, prev, mean, init, cfg, trace=trace)
        except ConvergenceFailure as exc:
            raise ConvergenceFailure(f"slice index {t}: {exc}") from exc
        if traces is not None and trace is not None:
            traces.append(trace)
        results.append(result)
        prev = result
    return results


def write_embedding(emb: EmbeddingMatrix, vocab: Vocabulary, path: str | Path) -> None:
    """Write the embedding text format: "<|V|> <d>", then one word row each.

    Rows follow vocabulary order with full-precision decimal floats. The same
    format serves as the import path for externally trained static embeddings.
    """
    if emb.rows != len(vocab):
        raise DimensionMismatch(f"embedding has {emb.rows} rows, vocabulary {len(vocab)}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{emb.rows} {emb.d}\n")
        for word, row in zip(vocab.words, emb.vectors):
            handle.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")


def read_embedding(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read the embedding text format back as (words, |V| x d matrix)."""
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad embedding header")
        rows, d = int(header[0]), int(header[1])
        words = []
        matrix = np.empty((rows, d), dtype=np.float64)
        for r in range(rows):
            parts = handle.readline().split()
            if len(parts) != d + 1:
                raise ValueError(f"{path}: row {r} has {len(parts) - 1} values, expected {d}")
            words.append(parts[0])
            matrix[r] = [float(v) for v in parts[1:]]
    return words, matrix
