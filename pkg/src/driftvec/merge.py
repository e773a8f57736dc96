"""Adaptive merging of adjacent time slices by co-occurrence similarity."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .cooccur import NormalizedCooc, SliceCooc, matrix_similarity, smooth_and_normalize
from .errors import DimensionMismatch


@dataclass(frozen=True)
class MergeEvent:
    """One merge of adjacent groups: their positions, similarity, and pass index."""

    left: int
    right: int
    similarity: float
    iteration: int


@dataclass
class MergePlan:
    """Mapping from original slice indices to merged groups.

    `groups` lists the member indices of each merged slice, in order; the
    groups partition [0, T) into contiguous ascending runs.
    """

    tau: float
    groups: list[list[int]]
    trace: list[MergeEvent]

    def to_json(self) -> str:
        payload = {
            "tau": self.tau,
            "groups": self.groups,
            "trace": [
                {"left": e.left, "right": e.right, "sim": e.similarity, "iter": e.iteration}
                for e in self.trace
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MergePlan":
        payload = json.loads(text)
        return cls(
            tau=payload["tau"],
            groups=[list(group) for group in payload["groups"]],
            trace=[
                MergeEvent(
                    left=e["left"], right=e["right"], similarity=e["sim"], iteration=e["iter"]
                )
                for e in payload["trace"]
            ],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MergePlan":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def merge_counts(coocs: Sequence[SliceCooc], slice_id: str) -> SliceCooc:
    """Elementwise sum of raw count matrices.

    Exact because context windows never cross document boundaries, so counts
    over a union of document collections are the sums of per-slice counts.
    """
    if not coocs:
        raise ValueError("nothing to merge")
    size = coocs[0].size
    window = coocs[0].window
    for cooc in coocs[1:]:
        if cooc.size != size:
            raise DimensionMismatch(f"vocabulary sizes differ: {size} vs {cooc.size}")
        if cooc.window != window:
            raise ValueError(f"window sizes differ: {window} vs {cooc.window}")
    entries: dict[tuple[int, int], int] = {}
    for cooc in coocs:
        for key, count in cooc.entries.items():
            entries[key] = entries.get(key, 0) + count
    return SliceCooc(
        slice_id=slice_id,
        size=size,
        window=window,
        entries=entries,
        total_tokens=sum(c.total_tokens for c in coocs),
    )


def _group_id(slices: Sequence[SliceCooc], members: Sequence[int]) -> str:
    if len(members) == 1:
        return slices[members[0]].slice_id
    return f"{slices[members[0]].slice_id}-{slices[members[-1]].slice_id}"


def adaptive_merge(
    slices: Sequence[SliceCooc], tau: float, alpha: float
) -> tuple[MergePlan, list[SliceCooc]]:
    """Iteratively merge the most similar adjacent pair until all fall below tau.

    Each pass normalizes the current merged-count matrices, scans adjacent
    pairs left to right, and merges the pair with the highest similarity >= tau
    (earliest pair on ties). Merging sums raw counts. Terminates when no
    adjacent pair reaches tau; at most T - 1 merges happen.
    """
    if not slices:
        raise ValueError("at least one slice is required")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    groups = [[i] for i in range(len(slices))]
    raws = list(slices)
    norms: list[NormalizedCooc] = [smooth_and_normalize(raw, alpha) for raw in raws]
    sims = [matrix_similarity(norms[g], norms[g + 1]) for g in range(len(norms) - 1)]
    trace: list[MergeEvent] = []
    iteration = 0
    while sims:
        best = 0
        for g in range(1, len(sims)):
            if sims[g] > sims[best]:
                best = g
        if sims[best] < tau:
            break
        members = groups[best] + groups[best + 1]
        merged = merge_counts([raws[best], raws[best + 1]], _group_id(slices, members))
        trace.append(
            MergeEvent(left=best, right=best + 1, similarity=sims[best], iteration=iteration)
        )
        groups[best : best + 2] = [members]
        raws[best : best + 2] = [merged]
        norms[best : best + 2] = [smooth_and_normalize(merged, alpha)]
        # Only similarities touching the merged group change.
        del sims[best]
        if best < len(sims):
            sims[best] = matrix_similarity(norms[best], norms[best + 1])
        if best > 0:
            sims[best - 1] = matrix_similarity(norms[best - 1], norms[best])
        iteration += 1
    return MergePlan(tau=tau, groups=groups, trace=trace), raws
