"""Image-text score matrices and retrieval statistics (MRR, R@k).

Each generated caption is ranked against every other generated caption by its
image-text score; the diagonal holds each image's own caption score. Tie
handling is pessimistic: an off-diagonal score equal to the diagonal counts
against the image, so reported recall is a lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class RecallError(ValueError):
    pass


def clip_score(image_vec: Sequence[float], text_vec: Sequence[float]) -> float:
    """2.5 * max(cosine(image, text), 0)."""
    a = np.asarray(image_vec, dtype=float)
    b = np.asarray(text_vec, dtype=float)
    if a.shape != b.shape:
        raise RecallError(f"dim mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise RecallError("zero vector has no direction")
    return 2.5 * max(float(np.dot(a, b) / (na * nb)), 0.0)


@dataclass(frozen=True)
class ScoreMatrix:
    """n x n matrix where scores[i][j] = score(image i, caption j)."""

    image_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        n = len(self.image_ids)
        if self.scores.shape != (n, n):
            raise RecallError(f"expected {n}x{n} matrix, got {self.scores.shape}")
        if not np.all(np.isfinite(self.scores)):
            raise RecallError("matrix contains non-finite entries")

    @property
    def n(self) -> int:
        return len(self.image_ids)


def score_matrix(
    image_ids: Sequence[str],
    image_vecs: Sequence[Sequence[float]],
    text_vecs: Sequence[Sequence[float]],
) -> ScoreMatrix:
    """Build the pairwise CLIP-score matrix from embedding lists."""
    if not (len(image_ids) == len(image_vecs) == len(text_vecs)):
        raise RecallError("ids and embedding lists must align")
    imgs = np.asarray(image_vecs, dtype=float)
    txts = np.asarray(text_vecs, dtype=float)
    img_norms = np.linalg.norm(imgs, axis=1, keepdims=True)
    txt_norms = np.linalg.norm(txts, axis=1, keepdims=True)
    if np.any(img_norms == 0) or np.any(txt_norms == 0):
        raise RecallError("zero vector has no direction")
    cosines = (imgs / img_norms) @ (txts / txt_norms).T
    return ScoreMatrix(
        image_ids=tuple(image_ids),
        scores=2.5 * np.maximum(cosines, 0.0),
    )


@dataclass(frozen=True)
class RecallReport:
    image_ids: tuple[str, ...]
    per_image_rank: tuple[int, ...]
    mrr: float
    r_at: dict[int, float]

    def to_json_obj(self) -> dict:
        return {
            "mrr": self.mrr,
            "r_at": {str(k): v for k, v in sorted(self.r_at.items())},
        }


def recall_stats(matrix: ScoreMatrix, ks: Sequence[int] = (1, 5, 10)) -> RecallReport:
    """Per-image rank of the diagonal entry, MRR, and recall@k."""
    if matrix.n < 1:
        raise RecallError("matrix must be at least 1x1")
    s = matrix.scores
    diag = np.diag(s)
    # rank = 1 + (#strictly better) + (#off-diagonal ties), the pessimistic rule
    better = (s > diag[:, None]).sum(axis=1)
    ties = (s == diag[:, None]).sum(axis=1) - 1  # diagonal always matches itself
    ranks = 1 + better + ties
    mrr = float(np.mean(1.0 / ranks))
    r_at = {k: float(np.mean(ranks <= k)) for k in ks}
    return RecallReport(
        image_ids=matrix.image_ids,
        per_image_rank=tuple(int(r) for r in ranks),
        mrr=mrr,
        r_at=r_at,
    )


def build_hard_split(report: RecallReport, split, n: int = 200):
    """The n records where the caption ranked worst, worst first.

    Ties are broken by image_id ascending. ``split`` must cover every id in
    the report.
    """
    from capcommittee.data import subset

    if n > len(report.image_ids):
        raise RecallError(
            f"requested {n} records but the report covers {len(report.image_ids)}"
        )
    order = sorted(
        zip(report.per_image_rank, report.image_ids),
        key=lambda pair: (-pair[0], pair[1]),
    )
    worst_ids = [image_id for _, image_id in order[:n]]
    return subset(split, worst_ids, name=f"{split.name}-hard-mrr")
