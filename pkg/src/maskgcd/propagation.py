"""Confidence-weighted label propagation over a frozen neighbor table, plus
the completion pass that returns pseudo-labels to the pending pool wherever a
neighborhood is dense with pending masks.

All rounds are synchronous: every score in a round is computed from the
previous round's state, so results do not depend on mask enumeration order.
Labeled-split masks are never modified by any operation here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NOVEL_PENDING, LabelState
from .errors import ParamError
from .knn import NeighborTable

SCORE_NORMS = ("k", "mass")


@dataclass(frozen=True)
class PropagationConfig:
    theta: float = 0.1
    max_iterations: int = 10
    convergence_eps: float = 1e-6
    tie_break: str = "lowest_class_index"
    score_norm: str = "k"

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ParamError(f"theta must be in (0, 1), got {self.theta}")
        if self.max_iterations < 1:
            raise ParamError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.score_norm not in SCORE_NORMS:
            raise ParamError(f"score_norm must be one of {SCORE_NORMS}, got {self.score_norm!r}")
        if self.tie_break != "lowest_class_index":
            raise ParamError(f"unsupported tie_break {self.tie_break!r}")


def _all_scores(labels: np.ndarray, confidence: np.ndarray, table: NeighborTable,
                k_base: int, score_norm: str) -> np.ndarray:
    """(N, k_base) matrix of per-class neighbor-vote scores.

    A neighbor votes its confidence for its current class; pending neighbors
    vote for nothing. Scores are normalized by k (default) or by the total
    confidence mass of the neighborhood.
    """
    nbr_labels = labels[table.neighbors]  # (N, k)
    nbr_conf = confidence[table.neighbors]
    scores = np.zeros((table.n, k_base), dtype=np.float64)
    for c in range(k_base):
        scores[:, c] = np.where(nbr_labels == c, nbr_conf, 0.0).sum(axis=1)
    if score_norm == "k":
        scores /= table.k
    else:
        mass = nbr_conf.sum(axis=1)
        nonzero = mass > 0
        scores[nonzero] /= mass[nonzero, None]
        scores[~nonzero] = 0.0
    return scores


def class_scores(state: LabelState, table: NeighborTable, mask_index: int,
                 score_norm: str = "k") -> np.ndarray:
    """Per-class score vector for one mask; all entries in [0, 1], sum <= 1."""
    if not 0 <= mask_index < table.n:
        raise ParamError(f"mask index {mask_index} outside [0, {table.n})")
    nbrs = table.neighbors[mask_index]
    labels = state.labels[nbrs]
    conf = state.confidence[nbrs]
    scores = np.zeros(state.k_base, dtype=np.float64)
    for c in range(state.k_base):
        scores[c] = conf[labels == c].sum()
    if score_norm == "k":
        scores /= table.k
    else:
        mass = conf.sum()
        scores = scores / mass if mass > 0 else np.zeros_like(scores)
    return scores


def propagate(state: LabelState, table: NeighborTable, cfg: PropagationConfig) -> LabelState:
    """Iterative pseudo-labeling of unlabeled-split masks.

    Each round recomputes every non-fixed mask from its neighbors: if the best
    class score exceeds theta the mask takes that class with the score as its
    confidence, otherwise it is pending with confidence 0. Stops at
    max_iterations or once labels are unchanged and no confidence moves by
    more than convergence_eps.
    """
    labels = state.labels.copy()
    conf = state.confidence.copy()
    free = ~state.fixed

    for _ in range(cfg.max_iterations):
        scores = _all_scores(labels, conf, table, state.k_base, cfg.score_norm)
        best = np.argmax(scores, axis=1)  # ties resolve to the lowest class index
        best_score = np.take_along_axis(scores, best[:, None], axis=1)[:, 0]
        assigned = best_score > cfg.theta

        new_labels = labels.copy()
        new_conf = conf.copy()
        new_labels[free] = np.where(assigned[free], best[free], NOVEL_PENDING)
        new_conf[free] = np.where(assigned[free], best_score[free], 0.0)

        converged = bool(np.array_equal(new_labels, labels)
                         and np.abs(new_conf - conf).max(initial=0.0) <= cfg.convergence_eps)
        labels, conf = new_labels, new_conf
        if converged:
            break

    return LabelState(labels=labels, confidence=conf, fixed=state.fixed.copy(), k_base=state.k_base)


def structural_completion(state: LabelState, table: NeighborTable, cfg: PropagationConfig) -> LabelState:
    """Single synchronous pass that strips pseudo-labels near pending masks.

    Pending masks are first promoted to confidence 1. A non-fixed mask with a
    pseudo-label reverts to pending when the fraction of its k neighbors that
    were pending before the pass exceeds theta. Fixed masks never revert;
    pending masks stay pending.
    """
    out = state.copy()
    pending_before = (state.labels == NOVEL_PENDING) & ~state.fixed
    out.confidence[pending_before] = 1.0

    frac = pending_before[table.neighbors].mean(axis=1)
    revert = (~state.fixed) & (state.labels != NOVEL_PENDING) & (frac > cfg.theta)
    out.labels[revert] = NOVEL_PENDING
    out.confidence[revert] = 1.0
    return out
