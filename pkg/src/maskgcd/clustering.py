"""Area-weighted constrained k-means with k-means++-style seeding kept away
from existing class prototypes.

Used twice: once to cluster every eligible mask with labeled assignments
frozen ("baseline" mode), and once to cluster only the surviving pending
masks into novel groups ("novel_only" mode). Mask pixel area enters as sample
weight W in seeding and centroid updates, never as a distance term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import NOVEL_PENDING, DiscoveryInstance, LabelState
from .errors import EmptyClass, NotEnoughCandidates, ParamError

BASELINE = "baseline"
NOVEL_ONLY = "novel_only"

MAX_LLOYD_ITERS = 300


@dataclass
class ClusterModel:
    centroids: np.ndarray  # (K, D) float64
    assignment: np.ndarray  # per-mask cluster index; -1 for non-participants
    weights: np.ndarray  # per-mask W = pixel area
    inertia: float  # sum_i W_i * ||f_i - centroid(a_i)||^2
    mode: str
    n_iter: int
    inertia_history: list[float] = field(default_factory=list)


def base_prototypes(instance: DiscoveryInstance, state: LabelState) -> np.ndarray:
    """W-weighted mean feature per base class over masks currently carrying
    that class (ground-truth and pseudo-labeled alike)."""
    feats = np.asarray(instance.features, dtype=np.float64)
    weights = instance.areas()
    protos = np.empty((instance.k_base, feats.shape[1]), dtype=np.float64)
    for c in range(instance.k_base):
        members = state.labels == c
        if not members.any():
            raise EmptyClass(f"base class {c} has no member masks")
        protos[c] = np.average(feats[members], weights=weights[members], axis=0)
    return protos


def _sq_dist_to_nearest(points: np.ndarray, refs: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - refs[None, :, :]
    return np.einsum("mrd,mrd->mr", diff, diff).min(axis=1)


def _sq_dist_to(points: np.ndarray, ref: np.ndarray) -> np.ndarray:
    diff = points - ref
    return np.einsum("md,md->m", diff, diff)


def seeding_probabilities(candidates: np.ndarray, weights: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Normalized W·D² seeding distribution against the nearest reference."""
    d2 = _sq_dist_to_nearest(np.asarray(candidates, dtype=np.float64), np.asarray(refs, dtype=np.float64))
    mass = np.asarray(weights, dtype=np.float64) * d2
    total = mass.sum()
    if total <= 0:
        raise ParamError("all candidates coincide with a reference; no W*D^2 mass")
    return mass / total


def seed_novel_centroids(candidates: np.ndarray, weights: np.ndarray,
                         base_prototypes: np.ndarray, k_novel: int,
                         rng_seed: int) -> np.ndarray:
    """Pick k_novel seeds by W·D² sampling against {base prototypes} ∪ {seeds
    chosen so far}, greedy k-means++ style (several trial draws per step, keep
    the one minimizing the remaining W·D² potential). Falls back to W-weighted
    uniform sampling over unchosen candidates when all D² mass is zero.
    """
    cands = np.asarray(candidates, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if cands.ndim != 2:
        raise ParamError(f"candidates must be 2-D, got shape {cands.shape}")
    m = cands.shape[0]
    if k_novel < 0:
        raise ParamError(f"k_novel must be >= 0, got {k_novel}")
    if m < k_novel:
        raise NotEnoughCandidates(f"{m} candidates for k_novel={k_novel}")
    if k_novel == 0:
        return np.empty((0, cands.shape[1]), dtype=np.float64)

    # canonical candidate order: the draw depends on feature values and
    # weights only, never on the caller's row order
    order = np.lexsort(np.vstack([w[None, :], cands.T[::-1]]))
    cands = cands[order]
    w = w[order]

    protos = np.asarray(base_prototypes, dtype=np.float64)
    # squared distance to the nearest reference; inf until any reference exists
    d2 = _sq_dist_to_nearest(cands, protos) if protos.size else np.full(m, np.inf)

    rng = np.random.default_rng(rng_seed)
    n_trials = 2 + int(math.log(k_novel)) if k_novel > 1 else 1
    chosen_idx: list[int] = []
    chosen = np.zeros(m, dtype=bool)

    for _ in range(k_novel):
        if np.isinf(d2).all():
            mass = np.where(chosen, 0.0, w)
        else:
            mass = w * d2
            if mass.sum() <= 0:
                mass = np.where(chosen, 0.0, w)
        probs = mass / mass.sum()
        picks = rng.choice(m, size=n_trials, p=probs)

        best_pick, best_potential = -1, np.inf
        for p in picks:
            trial_d2 = np.minimum(d2, _sq_dist_to(cands, cands[p]))
            potential = float((w * trial_d2).sum())
            if potential < best_potential:
                best_pick, best_potential = int(p), potential
        d2 = np.minimum(d2, _sq_dist_to(cands, cands[best_pick]))
        chosen[best_pick] = True
        chosen_idx.append(best_pick)

    return cands[chosen_idx]


def constrained_kmeans(instance: DiscoveryInstance, state: LabelState,
                       init_centroids: np.ndarray, mode: str, rng_seed: int,
                       max_iters: int = MAX_LLOYD_ITERS,
                       freeze_base_centroids: bool = False) -> ClusterModel:
    """Lloyd iterations with W-weighted centroid updates.

    baseline:   every mask participates; labeled-split masks stay assigned to
                their ground-truth class; init_centroids must have
                k_base + k_novel rows (base prototypes first).
    novel_only: only pending masks participate; init_centroids are the novel
                seeds; cluster ids are 0..k_novel-1 local to this run.

    Stops when assignments are unchanged or after max_iters. A novel cluster
    left empty is re-seeded at the participating point with the largest
    W-weighted squared distance to its current centroid (deterministic).
    """
    if mode not in (BASELINE, NOVEL_ONLY):
        raise ParamError(f"mode must be {BASELINE!r} or {NOVEL_ONLY!r}, got {mode!r}")
    feats = np.asarray(instance.features, dtype=np.float64)
    weights = instance.areas()
    n = feats.shape[0]
    centroids = np.asarray(init_centroids, dtype=np.float64).copy()
    kk = centroids.shape[0]

    if mode == BASELINE:
        if kk != instance.k_base + instance.k_novel:
            raise ParamError(f"baseline mode expects {instance.k_base + instance.k_novel} centroids, got {kk}")
        participating = np.ones(n, dtype=bool)
        frozen = state.fixed.copy()
        frozen_to = np.where(frozen, state.labels, -1)
        reseedable_from = instance.k_base  # base rows always have frozen members
    else:
        participating = (state.labels == NOVEL_PENDING) & ~state.fixed
        frozen = np.zeros(n, dtype=bool)
        frozen_to = np.full(n, -1, dtype=np.int64)
        reseedable_from = 0
    if not participating.any():
        raise ParamError("no participating masks to cluster")

    assignment = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        # assignment: nearest centroid by L2; frozen masks keep ground truth
        diff = feats[participating, None, :] - centroids[None, :, :]
        d2 = np.einsum("pkd,pkd->pk", diff, diff)
        new_assignment = np.full(n, -1, dtype=np.int64)
        new_assignment[participating] = np.argmin(d2, axis=1)
        new_assignment[frozen] = frozen_to[frozen]

        # W-weighted centroid update over current members
        sums = np.zeros_like(centroids)
        wsum = np.zeros(kk, dtype=np.float64)
        idx = new_assignment[participating]
        np.add.at(sums, idx, weights[participating, None] * feats[participating])
        np.add.at(wsum, idx, weights[participating])
        nonempty = wsum > 0
        centroids[nonempty] = sums[nonempty] / wsum[nonempty, None]
        if freeze_base_centroids and mode == BASELINE:
            centroids[: instance.k_base] = np.asarray(init_centroids, dtype=np.float64)[: instance.k_base]

        empty = ~nonempty
        empty[:reseedable_from] = False
        if empty.any():
            _reseed_empty(centroids, empty, feats, weights, new_assignment, participating, frozen)

        d = feats[participating] - centroids[new_assignment[participating]]
        inertia = float((weights[participating] * np.einsum("pd,pd->p", d, d)).sum())
        history.append(inertia)

        if np.array_equal(new_assignment, assignment):
            assignment = new_assignment
            break
        assignment = new_assignment

    return ClusterModel(centroids=centroids, assignment=assignment, weights=weights,
                        inertia=history[-1], mode=mode, n_iter=n_iter, inertia_history=history)


def _reseed_empty(centroids, empty_mask, feats, weights, assignment, participating, frozen):
    eligible = participating & ~frozen
    if not eligible.any():
        return
    d = feats[eligible] - centroids[assignment[eligible]]
    score = weights[eligible] * np.einsum("pd,pd->p", d, d)
    eligible_idx = np.flatnonzero(eligible)
    ranking = np.argsort(-score, kind="stable")
    used: set[int] = set()
    for c in np.flatnonzero(empty_mask):
        best = -1
        for rank in ranking:
            if int(eligible_idx[rank]) not in used:
                best = int(eligible_idx[rank])
                break
        if best < 0:
            break  # fewer distinct points than empty clusters; leave as-is
        used.add(best)
        centroids[c] = feats[best]
