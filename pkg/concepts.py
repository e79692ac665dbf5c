"""Concept extraction by clustering transformed feature fragments.

A concept item is one contiguous feature window of one sample, kept at full
dimension with every coordinate outside the window zeroed. Items are clustered
with k-means in the transformed space, groups are ranked by mean item
importance and the top items of each group are compared against a reference
selection.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from errors import RejectedInputError
from freqx import explain_batch
from nn_core import DenseNet, LabeledDataset

logger = logging.getLogger(__name__)

# --- CONFIGURATION ---
MAX_ITERATIONS = 300
SHIFT_TOLERANCE = 1e-8
TOP_ITEMS = 10
DEFAULT_RESTARTS = 3


@dataclass
class ConceptItem:
    item_id: int
    source_sample_id: int
    vector_original: np.ndarray
    vector_transformed: np.ndarray
    importance: float = 0.0
    window: int = 0

    def __post_init__(self):
        if np.shape(self.vector_original) != np.shape(self.vector_transformed):
            raise RejectedInputError("original and transformed vectors differ in dimension")


@dataclass
class ConceptGroup:
    centroid: np.ndarray
    member_ids: List[int]
    group_importance: float = 0.0


@dataclass
class ConceptGrouping:
    groups: List[ConceptGroup]
    k: int
    seed: int
    labels: np.ndarray = None
    wcss: float = 0.0
    wcss_history: List[float] = field(default_factory=list)


@dataclass
class RankedGroup:
    group_index: int
    group_importance: float
    selected_ids: List[int]


@dataclass
class OverlapReport:
    N: float
    M: float
    hit_rate: float
    repetitions: int
    N_max: float = 0.0
    M_max: float = 0.0
    hit_rate_max: float = 0.0
    hit_rate_defined: bool = True

    def as_row(self) -> dict:
        return {
            "N": self.N, "M": self.M, "hit_rate": self.hit_rate,
            "N_max": self.N_max, "M_max": self.M_max, "hit_rate_max": self.hit_rate_max,
            "repetitions": self.repetitions, "hit_rate_defined": self.hit_rate_defined,
        }


# --- K-MEANS ---

def _squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _plus_plus_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen center
            remaining = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(remaining))
        chosen.append(nxt)
        closest = np.minimum(closest, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def _repair_empty(X, labels, centers, distances):
    """Reseeds every empty centroid at the point farthest from its own centroid."""
    k = centers.shape[0]
    for j in range(k):
        if np.any(labels == j):
            continue
        own = distances[np.arange(X.shape[0]), labels]
        counts = np.bincount(labels, minlength=k)
        own = np.where(counts[labels] > 1, own, -1.0)
        far = int(np.argmax(own))
        labels[far] = j
        centers[j] = X[far]
        distances = _squared_distances(X, centers)
    return labels, centers


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator):
    centers = _plus_plus_centers(X, k, rng)
    history = []
    for _ in range(MAX_ITERATIONS):
        distances = _squared_distances(X, centers)
        labels = np.argmin(distances, axis=1)
        labels, centers = _repair_empty(X, labels, centers, distances)
        history.append(float(((X - centers[labels]) ** 2).sum()))
        updated = np.array([X[labels == j].mean(axis=0) for j in range(k)])
        shift = float(np.max(np.linalg.norm(updated - centers, axis=1)))
        centers = updated
        if shift < SHIFT_TOLERANCE:
            break
    distances = _squared_distances(X, centers)
    labels = np.argmin(distances, axis=1)
    labels, centers = _repair_empty(X, labels, centers, distances)
    wcss = float(((X - centers[labels]) ** 2).sum())
    return labels, centers, wcss, history


def kmeans(
    items,
    k: int,
    seed: int,
    restarts: int = DEFAULT_RESTARTS,
    item_ids: Optional[Sequence[int]] = None,
    importances: Optional[Sequence[float]] = None,
) -> ConceptGrouping:
    """Lloyd's algorithm with k-means++ seeding; keeps the restart with the lowest WCSS."""
    X = np.atleast_2d(np.asarray(items, dtype=np.float64))
    n = X.shape[0]
    if not 1 <= k <= n:
        raise RejectedInputError(f"k={k} must lie in [1, {n}]")
    ids = list(range(n)) if item_ids is None else [int(i) for i in item_ids]
    weights = np.zeros(n) if importances is None else np.asarray(importances, dtype=np.float64)

    best = None
    for child in np.random.SeedSequence(seed).spawn(max(1, restarts)):
        result = _lloyd(X, k, np.random.default_rng(child))
        if best is None or result[2] < best[2]:
            best = result
    labels, centers, wcss, history = best

    groups = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        groups.append(
            ConceptGroup(
                centroid=centers[j],
                member_ids=[ids[m] for m in members],
                group_importance=float(weights[members].mean()) if members.size else 0.0,
            )
        )
    logger.debug("kmeans k=%d wcss=%.6g after %d iterations", k, wcss, len(history))
    return ConceptGrouping(groups=groups, k=k, seed=seed, labels=labels, wcss=wcss, wcss_history=history)


# --- RANKING ---

def _top_members(member_ids: Sequence[int], importance: Dict[int, float], top: int) -> List[int]:
    return sorted(member_ids, key=lambda i: (-importance[i], i))[:top]


def rank_groups(grouping: ConceptGrouping, items: Sequence[ConceptItem], top: int = TOP_ITEMS) -> List[RankedGroup]:
    """Groups by descending mean item importance (ties by group index), each with its top items."""
    importance = {item.item_id: float(item.importance) for item in items}
    ranked = []
    for index, group in enumerate(grouping.groups):
        value = float(np.mean([importance[i] for i in group.member_ids])) if group.member_ids else 0.0
        group.group_importance = value
        ranked.append(RankedGroup(index, value, _top_members(group.member_ids, importance, top)))
    ranked.sort(key=lambda g: (-g.group_importance, g.group_index))
    return ranked


def reference_selection(items: Sequence[ConceptItem], concept_labels: Sequence[int], top: int = TOP_ITEMS) -> List[RankedGroup]:
    """Ranked selections built from known concept labels instead of clusters."""
    labels = np.asarray(concept_labels)
    if labels.shape[0] != len(items):
        raise RejectedInputError("one concept label per item is required")
    groups = [
        ConceptGroup(centroid=np.zeros(0), member_ids=[items[i].item_id for i in np.flatnonzero(labels == lab)])
        for lab in np.unique(labels)
    ]
    grouping = ConceptGrouping(groups=groups, k=len(groups), seed=0)
    return rank_groups(grouping, items, top)


# --- PIPELINES ---

def fragment_items(X, X_prime, scores, window: int, sample_ids: Optional[Sequence[int]] = None) -> List[ConceptItem]:
    """Cuts every sample into contiguous windows; importance is the summed attribution in the window."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    X_prime = np.atleast_2d(np.asarray(X_prime, dtype=np.float64))
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if window < 1:
        raise RejectedInputError("window must be at least one feature")
    n, d = X.shape
    ids = range(n) if sample_ids is None else sample_ids
    items = []
    for row, sample_id in enumerate(ids):
        for w, start in enumerate(range(0, d, window)):
            mask = np.zeros(d)
            mask[start:start + window] = 1.0
            items.append(
                ConceptItem(
                    item_id=len(items),
                    source_sample_id=int(sample_id),
                    vector_original=X[row] * mask,
                    vector_transformed=X_prime[row] * mask,
                    importance=float(scores[row, start:start + window].sum()),
                    window=w,
                )
            )
    return items


def select_concepts(
    items: Sequence[ConceptItem],
    k: int,
    seed: int,
    restarts: int = DEFAULT_RESTARTS,
    use_transformed: bool = True,
    top: int = TOP_ITEMS,
) -> Tuple[ConceptGrouping, List[RankedGroup]]:
    vectors = np.stack([it.vector_transformed if use_transformed else it.vector_original for it in items])
    grouping = kmeans(
        vectors, k, seed, restarts,
        item_ids=[it.item_id for it in items],
        importances=[it.importance for it in items],
    )
    return grouping, rank_groups(grouping, items, top)


def ablation_controls(
    items: Sequence[ConceptItem],
    k: int,
    seed: int,
    restarts: int = DEFAULT_RESTARTS,
    top: int = TOP_ITEMS,
) -> Tuple[List[RankedGroup], List[RankedGroup]]:
    """g1 clusters the untransformed fragments; g2 keeps the grouping but draws selections at random."""
    _, g1 = select_concepts(items, k, seed, restarts, use_transformed=False, top=top)
    grouping, ranked = select_concepts(items, k, seed, restarts, use_transformed=True, top=top)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(restarts + 1)[-1])
    g2 = []
    for group in ranked:
        members = grouping.groups[group.group_index].member_ids
        drawn = rng.choice(members, size=min(top, len(members)), replace=False) if members else []
        g2.append(RankedGroup(group.group_index, group.group_importance, sorted(int(i) for i in drawn)))
    return g1, g2


# --- OVERLAP METRICS ---

def _greedy_matching(ours: Sequence[RankedGroup], reference: Sequence[RankedGroup]) -> int:
    overlap = np.array(
        [[len(set(a.selected_ids) & set(b.selected_ids)) for b in reference] for a in ours], dtype=np.int64
    )
    free_rows, free_cols = set(range(len(ours))), set(range(len(reference)))
    total = 0
    candidates = sorted(
        ((overlap[i, j], i, j) for i in range(len(ours)) for j in range(len(reference))),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    for value, i, j in candidates:
        if i in free_rows and j in free_cols:
            total += int(value)
            free_rows.discard(i)
            free_cols.discard(j)
    return total


def overlap_once(ours: Sequence[RankedGroup], reference: Sequence[RankedGroup], universe=None) -> Tuple[int, int]:
    """N (overlap within matched groups) and M (overlap of everything selected)."""
    if len(ours) != len(reference):
        raise RejectedInputError(f"group counts differ: {len(ours)} vs {len(reference)}")
    ours_all = {i for g in ours for i in g.selected_ids}
    ref_all = {i for g in reference for i in g.selected_ids}
    if universe is not None:
        universe = set(universe)
        if not ours_all <= universe or not ref_all <= universe:
            raise RejectedInputError("selections are not drawn from the same item universe")
    return _greedy_matching(ours, reference), len(ours_all & ref_all)


def overlap_metrics(ours_runs, reference_runs, universe=None) -> OverlapReport:
    """Average and maximum N, M and N/M over repeated selections."""
    if len(ours_runs) != len(reference_runs):
        raise RejectedInputError("both sides need the same number of repetitions")
    if not ours_runs:
        return OverlapReport(N=0.0, M=0.0, hit_rate=0.0, repetitions=0, hit_rate_defined=False)
    pairs = np.array([overlap_once(a, b, universe) for a, b in zip(ours_runs, reference_runs)], dtype=np.float64)
    n_values, m_values = pairs[:, 0], pairs[:, 1]
    rates = np.divide(n_values, m_values, out=np.zeros_like(n_values), where=m_values > 0)
    mean_m = float(m_values.mean())
    return OverlapReport(
        N=float(n_values.mean()),
        M=mean_m,
        hit_rate=float(n_values.mean() / mean_m) if mean_m > 0 else 0.0,
        repetitions=len(ours_runs),
        N_max=float(n_values.max()),
        M_max=float(m_values.max()),
        hit_rate_max=float(rates.max()),
        hit_rate_defined=mean_m > 0,
    )


# --- EXPERIMENTS ---

def window_count(d: int, window: int) -> int:
    return -(-d // window)


def _repetition_runs(net, data, epsilon, window, k, repetitions, seed, sample_fraction, restarts, top):
    n_windows = window_count(data.n_features, window)
    k = k or data.class_count * n_windows
    X_prime = explain_batch(net, data.samples, epsilon)
    scores = np.abs(X_prime - data.samples)
    runs = {"full": [], "g1": [], "g2": [], "reference": []}
    for rep, child in enumerate(np.random.SeedSequence(seed).spawn(repetitions)):
        rng = np.random.default_rng(child)
        size = max(1, int(round(sample_fraction * data.n_samples)))
        subset = np.sort(rng.choice(data.n_samples, size=size, replace=False))
        items = fragment_items(data.samples[subset], X_prime[subset], scores[subset], window, subset)
        concept_labels = [data.labels[it.source_sample_id] * n_windows + it.window for it in items]
        kmeans_seed = int(rng.integers(2**31))
        _, full = select_concepts(items, k, kmeans_seed, restarts, True, top)
        g1, g2 = ablation_controls(items, k, kmeans_seed, restarts, top)
        runs["full"].append(full)
        runs["g1"].append(g1)
        runs["g2"].append(g2)
        runs["reference"].append(reference_selection(items, concept_labels, top))
        logger.info("concept repetition %d/%d done", rep + 1, repetitions)
    return runs


def concept_experiment(
    net: DenseNet,
    data: LabeledDataset,
    epsilon: float,
    window: int,
    repetitions: int,
    seed: int,
    k: Optional[int] = None,
    sample_fraction: float = 0.5,
    restarts: int = DEFAULT_RESTARTS,
    top: int = TOP_ITEMS,
) -> Dict[str, OverlapReport]:
    """Overlap of the full pipeline and both ablations against the known concepts.

    Every repetition draws a random subset of samples; the known concept of a
    fragment is (class, window).
    """
    runs = _repetition_runs(net, data, epsilon, window, k, repetitions, seed, sample_fraction, restarts, top)
    return {name: overlap_metrics(runs[name], runs["reference"]) for name in ("full", "g1", "g2")}


def concept_table(reports: Dict[str, OverlapReport]) -> pd.DataFrame:
    return pd.DataFrame([{"method": name, **report.as_row()} for name, report in reports.items()])


def epsilon_sweep(
    net: DenseNet,
    data: LabeledDataset,
    epsilons: Sequence[float],
    window: int,
    repetitions: int,
    seed: int,
    k: Optional[int] = None,
    sample_fraction: float = 0.5,
    restarts: int = DEFAULT_RESTARTS,
    top: int = TOP_ITEMS,
) -> Tuple[pd.DataFrame, float]:
    """N, M and N/M of the full pipeline per epsilon, and the Spearman trend of N over epsilon."""
    rows = []
    for epsilon in epsilons:
        runs = _repetition_runs(net, data, epsilon, window, k, repetitions, seed, sample_fraction, restarts, top)
        report = overlap_metrics(runs["full"], runs["reference"])
        rows.append({"epsilon": float(epsilon), **report.as_row()})
    frame = pd.DataFrame(rows)
    rho = spearmanr(frame["epsilon"], frame["N"])[0] if len(frame) > 1 else 0.0
    # a flat N has no trend
    trend = 0.0 if rho is None or np.isnan(rho) else float(rho)
    return frame, trend
