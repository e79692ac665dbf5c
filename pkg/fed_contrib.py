"""Global feature importance from explanations, and client contribution in vertical FL.

Clients hold disjoint feature subsets of the same samples. A client's
contribution is the summed importance of its features; it is compared with
exact Shapley values computed by training one model per coalition.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from data_io import DatasetSplit
from errors import RejectedInputError
from freqx import EPSILON_FEDERATED, explain_batch, rank_descending
from nn_core import DenseNet, LabeledDataset, NetConfig, TrainConfig, accuracy, build_net, train

logger = logging.getLogger(__name__)

# --- CONFIGURATION ---
MAX_SHAPLEY_CLIENTS = 6
DEFAULT_CLIENTS = 3
DEFAULT_TOP_K = 10


@dataclass
class FeatureImportance:
    per_class_mean_delta: np.ndarray  # class x feature
    scores: np.ndarray
    top_k: np.ndarray


@dataclass
class ClientPartition:
    clients: List[List[int]]
    seed: int

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    def coalition_features(self, mask: int) -> List[int]:
        return sorted(j for i, client in enumerate(self.clients) if mask >> i & 1 for j in client)


@dataclass
class ContributionReport:
    ours_scores: np.ndarray
    ours_rank: np.ndarray
    shapley_values: np.ndarray
    shapley_rank: np.ndarray
    overlap_count: int


# --- FEATURE IMPORTANCE ---

def importance_scores(per_class_mean_delta) -> np.ndarray:
    """s_j = |prod_c v_cj|."""
    return np.abs(np.prod(np.asarray(per_class_mean_delta, dtype=np.float64), axis=0))


def aggregate_importance(net: DenseNet, data: LabeledDataset, epsilon: float = EPSILON_FEDERATED, k: int = DEFAULT_TOP_K) -> FeatureImportance:
    """Per-class mean transformation vectors and the feature scores they imply."""
    deltas = explain_batch(net, data.samples, epsilon) - data.samples
    per_class = []
    for c in range(data.class_count):
        members = data.labels == c
        if not members.any():
            raise RejectedInputError(f"class {c} has no samples")
        per_class.append(deltas[members].mean(axis=0))
    per_class = np.array(per_class)
    scores = importance_scores(per_class)
    return FeatureImportance(per_class, scores, rank_descending(scores)[:k])


# --- PARTITIONS ---

def partition_features(
    n_features: int,
    n_clients: int,
    seed: int,
    feature_groups: Optional[Sequence[Sequence[int]]] = None,
) -> ClientPartition:
    """Random, even allocation of feature groups to clients; groups are never split."""
    if n_clients < 1 or n_clients > n_features:
        raise RejectedInputError(f"cannot spread {n_features} features over {n_clients} clients")
    groups = [list(g) for g in (feature_groups or [[j] for j in range(n_features)])]
    rng = np.random.default_rng(seed)
    clients = [[] for _ in range(n_clients)]
    for g in rng.permutation(len(groups)):
        smallest = min(range(n_clients), key=lambda i: (len(clients[i]), i))
        clients[smallest].extend(groups[g])
    return ClientPartition([sorted(c) for c in clients], seed)


# --- TRAINING HELPERS ---

def train_fresh(data: LabeledDataset, net_config: NetConfig, train_config: TrainConfig, init_seed: int, on_epoch=None) -> DenseNet:
    net = build_net(data.n_features, data.class_count, net_config, seed=init_seed)
    return train(net, data, train_config, on_epoch=on_epoch)


def majority_accuracy(train_data: LabeledDataset, test_data: LabeledDataset) -> float:
    majority = int(np.argmax(np.bincount(train_data.labels, minlength=train_data.class_count)))
    return float(np.mean(test_data.labels == majority))


def topk_retrain_experiment(
    split: DatasetSplit,
    k: int = DEFAULT_TOP_K,
    seeds: Sequence[int] = (0, 1, 2),
    epsilon: float = EPSILON_FEDERATED,
    net_config: NetConfig = NetConfig(),
    train_config: TrainConfig = TrainConfig(),
) -> Dict[str, object]:
    """Per-epoch test accuracy with all features, the top-k by importance, and a random k.

    Selected columns are kept in ascending index order, so k == d gives two
    identical retraining runs.
    """
    d = split.train.n_features
    if not 1 <= k <= d:
        raise RejectedInputError(f"k={k} must lie in [1, {d}]")
    runs = {"all": [], "top_k": [], "random_k": []}
    selections = []

    def curve_into(store, test_view):
        return lambda epoch, net, loss: store.append(accuracy(net, test_view))

    for seed in seeds:
        init_seed, train_seed, pick_seed = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(3))
        config = TrainConfig(train_config.epochs, train_config.learning_rate, train_config.batch_size, train_seed)

        curve = []
        pretrained = train_fresh(split.train, net_config, config, init_seed, curve_into(curve, split.test))
        runs["all"].append(curve)

        importance = aggregate_importance(pretrained, split.train, epsilon, k)
        top = sorted(int(j) for j in importance.top_k)
        rand = sorted(int(j) for j in np.random.default_rng(pick_seed).choice(d, size=k, replace=False))
        selections.append({"seed": seed, "top_k": top, "random_k": rand})

        for name, chosen in (("top_k", top), ("random_k", rand)):
            curve = []
            view = curve_into(curve, split.test.select_features(chosen))
            train_fresh(split.train.select_features(chosen), net_config, config, init_seed, view)
            runs[name].append(curve)
        logger.info("top-k retrain seed %s: top=%s", seed, top)

    epochs = np.arange(1, train_config.epochs + 1)
    frame = pd.DataFrame({"epoch": epochs})
    for name, curves in runs.items():
        frame[name] = np.mean(np.array(curves), axis=0) if curves and train_config.epochs else np.zeros(len(epochs))
    return {"curves": frame, "selections": selections}


# --- SHAPLEY ORACLE ---

def shapley_from_values(values: Mapping[int, float], n_players: int) -> np.ndarray:
    """Exact Shapley values from a coalition value table keyed by bitmask."""
    n_fact = math.factorial(n_players)
    phi = np.zeros(n_players)
    for i in range(n_players):
        for mask in range(1 << n_players):
            if mask >> i & 1:
                continue
            size = bin(mask).count("1")
            weight = math.factorial(size) * math.factorial(n_players - size - 1) / n_fact
            phi[i] += weight * (values[mask | 1 << i] - values[mask])
    return phi


def coalition_values(
    split: DatasetSplit,
    partition: ClientPartition,
    trainer: Optional[Callable[[LabeledDataset, LabeledDataset], float]] = None,
    net_config: NetConfig = NetConfig(),
    train_config: TrainConfig = TrainConfig(),
    init_seed: int = 0,
) -> Dict[int, float]:
    """Held-out value of every coalition; the empty coalition scores the majority class."""
    if partition.n_clients > MAX_SHAPLEY_CLIENTS:
        raise RejectedInputError(
            f"{partition.n_clients} clients exceed the exhaustive budget of {MAX_SHAPLEY_CLIENTS}"
        )
    if trainer is None:
        def trainer(train_data, test_data):
            return accuracy(train_fresh(train_data, net_config, train_config, init_seed), test_data)

    values = {0: majority_accuracy(split.train, split.test)}
    for mask in range(1, 1 << partition.n_clients):
        features = partition.coalition_features(mask)
        values[mask] = float(trainer(split.train.select_features(features), split.test.select_features(features)))
        logger.debug("coalition %s value %.4f", format(mask, "b"), values[mask])
    return values


def shapley_exact(
    split: DatasetSplit,
    partition: ClientPartition,
    trainer: Optional[Callable[[LabeledDataset, LabeledDataset], float]] = None,
    net_config: NetConfig = NetConfig(),
    train_config: TrainConfig = TrainConfig(),
    init_seed: int = 0,
) -> np.ndarray:
    values = coalition_values(split, partition, trainer, net_config, train_config, init_seed)
    return shapley_from_values(values, partition.n_clients)


# --- COMPARISON ---

def contribution_compare(importance: FeatureImportance, partition: ClientPartition, shapley) -> ContributionReport:
    """Client scores are summed feature scores; overlap counts positions where both rankings agree."""
    ours = np.array([importance.scores[client].sum() if client else 0.0 for client in partition.clients])
    shapley = np.asarray(shapley, dtype=np.float64)
    ours_rank = rank_descending(ours)
    shapley_rank = rank_descending(shapley)
    return ContributionReport(
        ours_scores=ours,
        ours_rank=ours_rank,
        shapley_values=shapley,
        shapley_rank=shapley_rank,
        overlap_count=int(np.sum(ours_rank == shapley_rank)),
    )


def permutation_overlap_baseline(n: int = DEFAULT_CLIENTS) -> float:
    """Mean number of agreeing positions over every pair of rankings of n clients."""
    perms = list(itertools.permutations(range(n)))
    total = sum(sum(a == b for a, b in zip(p, q)) for p in perms for q in perms)
    return total / len(perms) ** 2


def fed_experiment(
    datasets: Mapping[str, DatasetSplit],
    repetitions: int = 20,
    seed: int = 0,
    epsilon: float = EPSILON_FEDERATED,
    n_clients: int = DEFAULT_CLIENTS,
    net_config: NetConfig = NetConfig(),
    train_config: TrainConfig = TrainConfig(),
) -> pd.DataFrame:
    """Mean rank overlap with the Shapley oracle per dataset, next to the random-ranking baseline."""
    columns = ["dataset", "ours", "baseline", "repetitions"]
    if repetitions <= 0 or not datasets:
        return pd.DataFrame(columns=columns)
    baseline = permutation_overlap_baseline(n_clients)
    rows = []
    for name in datasets:
        split = datasets[name]
        root = np.random.SeedSequence([seed, len(rows)])
        pretrain_seq, *rep_seqs = root.spawn(repetitions + 1)
        init_seed, train_seed = (int(v) for v in pretrain_seq.generate_state(2))
        config = TrainConfig(train_config.epochs, train_config.learning_rate, train_config.batch_size, train_seed)
        net = train_fresh(split.train, net_config, config, init_seed)
        importance = aggregate_importance(net, split.train, epsilon)

        overlaps = []
        for rep, seq in enumerate(rep_seqs):
            part_seed, coalition_seed = (int(v) for v in seq.generate_state(2))
            partition = partition_features(split.train.n_features, n_clients, part_seed, split.train.feature_groups)
            shapley = shapley_exact(split, partition, None, net_config, config, coalition_seed)
            report = contribution_compare(importance, partition, shapley)
            overlaps.append(report.overlap_count)
            logger.info("%s repetition %d/%d overlap %d", name, rep + 1, repetitions, report.overlap_count)
        rows.append({"dataset": name, "ours": float(np.mean(overlaps)), "baseline": baseline, "repetitions": repetitions})

    frame = pd.DataFrame(rows, columns=columns)
    average = {"dataset": "Average", "ours": frame["ours"].mean(), "baseline": baseline, "repetitions": repetitions}
    return pd.concat([frame, pd.DataFrame([average])], ignore_index=True)
