"""Dataset loading, standardization and synthetic generators."""
import logging
import os
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
import pandas as pd

from errors import DatasetMissingError, DatasetParseError, RejectedInputError
from nn_core import LabeledDataset

logger = logging.getLogger(__name__)

# --- CONFIGURATION ---
TWO_FEATURE_BLOBS = "two_feature_blobs"
PLANTED_SIGNAL = "planted_signal"
CONCEPT_BLOCKS = "concept_blocks"
SYNTHETIC_KINDS = (TWO_FEATURE_BLOBS, PLANTED_SIGNAL, CONCEPT_BLOCKS)

UCI_SOURCES = {
    "diabetes": "https://archive.ics.uci.edu/dataset/34/diabetes",
    "phishing": "https://archive.ics.uci.edu/dataset/327/phishing+websites",
    "bankmarketing": "https://archive.ics.uci.edu/dataset/222/bank+marketing",
    "spambase": "https://archive.ics.uci.edu/dataset/94/spambase",
}


@dataclass(frozen=True)
class DatasetConfig:
    label_column: str = "label"
    categorical_columns: Tuple[str, ...] = ()
    test_fraction: float = 0.25


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str = PLANTED_SIGNAL
    n: int = 600
    d: int = 50
    class_count: int = 2
    noise_sigma: float = 0.1
    informative_indices: Tuple[int, ...] = tuple(range(10))
    window: int = 4  # block width of concept_blocks


@dataclass
class DatasetSplit:
    train: LabeledDataset
    test: LabeledDataset
    mean: np.ndarray = field(default=None)
    std: np.ndarray = field(default=None)


# --- CSV ---

def _missing_message(path: str) -> str:
    name = os.path.splitext(os.path.basename(path))[0].lower().replace("_", "").replace("-", "")
    source = UCI_SOURCES.get(name)
    hint = f" Download it from {source} and" if source else " Place the CSV there and"
    return (
        f"dataset file {path!r} not found.{hint} convert it to a CSV with a header row "
        "and an integer or categorical label column. No download is attempted."
    )


def _numeric_column(series: pd.Series, name: str) -> np.ndarray:
    values = pd.to_numeric(series, errors="coerce")
    bad = values.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 2  # header is line 1
        raise DatasetParseError(f"row {row}: column {name!r} holds non-numeric value {series.iloc[row - 2]!r}")
    return values.to_numpy(dtype=np.float64)


def read_labeled_csv(path, label_column: str = "label", categorical_columns: Sequence[str] = ()) -> LabeledDataset:
    """Parses a CSV exactly, one-hot encoding the declared categorical columns."""
    path = str(path)
    if not os.path.exists(path):
        raise DatasetMissingError(_missing_message(path))
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetParseError(f"{path}: {e}") from None
    if label_column not in df.columns:
        raise DatasetParseError(f"{path}: missing label column {label_column!r}")
    for col in categorical_columns:
        if col not in df.columns:
            raise DatasetParseError(f"{path}: missing categorical column {col!r}")

    columns, names, groups = [], [], []
    for col in df.columns:
        if col == label_column:
            continue
        if col in categorical_columns:
            dummies = pd.get_dummies(df[col].astype(str), prefix=col, dtype=np.float64)
            start = len(names)
            columns.append(dummies.to_numpy())
            names.extend(dummies.columns)
            groups.append(list(range(start, len(names))))
        else:
            columns.append(_numeric_column(df[col], col)[:, None])
            groups.append([len(names)])
            names.append(str(col))

    raw_labels = df[label_column]
    numeric = pd.to_numeric(raw_labels, errors="coerce")
    if numeric.notna().all() and np.all(numeric == np.round(numeric)):
        labels = numeric.to_numpy(dtype=np.int64)
        class_count = int(labels.max()) + 1 if labels.size else 0
    else:
        codes, _ = pd.factorize(raw_labels.astype(str), sort=True)
        labels, class_count = codes.astype(np.int64), int(codes.max()) + 1

    samples = np.hstack(columns) if columns else np.zeros((len(df), 0))
    try:
        return LabeledDataset(samples, labels, class_count, names, groups)
    except RejectedInputError as e:
        raise DatasetParseError(f"{path}: {e}") from None


def export_dataset(data: LabeledDataset, path, label_column: str = "label") -> None:
    df = pd.DataFrame(data.samples, columns=data.feature_names)
    df[label_column] = data.labels
    df.to_csv(path, index=False)


# --- SPLITS ---

def stratified_indices(labels, test_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-class seeded shuffle; every class with two or more samples lands on both sides."""
    if not 0.0 < test_fraction < 1.0:
        raise RejectedInputError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    train, test = [], []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        n_test = int(round(test_fraction * members.size))
        n_test = min(max(n_test, 1), members.size - 1) if members.size > 1 else 0
        test.extend(members[:n_test])
        train.extend(members[n_test:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))


def _subset(data: LabeledDataset, rows: np.ndarray, samples: np.ndarray) -> LabeledDataset:
    return LabeledDataset(samples, data.labels[rows], data.class_count, list(data.feature_names), data.feature_groups)


def split_dataset(data: LabeledDataset, test_fraction: float, seed: int) -> DatasetSplit:
    """Stratified split, z-scored with training statistics only; constant columns use a unit divisor."""
    train_rows, test_rows = stratified_indices(data.labels, test_fraction, seed)
    train_x = data.samples[train_rows]
    mean = train_x.mean(axis=0)
    std = train_x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    try:
        return DatasetSplit(
            train=_subset(data, train_rows, (train_x - mean) / std),
            test=_subset(data, test_rows, (data.samples[test_rows] - mean) / std),
            mean=mean,
            std=std,
        )
    except RejectedInputError as e:
        raise DatasetParseError(f"empty class after splitting: {e}") from None


def load_dataset(path, config: DatasetConfig = DatasetConfig(), seed: int = 0) -> DatasetSplit:
    data = read_labeled_csv(path, config.label_column, config.categorical_columns)
    logger.info("loaded %s: %d samples, %d features, %d classes", path, data.n_samples, data.n_features, data.class_count)
    return split_dataset(data, config.test_fraction, seed)


# --- SYNTHETIC DATA ---

def _balanced_labels(n: int, class_count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(np.arange(n) % class_count)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> LabeledDataset:
    """Seeded synthetic datasets.

    two_feature_blobs: one Gaussian blob per class on a circle of radius 3 in 2-D.
    planted_signal: labels are the argmax of noisy linear logits over the
    informative features only.
    concept_blocks: every (class, block) pair has its own prototype pattern;
    samples are their class prototypes plus noise.
    """
    if spec.kind not in SYNTHETIC_KINDS:
        raise RejectedInputError(f"unknown synthetic kind {spec.kind!r}")
    if spec.class_count < 2 or spec.n < spec.class_count:
        raise RejectedInputError("need at least two classes and one sample per class")
    rng = np.random.default_rng(seed)

    if spec.kind == TWO_FEATURE_BLOBS:
        angles = 2 * np.pi * np.arange(spec.class_count) / spec.class_count + np.pi / 4
        centers = 3.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        labels = _balanced_labels(spec.n, spec.class_count, rng)
        samples = centers[labels] + spec.noise_sigma * rng.normal(size=(spec.n, 2))
        return LabeledDataset(samples, labels, spec.class_count, ["x0", "x1"])

    names = [f"x{j}" for j in range(spec.d)]

    if spec.kind == PLANTED_SIGNAL:
        informative = np.asarray(spec.informative_indices, dtype=np.int64)
        if spec.d < informative.size or np.any(informative < 0) or np.any(informative >= spec.d):
            raise RejectedInputError(f"informative indices must be a subset of [0, {spec.d})")
        samples = rng.normal(size=(spec.n, spec.d))
        weights = rng.normal(size=(informative.size, spec.class_count))
        logits = samples[:, informative] @ weights + spec.noise_sigma * rng.normal(size=(spec.n, spec.class_count))
        labels = np.argmax(logits, axis=1)
        return LabeledDataset(samples, labels, spec.class_count, names)

    n_blocks = -(-spec.d // spec.window)
    prototypes = rng.normal(size=(spec.class_count, n_blocks * spec.window))[:, :spec.d]
    labels = _balanced_labels(spec.n, spec.class_count, rng)
    samples = prototypes[labels] + spec.noise_sigma * rng.normal(size=(spec.n, spec.d))
    return LabeledDataset(samples, labels, spec.class_count, names)

