"""Run configuration: one JSON file plus command-line overrides, and named seed streams."""
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from data_io import DatasetConfig, SyntheticSpec
from errors import ConfigError
from freqx import EPSILON_CONCEPTS, EPSILON_FAITHFULNESS, EPSILON_FEDERATED
from nn_core import NetConfig, TrainConfig

# --- CONFIGURATION ---
EXPERIMENTS = ("train", "explain", "freqdig", "delins", "concepts", "fed-step1", "fed-step2", "verify-theory")

DEFAULT_EPSILON = {
    "train": EPSILON_FAITHFULNESS,
    "explain": EPSILON_FAITHFULNESS,
    "freqdig": EPSILON_FAITHFULNESS,
    "delins": EPSILON_FAITHFULNESS,
    "concepts": EPSILON_CONCEPTS,
    "fed-step1": EPSILON_FEDERATED,
    "fed-step2": EPSILON_FEDERATED,
    "verify-theory": EPSILON_FAITHFULNESS,
}

DEFAULT_REPETITIONS = {
    "concepts": 15,
    "fed-step1": 3,
    "fed-step2": 20,
}

SEED_STREAMS = ("data", "split", "init", "train", "partition", "kmeans", "random-control", "theory")


@dataclass
class RunConfig:
    experiment: str
    seed: int = 0
    epsilon: Optional[float] = None
    allow_zero_epsilon: bool = False
    dataset: Optional[str] = None  # CSV path; synthetic data when absent
    label_column: str = "label"
    categorical_columns: Tuple[str, ...] = ()
    test_fraction: float = 0.25
    synthetic: dict = field(default_factory=dict)  # SyntheticSpec fields
    checkpoint: Optional[str] = None
    out: str = "reports"
    hidden: Tuple[int, ...] = (64, 64)
    activation: str = "relu"
    epochs: int = 60
    learning_rate: float = 0.1
    batch_size: int = 32
    schedule: Tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(11))
    samples: int = 100  # samples explained / perturbed per game
    repetitions: Optional[int] = None
    sweep_repetitions: int = 5
    top_k: int = 10
    clients: int = 3
    window: int = 4
    epsilons: Tuple[float, ...] = (1.0, 10.0, 100.0, 1000.0)
    trials: int = 1000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.seed is None:
            raise ConfigError("a seed is required")
        if self.epsilon is None:
            self.epsilon = DEFAULT_EPSILON[self.experiment]
        if self.repetitions is None:
            self.repetitions = DEFAULT_REPETITIONS.get(self.experiment, 1)
        if self.epsilon < 0 or (self.epsilon == 0 and not (self.experiment == "explain" and self.allow_zero_epsilon)):
            raise ConfigError("epsilon must be positive (zero only for explain with --allow-zero-epsilon)")
        self.categorical_columns = tuple(self.categorical_columns)
        self.hidden = tuple(int(h) for h in self.hidden)
        self.schedule = tuple(float(f) for f in self.schedule)
        self.epsilons = tuple(float(e) for e in self.epsilons)
        unknown = set(self.synthetic) - {f.name for f in dataclasses.fields(SyntheticSpec)}
        if unknown:
            raise ConfigError(f"unknown synthetic keys: {sorted(unknown)}")

    # --- derived configs ---
    def net_config(self) -> NetConfig:
        return NetConfig(hidden=self.hidden, activation=self.activation)

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seed=derive_seed(self.seed, "train") if seed is None else seed,
        )

    def dataset_config(self) -> DatasetConfig:
        return DatasetConfig(self.label_column, self.categorical_columns, self.test_fraction)

    def synthetic_spec(self) -> SyntheticSpec:
        values = dict(self.synthetic)
        if "informative_indices" in values:
            values["informative_indices"] = tuple(values["informative_indices"])
        return SyntheticSpec(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def derive_seed(root_seed: int, stream: str) -> int:
    """Independent 32-bit seed for a named sub-stream of the root seed."""
    name_key = int.from_bytes(hashlib.sha256(stream.encode()).digest()[:8], "little")
    return int(np.random.SeedSequence([int(root_seed), name_key]).generate_state(1)[0])


def load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} not found")
    with open(path, "r") as f:
        try:
            values = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return values


def build_config(experiment: str, file_values: dict, overrides: dict) -> RunConfig:
    """File values first, then every override that is not None."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    merged = {k: v for k, v in file_values.items() if k != "experiment"}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(experiment=experiment, **merged)
    except TypeError as e:
        raise ConfigError(str(e)) from None
