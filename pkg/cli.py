"""Command-line entry point: one subcommand per experiment.

Every run writes its CSV tables, SVG plots and a manifest into ``--out``.
Failures exit nonzero with one JSON line on stderr.
"""
import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from concepts import concept_experiment, concept_table, epsilon_sweep
from data_io import CONCEPT_BLOCKS, DatasetSplit, generate_synthetic, load_dataset, split_dataset
from errors import FreqXError, RejectedInputError
from eval_games import (
    DELETE_LEAST,
    DELETE_MOST,
    FLIP_RATE,
    FREQUENCY,
    INSERT_MOST,
    TIME,
    random_attributions,
    run_game,
)
from fed_contrib import fed_experiment, topk_retrain_experiment
from freqx import attribution_from_transform, attributions_for, explain_sample
from nn_core import DenseNet, accuracy, build_net, load_checkpoint, model_hash, save_checkpoint, train
from reports import LinePlot, emit_report, write_manifest
from run_config import EXPERIMENTS, SEED_STREAMS, RunConfig, build_config, derive_seed, load_config_file
from spectral import verify_theorem1

logger = logging.getLogger("freqx")

# --- CONFIGURATION ---
CHECKPOINT_FILE = "model.json"
EXPLANATIONS_FILE = "explanations.json"


# --- SHARED STEPS ---

def seeds_for(cfg: RunConfig) -> Dict[str, int]:
    seeds = {name: derive_seed(cfg.seed, name) for name in SEED_STREAMS}
    seeds["root"] = cfg.seed
    return seeds


def load_split(cfg: RunConfig, path: Optional[str] = None, default_kind: Optional[str] = None) -> DatasetSplit:
    """A CSV dataset when one is configured, otherwise the configured synthetic data."""
    path = path or cfg.dataset
    if path:
        return load_dataset(path, cfg.dataset_config(), derive_seed(cfg.seed, "split"))
    spec = cfg.synthetic_spec()
    if default_kind and "kind" not in cfg.synthetic:
        spec = dataclasses.replace(spec, kind=default_kind)
    data = generate_synthetic(spec, derive_seed(cfg.seed, "data"))
    return split_dataset(data, cfg.test_fraction, derive_seed(cfg.seed, "split"))


def fit_model(cfg: RunConfig, split: DatasetSplit, history: Optional[List[dict]] = None) -> DenseNet:
    net = build_net(split.train.n_features, split.train.class_count, cfg.net_config(), derive_seed(cfg.seed, "init"))

    def record(epoch, trained, loss):
        if history is not None:
            history.append({
                "epoch": epoch + 1,
                "loss": loss,
                "train_accuracy": accuracy(trained, split.train),
                "test_accuracy": accuracy(trained, split.test),
            })

    return train(net, split.train, cfg.train_config(), on_epoch=record)


def obtain_model(cfg: RunConfig, split: DatasetSplit) -> DenseNet:
    """The configured checkpoint if it exists, otherwise a freshly trained net."""
    if cfg.checkpoint and os.path.exists(cfg.checkpoint):
        net = load_checkpoint(cfg.checkpoint)
        if net.input_dim != split.train.n_features:
            raise RejectedInputError(
                f"checkpoint expects {net.input_dim} features, dataset has {split.train.n_features}"
            )
        return net
    return fit_model(cfg, split)


def game_samples(cfg: RunConfig, split: DatasetSplit) -> np.ndarray:
    return split.test.samples[: cfg.samples]


# --- SUBCOMMANDS ---

def cmd_train(cfg: RunConfig):
    split = load_split(cfg)
    history = []
    net = fit_model(cfg, split, history)
    path = cfg.checkpoint or os.path.join(cfg.out, CHECKPOINT_FILE)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    save_checkpoint(net, path)
    frame = pd.DataFrame(history, columns=["epoch", "loss", "train_accuracy", "test_accuracy"])
    plots = {"training": LinePlot(frame, "epoch", ["train_accuracy", "test_accuracy"], "Training", ylabel="accuracy")}
    return {"training": frame}, plots, net


def cmd_explain(cfg: RunConfig):
    split = load_split(cfg)
    net = obtain_model(cfg, split)
    digest = model_hash(net)
    rows, records = [], []
    for sample_id, x in enumerate(game_samples(cfg, split)):
        record = explain_sample(net, x, cfg.epsilon)
        attribution = attribution_from_transform(record)
        records.append(record.to_dict(digest, sample_id))
        rank_of = np.empty_like(attribution.ranking)
        rank_of[attribution.ranking] = np.arange(attribution.ranking.size)
        for j, score in enumerate(attribution.scores):
            rows.append({"sample_id": sample_id, "feature": split.test.feature_names[j], "score": score, "rank": int(rank_of[j])})
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, EXPLANATIONS_FILE), "w") as f:
        json.dump(records, f, indent=1)
    frame = pd.DataFrame(rows, columns=["sample_id", "feature", "score", "rank"])
    return {"attributions": frame}, {}, net


def _games(cfg: RunConfig, domain: str, modes):
    split = load_split(cfg)
    net = obtain_model(cfg, split)
    X = game_samples(cfg, split)
    methods = {
        "freqx": attributions_for(net, X, cfg.epsilon),
        "random": random_attributions(X.shape[0], X.shape[1], derive_seed(cfg.seed, "random-control")),
    }
    curves, summary, plots = [], [], {}
    for mode in modes:
        wide = None
        for method, attributions in methods.items():
            curve = run_game(net, X, attributions, cfg.schedule, mode, domain)
            frame = curve.to_frame()
            curves.append(frame.assign(method=method, mode=mode))
            summary.append({"method": method, "mode": mode, "auc_prob": curve.auc(), "auc_flip": curve.auc(FLIP_RATE)})
            column = frame[["fraction", "mean_prob"]].rename(columns={"mean_prob": method})
            wide = column if wide is None else wide.merge(column, on="fraction")
        plots[f"{domain}_{mode}"] = LinePlot(wide, "fraction", list(methods), f"{domain} / {mode}", "fraction", "class probability")
    table = pd.concat(curves, ignore_index=True)[["method", "mode", "fraction", "mean_prob", "flip_rate"]]
    return {f"{domain}_curves": table, f"{domain}_auc": pd.DataFrame(summary)}, plots, net


def cmd_delins(cfg: RunConfig):
    return _games(cfg, TIME, (DELETE_MOST, DELETE_LEAST, INSERT_MOST))


def cmd_freqdig(cfg: RunConfig):
    return _games(cfg, FREQUENCY, (DELETE_MOST, DELETE_LEAST, INSERT_MOST))


def cmd_concepts(cfg: RunConfig):
    split = load_split(cfg, default_kind=CONCEPT_BLOCKS)
    net = obtain_model(cfg, split)
    kmeans_seed = derive_seed(cfg.seed, "kmeans")
    reports = concept_experiment(net, split.test, cfg.epsilon, cfg.window, cfg.repetitions, kmeans_seed)
    sweep, trend = epsilon_sweep(net, split.test, cfg.epsilons, cfg.window, cfg.sweep_repetitions, kmeans_seed)
    sweep["spearman_n"] = trend
    plots = {"epsilon_sweep": LinePlot(sweep, "epsilon", ["N", "M"], "Overlap over epsilon", "epsilon", "overlap")}
    return {"concepts": concept_table(reports), "epsilon_sweep": sweep}, plots, net


def cmd_fed_step1(cfg: RunConfig):
    split = load_split(cfg)
    seeds = [derive_seed(cfg.seed, f"repetition-{r}") for r in range(cfg.repetitions)]
    result = topk_retrain_experiment(split, cfg.top_k, seeds, cfg.epsilon, cfg.net_config(), cfg.train_config())
    curves = result["curves"]
    selections = pd.DataFrame(
        [{"seed": s["seed"], "top_k": " ".join(map(str, s["top_k"])), "random_k": " ".join(map(str, s["random_k"]))}
         for s in result["selections"]]
    )
    plots = {"fed_step1": LinePlot(curves, "epoch", ["all", "top_k", "random_k"], "Retraining", ylabel="test accuracy")}
    return {"fed_step1": curves, "fed_step1_selections": selections}, plots, None


def cmd_fed_step2(cfg: RunConfig):
    if cfg.dataset:
        paths = [p.strip() for p in cfg.dataset.split(",") if p.strip()]
        datasets = {os.path.splitext(os.path.basename(p))[0]: load_split(cfg, p) for p in paths}
    else:
        datasets = {"planted_signal": load_split(cfg)}
    table = fed_experiment(
        datasets, cfg.repetitions, derive_seed(cfg.seed, "partition"), cfg.epsilon, cfg.clients,
        cfg.net_config(), cfg.train_config(),
    )
    return {"fed_step2": table}, {}, None


def cmd_verify_theory(cfg: RunConfig):
    report = verify_theorem1(cfg.trials, derive_seed(cfg.seed, "theory"))
    rows = [{"bias_mode": mode, **counts} for mode, counts in sorted(report.by_mode.items())]
    rows.append({
        "bias_mode": "total", "pass": report.passed, "fail": report.failed,
        "degenerate": report.skipped_degenerate, "inactive": report.skipped_inactive,
    })
    frame = pd.DataFrame(rows, columns=["bias_mode", "pass", "fail", "degenerate", "inactive"])
    frame["bound_violations"] = report.bound_violations
    if report.witness is not None:
        logger.warning("theorem violated, witness: %s", json.dumps(report.witness))
    return {"theory": frame}, {}, None, report.ok


COMMANDS = {
    "train": cmd_train,
    "explain": cmd_explain,
    "delins": cmd_delins,
    "freqdig": cmd_freqdig,
    "concepts": cmd_concepts,
    "fed-step1": cmd_fed_step1,
    "fed-step2": cmd_fed_step2,
    "verify-theory": cmd_verify_theory,
}


# --- ARGUMENTS ---

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON run configuration; flags override its values")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--epsilon", type=float)
    shared.add_argument("--out")
    shared.add_argument("--dataset", help="CSV path (comma-separated list for fed-step2)")
    shared.add_argument("--label-column", dest="label_column")
    shared.add_argument("--checkpoint")
    shared.add_argument("--epochs", type=int)
    shared.add_argument("--samples", type=int)
    shared.add_argument("--repetitions", type=int)
    shared.add_argument("--trials", type=int)
    shared.add_argument("--allow-zero-epsilon", dest="allow_zero_epsilon", action="store_true", default=None)
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="freqx", description="Layer-wise transformation explanations and their evaluation")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[shared])
    return parser


OVERRIDE_KEYS = (
    "seed", "epsilon", "out", "dataset", "label_column", "checkpoint",
    "epochs", "samples", "repetitions", "trials", "allow_zero_epsilon",
)


def run(cfg: RunConfig) -> bool:
    result = COMMANDS[cfg.experiment](cfg)
    tables, plots, net = result[:3]
    ok = result[3] if len(result) > 3 else True
    files = emit_report(tables, cfg.out, plots)
    write_manifest(cfg.out, cfg.to_dict(), seeds_for(cfg), model_hash(net) if net is not None else "", files)
    return ok


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        overrides = {key: getattr(args, key) for key in OVERRIDE_KEYS}
        cfg = build_config(args.experiment, load_config_file(args.config), overrides)
        ok = run(cfg)
    except (FreqXError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
