import json
import os

import numpy as np
import pandas as pd
import pytest

from cli import main
from reports import read_manifest

SMALL_RUN = ["--seed", "1", "--epochs", "2", "--samples", "5"]


def config_file(tmp_path, **values):
    values.setdefault("hidden", [6])
    values.setdefault("synthetic", {"n": 80, "d": 8, "informative_indices": [0, 1, 2]})
    path = tmp_path / "run.json"
    path.write_text(json.dumps(values))
    return str(path)


class TestCommands:
    def test_train_writes_checkpoint_and_manifest(self, tmp_path):
        out = tmp_path / "out"
        code = main(["train", "--config", config_file(tmp_path), "--out", str(out), *SMALL_RUN])
        assert code == 0
        assert os.path.exists(out / "model.json")
        training = pd.read_csv(out / "training.csv")
        assert list(training["epoch"]) == [1, 2]
        manifest = read_manifest(out)
        assert manifest["seeds"]["root"] == 1
        assert len(manifest["model_hash"]) == 64

    def test_explain_reuses_checkpoint(self, tmp_path):
        out = tmp_path / "out"
        cfg = config_file(tmp_path, checkpoint=str(tmp_path / "net.json"))
        assert main(["train", "--config", cfg, "--out", str(out), *SMALL_RUN]) == 0
        trained_hash = read_manifest(out)["model_hash"]
        assert main(["explain", "--config", cfg, "--out", str(out), *SMALL_RUN]) == 0
        assert read_manifest(out)["model_hash"] == trained_hash
        frame = pd.read_csv(out / "attributions.csv")
        assert set(frame["sample_id"]) == set(range(5))
        with open(out / "explanations.json") as f:
            assert len(json.load(f)) == 5

    @pytest.mark.parametrize("command, table", [("delins", "time_auc"), ("freqdig", "frequency_auc")])
    def test_games(self, tmp_path, command, table):
        out = tmp_path / "out"
        assert main([command, "--config", config_file(tmp_path), "--out", str(out), *SMALL_RUN]) == 0
        summary = pd.read_csv(out / f"{table}.csv")
        assert set(summary["method"]) == {"freqx", "random"}
        assert len(summary) == 6
        assert any(name.endswith(".svg") for name in os.listdir(out))

    def test_verify_theory(self, tmp_path):
        out = tmp_path / "out"
        assert main(["verify-theory", "--out", str(out), "--trials", "90"]) == 0
        theory = pd.read_csv(out / "theory.csv")
        total = theory[theory["bias_mode"] == "total"].iloc[0]
        assert total["fail"] == 0
        assert total["pass"] + total["degenerate"] + total["inactive"] == 90


class TestErrors:
    def test_zero_epsilon_needs_flag(self, tmp_path, capsys):
        code = main(["delins", "--epsilon", "0", "--out", str(tmp_path)])
        assert code == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "ConfigError"

    def test_missing_dataset(self, tmp_path, capsys):
        code = main(["train", "--dataset", str(tmp_path / "diabetes.csv"), "--out", str(tmp_path)])
        assert code == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "DatasetMissingError"
        assert "uci.edu" in error["message"]

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["cluster"])


def test_rerun_with_same_config_is_byte_identical(tmp_path):
    cfg = config_file(tmp_path)
    for name in ("a", "b"):
        assert main(["delins", "--config", cfg, "--out", str(tmp_path / name), *SMALL_RUN]) == 0
    tables = sorted(f for f in os.listdir(tmp_path / "a") if f.endswith(".csv"))
    assert tables == ["time_auc.csv", "time_curves.csv"]
    for name in tables:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.slow
class TestDefaultRuns:
    """Full-size runs with the shipped defaults on synthetic data."""

    def test_top_features_retrain_at_least_as_well(self, tmp_path):
        assert main(["fed-step1", "--out", str(tmp_path)]) == 0
        final = pd.read_csv(tmp_path / "fed_step1.csv").iloc[-1]
        assert final["top_k"] >= final["random_k"]
        selections = pd.read_csv(tmp_path / "fed_step1_selections.csv")
        assert len(selections) == 3
        for row in selections["top_k"]:
            assert sum(int(j) < 10 for j in str(row).split()) >= 8

    def test_client_ranking_beats_random_baseline(self, tmp_path):
        assert main(["fed-step2", "--out", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "fed_step2.csv").set_index("dataset")
        assert table.loc["planted_signal", "repetitions"] == 20
        assert table.loc["planted_signal", "ours"] > 1.0

    def test_concepts_beat_both_ablations(self, tmp_path):
        cfg = config_file(tmp_path, hidden=[64, 64], synthetic={}, epsilons=[1.0, 10.0, 100.0])
        assert main(["concepts", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
        concepts = pd.read_csv(tmp_path / "out" / "concepts.csv").set_index("method")
        assert concepts.loc["full", "repetitions"] == 15
        assert concepts.loc["full", "N"] > concepts.loc["g1", "N"]
        assert concepts.loc["full", "N"] > concepts.loc["g2", "N"]
        sweep = pd.read_csv(tmp_path / "out" / "epsilon_sweep.csv")
        assert list(sweep["epsilon"]) == [1.0, 10.0, 100.0]
        assert sweep["spearman_n"].iloc[0] >= 0.0

    def test_top_frequencies_flip_more_predictions(self, tmp_path):
        assert main(["freqdig", "--out", str(tmp_path)]) == 0
        curves = pd.read_csv(tmp_path / "frequency_curves.csv")
        at_tenth = curves[(curves["method"] == "freqx") & np.isclose(curves["fraction"], 0.1)].set_index("mode")
        assert at_tenth.loc["delete_most_important", "flip_rate"] > at_tenth.loc["delete_least_important", "flip_rate"]
