import json

import pandas as pd
import pytest
from typer.testing import CliRunner

from main import app
from tests.helpers import pointer_bundle
from utils.data_io import PointerTaskSpec, bundle_to_document, pointer_task_layout, save_bundle

runner = CliRunner()

SYNTH_ARGS = ["--image-size", "16x16", "--classes", "4", "--targets", "4", "--noise-std", "0",
              "--per-class", "5", "--seed", "3"]
FAST_TRAIN = ["--samples-per-image", "2", "--epochs", "3"]


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / "pointer"
    result = runner.invoke(app, ["synth", *SYNTH_ARGS, "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def train_model(data, out, budget, seed=0):
    result = runner.invoke(app, ["train", "--data", str(data), "--budget", str(budget), "--seed", str(seed),
                                 "--out", str(out), *FAST_TRAIN])
    assert result.exit_code == 0, result.output
    return out


def test_synth_writes_manifests(dataset_dir):
    train = (dataset_dir / "train.tsv").read_text().splitlines()
    test = (dataset_dir / "test.tsv").read_text().splitlines()
    assert (len(train), len(test)) == (16, 4)
    assert all(line.startswith("images/") for line in train + test)
    assert len(list((dataset_dir / "images").glob("*.pgm"))) == 20


def test_train_is_reproducible(dataset_dir, tmp_path):
    first = train_model(dataset_dir, tmp_path / "a.json", 3, seed=4)
    second = train_model(dataset_dir, tmp_path / "b.json", 3, seed=4)
    assert first.read_bytes() == second.read_bytes()
    log = (tmp_path / "a.json.log").read_text()
    assert "[f_theta]" in log
    assert log.index("pi2") < log.index("pi1")


def test_train_rejects_budget_above_grid(dataset_dir, tmp_path):
    result = runner.invoke(app, ["train", "--data", str(dataset_dir), "--budget", "17",
                                 "--out", str(tmp_path / "m.json")])
    assert result.exit_code == 1
    assert not (tmp_path / "m.json").exists()


def test_train_missing_manifest(tmp_path):
    result = runner.invoke(app, ["train", "--data", str(tmp_path), "--out", str(tmp_path / "m.json")])
    assert result.exit_code == 1


def test_eval_perfect_policy(dataset_dir, tmp_path):
    spec = PointerTaskSpec(grid=(4, 4), image_size=(16, 16), n_classes=4, n_targets=4, noise_std=0.0,
                           per_class=5, seed=3)
    model = tmp_path / "perfect.json"
    save_bundle(pointer_bundle(pointer_task_layout(spec), (4, 4), 8, 4), model)

    predictions = tmp_path / "predictions.csv"
    result = runner.invoke(app, ["eval", "--model", str(model), "--data", str(dataset_dir), "--per-class",
                                 "--predictions", str(predictions)])
    assert result.exit_code == 0, result.output
    assert "accuracy=1.000000 (4/4)" in result.output
    assert "balanced_accuracy=" in result.output

    frame = pd.read_csv(predictions)
    assert len(frame) == 4
    assert (frame["true_label"] == frame["predicted_label"]).all()
    assert frame["correct"].sum() == 4


def test_eval_rejects_corrupt_model(dataset_dir, tmp_path):
    model = tmp_path / "broken.json"
    model.write_text('{"version": 1, "grid": [4, 4')
    result = runner.invoke(app, ["eval", "--model", str(model), "--data", str(dataset_dir)])
    assert result.exit_code == 1


def test_eval_rejects_model_with_bad_grid(dataset_dir, tmp_path):
    spec = PointerTaskSpec(grid=(4, 4), image_size=(16, 16), n_classes=4, n_targets=4, noise_std=0.0,
                           per_class=5, seed=3)
    document = bundle_to_document(pointer_bundle(pointer_task_layout(spec), (4, 4), 8, 4))
    document["grid"] = [4]
    model = tmp_path / "short_grid.json"
    model.write_text(json.dumps(document))
    result = runner.invoke(app, ["eval", "--model", str(model), "--data", str(dataset_dir)])
    assert result.exit_code == 1
    assert not isinstance(result.exception, IndexError)


def test_sweep_full_budget_row(dataset_dir, tmp_path):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(app, ["sweep", "--data", str(dataset_dir), "--budgets", "1,16", "--trials", "2",
                                 "--bins", "4", "--out", str(out), *FAST_TRAIN])
    assert result.exit_code == 0, result.output

    frame = pd.read_csv(out)
    assert list(frame.columns) == ["budget", "learned_accuracy", "learned_std", "random_mean", "random_std",
                                   "full_accuracy", "mean_phi_calls", "mean_wall_time", "speedup"]
    full = frame[frame["budget"] == 16].iloc[0]
    assert full["learned_accuracy"] == full["random_mean"]
    assert full["mean_phi_calls"] == 16
    assert frame[frame["budget"] == 1].iloc[0]["mean_phi_calls"] == 1


def test_sweep_rejects_bad_budget_list(dataset_dir):
    result = runner.invoke(app, ["sweep", "--data", str(dataset_dir), "--budgets", "2,x"])
    assert result.exit_code == 1


def test_trajectories_budget_one_has_no_transitions(dataset_dir, tmp_path):
    model = train_model(dataset_dir, tmp_path / "b1.json", 1)
    out = tmp_path / "traj"
    result = runner.invoke(app, ["trajectories", "--model", str(model), "--data", str(dataset_dir),
                                 "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert pd.read_csv(out / "transitions.csv").empty
    steps = pd.read_csv(out / "step_frequencies.csv")
    assert steps[steps["region"] == 5]["count"].item() == 4


def test_trajectories_start_region_out_degree(dataset_dir, tmp_path):
    model = train_model(dataset_dir, tmp_path / "b3.json", 3)
    out = tmp_path / "traj"
    result = runner.invoke(app, ["trajectories", "--model", str(model), "--data", str(dataset_dir),
                                 "--out", str(out)])
    assert result.exit_code == 0, result.output
    transitions = pd.read_csv(out / "transitions.csv")
    assert transitions[transitions["source"] == 5]["count"].sum() == 4
    assert transitions["count"].sum() == 4 * 2
    regions = pd.read_csv(out / "region_frequencies.csv")
    assert regions.loc[1, "col1"] == 1.0
