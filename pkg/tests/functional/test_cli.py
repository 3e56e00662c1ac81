import json
import math
import os
import re

import numpy as np
import pytest

from ddn.cli.main import run
from ddn.cli.manifest import MANIFEST_FILE, read_manifest
from ddn.data.dataset import read_dataset, read_metadata, read_table
from ddn.data.oracle import oracle_density
from ddn.data.rng import make_rng
from ddn.data.toy import EVAL_CONDITIONS, ToyTaskName, sample_toy
from ddn.model.checkpoint import load_checkpoint
from ddn.training.trainer import FINAL_CHECKPOINT, METRICS_FILE

FAST_TRAIN = ["--bins", "64", "--epochs", "2", "--batch-size", "64", "--no-timing"]


@pytest.fixture
def ring_data(tmp_path):
    path = str(tmp_path / "ring.csv")
    assert run(["generate", "--task", "elastic_ring", "--n", "200", "--seed", "1", "--out", path]) == 0
    return path


@pytest.fixture
def ring_model(tmp_path, ring_data):
    out = str(tmp_path / "ring_run")
    assert run(["train", "--data", ring_data, "--out", out, "--seed", "2"] + FAST_TRAIN) == 0
    return out


def test_generate(ring_data):
    dataset = read_dataset(ring_data)
    assert dataset.y.shape == (200, 2)
    assert read_metadata(ring_data)["task"] == "elastic_ring"
    manifest = read_manifest(f"{ring_data}.manifest.yml")
    assert manifest.command == "generate"
    assert manifest.seeds == {"data": 1}
    assert manifest.finished_at is not None


def test_generate_unknown_task(tmp_path):
    assert run(["generate", "--task", "spiral", "--out", str(tmp_path / "x.csv")]) == 2


def test_train_writes_artifacts(ring_model):
    assert os.path.exists(os.path.join(ring_model, FINAL_CHECKPOINT))
    lines = open(os.path.join(ring_model, METRICS_FILE), encoding="utf-8").read().splitlines()
    assert lines[0] == "epoch\tnll\tkl\ttotal\tseconds"
    assert len(lines) == 3
    manifest = read_manifest(ring_model)
    assert manifest.command == "train"
    assert manifest.config["model"]["bins_per_dim"] == 64
    assert manifest.config["train"]["epochs"] == 2
    assert manifest.seeds["model"] == 2
    checkpoint = load_checkpoint(os.path.join(ring_model, FINAL_CHECKPOINT))
    assert checkpoint.metadata["epoch"] == 2
    assert checkpoint.model.config.initial_length == 1


def test_replay_reproduces_the_checkpoint(ring_model):
    path = os.path.join(ring_model, FINAL_CHECKPOINT)
    with open(path, "rb") as f:
        original = f.read()
    metrics = open(os.path.join(ring_model, METRICS_FILE), encoding="utf-8").read()
    assert run(["replay", os.path.join(ring_model, MANIFEST_FILE)]) == 0
    with open(path, "rb") as f:
        assert f.read() == original
    assert open(os.path.join(ring_model, METRICS_FILE), encoding="utf-8").read() == metrics


def test_default_run_replays_byte_for_byte(tmp_path, ring_data):
    out = str(tmp_path / "untimed")
    argv = ["train", "--data", ring_data, "--out", out, "--seed", "4", "--bins", "64", "--epochs", "2", "--batch-size", "64"]
    assert run(argv) == 0
    paths = [os.path.join(out, FINAL_CHECKPOINT), os.path.join(out, METRICS_FILE)]
    before = [open(p, "rb").read() for p in paths]
    assert run(["replay", os.path.join(out, MANIFEST_FILE)]) == 0
    assert [open(p, "rb").read() for p in paths] == before


def test_timing_is_opt_in(tmp_path, ring_data):
    out = str(tmp_path / "timed")
    argv = ["train", "--data", ring_data, "--out", out, "--bins", "64", "--epochs", "1", "--batch-size", "64", "--timing"]
    assert run(argv) == 0
    row = open(os.path.join(out, METRICS_FILE), encoding="utf-8").read().splitlines()[1]
    assert float(row.split("\t")[-1]) > 0.0


def test_eval_toy_task(tmp_path, ring_model):
    out = str(tmp_path / "eval")
    argv = [
        "eval",
        "--checkpoint",
        os.path.join(ring_model, FINAL_CHECKPOINT),
        "--task",
        "elastic_ring",
        "--grid",
        "--trials",
        "2",
        "--test-samples",
        "50",
        "--samples",
        "20",
        "--out",
        out,
    ]
    assert run(argv) == 0
    for tag in ("m0_75", "m0_25", "p0_25", "p0_75"):
        assert os.path.exists(os.path.join(out, f"grid_x{tag}.tsv"))
        names, drawn = read_table(os.path.join(out, f"samples_x{tag}.csv"))
        assert names == ["y0", "y1"]
        assert drawn.shape == (20, 2)
    report = open(os.path.join(out, "report.tsv"), encoding="utf-8").read().splitlines()
    # two trials plus the mean and std rows
    assert len(report) == 1 + 2 + 2
    assert report[1].startswith("elastic_ring\t0\t")
    assert read_manifest(out).command == "eval"


def test_eval_grid_header(tmp_path, ring_model):
    out = str(tmp_path / "eval")
    argv = ["eval", "--checkpoint", os.path.join(ring_model, FINAL_CHECKPOINT), "--task", "elastic_ring"]
    assert run(argv + ["--grid", "--resolution", "16", "--conditions", "0.5", "--test-samples", "20", "--out", out]) == 0
    lines = open(os.path.join(out, "grid_xp0_5.tsv"), encoding="utf-8").read().splitlines()
    assert lines[:4] == ["# dims\t2", "# ranges\t-10,10\t-10,10", "# bins\t16\t16", "# condition\t0.5"]
    assert lines[4] == "i0\ti1\ty0\ty1\tdensity"
    assert len(lines) == 5 + 16 * 16
    mass = sum(float(line.split("\t")[-1]) for line in lines[5:]) * (20.0 / 16) ** 2
    assert mass == pytest.approx(1.0, abs=1e-5)


def test_eval_task_mismatch(tmp_path, ring_model):
    argv = ["eval", "--checkpoint", os.path.join(ring_model, FINAL_CHECKPOINT), "--task", "linear_gaussian"]
    assert run(argv + ["--out", str(tmp_path / "eval")]) == 2


def test_train_missing_file(tmp_path):
    argv = ["train", "--data", str(tmp_path / "absent.csv"), "--targets", "y", "--out", str(tmp_path / "run")]
    assert run(argv + FAST_TRAIN) == 3


def test_train_bare_table_needs_targets(tmp_path, write_csv):
    path = write_csv("plain.csv", ["a", "b"], [[i, 2 * i] for i in range(10)])
    assert run(["train", "--data", path, "--out", str(tmp_path / "run")] + FAST_TRAIN) == 2


def test_unreachable_bin_count(tmp_path, ring_data):
    assert run(["train", "--data", ring_data, "--out", str(tmp_path / "run"), "--bins", "100", "--epochs", "1"]) == 2


def test_schema(capsys):
    assert run(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert set(schema) == {"ModelConfig", "TrainConfig"}
    assert "bins_per_dim" in schema["ModelConfig"]["properties"]


def test_tabular_train_then_eval(tmp_path, write_csv):
    rng = np.random.default_rng(0)
    features = rng.normal(size=(60, 2))
    target = features[:, 0] - 0.5 * features[:, 1] + rng.normal(0.0, 0.1, size=60)
    path = write_csv("table.csv", ["f0", "f1", "t0"], np.column_stack([features, target]).tolist())
    out = str(tmp_path / "run")
    argv = ["train", "--data", path, "--targets", "t0", "--out", out, "--bins", "64", "--epochs", "2"]
    assert run(argv + ["--batch-size", "8", "--no-timing"]) == 0
    test_path = os.path.join(out, "data", "table_trial0_test.csv")
    assert read_metadata(test_path)["split"] == "test"
    assert len(read_dataset(test_path)) == 42
    evaluated = str(tmp_path / "eval")
    assert run(["eval", "--checkpoint", os.path.join(out, FINAL_CHECKPOINT), "--data", test_path, "--out", evaluated]) == 0
    report = open(os.path.join(evaluated, "report.tsv"), encoding="utf-8").read().splitlines()
    assert report[1].startswith("table_trial0_test\t0\t")
    summary = open(os.path.join(evaluated, "report.tsv.summary.txt"), encoding="utf-8").read()
    assert re.search(r"test log-likelihood: -?\d+\.\d\d±0\.00 \(single trial\)", summary), summary


@pytest.mark.slow
def test_reproduce_toy_recipe(tmp_path):
    out = str(tmp_path / "toy")
    assert run(["reproduce", "toy-2d", "--trials", "1", "--epochs", "1", "--no-timing", "--out", out]) == 0
    comparison = open(os.path.join(out, "comparison.tsv"), encoding="utf-8").read().splitlines()
    assert comparison[0] == "label\ttrials\tmean\tstd\tmean_std"
    assert len(comparison) == 1 + 4
    assert os.path.exists(os.path.join(out, "report_squares_ddn.tsv"))


@pytest.mark.slow
def test_trained_ring_beats_the_uniform_density(tmp_path):
    data = str(tmp_path / "ring.csv")
    assert run(["generate", "--task", "elastic_ring", "--n", "2000", "--seed", "0", "--out", data]) == 0
    out = str(tmp_path / "run")
    argv = ["train", "--data", data, "--out", out, "--bins", "64", "--epochs", "30", "--batch-size", "128"]
    assert run(argv + ["--learning-rate", "1e-3", "--no-timing"]) == 0
    evaluated = str(tmp_path / "eval")
    argv = ["eval", "--checkpoint", os.path.join(out, FINAL_CHECKPOINT), "--task", "elastic_ring"]
    assert run(argv + ["--test-samples", "1000", "--out", evaluated]) == 0
    report = open(os.path.join(evaluated, "report.tsv"), encoding="utf-8").read().splitlines()
    log_likelihood = float(report[1].split("\t")[4])
    assert log_likelihood > 2.0 * math.log(1.0 / 20.0)


PLANAR_TASKS = [t for t in ToyTaskName if t.target_dim == 2]
CELLS = 64
CELL_WIDTH = 20.0 / CELLS


def cell_masses(task, x, lattice):
    """Oracle mass of each cell of a 64 x 64 grid on [-10, 10]^2, averaged over a lattice per cell."""
    offsets = (np.arange(lattice) + 0.5) / lattice * CELL_WIDTH
    edges = -10.0 + np.arange(CELLS) * CELL_WIDTH
    fine = (edges[:, None] + offsets[None, :]).reshape(-1)
    masses = np.empty((CELLS, CELLS))
    for i in range(CELLS):
        mesh = np.stack(np.meshgrid(edges[i] + offsets, fine, indexing="ij"), axis=-1)
        density = oracle_density(task, x, mesh).reshape(lattice, CELLS, lattice).mean(axis=(0, 2))
        masses[i] = density * CELL_WIDTH * CELL_WIDTH
    return masses


def cell_counts(task, x, draws, rng, chunk=1_000_000):
    counts = np.zeros((CELLS, CELLS))
    for start in range(0, draws, chunk):
        y = sample_toy(task, np.full(min(chunk, draws - start), x), rng)
        counts += np.histogram2d(y[:, 0], y[:, 1], bins=CELLS, range=[[-10, 10], [-10, 10]])[0]
    return counts


def within_three_se(counts, masses, draws, slack=0.0):
    expected = draws * masses
    se = np.sqrt(draws * masses * (1.0 - masses))
    return np.abs(counts - expected) <= 3.0 * se + slack


@pytest.mark.parametrize("task", PLANAR_TASKS)
def test_generators_roughly_match_their_oracles(task):
    draws = 200_000
    for x in EVAL_CONDITIONS:
        counts = cell_counts(task, x, draws, make_rng(17))
        agree = within_three_se(counts, cell_masses(task, x, lattice=32), draws, slack=1.0)
        assert agree.mean() >= 0.97, f"{task.value} at x={x}"


@pytest.mark.slow
@pytest.mark.parametrize("task", PLANAR_TASKS)
def test_generators_match_their_oracles(task):
    draws = 10_000_000
    for x in EVAL_CONDITIONS:
        counts = cell_counts(task, x, draws, make_rng(23))
        agree = within_three_se(counts, cell_masses(task, x, lattice=48), draws)
        assert agree.mean() >= 0.99, f"{task.value} at x={x}: {agree.mean():.4f}"
