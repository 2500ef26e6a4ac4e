"""Shared fixtures: a synthetic dataset on disk and a small trained artifact.

Also collects the acceptance tests' outcomes (test_criterion_*) and prints
one pass/fail line per criterion in the terminal summary.
"""

from __future__ import annotations

import re
from pathlib import Path

import pytest
import torch

from par.dataset import load_manifest, split_dataset, subset
from par.losses import LossConfig, compute_class_weights
from par.models import BackboneSpec, ClassifierHeadSpec, build_model
from par.synthetic import write_synthetic_dataset
from par.training import TrainRunConfig, dataset_from_samples, train_and_evaluate

_CRITERION_RESULTS: dict[str, str] = {}


@pytest.fixture(scope="session")
def toy_data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("toydata")
    manifest_path = write_synthetic_dataset(root, n=60, num_attributes=4, size=32, seed=3)
    return manifest_path


@pytest.fixture(scope="session")
def trained_run(toy_data_dir, tmp_path_factory):
    """A quick real training run; shared by artifact/service/CLI tests."""
    out_dir = tmp_path_factory.mktemp("run")
    manifest = load_manifest(toy_data_dir)
    split = split_dataset(manifest, val_fraction=0.2, seed=0)
    train_set = dataset_from_samples(subset(manifest, split.train), manifest)
    val_set = dataset_from_samples(subset(manifest, split.val), manifest)

    weights = compute_class_weights(train_set.labels.mean(axis=0))
    config = TrainRunConfig(
        epochs=3,
        learning_rate=1e-3,
        batch_size=16,
        loss=LossConfig(kind="scaled_bce_weighted", weights=weights),
        seed=0,
        run_name="toy",
    )
    torch.manual_seed(0)
    model = build_model(
        BackboneSpec(name="tiny_cnn", input_size=(32, 32)),
        ClassifierHeadSpec(num_attributes=manifest.schema.num_attributes),
    )
    report = train_and_evaluate(config, train_set, val_set, model, manifest.schema, out_dir)
    return {
        "report": report,
        "artifact_dir": Path(report.artifact_path),
        "out_dir": out_dir,
        "manifest_path": toy_data_dir,
        "manifest": manifest,
        "config": config,
        "val_set": val_set,
        "train_set": train_set,
    }


def pytest_runtest_logreport(report):
    match = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not match:
        return
    num = match.group(1)
    if report.when == "call":
        _CRITERION_RESULTS[num] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.failed:
        _CRITERION_RESULTS[num] = "FAIL (setup)"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_CRITERION_RESULTS, key=int):
        terminalreporter.write_line(f"criterion {num}: {_CRITERION_RESULTS[num]}")
