"""Command line entry point.

Subcommands mirror the library workflow: augment a manifest to disk, train
a model from a manifest, evaluate an artifact against a manifest, export a
comparison report, plot loss curves, serve an artifact over HTTP and run
one-off local predictions.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import torch

from .artifact import load_artifact
from .augment import AugmentationConfig, augment_image
from .dataset import (
    DatasetManifest,
    LabeledSample,
    load_manifest,
    save_manifest,
    split_dataset,
    subset,
)
from .errors import ParError
from .imaging import load_image, save_png
from .losses import LossConfig, compute_class_weights
from .models import (
    BACKBONE_NAMES,
    BackboneSpec,
    ClassifierHeadSpec,
    PretrainedWeightsRef,
    build_model,
    preprocess_batch,
)
from .service import ServiceConfig, predict_image, serve
from .training import (
    SchedulerSpec,
    TrainRunConfig,
    build_torch_loss,
    dataset_from_samples,
    evaluate_model,
    export_comparison,
    emit_loss_curves,
    load_run_report,
    pool_with_replicas,
    train_and_evaluate,
)

LOSS_CHOICES = ("plain_bce", "scaled_bce", "scaled_bce_weighted", "scaled_bce_logit_shift")


def _fail(exc: Exception) -> None:
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
    sys.exit(1)


def _report_file(run_dir: Path) -> Path:
    return run_dir / "run_report.json" if run_dir.is_dir() else run_dir


@click.group()
def main() -> None:
    """Person attribute recognition toolkit."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--replicas", default=12, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def augment(manifest_path: Path, out_dir: Path, replicas: int, seed: int) -> None:
    """Materialize an augmented copy of a dataset on disk.

    Every source row is kept as replica 0 and joined by REPLICAS warped
    copies, all under OUT/images with a new manifest.csv alongside.
    """
    try:
        manifest = load_manifest(manifest_path)
        config = AugmentationConfig(replicas_per_image=replicas, seed=seed)
        images_dir = out_dir / "images"
        images_dir.mkdir(parents=True, exist_ok=True)

        rows: list[LabeledSample] = []
        for sample in manifest.samples:
            pixels = load_image(manifest.resolve_path(sample))
            original_name = f"{sample.sample_id}_r00.png"
            save_png(pixels, images_dir / original_name)
            rows.append(
                LabeledSample(
                    sample_id=f"{sample.sample_id}_r00",
                    image_path=f"images/{original_name}",
                    labels=sample.labels,
                    parent_id=sample.sample_id,
                    replica_index=0,
                )
            )
            for replica in augment_image(pixels, sample.labels, sample.sample_id, config):
                name = f"{replica.parent_id}_r{replica.replica_index:02d}.png"
                save_png(replica.pixels, images_dir / name)
                rows.append(
                    LabeledSample(
                        sample_id=f"{replica.parent_id}_r{replica.replica_index:02d}",
                        image_path=f"images/{name}",
                        labels=replica.labels,
                        parent_id=replica.parent_id,
                        replica_index=replica.replica_index,
                    )
                )
        out_manifest = DatasetManifest(schema=manifest.schema, samples=tuple(rows), root=out_dir)
        save_manifest(out_manifest, out_dir / "manifest.csv")
        click.echo(f"wrote {len(rows)} rows to {out_dir / 'manifest.csv'}")
    except ParError as exc:
        _fail(exc)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--backbone", default="tiny_cnn", show_default=True, type=click.Choice(list(BACKBONE_NAMES)))
@click.option("--pretrained", default=None, type=str, help="Path or URI of backbone weights.")
@click.option("--strict-load", is_flag=True, default=False)
@click.option("--input-size", default=64, show_default=True, type=int)
@click.option("--loss", default="scaled_bce", show_default=True, type=click.Choice(list(LOSS_CHOICES)))
@click.option("--epochs", default=15, show_default=True, type=int)
@click.option("--lr", default=None, type=float, help="Default depends on the backbone family.")
@click.option("--batch-size", default=32, show_default=True, type=int)
@click.option("--val-fraction", default=0.2, show_default=True, type=float)
@click.option("--replicas", default=12, show_default=True, type=int)
@click.option("--no-augment", is_flag=True, default=False, help="Train on originals only.")
@click.option("--policy", "checkpoint_policy", default="min_val_loss", show_default=True,
              type=click.Choice(["min_val_loss", "max_val_mA"]))
@click.option("--scheduler", default="none", show_default=True, type=click.Choice(["none", "step_decay"]))
@click.option("--scheduler-step", default=5, show_default=True, type=int)
@click.option("--scheduler-gamma", default=0.5, show_default=True, type=float)
@click.option("--dropout", default=0.5, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--run-name", default="run", show_default=True, type=str)
def train(
    manifest_path: Path,
    out_dir: Path,
    backbone: str,
    pretrained: Optional[str],
    strict_load: bool,
    input_size: int,
    loss: str,
    epochs: int,
    lr: Optional[float],
    batch_size: int,
    val_fraction: float,
    replicas: int,
    no_augment: bool,
    checkpoint_policy: str,
    scheduler: str,
    scheduler_step: int,
    scheduler_gamma: float,
    dropout: float,
    seed: int,
    run_name: str,
) -> None:
    """Split a manifest, augment the training side, train and checkpoint."""
    try:
        manifest = load_manifest(manifest_path)
        split = split_dataset(manifest, val_fraction=val_fraction, seed=seed)

        train_data = dataset_from_samples(subset(manifest, split.train), manifest)
        val_data = dataset_from_samples(subset(manifest, split.val), manifest)
        if not no_augment and replicas > 0:
            aug = AugmentationConfig(replicas_per_image=replicas, seed=seed)
            generated = []
            for pixels, row, sample_id in zip(
                train_data.images, train_data.labels, train_data.ids
            ):
                generated.extend(
                    augment_image(pixels, tuple(int(v) for v in row), sample_id, aug)
                )
            train_data = pool_with_replicas(train_data, generated)

        loss_kind = "scaled_bce_weighted" if loss == "scaled_bce" else loss
        weights = None
        if loss_kind != "plain_bce":
            weights = compute_class_weights(train_data.labels.mean(axis=0))
        loss_config = LossConfig(kind=loss_kind, weights=weights)

        ref = None
        if pretrained is not None:
            ref = PretrainedWeightsRef(uri_or_path=pretrained, strict_load=strict_load)
        backbone_spec = BackboneSpec(
            name=backbone, pretrained_ref=ref, input_size=(input_size, input_size)
        )
        head_spec = ClassifierHeadSpec(
            num_attributes=manifest.schema.num_attributes, dropout_p=dropout
        )
        # Seed construction so identical invocations start from identical weights.
        torch.manual_seed(seed)
        model = build_model(backbone_spec, head_spec)

        config = TrainRunConfig(
            epochs=epochs,
            learning_rate=lr,
            batch_size=batch_size,
            loss=loss_config,
            scheduler=SchedulerSpec(kind=scheduler, step_every=scheduler_step, gamma=scheduler_gamma),
            checkpoint_policy=checkpoint_policy,
            seed=seed,
            run_name=run_name,
        )
        report = train_and_evaluate(config, train_data, val_data, model, manifest.schema, out_dir)
        best = report.history[report.best_epoch - 1]
        click.echo(
            f"best epoch {report.best_epoch}: val_loss={best.val_loss:.6f} "
            f"val_mA={best.val_mA:.4f} artifact={report.artifact_path}"
        )
    except ParError as exc:
        _fail(exc)


@main.command()
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--threshold", default=0.5, show_default=True, type=float)
@click.option("--json", "as_json", is_flag=True, default=False)
def evaluate(model_dir: Path, manifest_path: Path, threshold: float, as_json: bool) -> None:
    """Report loss and label-based mean accuracy of an artifact on a manifest."""
    try:
        artifact = load_artifact(model_dir)
        manifest = load_manifest(manifest_path)
        data = dataset_from_samples(manifest.samples, manifest)
        inputs = preprocess_batch(data.images, artifact.preprocess_spec)
        loss_fn = build_torch_loss(artifact.loss_config or LossConfig())
        loss, report = evaluate_model(
            artifact.model, inputs, data.labels, loss_fn, threshold=threshold
        )
        if as_json:
            payload = {
                "loss": loss,
                "mA": report.mA,
                "threshold": threshold,
                "per_label": {
                    name: float(v)
                    for name, v in zip(manifest.schema.attributes, report.per_label_mean)
                },
            }
            click.echo(json.dumps(payload, indent=2))
        else:
            click.echo(f"loss={loss:.6f} mA={report.mA:.4f} threshold={threshold}")
    except ParError as exc:
        _fail(exc)


@main.command()
@click.option("--runs", "run_dirs", required=True, multiple=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--format", "fmt", default="csv", show_default=True, type=click.Choice(["csv", "markdown"]))
def report(run_dirs: tuple[Path, ...], out_path: Path, fmt: str) -> None:
    """Export a side-by-side comparison table of finished runs."""
    try:
        reports = [load_run_report(_report_file(d)) for d in run_dirs]
        text = export_comparison(reports, format=fmt)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    except ParError as exc:
        _fail(exc)


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def plot(run_dir: Path, out_path: Path) -> None:
    """Emit loss curve data (CSV) plus a PNG when a plotting backend exists."""
    try:
        run_report = load_run_report(_report_file(run_dir))
        written = emit_loss_curves(run_report.history, out_path)
        click.echo("wrote " + ", ".join(str(p) for p in written))
    except ParError as exc:
        _fail(exc)


@main.command("serve")
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True, type=str)
@click.option("--port", default=8080, show_default=True, type=int)
@click.option("--threshold", default=0.5, show_default=True, type=float)
@click.option("--cors", is_flag=True, default=False, help="Allow cross-origin requests.")
@click.option("--token", default=None, type=str, help="Require this X-Api-Token header.")
def serve_cmd(model_dir: Path, host: str, port: int, threshold: float,
              cors: bool, token: Optional[str]) -> None:
    """Serve an artifact over HTTP."""
    try:
        serve(ServiceConfig(
            model_dir=model_dir,
            host=host,
            port=port,
            default_threshold=threshold,
            cors_allowed=cors,
            auth_token=token,
        ))
    except ParError as exc:
        _fail(exc)


@main.command()
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--threshold", default=0.5, show_default=True, type=float)
def predict(model_dir: Path, image_path: Path, threshold: float) -> None:
    """Predict attributes for one image file or every image in a directory.

    Output is JSON lines, one object per image. If some files in a
    directory fail the rest are still processed and the exit code is 1.
    """
    try:
        artifact = load_artifact(model_dir)
    except ParError as exc:
        _fail(exc)

    if image_path.is_dir():
        paths = sorted(
            p for p in image_path.iterdir()
            if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp", ".webp")
        )
    else:
        paths = [image_path]

    had_error = False
    for path in paths:
        try:
            response = predict_image(artifact, path.read_bytes(), threshold=threshold)
            payload = {
                "image": str(path),
                "model_version": response.model_version,
                "threshold_used": response.threshold_used,
                "predictions": [p.model_dump() for p in response.predictions],
            }
            click.echo(json.dumps(payload))
        except ParError as exc:
            had_error = True
            click.echo(json.dumps({"image": str(path), "error": f"{type(exc).__name__}: {exc}"}))
    if had_error:
        sys.exit(1)


if __name__ == "__main__":
    main()
