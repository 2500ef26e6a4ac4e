"""Training and evaluation harness.

train_and_evaluate runs a fixed number of epochs of Adam updates, scores
validation loss and mean accuracy after every epoch, appends metric
records to a JSON-lines log, and persists the checkpoint chosen by the
configured policy as a full model artifact. Reports can be rendered as a
cross-run comparison table or as loss-vs-epoch curves.

Batch order is a pure function of the config seed, so two single-threaded
runs with the same seed, data, and initial model produce bitwise identical
histories.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .artifact import save_artifact
from .dataset import AttributeSchema, DatasetManifest, LabeledSample
from .errors import EmptyDataset, NonFiniteLoss, ShapeMismatch
from .imaging import load_image
from .losses import LossConfig
from .metrics import MetricReport, mean_accuracy
from .models import FeatClassifier, TRANSFORMER_BACKBONES, preprocess_batch

CHECKPOINT_POLICIES = ("min_val_loss", "max_val_mA")
DEFAULT_TRANSFORMER_LR = 1e-5
DEFAULT_CONV_LR = 1e-4


@dataclass(frozen=True)
class SchedulerSpec:
    kind: str = "none"  # none | step_decay
    step_every: int = 1
    gamma: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in ("none", "step_decay"):
            raise ValueError(f"unknown scheduler kind {self.kind!r}")
        if self.kind == "step_decay" and self.step_every < 1:
            raise ValueError("step_every must be >= 1")


@dataclass(frozen=True)
class TrainRunConfig:
    epochs: int = 15
    optimizer: str = "adam"
    learning_rate: Optional[float] = None  # None: 1e-5 for transformer backbones, else 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 32
    loss: LossConfig = field(default_factory=LossConfig)
    scheduler: Optional[SchedulerSpec] = None
    checkpoint_policy: str = "min_val_loss"
    seed: int = 0
    device_tag: str = "cpu"
    run_name: str = ""

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.checkpoint_policy not in CHECKPOINT_POLICIES:
            raise ValueError(f"unknown checkpoint policy {self.checkpoint_policy!r}")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    val_loss: float
    val_mA: float
    wall_seconds: float
    lr: float


@dataclass(frozen=True)
class RunReport:
    config: TrainRunConfig
    history: tuple[EpochMetrics, ...]
    best_epoch: int
    total_seconds: float
    device_tag: str
    artifact_path: str
    run_name: str


@dataclass
class ArrayDataset:
    """In-memory labeled image pool: raw uint8 images plus an (N, L) matrix."""

    images: list[np.ndarray]
    labels: np.ndarray
    ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.float32)
        if len(self.images) != self.labels.shape[0]:
            raise ShapeMismatch(
                f"{len(self.images)} images vs {self.labels.shape[0]} label rows"
            )

    def __len__(self) -> int:
        return len(self.images)


def dataset_from_samples(
    samples: Sequence[LabeledSample], manifest: DatasetManifest
) -> ArrayDataset:
    """Load every sample's image into memory."""
    images = [load_image(manifest.resolve_path(s)) for s in samples]
    labels = np.array([s.labels for s in samples], dtype=np.float32)
    return ArrayDataset(images=images, labels=labels, ids=tuple(s.sample_id for s in samples))


def pool_with_replicas(originals: ArrayDataset, replicas) -> ArrayDataset:
    """Training pool of originals plus augmentation replicas (labels inherited)."""
    images = list(originals.images) + [r.pixels for r in replicas]
    if len(replicas) == 0:
        labels = originals.labels
    else:
        labels = np.concatenate(
            [originals.labels, np.array([r.labels for r in replicas], dtype=np.float32)]
        )
    ids = tuple(originals.ids) + tuple(f"{r.parent_id}::aug{r.replica_index}" for r in replicas)
    return ArrayDataset(images=images, labels=labels, ids=ids)


def build_torch_loss(config: LossConfig) -> Callable[[torch.Tensor, torch.Tensor], torch.Tensor]:
    """Torch twin of the numpy losses, for use inside the optimization loop.

    Same softplus formulation and same per-element mean, so values agree
    with the numpy reference to float precision (tested).
    """
    if config.kind == "plain_bce":

        def plain(z: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
            elem = y * torch.nn.functional.softplus(-z) + (1 - y) * torch.nn.functional.softplus(z)
            return elem.mean()

        return plain

    if config.kind == "scaled_bce_weighted":
        w_pos_np = config.weights.w_pos
        w_neg_np = config.weights.w_neg

        def weighted(z: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
            w_pos = torch.as_tensor(w_pos_np, dtype=z.dtype, device=z.device)
            w_neg = torch.as_tensor(w_neg_np, dtype=z.dtype, device=z.device)
            elem = w_pos * y * torch.nn.functional.softplus(-z) + w_neg * (
                1 - y
            ) * torch.nn.functional.softplus(z)
            return elem.mean()

        return weighted

    ratios = config.weights.source_ratios
    if np.any(ratios <= 0) or np.any(ratios >= 1):
        from .errors import DegenerateRatio

        raise DegenerateRatio("logit shift needs 0 < r_j < 1 for every class")
    shift_np = np.log((1.0 - ratios) / ratios)

    def shifted(z: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        zz = z + torch.as_tensor(shift_np, dtype=z.dtype, device=z.device)
        elem = y * torch.nn.functional.softplus(-zz) + (1 - y) * torch.nn.functional.softplus(zz)
        return elem.mean()

    return shifted


def resolve_learning_rate(config: TrainRunConfig, model: FeatClassifier) -> float:
    if config.learning_rate is not None:
        return config.learning_rate
    if model.backbone_spec.name in TRANSFORMER_BACKBONES:
        return DEFAULT_TRANSFORMER_LR
    return DEFAULT_CONV_LR


def epoch_learning_rate(base_lr: float, scheduler: Optional[SchedulerSpec], epoch: int) -> float:
    """Learning rate in effect for a 1-based epoch index."""
    if scheduler is None or scheduler.kind == "none":
        return base_lr
    return base_lr * scheduler.gamma ** ((epoch - 1) // scheduler.step_every)


@torch.no_grad()
def evaluate_model(
    model: FeatClassifier,
    inputs: torch.Tensor,
    targets: np.ndarray,
    loss_fn: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
    batch_size: int = 32,
    threshold: float = 0.5,
) -> tuple[float, MetricReport]:
    """Element-mean loss and mA of a model over a preprocessed tensor set."""
    model.eval()
    n = inputs.shape[0]
    y = torch.from_numpy(np.asarray(targets, dtype=np.float32))
    loss_sum = 0.0
    probs = []
    for i in range(0, n, batch_size):
        z = model(inputs[i : i + batch_size])
        yb = y[i : i + batch_size]
        loss_sum += float(loss_fn(z, yb)) * z.shape[0]
        probs.append(torch.sigmoid(z).numpy())
    report = mean_accuracy(np.concatenate(probs), np.asarray(targets), threshold=threshold)
    return loss_sum / n, report


def train_and_evaluate(
    config: TrainRunConfig,
    train_set: ArrayDataset,
    val_set: ArrayDataset,
    model: FeatClassifier,
    schema: AttributeSchema,
    out_dir: str | Path,
) -> RunReport:
    """Run the full optimization/validation loop and persist the best model.

    Writes, under out_dir: ``metrics.jsonl`` (one record per split per
    epoch), ``best/`` (artifact for the checkpoint-policy winner) and
    ``run_report.json``. Aborts with NonFiniteLoss the moment a batch loss
    stops being finite.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise EmptyDataset("training and validation sets must be non-empty")
    num_attrs = schema.num_attributes
    if train_set.labels.shape[1] != num_attrs or val_set.labels.shape[1] != num_attrs:
        raise ShapeMismatch("label width does not match schema")
    if model.head_spec.num_attributes != num_attrs:
        raise ShapeMismatch(
            f"model emits {model.head_spec.num_attributes} attributes, schema has {num_attrs}"
        )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "metrics.jsonl"
    best_dir = out / "best"

    torch.manual_seed(config.seed)
    shuffle_rng = np.random.default_rng(config.seed)

    x_train = preprocess_batch(train_set.images, model.preprocess_spec)
    x_val = preprocess_batch(val_set.images, model.preprocess_spec)
    y_train = torch.from_numpy(train_set.labels)

    base_lr = resolve_learning_rate(config, model)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=base_lr, betas=(config.beta1, config.beta2)
    )
    loss_fn = build_torch_loss(config.loss)
    run_name = config.run_name or model.backbone_spec.name

    history: list[EpochMetrics] = []
    best_key: Optional[float] = None
    t_start = time.perf_counter()
    n = len(train_set)

    with open(log_path, "a", encoding="utf-8") as log:
        for epoch in range(1, config.epochs + 1):
            t_epoch = time.perf_counter()
            lr = epoch_learning_rate(base_lr, config.scheduler, epoch)
            for group in optimizer.param_groups:
                group["lr"] = lr

            model.train()
            perm = shuffle_rng.permutation(n)
            loss_sum = 0.0
            for start in range(0, n, config.batch_size):
                idx = perm[start : start + config.batch_size]
                batch_x = x_train[idx]
                batch_y = y_train[idx]
                optimizer.zero_grad()
                loss = loss_fn(model(batch_x), batch_y)
                if not torch.isfinite(loss):
                    raise NonFiniteLoss(
                        f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                    )
                loss.backward()
                optimizer.step()
                loss_sum += float(loss.detach()) * len(idx)
            train_loss = loss_sum / n

            val_loss, val_report = evaluate_model(
                model, x_val, val_set.labels, loss_fn, batch_size=config.batch_size
            )
            metrics = EpochMetrics(
                epoch=epoch,
                train_loss=train_loss,
                val_loss=val_loss,
                val_mA=val_report.mA,
                wall_seconds=time.perf_counter() - t_epoch,
                lr=lr,
            )
            history.append(metrics)

            log.write(json.dumps({"epoch": epoch, "split": "train", "loss": train_loss,
                                  "mA": None, "per_label": None, "lr": lr}) + "\n")
            log.write(json.dumps({"epoch": epoch, "split": "val", "loss": val_loss,
                                  "mA": val_report.mA,
                                  "per_label": val_report.per_label_mean.tolist(),
                                  "lr": lr}) + "\n")
            log.flush()

            key = val_loss if config.checkpoint_policy == "min_val_loss" else -val_report.mA
            if best_key is None or key < best_key:
                best_key = key
                save_artifact(best_dir, model, schema, loss_config=config.loss)

    report = RunReport(
        config=config,
        history=tuple(history),
        best_epoch=select_checkpoint(history, config.checkpoint_policy),
        total_seconds=time.perf_counter() - t_start,
        device_tag=config.device_tag,
        artifact_path=str(best_dir),
        run_name=run_name,
    )
    save_run_report(report, out / "run_report.json")
    return report


def select_checkpoint(history: Sequence[EpochMetrics], policy: str) -> int:
    """Epoch whose metrics win under the policy; ties go to the earliest."""
    if not history:
        raise EmptyDataset("history must be non-empty")
    if policy == "min_val_loss":
        best = min(history, key=lambda m: (m.val_loss, m.epoch))
    elif policy == "max_val_mA":
        best = min(history, key=lambda m: (-m.val_mA, m.epoch))
    else:
        raise ValueError(f"unknown checkpoint policy {policy!r}")
    return best.epoch


COMPARISON_COLUMNS = (
    "Model",
    "mA Val",
    "Train_Loss",
    "Val_Loss",
    "Epoch",
    "Computation Time (seconds)",
    "Device Type",
)


def _comparison_rows(reports: Sequence[RunReport]) -> list[list[str]]:
    rows = []
    for rep in reports:
        best = next(m for m in rep.history if m.epoch == rep.best_epoch)
        final = rep.history[-1]
        rows.append(
            [
                rep.run_name,
                repr(best.val_mA),
                repr(final.train_loss),
                repr(final.val_loss),
                str(len(rep.history)),
                repr(rep.total_seconds),
                rep.device_tag,
            ]
        )
    return rows


def export_comparison(reports: Sequence[RunReport], format: str = "markdown") -> str:
    """Cross-run comparison table (best-epoch mA, final losses, wall time).

    Float cells use repr, so the CSV form reparses to exactly the report
    values.
    """
    if not reports:
        raise EmptyDataset("need at least one run report")
    rows = _comparison_rows(reports)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if format == "markdown":
        lines = [
            "| " + " | ".join(COMPARISON_COLUMNS) + " |",
            "|" + "|".join(" --- " for _ in COMPARISON_COLUMNS) + "|",
        ]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")


CURVE_COLUMNS = ("epoch", "train_loss", "val_loss", "val_mA", "lr", "wall_seconds")


def emit_loss_curves(
    history: Sequence[EpochMetrics], out_path: str | Path
) -> list[Path]:
    """Write train/val loss per epoch as CSV, plus a PNG chart if possible.

    out_path names the CSV; the chart lands next to it with a .png suffix.
    Returns the paths written.
    """
    if not history:
        raise EmptyDataset("history must be non-empty")
    out_csv = Path(out_path)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for m in history:
            writer.writerow(
                [m.epoch, repr(m.train_loss), repr(m.val_loss), repr(m.val_mA),
                 repr(m.lr), repr(m.wall_seconds)]
            )
    written = [out_csv]

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return written

    epochs = [m.epoch for m in history]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(epochs, [m.train_loss for m in history], marker="o", label="train loss")
    ax.plot(epochs, [m.val_loss for m in history], marker="s", label="val loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("Train & validation loss vs epoch")
    ax.legend()
    fig.tight_layout()
    out_png = out_csv.with_suffix(".png")
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    written.append(out_png)
    return written


# --- report serialization ---------------------------------------------------


def _config_to_dict(config: TrainRunConfig) -> dict:
    from .artifact import _loss_to_dict

    return {
        "epochs": config.epochs,
        "optimizer": config.optimizer,
        "learning_rate": config.learning_rate,
        "beta1": config.beta1,
        "beta2": config.beta2,
        "batch_size": config.batch_size,
        "loss": _loss_to_dict(config.loss),
        "scheduler": None
        if config.scheduler is None
        else {"kind": config.scheduler.kind, "step_every": config.scheduler.step_every,
              "gamma": config.scheduler.gamma},
        "checkpoint_policy": config.checkpoint_policy,
        "seed": config.seed,
        "device_tag": config.device_tag,
        "run_name": config.run_name,
    }


def _config_from_dict(data: dict) -> TrainRunConfig:
    from .artifact import _loss_from_dict

    sched = data.get("scheduler")
    return TrainRunConfig(
        epochs=data["epochs"],
        optimizer=data.get("optimizer", "adam"),
        learning_rate=data.get("learning_rate"),
        beta1=data.get("beta1", 0.9),
        beta2=data.get("beta2", 0.999),
        batch_size=data.get("batch_size", 32),
        loss=_loss_from_dict(data.get("loss")) or LossConfig(),
        scheduler=None if sched is None else SchedulerSpec(**sched),
        checkpoint_policy=data.get("checkpoint_policy", "min_val_loss"),
        seed=data.get("seed", 0),
        device_tag=data.get("device_tag", "cpu"),
        run_name=data.get("run_name", ""),
    )


def save_run_report(report: RunReport, path: str | Path) -> None:
    data = {
        "run_name": report.run_name,
        "best_epoch": report.best_epoch,
        "total_seconds": report.total_seconds,
        "device_tag": report.device_tag,
        "artifact_path": report.artifact_path,
        "config": _config_to_dict(report.config),
        "history": [
            {"epoch": m.epoch, "train_loss": m.train_loss, "val_loss": m.val_loss,
             "val_mA": m.val_mA, "wall_seconds": m.wall_seconds, "lr": m.lr}
            for m in report.history
        ],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def load_run_report(path: str | Path) -> RunReport:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunReport(
        config=_config_from_dict(data["config"]),
        history=tuple(EpochMetrics(**m) for m in data["history"]),
        best_epoch=data["best_epoch"],
        total_seconds=data["total_seconds"],
        device_tag=data["device_tag"],
        artifact_path=data["artifact_path"],
        run_name=data["run_name"],
    )
