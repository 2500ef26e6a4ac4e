"""Model artifact directories.

An artifact is everything serving needs in one folder:

    weights          torch state dict (binary parameter blob)
    schema.json      attribute schema the head was trained against
    preprocess.json  input size + normalization constants
    recipe.json      backbone/head specs, loss config, model version

The model version is a short digest of the weights blob, computed at save
time, so two artifacts with identical parameters share a version string.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch

from .dataset import AttributeSchema
from .errors import InvalidArtifact
from .losses import ClassWeights, LossConfig
from .models import (
    BackboneSpec,
    ClassifierHeadSpec,
    FeatClassifier,
    PreprocessSpec,
    PretrainedWeightsRef,
    load_pretrained,
)

WEIGHTS_FILE = "weights"
SCHEMA_FILE = "schema.json"
PREPROCESS_FILE = "preprocess.json"
RECIPE_FILE = "recipe.json"


def _backbone_to_dict(spec: BackboneSpec) -> dict:
    return {
        "name": spec.name,
        "feature_dim": spec.feature_dim,
        "input_size": list(spec.input_size),
        "options": spec.options,
        "pretrained_origin": spec.pretrained_ref.origin_tag if spec.pretrained_ref else "none",
    }


def _backbone_from_dict(data: dict) -> BackboneSpec:
    return BackboneSpec(
        name=data["name"],
        feature_dim=int(data["feature_dim"]),
        input_size=tuple(data["input_size"]),
        options=data.get("options"),
    )


def _loss_to_dict(config: Optional[LossConfig]) -> Optional[dict]:
    if config is None:
        return None
    out: dict = {"kind": config.kind}
    if config.weights is not None:
        out["w_pos"] = config.weights.w_pos.tolist()
        out["w_neg"] = config.weights.w_neg.tolist()
        out["source_ratios"] = config.weights.source_ratios.tolist()
    return out


def _loss_from_dict(data: Optional[dict]) -> Optional[LossConfig]:
    if data is None:
        return None
    weights = None
    if "w_pos" in data:
        weights = ClassWeights(
            w_pos=data["w_pos"], w_neg=data["w_neg"], source_ratios=data["source_ratios"]
        )
    return LossConfig(kind=data["kind"], weights=weights)


@dataclass(frozen=True)
class ModelArtifact:
    """A loaded artifact: model in eval mode plus its frozen metadata."""

    model: FeatClassifier
    schema: AttributeSchema
    preprocess_spec: PreprocessSpec
    loss_config: Optional[LossConfig]
    model_version: str
    path: Path


def save_artifact(
    out_dir: str | Path,
    model: FeatClassifier,
    schema: AttributeSchema,
    loss_config: Optional[LossConfig] = None,
) -> Path:
    """Write weights plus metadata files; returns the artifact directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    torch.save(model.state_dict(), out / WEIGHTS_FILE)
    digest = hashlib.sha256((out / WEIGHTS_FILE).read_bytes()).hexdigest()[:12]

    (out / SCHEMA_FILE).write_text(json.dumps(schema.to_json_dict(), indent=2) + "\n")
    pp = model.preprocess_spec
    (out / PREPROCESS_FILE).write_text(
        json.dumps(
            {"input_size": list(pp.input_size), "mean": list(pp.mean), "std": list(pp.std)},
            indent=2,
        )
        + "\n"
    )
    recipe = {
        "model_version": digest,
        "backbone": _backbone_to_dict(model.backbone_spec),
        "head": {
            "num_attributes": model.head_spec.num_attributes,
            "dropout_p": model.head_spec.dropout_p,
            "hidden": model.head_spec.hidden,
        },
        "loss": _loss_to_dict(loss_config),
    }
    (out / RECIPE_FILE).write_text(json.dumps(recipe, indent=2) + "\n")
    return out


def load_artifact(artifact_dir: str | Path) -> ModelArtifact:
    """Rebuild the model from an artifact directory, in eval mode."""
    root = Path(artifact_dir)
    for name in (WEIGHTS_FILE, SCHEMA_FILE, PREPROCESS_FILE, RECIPE_FILE):
        if not (root / name).is_file():
            raise InvalidArtifact(f"artifact {root} is missing {name}")

    try:
        recipe = json.loads((root / RECIPE_FILE).read_text())
        schema = AttributeSchema.from_json_dict(json.loads((root / SCHEMA_FILE).read_text()))
        pp_raw = json.loads((root / PREPROCESS_FILE).read_text())
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InvalidArtifact(f"artifact {root} has corrupt metadata: {exc}") from exc

    preprocess_spec = PreprocessSpec(
        input_size=tuple(pp_raw["input_size"]),
        mean=tuple(pp_raw["mean"]),
        std=tuple(pp_raw["std"]),
    )
    backbone_spec = _backbone_from_dict(recipe["backbone"])
    head_raw = recipe["head"]
    head_spec = ClassifierHeadSpec(
        num_attributes=int(head_raw["num_attributes"]),
        dropout_p=float(head_raw["dropout_p"]),
        hidden=head_raw.get("hidden"),
    )
    if head_spec.num_attributes != schema.num_attributes:
        raise InvalidArtifact(
            f"artifact head has {head_spec.num_attributes} outputs but schema lists "
            f"{schema.num_attributes} attributes"
        )

    model = FeatClassifier(backbone_spec, head_spec)
    load_pretrained(
        model, PretrainedWeightsRef(str(root / WEIGHTS_FILE), origin_tag="none", strict_load=True)
    )
    model.eval()
    # Serving must use the constants recorded at save time, not code defaults.
    model.preprocess_spec = preprocess_spec
    return ModelArtifact(
        model=model,
        schema=schema,
        preprocess_spec=preprocess_spec,
        loss_config=_loss_from_dict(recipe.get("loss")),
        model_version=str(recipe["model_version"]),
        path=root,
    )
