"""Backbone + classifier-head model family.

A model is a feature extractor mapping an image batch to (B, D) features,
composed with a dropout-regularized fully connected head mapping features
to (B, L) attribute logits. Backbone families:

* ``tiny_cnn``: three conv blocks, D = 32, for desk-scale tests. Block k is
  Conv3x3(stride 1, pad 1) -> ReLU -> MaxPool2, with channels 3 -> 16 ->
  32 -> 32, followed by global average pooling. Accepts any input >= 8x8.
* ``resnet50``: torchvision ResNet-50 trunk (D = 2048), randomly
  initialized unless a local weights file is supplied.
* ``beit`` / ``swin``: optional adapters over HuggingFace transformer
  encoders, built from an explicit config dict so no download is needed.

Models emit logits, never probabilities. Eval mode disables dropout and is
deterministic; a model in eval mode is read-only and safe to share across
threads.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
import torch
from torch import nn

from .errors import InvalidImage, StrictMismatch, UnknownBackbone, WeightsLoadError
from .imaging import require_image, resize_bilinear

BACKBONE_NAMES = ("tiny_cnn", "resnet50", "beit", "swin")
TRANSFORMER_BACKBONES = ("beit", "swin")

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class PretrainedWeightsRef:
    uri_or_path: str
    origin_tag: str = "none"  # imagenet | rapv2 | none
    strict_load: bool = False


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    # None lets the constructed backbone dictate the width; a value pins it.
    feature_dim: Optional[int] = None
    pretrained_ref: Optional[PretrainedWeightsRef] = None
    input_size: tuple[int, int] = (224, 224)
    # Extra constructor arguments for transformer adapters (HF config values).
    options: Optional[dict] = None

    def __post_init__(self) -> None:
        if self.name not in BACKBONE_NAMES:
            raise UnknownBackbone(f"unknown backbone {self.name!r}, expected one of {BACKBONE_NAMES}")
        if self.feature_dim is not None and self.feature_dim <= 0:
            raise ValueError("feature_dim must be positive")
        if not (isinstance(self.input_size, tuple) and len(self.input_size) == 2
                and all(isinstance(v, int) and v > 0 for v in self.input_size)):
            raise ValueError("input_size must be a (height, width) pair of positive ints")
        if self.name == "tiny_cnn" and self.pretrained_ref is not None:
            raise ValueError("tiny_cnn takes no pretrained weights")


@dataclass(frozen=True)
class ClassifierHeadSpec:
    num_attributes: int
    dropout_p: float = 0.5
    hidden: Optional[int] = None

    def __post_init__(self) -> None:
        if self.num_attributes < 1:
            raise ValueError("num_attributes must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")


@dataclass(frozen=True)
class PreprocessSpec:
    """Input geometry and normalization constants, stored with the artifact
    so serving can never drift from training."""

    input_size: tuple[int, int] = (224, 224)
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD


class TinyCnnBackbone(nn.Module):
    feature_dim = 32

    def __init__(self) -> None:
        super().__init__()
        chans = (3, 16, 32, 32)
        blocks = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            blocks += [nn.Conv2d(cin, cout, 3, stride=1, padding=1), nn.ReLU(), nn.MaxPool2d(2)]
        self.blocks = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.blocks(x)).flatten(1)


class ResNet50Backbone(nn.Module):
    feature_dim = 2048

    def __init__(self) -> None:
        super().__init__()
        from torchvision.models import resnet50

        trunk = resnet50(weights=None)
        trunk.fc = nn.Identity()
        self.trunk = trunk

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.trunk(x)


class HfEncoderBackbone(nn.Module):
    """Adapter over a HuggingFace vision encoder (BEiT or Swin).

    Built from an explicit config dict, so instantiation is offline and
    random-initialized; pretrained weights load through load_pretrained
    like any other backbone. Features are the mean-pooled final hidden
    states, giving D = hidden_size (BEiT) or the stage-4 width (Swin).
    """

    def __init__(self, family: str, options: Mapping | None) -> None:
        super().__init__()
        try:
            from transformers import BeitConfig, BeitModel, SwinConfig, SwinModel
        except ImportError as exc:
            raise UnknownBackbone(
                f"backbone {family!r} needs the optional 'transformers' dependency"
            ) from exc

        opts = dict(options or {})
        if family == "beit":
            config = BeitConfig(**opts)
            self.encoder = BeitModel(config, add_pooling_layer=False)
            self.feature_dim = config.hidden_size
        else:
            config = SwinConfig(**opts)
            self.encoder = SwinModel(config, add_pooling_layer=False)
            self.feature_dim = int(config.embed_dim * 2 ** (len(config.depths) - 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        hidden = self.encoder(pixel_values=x).last_hidden_state
        return hidden.mean(dim=1)


class FeatClassifier(nn.Module):
    """Feature-extractor backbone plus dropout-regularized linear head."""

    def __init__(self, backbone_spec: BackboneSpec, head_spec: ClassifierHeadSpec) -> None:
        super().__init__()
        if backbone_spec.name == "tiny_cnn":
            backbone: nn.Module = TinyCnnBackbone()
        elif backbone_spec.name == "resnet50":
            backbone = ResNet50Backbone()
        elif backbone_spec.name in TRANSFORMER_BACKBONES:
            backbone = HfEncoderBackbone(backbone_spec.name, backbone_spec.options)
        else:  # unreachable: spec validates the name
            raise UnknownBackbone(backbone_spec.name)

        if backbone_spec.feature_dim is None:
            backbone_spec = dataclasses.replace(backbone_spec, feature_dim=backbone.feature_dim)
        elif backbone.feature_dim != backbone_spec.feature_dim:
            raise ValueError(
                f"backbone {backbone_spec.name!r} produces {backbone.feature_dim} features, "
                f"spec says {backbone_spec.feature_dim}"
            )

        layers: list[nn.Module] = [nn.Dropout(p=head_spec.dropout_p)]
        width = backbone_spec.feature_dim
        if head_spec.hidden is not None:
            layers += [nn.Linear(width, head_spec.hidden), nn.ReLU()]
            width = head_spec.hidden
        layers.append(nn.Linear(width, head_spec.num_attributes))

        self.backbone = backbone
        self.head = nn.Sequential(*layers)
        self.backbone_spec = backbone_spec
        self.head_spec = head_spec
        self.preprocess_spec = PreprocessSpec(input_size=backbone_spec.input_size)

    @property
    def mode(self) -> str:
        return "train" if self.training else "eval"

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))


def build_model(backbone_spec: BackboneSpec, head_spec: ClassifierHeadSpec) -> FeatClassifier:
    """Construct a FeatClassifier and apply any pretrained backbone weights."""
    model = FeatClassifier(backbone_spec, head_spec)
    if backbone_spec.pretrained_ref is not None:
        load_pretrained(model, backbone_spec.pretrained_ref)
    return model


@dataclass(frozen=True)
class LoadReport:
    """Which parameters a checkpoint supplied, and which it did not."""

    matched: tuple[str, ...]
    reinitialized: tuple[str, ...]  # model params absent from the checkpoint
    skipped: tuple[str, ...]  # checkpoint entries unused (unknown or wrong shape)

    def summary(self) -> str:
        return (
            f"{len(self.matched)} matched, {len(self.reinitialized)} reinitialized, "
            f"{len(self.skipped)} skipped"
        )


def load_pretrained(model: FeatClassifier, ref: PretrainedWeightsRef) -> LoadReport:
    """Load a state dict from a local file into the model.

    With strict_load off, parameters missing from the checkpoint keep their
    fresh initialization and are reported; checkpoint entries that match no
    parameter (or mismatch in shape) are skipped. With strict_load on, any
    discrepancy raises StrictMismatch.
    """
    path = Path(ref.uri_or_path)
    if not path.is_file():
        raise WeightsLoadError(f"weights file not found: {path}")
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise WeightsLoadError(f"cannot read weights from {path}: {exc}") from exc
    if isinstance(state, Mapping) and "state_dict" in state:
        state = state["state_dict"]

    model_state = model.state_dict()
    matched, skipped = {}, []
    for key, value in state.items():
        if key in model_state and tuple(value.shape) == tuple(model_state[key].shape):
            matched[key] = value
        else:
            skipped.append(key)
    reinitialized = [k for k in model_state if k not in matched]

    if ref.strict_load and (skipped or reinitialized):
        raise StrictMismatch(
            f"strict load failed: {len(skipped)} unusable checkpoint entries, "
            f"{len(reinitialized)} model parameters missing from checkpoint"
        )
    model.load_state_dict(matched, strict=False)
    return LoadReport(
        matched=tuple(sorted(matched)),
        reinitialized=tuple(sorted(reinitialized)),
        skipped=tuple(sorted(skipped)),
    )


def preprocess(image: np.ndarray, spec: PreprocessSpec) -> np.ndarray:
    """Resize and normalize one image for the model.

    Bilinear resize (half-pixel centers) to spec.input_size, scale channel
    values from 0..255 to [0, 1], then subtract/divide the per-channel
    mean/std. Returns float32 (H, W, 3).
    """
    img = require_image(image)
    h, w = spec.input_size
    resized = resize_bilinear(img, h, w) / 255.0
    mean = np.asarray(spec.mean, dtype=np.float64)
    std = np.asarray(spec.std, dtype=np.float64)
    return ((resized - mean) / std).astype(np.float32)


def preprocess_batch(images, spec: PreprocessSpec) -> torch.Tensor:
    """Preprocess a sequence of (H, W, 3) images into an (N, 3, H', W') tensor.

    Images may come in at different sizes; they all leave at spec.input_size.
    """
    if len(images) == 0:
        raise InvalidImage("empty image batch")
    arrs = [preprocess(im, spec) for im in images]
    return torch.from_numpy(np.stack(arrs).transpose(0, 3, 1, 2)).contiguous()
