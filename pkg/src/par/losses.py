"""Multi-label BCE losses with frequency-aware class balancing.

Three loss kinds share one contract (mean over all batch-by-label elements,
value plus analytic gradient with respect to the logits):

* ``plain_bce``: standard binary cross entropy on logits.
* ``scaled_bce_weighted``: per-class weights derived from positive ratios,
  w_pos = exp(0.5 - r) and w_neg = exp(r - 0.5), so rare positives cost
  more and a perfectly balanced class (r = 0.5) reduces exactly to the
  plain loss.
* ``scaled_bce_logit_shift``: shifts each logit by log((1 - r) / r) before
  the plain loss, the literal logit-scaling reading of frequency balancing.

Everything is computed in softplus form; sigmoid outputs are never fed
through log, so values stay finite for arbitrarily large logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateRatio, NonBinaryTarget, ShapeMismatch

LOSS_KINDS = ("plain_bce", "scaled_bce_weighted", "scaled_bce_logit_shift")


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) without overflow for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class ClassWeights:
    """Per-class positive/negative term weights plus their source ratios."""

    w_pos: np.ndarray
    w_neg: np.ndarray
    source_ratios: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_pos", np.asarray(self.w_pos, dtype=np.float64))
        object.__setattr__(self, "w_neg", np.asarray(self.w_neg, dtype=np.float64))
        object.__setattr__(self, "source_ratios", np.asarray(self.source_ratios, dtype=np.float64))
        if not (self.w_pos.shape == self.w_neg.shape == self.source_ratios.shape):
            raise ShapeMismatch("class weight vectors must share one length")
        if np.any(self.w_pos <= 0) or np.any(self.w_neg <= 0):
            raise ValueError("class weights must be strictly positive")

    def __len__(self) -> int:
        return self.w_pos.shape[0]


def compute_class_weights(r: np.ndarray) -> ClassWeights:
    """Weights from positive ratios: w_pos = exp(0.5 - r), w_neg = exp(r - 0.5).

    Monotone in rarity (a rarer positive class gets a larger positive
    weight) and exactly 1/1 at r = 0.5. Finite for r = 0 and r = 1.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1:
        raise ShapeMismatch(f"ratio vector must be 1-D, got shape {r.shape}")
    if np.any(r < 0) or np.any(r > 1):
        raise ValueError("positive ratios must lie in [0, 1]")
    return ClassWeights(w_pos=np.exp(0.5 - r), w_neg=np.exp(r - 0.5), source_ratios=r.copy())


@dataclass(frozen=True)
class LossConfig:
    """Which loss to run and, for the scaled kinds, its class weights."""

    kind: str = "plain_bce"
    weights: Optional[ClassWeights] = field(default=None)

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if self.kind != "plain_bce" and self.weights is None:
            raise ValueError(f"loss kind {self.kind!r} requires class weights")


def _check_batch(logits: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if z.ndim != 2 or y.shape != z.shape:
        raise ShapeMismatch(f"logits {z.shape} vs targets {y.shape}; both must be (B, L)")
    if z.shape[0] == 0 or z.shape[1] == 0:
        raise ShapeMismatch("batch and label dimensions must be non-empty")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise NonBinaryTarget("targets must contain only 0 and 1")
    return z, y


def bce_with_logits(
    logits: np.ndarray,
    targets: np.ndarray,
    weights: Optional[ClassWeights] = None,
) -> tuple[float, np.ndarray]:
    """BCE on logits, optionally class-weighted; returns (loss, d loss / d logits).

    loss = mean_ij [ w_pos_j * y_ij * softplus(-z_ij)
                   + w_neg_j * (1 - y_ij) * softplus(z_ij) ]

    with unit weights by default. The gradient per element is
    (w_neg_j * (1 - y) * sigmoid(z) - w_pos_j * y * sigmoid(-z)) / (B * L).
    """
    z, y = _check_batch(logits, targets)
    b, l = z.shape
    if weights is None:
        w_pos = w_neg = np.ones(l)
    else:
        if len(weights) != l:
            raise ShapeMismatch(f"weights length {len(weights)} vs {l} labels")
        w_pos, w_neg = weights.w_pos, weights.w_neg

    elem = w_pos * y * softplus(-z) + w_neg * (1.0 - y) * softplus(z)
    grad = (w_neg * (1.0 - y) * sigmoid(z) - w_pos * y * sigmoid(-z)) / (b * l)
    return float(elem.mean()), grad


def logit_shift_bce(
    logits: np.ndarray,
    targets: np.ndarray,
    r: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Unweighted BCE after shifting logits by log((1 - r_j) / r_j).

    Requires 0 < r_j < 1; a ratio of exactly 0 or 1 would push the shift to
    infinity. The shift is constant in z, so the gradient is the plain BCE
    gradient evaluated at the shifted logits.
    """
    z, y = _check_batch(logits, targets)
    b, l = z.shape
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (l,):
        raise ShapeMismatch(f"ratio vector shape {r.shape} vs {l} labels")
    if np.any(r <= 0.0) or np.any(r >= 1.0):
        raise DegenerateRatio("logit shift needs 0 < r_j < 1 for every class")

    shifted = z + np.log((1.0 - r) / r)
    elem = y * softplus(-shifted) + (1.0 - y) * softplus(shifted)
    grad = (sigmoid(shifted) - y) / (b * l)
    return float(elem.mean()), grad


def loss_value_and_grad(
    config: LossConfig, logits: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Dispatch a LossConfig to its implementation."""
    if config.kind == "plain_bce":
        return bce_with_logits(logits, targets, None)
    if config.kind == "scaled_bce_weighted":
        return bce_with_logits(logits, targets, config.weights)
    return logit_shift_bce(logits, targets, config.weights.source_ratios)
