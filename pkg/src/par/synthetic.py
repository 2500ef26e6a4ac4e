"""Synthetic attribute datasets for desk-scale experiments.

Each attribute owns a distinct marker color and a set of dedicated grid
cells; when the attribute is present, a random subset of its cells is
painted in its color over a dark noisy background. Attribute presence is
therefore decidable from local color statistics alone, which makes the
task linearly separable in pooled conv features and learnable by the tiny
test backbone within a few hundred steps.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import AttributeSchema, DatasetManifest, LabeledSample, save_manifest
from .imaging import save_png
from .training import ArrayDataset

MARKER_COLORS = (
    (220, 30, 30),
    (30, 220, 30),
    (30, 30, 220),
    (220, 220, 30),
    (220, 30, 220),
    (30, 220, 220),
    (240, 130, 20),
    (130, 20, 240),
)
BACKGROUND = 25
CELL = 3


def synthetic_schema(num_attributes: int = 5) -> AttributeSchema:
    return AttributeSchema.flat(
        tuple(f"marker_{i}" for i in range(num_attributes)), group_name="markers"
    )


def make_synthetic_dataset(
    n: int = 1000,
    num_attributes: int = 5,
    size: int = 16,
    seed: int = 0,
) -> ArrayDataset:
    """Generate n images with multi-hot marker labels.

    Labels are Bernoulli(0.5) per attribute, re-drawn if any column ends up
    single-class so every attribute has both positives and negatives.
    """
    if not 1 <= num_attributes <= len(MARKER_COLORS):
        raise ValueError(f"num_attributes must be in 1..{len(MARKER_COLORS)}")
    if size < CELL * 2:
        raise ValueError(f"size must be at least {CELL * 2}")
    rng = np.random.default_rng(seed)

    labels = rng.integers(0, 2, size=(n, num_attributes))
    for j in range(num_attributes):
        col = labels[:, j]
        if col.min() == col.max() and n >= 2:
            col[rng.integers(0, n)] = 1 - col[0]

    # Non-overlapping grid cells, dealt round-robin to the attributes.
    per_row = size // CELL
    cells = [(r * CELL, c * CELL) for r in range(per_row) for c in range(per_row)]
    owned = {j: [cell for k, cell in enumerate(cells) if k % num_attributes == j]
             for j in range(num_attributes)}

    images = []
    for i in range(n):
        img = rng.integers(BACKGROUND - 10, BACKGROUND + 11, size=(size, size, 3))
        for j in range(num_attributes):
            if labels[i, j] != 1:
                continue
            mine = owned[j]
            take = rng.integers(max(1, len(mine) - 2), len(mine) + 1)
            chosen = rng.choice(len(mine), size=take, replace=False)
            color = np.array(MARKER_COLORS[j])
            for ci in chosen:
                r, c = mine[ci]
                jitter = rng.integers(-15, 16, size=3)
                img[r : r + CELL, c : c + CELL] = np.clip(color + jitter, 0, 255)
        images.append(img.astype(np.uint8))

    return ArrayDataset(
        images=images,
        labels=labels.astype(np.float32),
        ids=tuple(f"syn{i:05d}" for i in range(n)),
    )


def write_synthetic_dataset(
    out_dir: str | Path,
    n: int = 600,
    num_attributes: int = 5,
    size: int = 16,
    seed: int = 0,
) -> Path:
    """Materialize a synthetic dataset as PNGs + manifest.csv + schema.json.

    Returns the manifest path; handy for exercising the file-based CLI.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    ds = make_synthetic_dataset(n=n, num_attributes=num_attributes, size=size, seed=seed)
    schema = synthetic_schema(num_attributes)

    samples = []
    for i, sid in enumerate(ds.ids):
        rel = f"images/{sid}.png"
        save_png(ds.images[i], out / rel)
        samples.append(
            LabeledSample(
                sample_id=sid,
                image_path=rel,
                labels=tuple(int(v) for v in ds.labels[i]),
            )
        )
    manifest = DatasetManifest(
        schema=schema, samples=tuple(samples), source_tag="synthetic", root=out
    )
    (out / "schema.json").write_text(
        json.dumps(schema.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )
    manifest_path = out / "manifest.csv"
    save_manifest(manifest, manifest_path)
    return manifest_path
