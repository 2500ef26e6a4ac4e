"""Dataset manifests, attribute schemas, label encoding, and splits.

A manifest names image files and their multi-hot attribute labels. Two
on-disk forms are supported:

* CSV: header ``sample_id,image_path,<attr_1>,...,<attr_L>`` with 0/1 cells.
  Attribute grouping is flat (one group) unless a ``schema.json`` sidecar
  sits next to the CSV or an explicit schema is passed in.
* JSON: object with ``schema``, ``samples`` and optional ``source_tag``.
  Sample labels are either a 0/1 list in schema order or a name->0/1 map.

Augmented manifests additionally carry ``parent_id`` and ``replica_index``
columns; those names are reserved and cannot be used as attributes.

All types are immutable after construction and safe to share across
threads; the operations here are pure functions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateSplit,
    DuplicateSampleId,
    EmptyDataset,
    ManifestError,
    MissingImage,
    MissingSchema,
    UnknownAttribute,
)

RESERVED_COLUMNS = ("sample_id", "image_path", "parent_id", "replica_index")


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute vocabulary, grouped by category.

    Attribute order (and therefore label-vector layout) is the concatenation
    of the groups in declaration order. Names must be globally unique.
    """

    groups: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        names = self.attributes
        if len(names) == 0:
            raise MissingSchema("schema has no attributes")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ManifestError(f"attribute names not unique: {dupes}")
        bad = sorted(set(names) & set(RESERVED_COLUMNS))
        if bad:
            raise ManifestError(f"attribute names collide with reserved columns: {bad}")

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(a for _, attrs in self.groups for a in attrs)

    @property
    def num_attributes(self) -> int:
        return len(self.attributes)

    def group_of(self, attribute: str) -> str:
        for name, attrs in self.groups:
            if attribute in attrs:
                return name
        raise UnknownAttribute(f"attribute {attribute!r} not in schema")

    def index_of(self, attribute: str) -> int:
        try:
            return self.attributes.index(attribute)
        except ValueError:
            raise UnknownAttribute(f"attribute {attribute!r} not in schema") from None

    def to_json_dict(self) -> dict:
        return {
            "groups": [
                {"name": name, "attributes": list(attrs)} for name, attrs in self.groups
            ]
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "AttributeSchema":
        if "groups" not in data:
            raise MissingSchema("schema JSON lacks a 'groups' key")
        groups = []
        for g in data["groups"]:
            groups.append((str(g["name"]), tuple(str(a) for a in g["attributes"])))
        return cls(groups=tuple(groups))

    @classmethod
    def flat(cls, attributes: Sequence[str], group_name: str = "attributes") -> "AttributeSchema":
        return cls(groups=((group_name, tuple(attributes)),))


def load_schema(path: str | Path) -> AttributeSchema:
    """Parse a schema JSON file ({"groups": [{"name", "attributes"}]})."""
    with open(path, "r", encoding="utf-8") as f:
        return AttributeSchema.from_json_dict(json.load(f))


def default_schema() -> AttributeSchema:
    """Reference person-attribute vocabulary.

    Illustrative defaults covering the usual surveillance-crop categories;
    real datasets override this via their manifest header or schema file.
    """
    return AttributeSchema(
        groups=(
            ("upper_body_color", ("upper_red", "upper_blue", "upper_green", "upper_black", "upper_white")),
            ("lower_body_color", ("lower_blue", "lower_black", "lower_white", "lower_brown")),
            ("upper_body_type", ("shirt", "tshirt", "kurta", "jacket")),
            ("lower_body_type", ("trousers", "jeans", "shorts", "skirt")),
            ("sleeve_length", ("sleeve_short", "sleeve_long", "sleeveless")),
            ("carried_accessories", ("bag", "backpack", "umbrella", "phone")),
            ("footwear", ("shoes", "sandals", "barefoot")),
            ("headgear", ("cap", "helmet", "turban", "scarf")),
            ("pose", ("standing", "walking", "sitting")),
            ("view", ("view_front", "view_back", "view_side")),
        )
    )


@dataclass(frozen=True)
class LabeledSample:
    """One image reference plus its multi-hot label vector.

    parent_id/replica_index are set on augmentation replicas (and on
    retained originals, where replica_index is 0).
    """

    sample_id: str
    image_path: str
    labels: tuple[int, ...]
    parent_id: str | None = None
    replica_index: int | None = None

    def __post_init__(self) -> None:
        if any(v not in (0, 1) for v in self.labels):
            raise ManifestError(f"sample {self.sample_id!r}: labels must be 0/1")


@dataclass(frozen=True)
class DatasetManifest:
    schema: AttributeSchema
    samples: tuple[LabeledSample, ...]
    source_tag: str = ""
    # Directory against which relative image paths resolve; not serialized.
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        ids = [s.sample_id for s in self.samples]
        if len(set(ids)) != len(ids):
            seen: set[str] = set()
            dupes = sorted({i for i in ids if i in seen or seen.add(i)})
            raise DuplicateSampleId(f"duplicate sample ids in manifest: {dupes}")
        L = self.schema.num_attributes
        for s in self.samples:
            if len(s.labels) != L:
                raise ManifestError(
                    f"sample {s.sample_id!r}: {len(s.labels)} labels, schema has {L}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def resolve_path(self, sample: LabeledSample) -> Path:
        p = Path(sample.image_path)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        return p

    def label_matrix(self) -> np.ndarray:
        """All labels as an (N, L) uint8 matrix in manifest order."""
        L = self.schema.num_attributes
        if not self.samples:
            return np.zeros((0, L), dtype=np.uint8)
        return np.array([s.labels for s in self.samples], dtype=np.uint8)


@dataclass(frozen=True)
class SplitResult:
    train: tuple[str, ...]
    val: tuple[str, ...]
    seed: int


def _parse_binary_cell(value, context: str) -> int:
    text = str(value).strip()
    if text not in ("0", "1"):
        raise ManifestError(f"{context}: label cell must be 0 or 1, got {value!r}")
    return int(text)


def _manifest_from_rows(
    header: Sequence[str],
    rows: Iterable[Sequence[str]],
    schema: AttributeSchema | None,
    source_tag: str,
    root: Path | None,
) -> DatasetManifest:
    header = [h.strip() for h in header]
    if not header or header[0] != "sample_id" or "image_path" not in header:
        raise MissingSchema("CSV manifest needs a 'sample_id,image_path,...' header row")
    meta_cols = [c for c in header if c in RESERVED_COLUMNS]
    attr_cols = [c for c in header if c not in RESERVED_COLUMNS]
    if not attr_cols:
        raise MissingSchema("CSV manifest header declares no attribute columns")

    if schema is None:
        schema = AttributeSchema.flat(attr_cols)
    else:
        known = set(schema.attributes)
        for c in attr_cols:
            if c not in known:
                raise UnknownAttribute(f"manifest column {c!r} not in schema")

    col_index = {c: i for i, c in enumerate(header)}
    attr_order = schema.attributes
    samples = []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ManifestError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        sid = row[col_index["sample_id"]].strip()
        labels = tuple(
            _parse_binary_cell(row[col_index[a]], f"line {lineno}, column {a!r}")
            if a in col_index
            else 0
            for a in attr_order
        )
        parent = row[col_index["parent_id"]].strip() if "parent_id" in col_index else None
        replica = row[col_index["replica_index"]].strip() if "replica_index" in col_index else None
        samples.append(
            LabeledSample(
                sample_id=sid,
                image_path=row[col_index["image_path"]].strip(),
                labels=labels,
                parent_id=parent or None,
                replica_index=int(replica) if replica else None,
            )
        )
    del meta_cols
    return DatasetManifest(schema=schema, samples=tuple(samples), source_tag=source_tag, root=root)


def _manifest_from_json_dict(data: Mapping, root: Path | None) -> DatasetManifest:
    if "schema" not in data:
        raise MissingSchema("JSON manifest lacks a 'schema' block")
    schema = AttributeSchema.from_json_dict(data["schema"])
    attr_order = schema.attributes
    samples = []
    for entry in data.get("samples", []):
        raw = entry.get("labels", [])
        if isinstance(raw, Mapping):
            for name in raw:
                if name not in attr_order:
                    raise UnknownAttribute(f"sample {entry.get('sample_id')!r}: attribute {name!r} not in schema")
            labels = tuple(_parse_binary_cell(raw.get(a, 0), f"attribute {a!r}") for a in attr_order)
        else:
            if len(raw) != len(attr_order):
                raise ManifestError(
                    f"sample {entry.get('sample_id')!r}: {len(raw)} labels, schema has {len(attr_order)}"
                )
            labels = tuple(_parse_binary_cell(v, "label list") for v in raw)
        samples.append(
            LabeledSample(
                sample_id=str(entry["sample_id"]),
                image_path=str(entry["image_path"]),
                labels=labels,
                parent_id=entry.get("parent_id"),
                replica_index=entry.get("replica_index"),
            )
        )
    return DatasetManifest(
        schema=schema,
        samples=tuple(samples),
        source_tag=str(data.get("source_tag", "")),
        root=root,
    )


def load_manifest(
    path: str | Path,
    schema: AttributeSchema | None = None,
    check_images: bool = True,
) -> DatasetManifest:
    """Parse and validate a CSV or JSON manifest.

    CSV attribute grouping comes from, in order of precedence: the *schema*
    argument, a ``schema.json`` sidecar in the manifest directory, or a flat
    single group built from the header. Image paths resolve relative to the
    manifest directory and are checked eagerly unless *check_images* is off.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    root = path.parent

    if path.suffix.lower() == ".json":
        with open(path, "r", encoding="utf-8") as f:
            manifest = _manifest_from_json_dict(json.load(f), root=root)
    else:
        if schema is None:
            sidecar = root / "schema.json"
            if sidecar.is_file():
                schema = load_schema(sidecar)
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            try:
                header = next(reader)
            except StopIteration:
                raise MissingSchema(f"empty manifest: {path}") from None
            manifest = _manifest_from_rows(header, reader, schema, source_tag=path.stem, root=root)

    if check_images:
        for s in manifest.samples:
            if not manifest.resolve_path(s).is_file():
                raise MissingImage(f"sample {s.sample_id!r}: image not found: {s.image_path}")
    return manifest


def manifest_to_csv(manifest: DatasetManifest) -> str:
    """Render a manifest as CSV text (the documented column layout)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    has_parents = any(s.parent_id is not None or s.replica_index is not None for s in manifest.samples)
    header = ["sample_id", "image_path"]
    if has_parents:
        header += ["parent_id", "replica_index"]
    header += list(manifest.schema.attributes)
    writer.writerow(header)
    for s in manifest.samples:
        row = [s.sample_id, s.image_path]
        if has_parents:
            row += [s.parent_id or "", "" if s.replica_index is None else str(s.replica_index)]
        row += [str(v) for v in s.labels]
        writer.writerow(row)
    return buf.getvalue()


def manifest_to_json_dict(manifest: DatasetManifest) -> dict:
    return {
        "schema": manifest.schema.to_json_dict(),
        "source_tag": manifest.source_tag,
        "samples": [
            {
                "sample_id": s.sample_id,
                "image_path": s.image_path,
                **({"parent_id": s.parent_id} if s.parent_id is not None else {}),
                **({"replica_index": s.replica_index} if s.replica_index is not None else {}),
                "labels": list(s.labels),
            }
            for s in manifest.samples
        ],
    }


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest as CSV or JSON depending on the path suffix."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        text = json.dumps(manifest_to_json_dict(manifest), indent=2) + "\n"
    else:
        text = manifest_to_csv(manifest)
    path.write_text(text, encoding="utf-8")


def split_dataset(
    manifest: DatasetManifest, val_fraction: float = 0.2, seed: int = 0
) -> SplitResult:
    """Deterministic train/validation split over original samples.

    Shuffles sample ids with a PRNG seeded by *seed* and takes the last
    round(val_fraction * N) ids (ties rounded toward validation) as the
    validation side. The split must run on original images, before any
    augmentation, so replicas of a validation image can never leak into
    training.
    """
    n = len(manifest.samples)
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in (0, 1), got {val_fraction}")
    if n < 2:
        raise DegenerateSplit(f"need at least 2 samples to split, got {n}")
    n_val = int(math.floor(n * val_fraction + 0.5))
    if n_val == 0 or n_val == n:
        raise DegenerateSplit(f"split of {n} samples at {val_fraction} leaves one side empty")

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    ids = [manifest.samples[i].sample_id for i in order]
    return SplitResult(train=tuple(ids[: n - n_val]), val=tuple(ids[n - n_val:]), seed=seed)


def subset(manifest: DatasetManifest, sample_ids: Iterable[str]) -> list[LabeledSample]:
    """Samples for the given ids, in the order the ids are listed."""
    by_id = {s.sample_id: s for s in manifest.samples}
    return [by_id[i] for i in sample_ids]


def positive_ratios(samples: Sequence[LabeledSample], schema: AttributeSchema) -> np.ndarray:
    """Per-attribute fraction of samples with the attribute present."""
    if len(samples) == 0:
        raise EmptyDataset("positive_ratios needs at least one sample")
    mat = np.array([s.labels for s in samples], dtype=np.float64)
    if mat.shape[1] != schema.num_attributes:
        raise ManifestError("sample label length does not match schema")
    return mat.mean(axis=0)
