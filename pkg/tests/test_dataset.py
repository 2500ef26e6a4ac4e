import json

import numpy as np
import pytest

from par.dataset import (
    AttributeSchema,
    DatasetManifest,
    LabeledSample,
    default_schema,
    load_manifest,
    manifest_to_csv,
    positive_ratios,
    save_manifest,
    split_dataset,
    subset,
)
from par.errors import (
    DegenerateSplit,
    DuplicateSampleId,
    EmptyDataset,
    ManifestError,
    MissingImage,
    MissingSchema,
    UnknownAttribute,
)


def _sample(i, labels=(1, 0), path="img.png"):
    return LabeledSample(sample_id=f"s{i:04d}", image_path=path, labels=tuple(labels))


def _manifest(n, schema=None, labels=(1, 0)):
    schema = schema or AttributeSchema.flat(("a", "b"))
    return DatasetManifest(schema=schema, samples=tuple(_sample(i, labels) for i in range(n)))


class TestAttributeSchema:
    def test_attribute_order_concatenates_groups(self):
        schema = AttributeSchema(groups=(("g1", ("a", "b")), ("g2", ("c",))))
        assert schema.attributes == ("a", "b", "c")
        assert schema.num_attributes == 3
        assert schema.group_of("c") == "g2"
        assert schema.index_of("b") == 1

    def test_duplicate_names_rejected(self):
        with pytest.raises(ManifestError):
            AttributeSchema(groups=(("g1", ("a",)), ("g2", ("a",))))

    def test_reserved_names_rejected(self):
        with pytest.raises(ManifestError):
            AttributeSchema.flat(("sample_id", "a"))

    def test_empty_schema_rejected(self):
        with pytest.raises(MissingSchema):
            AttributeSchema(groups=())

    def test_unknown_attribute_lookup(self):
        schema = AttributeSchema.flat(("a",))
        with pytest.raises(UnknownAttribute):
            schema.group_of("cape")
        with pytest.raises(UnknownAttribute):
            schema.index_of("cape")

    def test_json_round_trip(self):
        schema = default_schema()
        assert AttributeSchema.from_json_dict(schema.to_json_dict()) == schema


class TestManifestValidation:
    def test_duplicate_sample_ids_rejected(self):
        schema = AttributeSchema.flat(("a",))
        samples = (
            LabeledSample("dup", "x.png", (1,)),
            LabeledSample("dup", "y.png", (0,)),
        )
        with pytest.raises(DuplicateSampleId):
            DatasetManifest(schema=schema, samples=samples)

    def test_label_width_must_match_schema(self):
        schema = AttributeSchema.flat(("a", "b"))
        with pytest.raises(ManifestError):
            DatasetManifest(schema=schema, samples=(LabeledSample("s", "x.png", (1,)),))

    def test_non_binary_labels_rejected(self):
        with pytest.raises(ManifestError):
            LabeledSample("s", "x.png", (2, 0))

    def test_empty_sample_list_is_valid(self):
        # N=0 manifests are constructible; only training rejects them later.
        man = _manifest(0)
        assert len(man) == 0
        assert man.label_matrix().shape == (0, 2)


class TestManifestIO:
    def test_csv_round_trip_with_sidecar_schema(self, tmp_path):
        schema = AttributeSchema(groups=(("g1", ("a", "b")), ("g2", ("c",))))
        (tmp_path / "schema.json").write_text(json.dumps(schema.to_json_dict()))
        img = tmp_path / "img.png"
        _write_tiny_png(img)
        man = DatasetManifest(
            schema=schema,
            samples=(LabeledSample("s1", "img.png", (1, 0, 1)),),
            root=tmp_path,
        )
        save_manifest(man, tmp_path / "manifest.csv")

        loaded = load_manifest(tmp_path / "manifest.csv")
        assert loaded.schema == schema  # grouping restored from the sidecar
        assert loaded.samples[0].labels == (1, 0, 1)

    def test_csv_without_schema_gets_flat_grouping(self, tmp_path):
        _write_tiny_png(tmp_path / "img.png")
        (tmp_path / "m.csv").write_text("sample_id,image_path,a,b\ns1,img.png,1,0\n")
        loaded = load_manifest(tmp_path / "m.csv")
        assert loaded.schema.attributes == ("a", "b")
        assert len(loaded.schema.groups) == 1

    def test_csv_explicit_schema_rejects_unknown_column(self, tmp_path):
        _write_tiny_png(tmp_path / "img.png")
        (tmp_path / "m.csv").write_text("sample_id,image_path,cape\ns1,img.png,1\n")
        with pytest.raises(UnknownAttribute):
            load_manifest(tmp_path / "m.csv", schema=AttributeSchema.flat(("a",)))

    def test_csv_rejects_non_binary_cells(self, tmp_path):
        _write_tiny_png(tmp_path / "img.png")
        (tmp_path / "m.csv").write_text("sample_id,image_path,a\ns1,img.png,7\n")
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "m.csv")

    def test_csv_missing_header_rejected(self, tmp_path):
        (tmp_path / "m.csv").write_text("id,path,a\nx,y,1\n")
        with pytest.raises(MissingSchema):
            load_manifest(tmp_path / "m.csv")

    def test_missing_image_checked_eagerly(self, tmp_path):
        (tmp_path / "m.csv").write_text("sample_id,image_path,a\ns1,gone.png,1\n")
        with pytest.raises(MissingImage):
            load_manifest(tmp_path / "m.csv")
        loaded = load_manifest(tmp_path / "m.csv", check_images=False)
        assert len(loaded) == 1

    def test_json_round_trip(self, tmp_path):
        _write_tiny_png(tmp_path / "img.png")
        schema = AttributeSchema.flat(("a", "b"))
        man = DatasetManifest(
            schema=schema,
            samples=(LabeledSample("s1", "img.png", (0, 1)),),
            root=tmp_path,
        )
        save_manifest(man, tmp_path / "m.json")
        loaded = load_manifest(tmp_path / "m.json")
        assert loaded.schema == schema
        assert loaded.samples[0].labels == (0, 1)

    def test_json_dict_labels_and_unknown_attribute(self, tmp_path):
        _write_tiny_png(tmp_path / "img.png")
        payload = {
            "schema": {"groups": [{"name": "g", "attributes": ["a", "b"]}]},
            "samples": [{"sample_id": "s1", "image_path": "img.png", "labels": {"b": 1}}],
        }
        (tmp_path / "m.json").write_text(json.dumps(payload))
        loaded = load_manifest(tmp_path / "m.json")
        assert loaded.samples[0].labels == (0, 1)  # omitted attrs default to 0

        payload["samples"][0]["labels"] = {"cape": 1}
        (tmp_path / "m.json").write_text(json.dumps(payload))
        with pytest.raises(UnknownAttribute):
            load_manifest(tmp_path / "m.json")

    def test_augmented_columns_round_trip(self, tmp_path):
        _write_tiny_png(tmp_path / "img.png")
        schema = AttributeSchema.flat(("a",))
        man = DatasetManifest(
            schema=schema,
            samples=(
                LabeledSample("p1_r00", "img.png", (1,), parent_id="p1", replica_index=0),
                LabeledSample("p1_r01", "img.png", (1,), parent_id="p1", replica_index=1),
            ),
            root=tmp_path,
        )
        text = manifest_to_csv(man)
        assert "parent_id" in text.splitlines()[0]
        save_manifest(man, tmp_path / "m.csv")
        loaded = load_manifest(tmp_path / "m.csv")
        assert loaded.samples[1].parent_id == "p1"
        assert loaded.samples[1].replica_index == 1


class TestSplit:
    def test_five_samples_fraction_point_two(self):
        split = split_dataset(_manifest(5), val_fraction=0.2, seed=0)
        assert len(split.val) == 1
        assert len(split.train) == 4

    def test_determinism_and_disjointness(self):
        man = _manifest(97)
        a = split_dataset(man, val_fraction=0.2, seed=11)
        b = split_dataset(man, val_fraction=0.2, seed=11)
        assert a == b
        assert set(a.train).isdisjoint(a.val)
        assert set(a.train) | set(a.val) == {s.sample_id for s in man.samples}

    def test_different_seeds_differ(self):
        man = _manifest(50)
        assert split_dataset(man, seed=1) != split_dataset(man, seed=2)

    def test_rounding_goes_to_validation(self):
        # 7 * 0.2 = 1.4 -> 1; 3 * 0.5 = 1.5 rounds half up to 2.
        assert len(split_dataset(_manifest(7), val_fraction=0.2).val) == 1
        assert len(split_dataset(_manifest(3), val_fraction=0.5).val) == 2

    def test_degenerate_splits_rejected(self):
        with pytest.raises(DegenerateSplit):
            split_dataset(_manifest(1), val_fraction=0.2)
        with pytest.raises(DegenerateSplit):
            split_dataset(_manifest(2), val_fraction=0.01)
        with pytest.raises(ValueError):
            split_dataset(_manifest(10), val_fraction=0.0)

    def test_subset_preserves_requested_order(self):
        man = _manifest(4)
        got = subset(man, ["s0002", "s0000"])
        assert [s.sample_id for s in got] == ["s0002", "s0000"]


class TestPositiveRatios:
    def test_hand_counted_case(self):
        schema = AttributeSchema.flat(("a", "b"))
        samples = [
            LabeledSample(f"s{i}", "x.png", labels)
            for i, labels in enumerate([(1, 0), (1, 1), (0, 0), (1, 0)])
        ]
        r = positive_ratios(samples, schema)
        assert np.allclose(r, [0.75, 0.25])

    def test_all_positive_column(self):
        schema = AttributeSchema.flat(("a",))
        samples = [LabeledSample(f"s{i}", "x.png", (1,)) for i in range(3)]
        assert positive_ratios(samples, schema)[0] == 1.0

    def test_matches_brute_force_recount(self):
        # Oracle: count positives per attribute with a plain python loop.
        rng = np.random.default_rng(5)
        schema = AttributeSchema.flat(tuple(f"a{i}" for i in range(6)))
        mat = (rng.random((1000, 6)) < 0.3).astype(int)
        samples = [
            LabeledSample(f"s{i}", "x.png", tuple(int(v) for v in row))
            for i, row in enumerate(mat)
        ]
        r = positive_ratios(samples, schema)
        for j in range(6):
            count = sum(1 for s in samples if s.labels[j] == 1)
            assert r[j] == count / len(samples)

    def test_empty_rejected(self):
        with pytest.raises(EmptyDataset):
            positive_ratios([], AttributeSchema.flat(("a",)))


def _write_tiny_png(path):
    from par.imaging import save_png

    save_png(np.zeros((2, 2, 3), dtype=np.uint8), path)
