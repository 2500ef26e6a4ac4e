import json

import numpy as np
import pytest
import torch

from par.artifact import (
    PREPROCESS_FILE,
    RECIPE_FILE,
    SCHEMA_FILE,
    WEIGHTS_FILE,
    load_artifact,
    save_artifact,
)
from par.dataset import AttributeSchema
from par.errors import InvalidArtifact
from par.losses import LossConfig, compute_class_weights
from par.models import BackboneSpec, ClassifierHeadSpec, build_model


def _model(l=3):
    return build_model(
        BackboneSpec(name="tiny_cnn", input_size=(16, 16)),
        ClassifierHeadSpec(num_attributes=l, dropout_p=0.25),
    )


def _schema(l=3):
    return AttributeSchema.flat(tuple(f"a{i}" for i in range(l)))


class TestSaveLoad:
    def test_files_written(self, tmp_path):
        save_artifact(tmp_path / "art", _model(), _schema())
        for name in (WEIGHTS_FILE, SCHEMA_FILE, PREPROCESS_FILE, RECIPE_FILE):
            assert (tmp_path / "art" / name).is_file()

    def test_round_trip_identical_logits(self, tmp_path):
        model = _model()
        save_artifact(tmp_path / "art", model, _schema())
        art = load_artifact(tmp_path / "art")

        model.eval()
        x = torch.rand((2, 3, 16, 16), generator=torch.Generator().manual_seed(0))
        with torch.no_grad():
            assert torch.equal(model(x), art.model(x))

    def test_loaded_model_is_eval_mode(self, tmp_path):
        save_artifact(tmp_path / "art", _model(), _schema())
        art = load_artifact(tmp_path / "art")
        assert not art.model.training

    def test_metadata_round_trip(self, tmp_path):
        schema = _schema()
        weights = compute_class_weights(np.array([0.2, 0.5, 0.8]))
        loss = LossConfig(kind="scaled_bce_weighted", weights=weights)
        save_artifact(tmp_path / "art", _model(), schema, loss_config=loss)

        art = load_artifact(tmp_path / "art")
        assert art.schema == schema
        assert art.preprocess_spec.input_size == (16, 16)
        assert art.loss_config.kind == "scaled_bce_weighted"
        assert np.allclose(art.loss_config.weights.w_pos, weights.w_pos)
        assert np.allclose(art.loss_config.weights.source_ratios, weights.source_ratios)

    def test_model_version_tracks_weights(self, tmp_path):
        version_a = save_artifact(tmp_path / "a", _model(), _schema())
        art_a = load_artifact(tmp_path / "a")
        save_artifact(tmp_path / "b", _model(), _schema())
        art_b = load_artifact(tmp_path / "b")
        assert len(art_a.model_version) == 12
        # fresh random init differs, so the content hash must differ
        assert art_a.model_version != art_b.model_version
        del version_a

    def test_same_weights_same_version(self, tmp_path):
        model = _model()
        save_artifact(tmp_path / "a", model, _schema())
        save_artifact(tmp_path / "b", model, _schema())
        assert load_artifact(tmp_path / "a").model_version == load_artifact(tmp_path / "b").model_version


class TestValidation:
    def test_missing_file_rejected(self, tmp_path):
        save_artifact(tmp_path / "art", _model(), _schema())
        (tmp_path / "art" / SCHEMA_FILE).unlink()
        with pytest.raises(InvalidArtifact):
            load_artifact(tmp_path / "art")

    def test_corrupt_recipe_rejected(self, tmp_path):
        save_artifact(tmp_path / "art", _model(), _schema())
        (tmp_path / "art" / RECIPE_FILE).write_text("{not json")
        with pytest.raises(InvalidArtifact):
            load_artifact(tmp_path / "art")

    def test_schema_head_width_mismatch_rejected(self, tmp_path):
        save_artifact(tmp_path / "art", _model(l=3), _schema(l=3))
        wrong = AttributeSchema.flat(("x", "y"))
        (tmp_path / "art" / SCHEMA_FILE).write_text(json.dumps(wrong.to_json_dict()))
        with pytest.raises(InvalidArtifact):
            load_artifact(tmp_path / "art")

    def test_nonexistent_dir_rejected(self, tmp_path):
        with pytest.raises(InvalidArtifact):
            load_artifact(tmp_path / "nowhere")
