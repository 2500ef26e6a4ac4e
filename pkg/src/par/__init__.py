"""Person attribute recognition toolkit.

Manifest-driven datasets, deterministic affine augmentation, frequency
scaled multi-label losses, a backbone + classifier-head model family, a
training/evaluation harness and an HTTP inference service.
"""

from .artifact import ModelArtifact, load_artifact, save_artifact
from .augment import (
    AffineParams,
    AugmentationConfig,
    AugmentedImage,
    apply_affine,
    augment_dataset,
    augment_image,
    identity_params,
    sample_affine,
)
from .dataset import (
    AttributeSchema,
    DatasetManifest,
    LabeledSample,
    SplitResult,
    default_schema,
    load_manifest,
    positive_ratios,
    save_manifest,
    split_dataset,
    subset,
)
from .errors import (
    DecodeError,
    DegenerateRatio,
    DegenerateSplit,
    DuplicateSampleId,
    EmptyDataset,
    InvalidArtifact,
    InvalidImage,
    ManifestError,
    MissingImage,
    MissingSchema,
    ModelNotLoaded,
    NonBinaryTarget,
    NonFiniteLoss,
    ParError,
    PayloadTooLarge,
    PortInUse,
    ShapeMismatch,
    StrictMismatch,
    UnknownAttribute,
    UnknownBackbone,
    WeightsLoadError,
)
from .losses import (
    ClassWeights,
    LossConfig,
    bce_with_logits,
    compute_class_weights,
    logit_shift_bce,
    loss_value_and_grad,
)
from .metrics import ConfusionCounts, MetricReport, confusion_counts, mean_accuracy
from .models import (
    BackboneSpec,
    ClassifierHeadSpec,
    FeatClassifier,
    LoadReport,
    PreprocessSpec,
    PretrainedWeightsRef,
    build_model,
    load_pretrained,
    preprocess,
    preprocess_batch,
)
from .service import ServiceConfig, create_app, predict_image, predict_pixels, serve
from .training import (
    ArrayDataset,
    EpochMetrics,
    RunReport,
    SchedulerSpec,
    TrainRunConfig,
    build_torch_loss,
    dataset_from_samples,
    emit_loss_curves,
    epoch_learning_rate,
    evaluate_model,
    export_comparison,
    load_run_report,
    pool_with_replicas,
    save_run_report,
    select_checkpoint,
    train_and_evaluate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
