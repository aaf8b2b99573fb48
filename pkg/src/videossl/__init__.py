"""Contrastive self-supervised pretraining and evaluation for grayscale
2D+time video."""

from .augment import AugmentationConfig, AugmentationPlan, apply_plan, draw_augmentation
from .data import (
    DatasetManifest,
    GroundTruthBox,
    LabeledClip,
    SynthConfig,
    VideoClip,
    generate_synthetic_dataset,
    load_dataset,
    sample_window,
    save_dataset,
    split_by_source,
    subsample_fraction,
)
from .estimators import ContrastivePretrainer, VideoClassifier
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    run_ablation_temporal,
    run_fraction_sweep,
    run_saliency_eval,
)
from .metrics import confusion_metrics, roc_auc
from .model import EncoderConfig, HeadConfig
from .saliency import OcclusionConfig, occlusion_saliency, weighted_iou
from .trainer import TrainConfig, evaluate_model, ssl_pretrain, train_classifier

__version__ = "0.1.0"
