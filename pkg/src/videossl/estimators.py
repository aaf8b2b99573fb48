"""Scikit-learn style estimator wrappers around the training loops.

X is a (N, T, H, W) float array of clips in [0, 1]. These wrappers exist so
the method composes with the usual sklearn tooling (pipelines, clone,
cross-validation); the functional API in trainer/harness remains the
lower-level interface.
"""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .augment import AugmentationConfig
from .data import LabeledClip, VideoClip
from .errors import InputError
from .model import EncoderConfig, HeadConfig
from .trainer import (
    TrainConfig,
    evaluate_model,
    ssl_pretrain,
    train_classifier,
)


def check_video_array(X):
    """Validate and coerce X to a (N, T, H, W) float32 array in [0, 1]."""
    X = np.asarray(X, dtype=np.float32)
    if X.ndim != 4 or X.shape[0] == 0:
        raise InputError(f"expected nonempty (N, T, H, W) array, got shape {X.shape}")
    if X.min() < 0.0 or X.max() > 1.0:
        raise InputError("clip intensities must lie in [0, 1]")
    return X


def _clips(X):
    return [VideoClip(x) for x in check_video_array(X)]


class ContrastivePretrainer(BaseEstimator, TransformerMixin):
    """Self-supervised video pretraining; transform() yields representations."""

    def __init__(self, steps=100, batch_size=8, learning_rate=3e-4,
                 ema_momentum=0.99, ssl_variant="byol", temperature=0.1,
                 temporal_augmentations=True, representation_dim=64,
                 stage_channels=(8, 16, 32), random_state=0):
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.ema_momentum = ema_momentum
        self.ssl_variant = ssl_variant
        self.temperature = temperature
        self.temporal_augmentations = temporal_augmentations
        self.representation_dim = representation_dim
        self.stage_channels = stage_channels
        self.random_state = random_state

    def _configs(self, X):
        enc = EncoderConfig(stage_channels=tuple(self.stage_channels),
                            representation_dim=self.representation_dim,
                            input_shape=tuple(X.shape[1:]))
        train = TrainConfig(learning_rate=self.learning_rate,
                            ema_momentum=self.ema_momentum,
                            batch_size=self.batch_size,
                            steps=self.steps,
                            seed=self.random_state,
                            ssl_variant=self.ssl_variant,
                            temperature=self.temperature,
                            temporal_aug_enabled=self.temporal_augmentations)
        return enc, train

    def fit(self, X, y=None):
        X = check_video_array(X)
        enc_cfg, train_cfg = self._configs(X)
        result = ssl_pretrain(_clips(X), train_cfg, enc_cfg, HeadConfig(),
                              AugmentationConfig())
        self.encoder_config_ = enc_cfg
        self.encoder_state_ = result.encoder_state()
        self.pretrain_result_ = result
        self.loss_trace_ = list(result.loss_trace)
        return self

    def transform(self, X):
        if not hasattr(self, "pretrain_result_"):
            raise NotFittedError("ContrastivePretrainer is not fitted")
        X = check_video_array(X)
        encoder = self.pretrain_result_.encoder
        encoder.eval()
        with torch.no_grad():
            reps = [encoder(torch.from_numpy(x[None]))[0].numpy() for x in X]
        return np.stack(reps)


class VideoClassifier(BaseEstimator, ClassifierMixin):
    """Binary video classifier trained in one of the four regimes.

    `pretrainer` must be a fitted ContrastivePretrainer for the ssl_* modes
    and None otherwise.
    """

    def __init__(self, mode="fully_supervised", pretrainer=None, steps=100,
                 batch_size=8, learning_rate=3e-4, augment=True, random_state=0):
        self.mode = mode
        self.pretrainer = pretrainer
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.augment = augment
        self.random_state = random_state

    def fit(self, X, y):
        X = check_video_array(X)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise InputError("y must be one label per clip")
        labeled = [LabeledClip(VideoClip(x), int(lab), [], f"est{i:05d}")
                   for i, (x, lab) in enumerate(zip(X, y))]
        if self.pretrainer is not None:
            enc_cfg = self.pretrainer.encoder_config_
            init_state = self.pretrainer.encoder_state_
        else:
            enc_cfg = EncoderConfig(input_shape=tuple(X.shape[1:]))
            init_state = None
        train_cfg = TrainConfig(learning_rate=self.learning_rate,
                                batch_size=self.batch_size,
                                seed=self.random_state,
                                augment_supervised=self.augment,
                                classifier_steps=self.steps)
        result = train_classifier(labeled, self.mode, init_state, train_cfg,
                                  enc_cfg, HeadConfig(), AugmentationConfig())
        self.result_ = result
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        if not hasattr(self, "result_"):
            raise NotFittedError("VideoClassifier is not fitted")
        X = check_video_array(X)
        scores, _ = evaluate_model(self.result_.model, _clips(X))
        p1 = np.asarray(scores)
        return np.stack([1.0 - p1, p1], axis=1)

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)
