"""Training loops: BYOL-style pretraining with an EMA target network, the
pairwise-contrastive variant, the four supervised regimes, and evaluation.

All loops are driven by one seeded numpy generator (batch selection, window
offsets, augmentation draws) plus torch.manual_seed for parameter init, so a
(config, seed, data) triple fully determines the outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict, replace

import numpy as np
import torch

from .augment import AugmentationConfig, draw_augmentation, apply_plan
from .data import sample_window, center_window
from .errors import ConfigurationError, TrainingError, UsageError
from .model import (
    ClassifierModel,
    EncoderConfig,
    HeadConfig,
    SSLOnlineNetwork,
    SSLSharedNetwork,
    SSLTargetNetwork,
    byol_loss,
    compute_gradients,
    count_parameters,
    cross_entropy_loss,
    ntxent_loss,
)

MODES = ("fully_supervised", "ssl_feature_extractor", "ssl_fine_tuned",
         "random_feature_extractor")
SSL_VARIANTS = ("byol", "pairwise_contrastive")


@dataclass
class TrainConfig:
    learning_rate: float = 3e-4
    ema_momentum: float = 0.99
    batch_size: int = 8
    steps: int = 100
    seed: int = 0
    ssl_variant: str = "byol"
    temperature: float = 0.1
    temporal_aug_enabled: bool = True
    augment_supervised: bool = True
    classifier_steps: int = 100

    def __post_init__(self):
        if not 0.0 <= self.ema_momentum <= 1.0:
            raise ConfigurationError("ema_momentum must be in [0, 1]")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.ssl_variant not in SSL_VARIANTS:
            raise ConfigurationError(f"unknown ssl_variant {self.ssl_variant!r}")

    def to_json_dict(self):
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d):
        return cls(**d)


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(module, grads, state: OptimizerState, learning_rate,
              beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update on the trainable parameters of `module`
    that have an entry in `grads`. Frozen tensors are never touched."""
    state.step += 1
    t = state.step
    with torch.no_grad():
        for name, p in module.named_parameters():
            g = grads.get(name)
            if g is None or not p.requires_grad:
                continue
            if g.shape != p.shape:
                raise UsageError(f"gradient shape {tuple(g.shape)} != param {tuple(p.shape)} for {name}")
            m = state.m.setdefault(name, torch.zeros_like(p))
            v = state.v.setdefault(name, torch.zeros_like(p))
            m.mul_(beta1).add_(g, alpha=1 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1 - beta2)
            m_hat = m / (1 - beta1 ** t)
            v_hat = v / (1 - beta2 ** t)
            p.add_(-learning_rate * m_hat / (v_hat.sqrt() + eps))


def ema_update(target, online, tau):
    """target <- tau * target + (1 - tau) * online, elementwise per tensor.

    `online` may be a module or a name -> tensor mapping; only names present
    in the target schema are required."""
    if isinstance(online, dict):
        online_params = online
    else:
        online_params = dict(online.named_parameters())
    with torch.no_grad():
        for name, t in target.named_parameters():
            o = online_params.get(name)
            if o is None or o.shape != t.shape:
                raise UsageError(f"target parameter {name} missing or mismatched in online network")
            t.copy_(tau * t + (1.0 - tau) * o)


def _clip_to_views(clip, aug_cfg, window_length, rng, n_views):
    windowed = sample_window(clip, window_length, rng)
    T, H, W = windowed.frames.shape
    views = []
    for _ in range(n_views):
        plan = draw_augmentation(aug_cfg, T, rng, H=H, W=W)
        views.append(apply_plan(windowed, plan).frames)
    return views


def _to_batch(frame_list):
    return torch.from_numpy(np.ascontiguousarray(np.stack(frame_list)))


def _check_finite(loss, step):
    val = float(loss.detach())
    if not math.isfinite(val):
        raise TrainingError(f"non-finite loss {val} at step {step}", step=step)
    return val


@dataclass
class PretrainResult:
    online: torch.nn.Module
    target: torch.nn.Module | None
    loss_trace: list
    config: TrainConfig
    encoder_config: EncoderConfig
    head_config: HeadConfig
    initial_target_state: dict | None = None
    online_trace: list | None = None  # per-step post-update online params

    @property
    def encoder(self):
        return self.online.encoder

    def encoder_state(self):
        return {k: v.clone() for k, v in self.online.encoder.state_dict().items()}


def ssl_pretrain(unlabeled, config: TrainConfig,
                 encoder_config: EncoderConfig | None = None,
                 head_config: HeadConfig | None = None,
                 aug_config: AugmentationConfig | None = None,
                 record_online_trace: bool = False) -> PretrainResult:
    encoder_config = encoder_config or EncoderConfig()
    head_config = head_config or HeadConfig()
    aug_config = aug_config or AugmentationConfig()
    aug_config = replace(aug_config, temporal_enabled=config.temporal_aug_enabled)

    n = len(unlabeled)
    if n < config.batch_size:
        raise ConfigurationError(f"{n} unlabeled clips < batch size {config.batch_size}")
    window_length = encoder_config.input_shape[0]

    torch.manual_seed(config.seed)
    if config.ssl_variant == "byol":
        online = SSLOnlineNetwork(encoder_config, head_config)
        target = SSLTargetNetwork(encoder_config, head_config)
        target.encoder.load_state_dict(online.encoder.state_dict())
        target.projector.load_state_dict(online.projector.state_dict())
        initial_target_state = {k: v.clone() for k, v in target.state_dict().items()}
    else:
        online = SSLSharedNetwork(encoder_config, head_config)
        target = None
        initial_target_state = None

    rng = np.random.default_rng(config.seed)
    state = OptimizerState()
    loss_trace = []
    online_trace = [] if record_online_trace else None

    for step in range(config.steps):
        idx = rng.choice(n, size=config.batch_size, replace=False)
        views1, views2 = [], []
        for i in idx:
            v1, v2 = _clip_to_views(unlabeled[i], aug_config, window_length, rng, 2)
            views1.append(v1)
            views2.append(v2)
        x1, x2 = _to_batch(views1), _to_batch(views2)

        online.train()
        if config.ssl_variant == "byol":
            target.train()
            q1, q2 = online(x1), online(x2)
            z1, z2 = target(x1), target(x2)
            loss = 0.5 * (byol_loss(q1, z2) + byol_loss(q2, z1))
        else:
            z = torch.cat([online(x1), online(x2)], dim=0)
            loss = ntxent_loss(z, config.temperature)

        loss_trace.append(_check_finite(loss, step))
        grads = compute_gradients(loss, online)
        adam_step(online, grads, state, config.learning_rate)
        if target is not None:
            ema_update(target, online, config.ema_momentum)
        if record_online_trace:
            online_trace.append({k: v.detach().clone()
                                 for k, v in online.named_parameters()})

    return PretrainResult(online, target, loss_trace, config, encoder_config,
                          head_config, initial_target_state, online_trace)


@dataclass
class ClassifierResult:
    model: ClassifierModel
    loss_trace: list
    config: TrainConfig
    encoder_config: EncoderConfig
    head_config: HeadConfig
    mode: str

    @property
    def trainable_params(self):
        return count_parameters(self.model, trainable_only=True)

    @property
    def total_params(self):
        return count_parameters(self.model)


def build_classifier(mode, init_encoder_state, encoder_config, head_config, seed):
    """Construct the classification model for one training regime."""
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}")
    needs_init = mode in ("ssl_feature_extractor", "ssl_fine_tuned")
    if needs_init and init_encoder_state is None:
        raise ConfigurationError(f"mode {mode} requires a pretrained checkpoint")
    if not needs_init and init_encoder_state is not None:
        raise ConfigurationError(f"mode {mode} forbids an init checkpoint")

    torch.manual_seed(seed)
    model = ClassifierModel(encoder_config, head_config)
    if needs_init:
        model.encoder.load_state_dict(init_encoder_state)
    if mode in ("ssl_feature_extractor", "random_feature_extractor"):
        for p in model.encoder.parameters():
            p.requires_grad_(False)
    return model


def train_classifier(labeled, mode, init_encoder_state, config: TrainConfig,
                     encoder_config: EncoderConfig | None = None,
                     head_config: HeadConfig | None = None,
                     aug_config: AugmentationConfig | None = None) -> ClassifierResult:
    encoder_config = encoder_config or EncoderConfig()
    head_config = head_config or HeadConfig()
    aug_config = aug_config or AugmentationConfig()
    aug_config = replace(aug_config, temporal_enabled=config.temporal_aug_enabled)

    n = len(labeled)
    if n == 0:
        raise ConfigurationError("no labeled clips to train on")
    model = build_classifier(mode, init_encoder_state, encoder_config, head_config,
                             config.seed)
    window_length = encoder_config.input_shape[0]
    batch_size = min(config.batch_size, n)

    rng = np.random.default_rng(config.seed)
    state = OptimizerState()
    loss_trace = []
    for step in range(config.classifier_steps):
        idx = rng.choice(n, size=batch_size, replace=False)
        frames, labels = [], []
        for i in idx:
            lc = labeled[i]
            if config.augment_supervised:
                frames.append(_clip_to_views(lc.clip, aug_config, window_length, rng, 1)[0])
            else:
                frames.append(sample_window(lc.clip, window_length, rng).frames)
            labels.append(lc.label)
        x = _to_batch(frames)
        y = torch.tensor(labels, dtype=torch.long)

        model.train()
        loss = cross_entropy_loss(model(x), y)
        loss_trace.append(_check_finite(loss, step))
        grads = compute_gradients(loss, model)
        adam_step(model, grads, state, config.learning_rate)

    return ClassifierResult(model, loss_trace, config, encoder_config, head_config, mode)


def evaluate_model(model: ClassifierModel, clips, window_length=None):
    """Score each clip (deterministic center window, no augmentation).

    Accepts LabeledClip or bare VideoClip entries; returns (scores, labels)
    where labels is None entries for unlabeled clips."""
    if window_length is None:
        window_length = model.encoder.config.input_shape[0]
    model.eval()
    scores, labels = [], []
    with torch.no_grad():
        for entry in clips:
            clip = entry.clip if hasattr(entry, "clip") else entry
            window = center_window(clip, window_length)
            x = torch.from_numpy(np.ascontiguousarray(window.frames[None]))
            probs = torch.softmax(model(x), dim=1)
            scores.append(float(probs[0, 1]))
            labels.append(getattr(entry, "label", None))
    return scores, labels
