"""3D-convolutional encoder, MLP heads, classifier and loss functions.

The encoder is a compact residual-block 3D CNN: a 3x3x3 stem, then one
stride-2 downsampling conv plus residual (1x1x1 -> 3x3x3, additive skip)
blocks per stage, global average pooling, and a linear map to the
representation. Every conv is followed by stateless batch normalization and
leaky ReLU (slope 0.1).

Normalization is stateless on purpose: 5D activations are standardized per
sample and channel (instance statistics) in both train and eval mode, so
inference is a pure function of (weights, clip) and batched inference matches
clip-by-clip inference; 2D activations in the projection/prediction heads use
batch statistics, which the self-supervised objective relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ComputationError, InputError, UsageError

_EPS = 1e-5


@dataclass
class EncoderConfig:
    stage_channels: tuple = (8, 16, 32)
    blocks_per_stage: int = 1
    representation_dim: int = 64
    leaky_slope: float = 0.1
    input_shape: tuple = (16, 64, 64)  # (T, H, W)

    def to_json_dict(self):
        d = asdict(self)
        d["stage_channels"] = list(self.stage_channels)
        d["input_shape"] = list(self.input_shape)
        return d

    @classmethod
    def from_json_dict(cls, d):
        kwargs = dict(d)
        kwargs["stage_channels"] = tuple(kwargs["stage_channels"])
        kwargs["input_shape"] = tuple(kwargs["input_shape"])
        return cls(**kwargs)


@dataclass
class HeadConfig:
    projector_hidden: int = 256
    projector_out: int = 64
    predictor_hidden: int = 256
    n_classes: int = 2

    def to_json_dict(self):
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d):
        return cls(**d)


class StatelessNorm(nn.Module):
    """Per-channel normalization with learned scale/shift and no running stats.

    (B, C, T, H, W) inputs: per-sample statistics over (T, H, W), independent
    of mode and batch composition. (B, C) inputs: batch statistics.
    """

    def __init__(self, channels):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        if x.dim() == 2:
            dims, shape = (0,), (1, -1)
        else:
            dims, shape = (2, 3, 4), (1, -1, 1, 1, 1)
        mean = x.mean(dim=dims, keepdim=True)
        var = x.var(dim=dims, keepdim=True, unbiased=False)
        y = (x - mean) / torch.sqrt(var + _EPS)
        return y * self.weight.view(shape) + self.bias.view(shape)


class ConvUnit(nn.Module):
    """conv3d -> stateless norm -> leaky ReLU."""

    def __init__(self, cin, cout, kernel, stride, slope):
        super().__init__()
        self.conv = nn.Conv3d(cin, cout, kernel, stride=stride, padding=kernel // 2)
        self.norm = StatelessNorm(cout)
        self.slope = slope

    def forward(self, x):
        return F.leaky_relu(self.norm(self.conv(x)), self.slope)


class ResidualBlock(nn.Module):
    """1x1x1 bottleneck then 3x3x3 conv with an additive skip."""

    def __init__(self, channels, slope):
        super().__init__()
        mid = max(channels // 2, 1)
        self.reduce = ConvUnit(channels, mid, 1, 1, slope)
        self.expand = ConvUnit(mid, channels, 3, 1, slope)

    def forward(self, x):
        return x + self.expand(self.reduce(x))


class Encoder3D(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        if config.representation_dim < 2 or len(config.stage_channels) < 1:
            raise InputError("representation_dim >= 2 and at least one stage required")
        self.config = config
        slope = config.leaky_slope
        c0 = config.stage_channels[0]
        self.stem = ConvUnit(1, c0, 3, 1, slope)
        stages = []
        prev = c0
        for c in config.stage_channels:
            layers = [ConvUnit(prev, c, 3, 2, slope)]
            layers += [ResidualBlock(c, slope) for _ in range(config.blocks_per_stage)]
            stages.append(nn.Sequential(*layers))
            prev = c
        self.stages = nn.Sequential(*stages)
        self.head = nn.Linear(prev, config.representation_dim)

    def forward(self, batch):
        """batch: (B, T, H, W) -> representations (B, D)."""
        if batch.dim() != 4:
            raise InputError(f"expected B x T x H x W input, got shape {tuple(batch.shape)}")
        if tuple(batch.shape[1:]) != tuple(self.config.input_shape):
            raise InputError(
                f"input shape {tuple(batch.shape[1:])} does not match "
                f"configured {tuple(self.config.input_shape)}")
        x = batch.unsqueeze(1)
        x = self.stem(x)
        x = self.stages(x)
        x = x.mean(dim=(2, 3, 4))
        return self.head(x)


class MLPHead(nn.Module):
    """linear -> stateless norm -> leaky ReLU -> linear."""

    def __init__(self, din, hidden, dout, slope=0.1, norm=True):
        super().__init__()
        self.fc1 = nn.Linear(din, hidden)
        self.norm = StatelessNorm(hidden) if norm else None
        self.fc2 = nn.Linear(hidden, dout)
        self.slope = slope

    def forward(self, x):
        if x.dim() != 2 or x.shape[1] != self.fc1.in_features:
            raise InputError(f"expected B x {self.fc1.in_features} input, got {tuple(x.shape)}")
        h = self.fc1(x)
        if self.norm is not None:
            h = self.norm(h)
        return self.fc2(F.leaky_relu(h, self.slope))


class Classifier(nn.Module):
    """Single linear map from representation to class logits."""

    def __init__(self, din, n_classes):
        super().__init__()
        self.fc = nn.Linear(din, n_classes)

    def forward(self, x):
        if x.dim() != 2 or x.shape[1] != self.fc.in_features:
            raise InputError(f"expected B x {self.fc.in_features} input, got {tuple(x.shape)}")
        return self.fc(x)


def _check_norms(t, name):
    norms = t.norm(dim=1)
    if bool((norms < 1e-12).any()):
        raise ComputationError(f"zero-norm row in {name} embeddings")
    return norms


def byol_loss(q_online: torch.Tensor, z_target: torch.Tensor) -> torch.Tensor:
    """Mean over rows of 2 - 2*cos(q, z); z is gradient-stopped."""
    if q_online.shape != z_target.shape:
        raise InputError(f"shape mismatch {tuple(q_online.shape)} vs {tuple(z_target.shape)}")
    z = z_target.detach()
    qn = _check_norms(q_online, "online")
    zn = _check_norms(z, "target")
    cos = (q_online * z).sum(dim=1) / (qn * zn)
    return (2.0 - 2.0 * cos).mean()


def ntxent_loss(z: torch.Tensor, temperature: float) -> torch.Tensor:
    """NT-Xent over 2B embeddings where rows (i, i+B) are positive pairs."""
    if temperature <= 0:
        raise InputError("temperature must be positive")
    n = z.shape[0]
    if n % 2 != 0 or n < 4:
        raise InputError("need 2B embeddings with B >= 2")
    _check_norms(z, "contrastive")
    zn = F.normalize(z, dim=1)
    sim = zn @ zn.t() / temperature
    sim.fill_diagonal_(float("-inf"))
    b = n // 2
    targets = torch.cat([torch.arange(b, n), torch.arange(0, b)])
    return F.cross_entropy(sim, targets)


def cross_entropy_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    labels = labels.long()
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise InputError("label out of range")
    return F.cross_entropy(logits, labels)


def compute_gradients(loss: torch.Tensor, module: nn.Module) -> dict:
    """Reverse-mode gradients of `loss` for every trainable tensor in `module`.

    Gradient-stopped branches (e.g. the target network) get no entry.
    """
    if not loss.requires_grad:
        raise UsageError("loss is not connected to any trainable parameter")
    named = [(n, p) for n, p in module.named_parameters() if p.requires_grad]
    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    return {n: g for (n, _), g in zip(named, grads) if g is not None}


def count_parameters(module: nn.Module, trainable_only: bool = False) -> int:
    return sum(p.numel() for p in module.parameters()
               if p.requires_grad or not trainable_only)


class SSLOnlineNetwork(nn.Module):
    """Online branch: encoder -> projector -> predictor."""

    def __init__(self, enc_cfg: EncoderConfig, head_cfg: HeadConfig):
        super().__init__()
        d = enc_cfg.representation_dim
        self.encoder = Encoder3D(enc_cfg)
        self.projector = MLPHead(d, head_cfg.projector_hidden, head_cfg.projector_out)
        self.predictor = MLPHead(head_cfg.projector_out, head_cfg.predictor_hidden,
                                 head_cfg.projector_out)

    def forward(self, batch):
        return self.predictor(self.projector(self.encoder(batch)))


class SSLTargetNetwork(nn.Module):
    """Target branch: encoder -> projector, never trained directly."""

    def __init__(self, enc_cfg: EncoderConfig, head_cfg: HeadConfig):
        super().__init__()
        d = enc_cfg.representation_dim
        self.encoder = Encoder3D(enc_cfg)
        self.projector = MLPHead(d, head_cfg.projector_hidden, head_cfg.projector_out)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, batch):
        with torch.no_grad():
            return self.projector(self.encoder(batch))


class SSLSharedNetwork(nn.Module):
    """Single shared branch (encoder -> projector) for the pairwise variant."""

    def __init__(self, enc_cfg: EncoderConfig, head_cfg: HeadConfig):
        super().__init__()
        d = enc_cfg.representation_dim
        self.encoder = Encoder3D(enc_cfg)
        self.projector = MLPHead(d, head_cfg.projector_hidden, head_cfg.projector_out)

    def forward(self, batch):
        return self.projector(self.encoder(batch))


class ClassifierModel(nn.Module):
    """Encoder plus the single-layer classification head."""

    def __init__(self, enc_cfg: EncoderConfig, head_cfg: HeadConfig):
        super().__init__()
        self.encoder = Encoder3D(enc_cfg)
        self.classifier = Classifier(enc_cfg.representation_dim, head_cfg.n_classes)

    def forward(self, batch):
        return self.classifier(self.encoder(batch))
