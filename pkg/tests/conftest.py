import numpy as np
import pytest

from videossl.augment import AugmentationConfig
from videossl.data import SynthConfig, generate_synthetic_dataset
from videossl.model import EncoderConfig, HeadConfig


TINY_SHAPE = (8, 16, 16)


@pytest.fixture
def tiny_encoder_config():
    return EncoderConfig(stage_channels=(4, 8), blocks_per_stage=1,
                         representation_dim=8, input_shape=TINY_SHAPE)


@pytest.fixture
def tiny_head_config():
    return HeadConfig(projector_hidden=16, projector_out=8, predictor_hidden=16,
                      n_classes=2)


@pytest.fixture
def fast_aug_config():
    # noise_std 0 keeps per-step augmentation cheap and exactly reproducible
    return AugmentationConfig(noise_std=0.0)


@pytest.fixture
def tiny_manifest():
    cfg = SynthConfig(n_unlabeled=12, n_labeled=12, sources=6,
                      T=TINY_SHAPE[0], H=TINY_SHAPE[1], W=TINY_SHAPE[2])
    return generate_synthetic_dataset(cfg, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
