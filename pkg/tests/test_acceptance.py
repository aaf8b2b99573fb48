"""Acceptance gate: one test per criterion, one pass/fail line each.

Each test prints `ACCEPTANCE <n> <name>: PASS` on success; a failed assert
leaves the criterion's FAIL line via the pytest result itself.
"""

import itertools
import math
import time

import numpy as np
import pytest
import torch

from videossl.augment import (
    AugmentationConfig,
    apply_hflip,
    apply_plan,
    apply_temporal,
    draw_augmentation,
)
from videossl.checkpoint import load_checkpoint, save_checkpoint
from videossl.data import (
    SynthConfig,
    generate_synthetic_dataset,
    VideoClip,
)
from videossl.errors import BadMagicError, TruncatedCheckpointError
from videossl.harness import ExperimentConfig, run_fraction_sweep
from videossl.metrics import confusion_metrics, roc_auc
from videossl.model import (
    Classifier,
    ClassifierModel,
    ConvUnit,
    Encoder3D,
    EncoderConfig,
    HeadConfig,
    MLPHead,
    ResidualBlock,
    byol_loss,
    count_parameters,
    ntxent_loss,
)
from videossl.saliency import (
    OcclusionConfig,
    PredBox,
    extract_boxes,
    occlusion_saliency,
    threshold_top_fraction,
    weighted_iou,
)
from videossl.trainer import (
    TrainConfig,
    ssl_pretrain,
    train_classifier,
)

from conftest import TINY_SHAPE


def report(n, name):
    print(f"ACCEPTANCE {n} {name}: PASS", flush=True)


# ---------------------------------------------------------------- criterion 1


def shift_norm_biases(module, offset=5.0):
    """Move every normalization bias to +/-offset (alternating) so no leaky-ReLU
    preactivation sits within finite-difference reach of the kink at zero;
    both the positive and the negative branch stay exercised."""
    from videossl.model import StatelessNorm

    sign = 1.0
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, StatelessNorm):
                m.bias.fill_(sign * offset)
                sign = -sign


def assert_kink_margin(module, x, margin=0.5):
    import videossl.model as model_mod

    original = model_mod.F.leaky_relu
    smallest = [float("inf")]

    def spy(t, slope):
        smallest[0] = min(smallest[0], float(t.abs().min()))
        return original(t, slope)

    model_mod.F.leaky_relu = spy
    try:
        with torch.no_grad():
            module(x)
    finally:
        model_mod.F.leaky_relu = original
    if smallest[0] != float("inf"):
        assert smallest[0] > margin, (
            f"preactivation {smallest[0]:.3g} too close to the leaky-ReLU kink "
            "for a valid finite-difference comparison")


def max_relative_fd_error(module, x, h=1e-3):
    """Max relative error between autograd and central finite differences,
    both evaluated in float64."""
    module = module.double().train()
    x = x.double()
    shift_norm_biases(module)
    assert_kink_margin(module, x)
    torch.manual_seed(0)
    out_shape = module(x).shape
    weights = torch.randn(out_shape, dtype=torch.float64)

    def loss_value():
        with torch.no_grad():
            return float((module(x) * weights).sum())

    loss = (module(x) * weights).sum()
    params = [p for p in module.parameters() if p.requires_grad]
    grads = torch.autograd.grad(loss, params)

    worst = 0.0
    with torch.no_grad():
        for p, g in zip(params, grads):
            flat, gflat = p.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + h
                up = loss_value()
                flat[i] = orig - h
                down = loss_value()
                flat[i] = orig
                fd = (up - down) / (2 * h)
                an = float(gflat[i])
                err = abs(fd - an) / max(abs(fd), abs(an), 1e-3)
                worst = max(worst, err)
    return worst


def test_criterion_1_gradient_oracle():
    start = time.time()
    torch.manual_seed(1)
    cases = [
        (ConvUnit(2, 3, 3, 1, 0.1), torch.randn(2, 2, 3, 5, 5)),
        (ResidualBlock(4, 0.1), torch.randn(2, 4, 4, 6, 6)),
        (MLPHead(4, 6, 3), torch.randn(16, 4)),
        (Classifier(4, 2), torch.randn(5, 4)),
    ]
    enc_cfg = EncoderConfig(stage_channels=(2, 4), blocks_per_stage=1,
                            representation_dim=4, input_shape=(8, 16, 16))
    encoder = Encoder3D(enc_cfg)
    assert count_parameters(encoder) <= 2000
    cases.append((encoder, torch.rand(4, 8, 16, 16)))

    for module, x in cases:
        err = max_relative_fd_error(module, x)
        assert err <= 1e-3, f"{type(module).__name__}: max rel err {err:.2e}"
    assert time.time() - start < 120
    report(1, "gradient oracle")


# ---------------------------------------------------------------- criterion 2


def test_criterion_2_loss_invariants():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        b, d = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        p = torch.from_numpy(rng.normal(size=(b, d)))
        z = torch.from_numpy(rng.normal(size=(b, d)))
        v = float(byol_loss(p.float(), z.float()))
        assert 0.0 <= v <= 4.0

    e = torch.tensor([[1.0, 0.0], [0.0, 1.0]])
    assert float(byol_loss(e, e)) == pytest.approx(0.0, abs=1e-6)
    assert float(byol_loss(e, e.flip(0))) == pytest.approx(2.0, abs=1e-6)
    assert float(byol_loss(e, -e)) == pytest.approx(4.0, abs=1e-6)

    for b in (2, 4, 8):
        z = torch.ones(2 * b, 3)
        v = float(ntxent_loss(z, 0.1))
        assert v == pytest.approx(math.log(2 * b - 1), abs=1e-6)
    report(2, "loss invariants")


# ---------------------------------------------------------------- criterion 3


def _tiny_pool(n=8, seed=3):
    rng = np.random.default_rng(seed)
    return [VideoClip(rng.random(TINY_SHAPE).astype(np.float32)) for _ in range(n)]


def test_criterion_3_ema_and_freezing():
    enc_cfg = EncoderConfig(stage_channels=(4, 8), representation_dim=8,
                            input_shape=TINY_SHAPE)
    head_cfg = HeadConfig(projector_hidden=16, projector_out=8, predictor_hidden=16)
    aug_cfg = AugmentationConfig(noise_std=0.0)
    train_cfg = TrainConfig(batch_size=4, steps=50, ema_momentum=0.99,
                            classifier_steps=3, seed=0)

    result = ssl_pretrain(_tiny_pool(), train_cfg, enc_cfg, head_cfg, aug_cfg,
                          record_online_trace=True)
    replayed = {k: v.clone() for k, v in result.initial_target_state.items()}
    for snapshot in result.online_trace:
        for name in replayed:
            replayed[name] = 0.99 * replayed[name] + 0.01 * snapshot[name]
    for name, p in result.target.named_parameters():
        assert torch.equal(p, replayed[name]), f"EMA replay drift at {name}"

    init_state = result.encoder_state()
    labeled = generate_synthetic_dataset(
        SynthConfig(n_unlabeled=0, n_labeled=8, sources=4,
                    T=TINY_SHAPE[0], H=TINY_SHAPE[1], W=TINY_SHAPE[2]),
        seed=1).labeled
    clf = train_classifier(labeled, "ssl_feature_extractor", init_state,
                           train_cfg, enc_cfg, head_cfg, aug_cfg)
    for name, p in clf.model.encoder.named_parameters():
        assert torch.equal(p, init_state[name]), f"frozen encoder moved at {name}"
    d, c = enc_cfg.representation_dim, head_cfg.n_classes
    assert clf.trainable_params == d * c + c
    report(3, "EMA replay and encoder freezing")


# ---------------------------------------------------------------- criterion 4


def test_criterion_4_augmentation_suite():
    cfg = AugmentationConfig()
    rng = np.random.default_rng(4)
    H = W = 64
    hw = H * W
    for _ in range(10000):
        plan = draw_augmentation(cfg, T=16, rng=rng, H=H, W=W)
        assert 0.8 <= plan.scale <= 1.2
        assert -0.1 <= plan.tx <= 0.1 and -0.1 <= plan.ty <= 0.1
        assert -10.0 <= plan.rotation <= 10.0
        assert 0.7 <= plan.brightness_factor <= 1.3
        assert 0.7 <= plan.contrast_factor <= 1.3
        if plan.erase_rect is not None:
            x0, y0, x1, y1 = plan.erase_rect
            area = (x1 - x0) * (y1 - y0)
            assert math.ceil(0.02 * hw) <= area <= math.floor(0.1 * hw)
            assert 0 <= x0 < x1 <= W and 0 <= y0 < y1 <= H
        assert sorted(plan.shuffle_indices) == list(range(16))
        assert len(plan.replace_map) <= 4

    clip = VideoClip(np.random.default_rng(40).random((6, 16, 16)).astype(np.float32))
    flipped_twice = apply_hflip(apply_hflip(clip))
    assert np.array_equal(flipped_twice.frames, clip.frames)
    ident = np.arange(6)
    reversed_twice = apply_temporal(apply_temporal(clip, True, ident, []),
                                    True, ident, [])
    assert np.array_equal(reversed_twice.frames, clip.frames)

    orig = {clip.frames[t].tobytes() for t in range(6)}
    for seed in range(100):
        plan = draw_augmentation(cfg, T=6, rng=np.random.default_rng(seed),
                                 H=16, W=16)
        shuffled = apply_temporal(clip, plan.do_reverse, plan.shuffle_indices, [])
        out = {shuffled.frames[t].tobytes() for t in range(6)}
        assert out == orig, "reorder-only temporal ops must preserve frames"

    identity = AugmentationConfig(
        scale_range=0.0, translation_range=0.0, rotation_range=0.0,
        hflip_prob=0.0, brightness=0.0, contrast=0.0, noise_std=0.0,
        erase_area=(0.0, 0.0), reverse_prob=0.0, shuffle_prob=0.0,
        replace_prob=0.0)
    plan = draw_augmentation(identity, T=6, rng=np.random.default_rng(0),
                             H=16, W=16)
    assert np.array_equal(apply_plan(clip, plan).frames, clip.frames)
    report(4, "augmentation ranges and involutions")


# ---------------------------------------------------------------- criterion 5


def brute_force_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p, n in itertools.product(pos, neg):
        total += 1.0 if p > n else (0.5 if p == n else 0.0)
    return total / (len(pos) * len(neg))


def test_criterion_5_metrics_oracle():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        n = int(rng.integers(2, 13))
        labels = [0, 1] + list(rng.integers(0, 2, size=n - 2))
        scores = list(np.round(rng.random(n), 1))
        assert roc_auc(scores, labels) == brute_force_auc(scores, labels)

    # hand example 1: confusion table at threshold 0.5 (0.6 vs label 0 is FP)
    cm = confusion_metrics([0.9, 0.2, 0.6, 0.4], [1, 0, 0, 1])
    assert cm["accuracy"] == pytest.approx(0.5, abs=1e-9)
    assert cm["sensitivity"] == pytest.approx(0.5, abs=1e-9)
    assert cm["specificity"] == pytest.approx(0.5, abs=1e-9)

    # hand example 2: 3 of 4 positive-negative pairs won
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(
        0.75, abs=1e-9)

    # hand example 3: mass-weighted IOU (3*1 + 1*0) / 4
    from videossl.data import GroundTruthBox
    preds = [PredBox(0, 0, 0, 4, 4, mass=3.0), PredBox(0, 10, 10, 14, 14, mass=1.0)]
    gt = [GroundTruthBox(0, 0, 0, 4, 4)]
    assert weighted_iou(preds, gt) == pytest.approx(0.75, abs=1e-9)
    report(5, "metrics oracle and hand examples")


# ---------------------------------------------------------------- criterion 6


def test_criterion_6_saliency_geometry():
    start = time.time()
    synth = SynthConfig(n_unlabeled=0, n_labeled=8, sources=4, T=8, H=64, W=64)
    positives = [lc for lc in generate_synthetic_dataset(synth, seed=6).labeled
                 if lc.label == 1][:3]
    assert positives
    occ = OcclusionConfig(window=(1, 8, 8), stride=(1, 4, 4))

    ious = []
    for lc in positives:
        masks = np.zeros(lc.clip.frames.shape, dtype=np.float32)
        for b in lc.boxes:
            masks[b.frame_index, b.y0:b.y1, b.x0:b.x1] = 1.0

        def scorer(batch, masks=masks):
            return (batch * masks[None]).mean(axis=(1, 2, 3))

        sal = occlusion_saliency(scorer, lc.clip, occ)
        inside = float((sal * masks).sum())
        total = float(sal.sum())
        assert total > 0
        assert inside / total >= 0.5, f"only {inside / total:.2%} mass in box"

        mask = threshold_top_fraction(sal, 0.10)
        boxes = []
        for t in range(mask.shape[0]):
            boxes.extend(extract_boxes(mask[t], sal[t], frame_index=t))
        ious.append(weighted_iou(boxes, lc.boxes))

        zero = occlusion_saliency(lambda b: np.full(len(b), 0.25), lc.clip, occ)
        assert not zero.any()

    assert sum(ious) / len(ious) >= 0.3
    assert time.time() - start < 300
    report(6, "saliency mass concentration and weighted IOU")


# ---------------------------------------------------------------- criterion 7


TREND_CONFIG = dict(
    synth=SynthConfig(n_unlabeled=500, n_labeled=320, sources=32,
                      T=16, H=64, W=64),
    dataset_seed=0,
    split_ratios=(0.625, 0.0625, 0.3125),  # 200 train / 20 val / 100 test
    train=TrainConfig(batch_size=8, steps=250, classifier_steps=300,
                      learning_rate=5e-3, augment_supervised=False),
    encoder=EncoderConfig(stage_channels=(4, 8, 16), representation_dim=32),
    head=HeadConfig(projector_hidden=64, projector_out=32, predictor_hidden=64),
    fractions=(1.0, 0.1),
    regimes=("fully_supervised", "ssl_feature_extractor", "ssl_fine_tuned"),
    seeds=(0, 1, 2),
)


def test_criterion_7_low_label_trend():
    start = time.time()
    results = run_fraction_sweep(ExperimentConfig(**TREND_CONFIG))
    mean_auc = {}
    for key in {(r.regime, r.fraction) for r in results}:
        aucs = [r.auc for r in results if (r.regime, r.fraction) == key]
        mean_auc[key] = sum(aucs) / len(aucs)
        print(f"  mean AUC {key[0]} @ fraction {key[1]:g}: {mean_auc[key]:.4f}",
              flush=True)

    sup_low = mean_auc[("fully_supervised", 0.1)]
    sup_full = mean_auc[("fully_supervised", 1.0)]
    for regime in ("ssl_feature_extractor", "ssl_fine_tuned"):
        gap_low = mean_auc[(regime, 0.1)] - sup_low
        assert gap_low >= 0.05, f"{regime}: low-label AUC gap {gap_low:+.4f} < 0.05"
        gap_full = mean_auc[(regime, 1.0)] - sup_full
        assert abs(gap_full) <= 0.05, f"{regime}: full-label gap {gap_full:+.4f}"
    elapsed = time.time() - start
    print(f"  trend sweep took {elapsed / 60:.1f} min", flush=True)
    # 45 min is achievable on a multi-core desktop CPU; this budget allows
    # for a single-core runner (torch intra-op parallelism unavailable).
    assert elapsed < 120 * 60
    report(7, "low-label-regime advantage of pretraining")


# ---------------------------------------------------------------- criterion 8


def test_criterion_8_determinism_and_persistence(tmp_path):
    cfg_kwargs = dict(
        synth=SynthConfig(n_unlabeled=8, n_labeled=12, sources=6,
                          T=TINY_SHAPE[0], H=TINY_SHAPE[1], W=TINY_SHAPE[2]),
        dataset_seed=7,
        split_ratios=(0.5, 0.17, 0.33),
        train=TrainConfig(batch_size=4, steps=2, classifier_steps=2),
        encoder=EncoderConfig(stage_channels=(4, 8), representation_dim=8,
                              input_shape=TINY_SHAPE),
        head=HeadConfig(projector_hidden=16, projector_out=8, predictor_hidden=16),
        fractions=(1.0, 0.5),
        regimes=("fully_supervised", "ssl_feature_extractor"),
        seeds=(0,),
    )
    p1, p2 = tmp_path / "run1.csv", tmp_path / "run2.csv"
    run_fraction_sweep(ExperimentConfig(**cfg_kwargs), out_csv=str(p1))
    run_fraction_sweep(ExperimentConfig(**cfg_kwargs), out_csv=str(p2))
    assert p1.read_bytes() == p2.read_bytes()

    torch.manual_seed(8)
    model = ClassifierModel(cfg_kwargs["encoder"], cfg_kwargs["head"])
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, cfg_kwargs["encoder"], cfg_kwargs["head"],
                    {"kind": "test"}, path)
    ck = load_checkpoint(path)
    for name, p in model.named_parameters():
        assert np.array_equal(ck.tensors[name], p.detach().numpy())

    raw = path.read_bytes()
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(BadMagicError):
        load_checkpoint(bad)
    trunc = tmp_path / "trunc.ckpt"
    trunc.write_bytes(raw[:-7])
    with pytest.raises(TruncatedCheckpointError):
        load_checkpoint(trunc)
    report(8, "deterministic reruns and checkpoint round-trip")
