"""Experiment orchestration: label-fraction sweeps across training regimes,
the temporal-augmentation ablation, and saliency evaluation."""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field, replace

from .augment import AugmentationConfig
from .data import (
    DatasetManifest,
    SynthConfig,
    generate_synthetic_dataset,
    load_dataset,
    split_by_source,
    subsample_fraction,
)
from .errors import ConfigurationError
from .metrics import confusion_metrics, roc_auc
from .saliency import (
    OcclusionConfig,
    extract_boxes,
    model_scorer,
    occlusion_saliency,
    threshold_top_fraction,
    weighted_iou,
)
from .trainer import (
    MODES,
    TrainConfig,
    evaluate_model,
    ssl_pretrain,
    train_classifier,
)
from .model import EncoderConfig, HeadConfig

CSV_HEADER = ("regime,fraction,seed,accuracy,sensitivity,specificity,auc,"
              "weighted_iou,trainable_params,total_params")

DEFAULT_FRACTIONS = (1.0, 0.5, 0.3, 0.2, 0.1, 0.05)

SSL_MODES = ("ssl_feature_extractor", "ssl_fine_tuned")


@dataclass
class ExperimentConfig:
    synth: SynthConfig | None = field(default_factory=SynthConfig)
    data_dir: str | None = None
    dataset_seed: int = 0
    split_ratios: tuple = (0.7, 0.1, 0.2)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentationConfig = field(default_factory=AugmentationConfig)
    occlusion: OcclusionConfig = field(default_factory=OcclusionConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    head: HeadConfig = field(default_factory=HeadConfig)
    fractions: tuple = DEFAULT_FRACTIONS
    regimes: tuple = MODES
    seeds: tuple = (0,)

    def validate(self):
        if not self.seeds:
            raise ConfigurationError("at least one seed required")
        fr = list(self.fractions)
        if not fr or any(not 0.0 < f <= 1.0 for f in fr):
            raise ConfigurationError("fractions must lie in (0, 1]")
        if fr != sorted(fr, reverse=True):
            raise ConfigurationError("fractions must be sorted descending")
        for r in self.regimes:
            if r not in MODES:
                raise ConfigurationError(f"unknown regime {r!r}")

    @classmethod
    def from_json_dict(cls, d):
        cfg = cls()
        dataset = d.get("dataset", {})
        if "directory" in dataset:
            cfg.data_dir = dataset["directory"]
            cfg.synth = None
        elif "synthetic" in dataset:
            cfg.synth = SynthConfig(**dataset["synthetic"])
        if "dataset_seed" in d:
            cfg.dataset_seed = int(d["dataset_seed"])
        if "split_ratios" in d:
            cfg.split_ratios = tuple(d["split_ratios"])
        if "train" in d:
            cfg.train = TrainConfig.from_json_dict(d["train"])
        if "augment" in d:
            cfg.augment = AugmentationConfig.from_json_dict(d["augment"])
        if "occlusion" in d:
            cfg.occlusion = OcclusionConfig.from_json_dict(d["occlusion"])
        if "encoder" in d:
            cfg.encoder = EncoderConfig.from_json_dict(d["encoder"])
        if "head" in d:
            cfg.head = HeadConfig.from_json_dict(d["head"])
        if "fractions" in d:
            cfg.fractions = tuple(d["fractions"])
        if "regimes" in d:
            cfg.regimes = tuple(d["regimes"])
        if "seeds" in d:
            cfg.seeds = tuple(d["seeds"])
        cfg.validate()
        return cfg

    @classmethod
    def from_json_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class ExperimentResult:
    regime: str
    fraction: float
    seed: int
    accuracy: float
    sensitivity: float
    specificity: float
    auc: float
    weighted_iou: float | None = None
    trainable_params: int = 0
    total_params: int = 0
    temporal_aug: bool | None = None

    def csv_row(self):
        wiou = "" if self.weighted_iou is None else f"{self.weighted_iou:.6f}"
        return (f"{self.regime},{self.fraction:g},{self.seed},"
                f"{self.accuracy:.6f},{self.sensitivity:.6f},{self.specificity:.6f},"
                f"{self.auc:.6f},{wiou},{self.trainable_params},{self.total_params}")


def prepare_dataset(config: ExperimentConfig) -> DatasetManifest:
    if config.data_dir is not None:
        return load_dataset(config.data_dir)
    manifest = generate_synthetic_dataset(config.synth, config.dataset_seed)
    return split_by_source(manifest, config.split_ratios, config.dataset_seed)


def results_to_csv(results) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in results:
        buf.write(r.csv_row() + "\n")
    return buf.getvalue()


def write_results_csv(results, path, extra_temporal_column=False):
    text = results_to_csv(results)
    if extra_temporal_column:
        lines = text.splitlines()
        lines[0] += ",temporal_aug"
        for i, r in enumerate(results, start=1):
            lines[i] += f",{str(bool(r.temporal_aug)).lower()}"
        text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _evaluate_result(clf_result, test_clips, regime, fraction, seed):
    scores, labels = evaluate_model(clf_result.model, test_clips)
    cm = confusion_metrics(scores, labels)
    return ExperimentResult(
        regime=regime,
        fraction=fraction,
        seed=seed,
        accuracy=cm["accuracy"],
        sensitivity=cm["sensitivity"],
        specificity=cm["specificity"],
        auc=roc_auc(scores, labels),
        trainable_params=clf_result.trainable_params,
        total_params=clf_result.total_params,
    )


def _run_one(config, manifest, pretrained_state, regime, fraction, seed):
    train_clips = manifest.labeled_split("train")
    test_clips = manifest.labeled_split("test")
    subset = subsample_fraction(train_clips, fraction, seed)
    train_cfg = replace(config.train, seed=seed)
    init = pretrained_state if regime in SSL_MODES else None
    try:
        clf = train_classifier(subset, regime, init, train_cfg,
                               config.encoder, config.head, config.augment)
        return _evaluate_result(clf, test_clips, regime, fraction, seed)
    except Exception as exc:
        raise type(exc)(f"(seed={seed}, fraction={fraction}, regime={regime}) {exc}") from exc


def _pretrain_for_seed(config, manifest, seed, temporal_enabled=None):
    train_cfg = replace(config.train, seed=seed)
    if temporal_enabled is not None:
        train_cfg = replace(train_cfg, temporal_aug_enabled=temporal_enabled)
    pool = [uc.clip for uc in manifest.unlabeled]
    result = ssl_pretrain(pool, train_cfg, config.encoder, config.head, config.augment)
    return result.encoder_state()


def run_fraction_sweep(config: ExperimentConfig, manifest: DatasetManifest | None = None,
                       out_csv: str | None = None):
    config.validate()
    if manifest is None:
        manifest = prepare_dataset(config)
    results = []
    for seed in config.seeds:
        pretrained = None
        if any(r in SSL_MODES for r in config.regimes):
            pretrained = _pretrain_for_seed(config, manifest, seed)
        for fraction in config.fractions:
            for regime in config.regimes:
                results.append(_run_one(config, manifest, pretrained, regime,
                                        fraction, seed))
    results.sort(key=lambda r: (r.regime, -r.fraction, r.seed))
    if out_csv:
        write_results_csv(results, out_csv)
    return results


def run_ablation_temporal(config: ExperimentConfig,
                          manifest: DatasetManifest | None = None,
                          out_csv: str | None = None):
    """Pretrain with and without temporal augmentations; identical downstream
    training and evaluation; report both rows (and their AUC difference)."""
    config.validate()
    regime = next((r for r in config.regimes if r in SSL_MODES), None)
    if regime is None:
        raise ConfigurationError("temporal ablation requires an ssl regime")
    if manifest is None:
        manifest = prepare_dataset(config)
    seed = config.seeds[0]
    fraction = config.fractions[0]
    rows = []
    for temporal in (True, False):
        pretrained = _pretrain_for_seed(config, manifest, seed, temporal_enabled=temporal)
        row = _run_one(config, manifest, pretrained, regime, fraction, seed)
        row.temporal_aug = temporal
        rows.append(row)
    if out_csv:
        write_results_csv(rows, out_csv, extra_temporal_column=True)
    return rows, rows[0].auc - rows[1].auc


def run_saliency_eval(scorer, positives, occlusion_config: OcclusionConfig,
                      threshold_fraction: float = 0.10, out_dir: str | None = None):
    """Per positive clip: occlusion saliency -> per-frame top-fraction mask ->
    boxes -> weighted IOU; returns per-clip scores and their mean.

    `scorer` maps a (N, T, H, W) array to (N,) scores (see model_scorer)."""
    if not positives:
        raise ConfigurationError("no positive clips with ground-truth boxes")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    per_clip = []
    skipped = 0
    for lc in positives:
        if not lc.boxes:
            skipped += 1
            continue
        sal = occlusion_saliency(scorer, lc.clip, occlusion_config)
        mask = threshold_top_fraction(sal, threshold_fraction)
        boxes = []
        for t in range(mask.shape[0]):
            boxes.extend(extract_boxes(mask[t], sal[t], frame_index=t))
        per_clip.append({
            "clip_id": lc.clip_id,
            "weighted_iou": weighted_iou(boxes, lc.boxes),
            "n_pred_boxes": len(boxes),
        })
        if out_dir:
            sal.astype("<f4").tofile(os.path.join(out_dir, f"{lc.clip_id}_saliency.f32"))
            records = [{"frame": b.frame_index, "x0": b.x0, "y0": b.y0,
                        "x1": b.x1, "y1": b.y1, "mass": b.mass} for b in boxes]
            with open(os.path.join(out_dir, f"{lc.clip_id}_boxes.json"), "w",
                      encoding="utf-8") as fh:
                json.dump(records, fh, indent=1, sort_keys=True)
    if not per_clip:
        raise ConfigurationError("every clip lacked ground-truth boxes")
    mean = sum(c["weighted_iou"] for c in per_clip) / len(per_clip)
    report = {"mean_weighted_iou": mean, "clips": per_clip, "skipped": skipped}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "saliency_eval.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)
    return report


def saliency_scorer_for_model(model, class_index=1):
    return model_scorer(model, class_index)
