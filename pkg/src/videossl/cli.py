"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training error.
"""

from __future__ import annotations

import functools
import json
import sys
from dataclasses import replace

import click

from .checkpoint import load_checkpoint, restore_classifier, save_checkpoint
from .data import load_dataset, save_dataset
from .errors import (
    CheckpointError,
    ConfigurationError,
    InputError,
    MetricError,
    TrainingError,
    VideoSSLError,
)
from .harness import (
    ExperimentConfig,
    prepare_dataset,
    run_ablation_temporal,
    run_fraction_sweep,
    run_saliency_eval,
    saliency_scorer_for_model,
)
from .metrics import confusion_metrics, roc_auc
from .trainer import MODES, evaluate_model, ssl_pretrain, train_classifier

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4


def _exit_code(exc):
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, TrainingError):
        return EXIT_TRAINING
    if isinstance(exc, (InputError, MetricError, CheckpointError)):
        return EXIT_DATA
    return EXIT_DATA


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VideoSSLError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))

    return wrapper


@click.group()
def main():
    """Contrastive self-supervised pretraining and evaluation for video."""


@main.command("gen-data")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@handle_errors
def gen_data(config_path, out_dir):
    """Generate the synthetic dataset and write it as a dataset directory."""
    config = ExperimentConfig.from_json_file(config_path)
    manifest = prepare_dataset(config)
    save_dataset(manifest, out_dir)
    click.echo(f"wrote {len(manifest.labeled)} labeled and "
               f"{len(manifest.unlabeled)} unlabeled clips to {out_dir}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def pretrain(config_path, data_dir, out_path):
    """Self-supervised pretraining on the unlabeled pool."""
    config = ExperimentConfig.from_json_file(config_path)
    manifest = load_dataset(data_dir)
    train_cfg = replace(config.train, seed=config.seeds[0])
    result = ssl_pretrain([uc.clip for uc in manifest.unlabeled], train_cfg,
                          config.encoder, config.head, config.augment)
    provenance = {
        "kind": "ssl_pretrain",
        "variant": train_cfg.ssl_variant,
        "steps": train_cfg.steps,
        "seed": train_cfg.seed,
        "downstream_interface": "encoder",
    }
    save_checkpoint(result.online, config.encoder, config.head, provenance, out_path)
    click.echo(f"final loss {result.loss_trace[-1]:.4f}; checkpoint -> {out_path}")


@main.command()
@click.option("--mode", required=True, type=click.Choice(MODES))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--init", "init_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@handle_errors
def train(mode, data_dir, init_path, out_path, config_path):
    """Train a classifier in one of the four regimes."""
    config = (ExperimentConfig.from_json_file(config_path)
              if config_path else ExperimentConfig())
    manifest = load_dataset(data_dir)
    init_state = None
    if init_path is not None:
        init_state = load_checkpoint(init_path).encoder_state()
    train_cfg = replace(config.train, seed=config.seeds[0])
    result = train_classifier(manifest.labeled_split("train"), mode, init_state,
                              train_cfg, config.encoder, config.head, config.augment)
    provenance = {"kind": "classifier", "mode": mode, "seed": train_cfg.seed,
                  "steps": train_cfg.classifier_steps}
    save_checkpoint(result.model, config.encoder, config.head, provenance, out_path)
    click.echo(f"trainable {result.trainable_params} / {result.total_params} params; "
               f"checkpoint -> {out_path}")


@main.command()
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--split", default="test", type=click.Choice(["train", "val", "test"]))
@handle_errors
def evaluate(ckpt_path, data_dir, split):
    """Evaluate a classifier checkpoint on one split."""
    model = restore_classifier(load_checkpoint(ckpt_path))
    manifest = load_dataset(data_dir)
    clips = manifest.labeled_split(split)
    if not clips:
        raise InputError(f"split {split!r} is empty")
    scores, labels = evaluate_model(model, clips)
    metrics = confusion_metrics(scores, labels)
    metrics["auc"] = roc_auc(scores, labels)
    metrics["n_clips"] = len(clips)
    click.echo(json.dumps(metrics, indent=1, sort_keys=True))


@main.command()
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--split", default="test", type=click.Choice(["train", "val", "test"]))
@handle_errors
def saliency(ckpt_path, data_dir, out_dir, split):
    """Occlusion saliency and weighted IOU on positive clips of a split."""
    ck = load_checkpoint(ckpt_path)
    model = restore_classifier(ck)
    config = ExperimentConfig()
    manifest = load_dataset(data_dir)
    positives = [lc for lc in manifest.labeled_split(split) if lc.label == 1]
    report = run_saliency_eval(saliency_scorer_for_model(model), positives,
                               config.occlusion, out_dir=out_dir)
    click.echo(f"mean weighted IOU {report['mean_weighted_iou']:.4f} "
               f"over {len(report['clips'])} clips -> {out_dir}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_csv", required=True, type=click.Path())
@handle_errors
def sweep(config_path, out_csv):
    """Label-fraction sweep across regimes and seeds; writes a results CSV."""
    config = ExperimentConfig.from_json_file(config_path)
    results = run_fraction_sweep(config, out_csv=out_csv)
    click.echo(f"{len(results)} result rows -> {out_csv}")


@main.command("ablate-temporal")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_csv", required=True, type=click.Path())
@handle_errors
def ablate_temporal(config_path, out_csv):
    """Pretraining with vs. without temporal augmentations."""
    config = ExperimentConfig.from_json_file(config_path)
    rows, auc_diff = run_ablation_temporal(config, out_csv=out_csv)
    click.echo(f"AUC with temporal {rows[0].auc:.4f}, without {rows[1].auc:.4f}, "
               f"difference {auc_diff:+.4f} -> {out_csv}")


if __name__ == "__main__":
    main()
