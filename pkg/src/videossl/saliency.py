"""Occlusion saliency maps, top-fraction thresholding, connected-component
box extraction and weighted-IOU scoring against ground-truth boxes."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import cv2
import numpy as np
import torch

from .data import VideoClip
from .errors import ConfigurationError

MIN_COMPONENT_PIXELS = 4


@dataclass
class OcclusionConfig:
    window: tuple = (1, 8, 8)
    stride: tuple = (1, 4, 4)
    # Occluded windows are filled with the clip mean.

    def to_json_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        d["stride"] = list(self.stride)
        return d

    @classmethod
    def from_json_dict(cls, d):
        return cls(window=tuple(d["window"]), stride=tuple(d["stride"]))


@dataclass
class PredBox:
    frame_index: int
    x0: int
    y0: int
    x1: int
    y1: int
    mass: float


def _grid(dim, k, s):
    """Stride-grid start positions covering [0, dim), last clamped to dim-k."""
    starts = list(range(0, dim - k + 1, s))
    if starts[-1] != dim - k:
        starts.append(dim - k)
    return starts


def model_scorer(model, class_index):
    """Batched score function (N,T,H,W) -> (N,) softmax probabilities."""

    def score(batch):
        model.eval()
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(batch.astype(np.float32)))
            probs = torch.softmax(model(x), dim=1)
            return probs[:, class_index].numpy().astype(np.float64)

    return score


def occlusion_saliency(score_fn, clip: VideoClip, config: OcclusionConfig,
                       batch_size: int = 64) -> np.ndarray:
    """Occlude each stride-grid window with the clip mean and record the score
    drop; each voxel's saliency is the mean drop over windows covering it,
    clamped below at zero.

    score_fn maps a (N, T, H, W) float array to (N,) scores.
    """
    frames = clip.frames
    T, H, W = frames.shape
    kt, kh, kw = config.window
    st, sh, sw = config.stride
    if min(kt, kh, kw, st, sh, sw) < 1 or kt > T or kh > H or kw > W:
        raise ConfigurationError(
            f"occlusion window {config.window} invalid for clip shape {frames.shape}")

    baseline = np.float32(frames.mean())
    base_score = float(score_fn(frames[None])[0])

    positions = [(t0, y0, x0)
                 for t0 in _grid(T, kt, st)
                 for y0 in _grid(H, kh, sh)
                 for x0 in _grid(W, kw, sw)]

    drop_sum = np.zeros((T, H, W), dtype=np.float64)
    cover = np.zeros((T, H, W), dtype=np.float64)
    for lo in range(0, len(positions), batch_size):
        chunk = positions[lo:lo + batch_size]
        batch = np.repeat(frames[None], len(chunk), axis=0)
        for j, (t0, y0, x0) in enumerate(chunk):
            batch[j, t0:t0 + kt, y0:y0 + kh, x0:x0 + kw] = baseline
        scores = score_fn(batch)
        for (t0, y0, x0), s in zip(chunk, scores):
            drop = base_score - float(s)
            drop_sum[t0:t0 + kt, y0:y0 + kh, x0:x0 + kw] += drop
            cover[t0:t0 + kt, y0:y0 + kh, x0:x0 + kw] += 1.0

    sal = drop_sum / np.maximum(cover, 1.0)
    return np.clip(sal, 0.0, None).astype(np.float32)


def threshold_top_fraction(saliency: np.ndarray, fraction: float = 0.10) -> np.ndarray:
    """Per frame, mark exactly ceil(fraction * H * W) highest-saliency pixels.
    Ties go to the lower row-major index."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError(f"fraction must be in (0, 1], got {fraction}")
    T, H, W = saliency.shape
    k = int(np.ceil(fraction * H * W))
    mask = np.zeros((T, H, W), dtype=bool)
    for t in range(T):
        flat = saliency[t].ravel()
        order = np.argsort(-flat, kind="stable")  # stable: ties by lower index
        sel = order[:k]
        frame_mask = np.zeros(H * W, dtype=bool)
        frame_mask[sel] = True
        mask[t] = frame_mask.reshape(H, W)
    return mask


def extract_boxes(mask_frame: np.ndarray, saliency_frame: np.ndarray,
                  frame_index: int = 0) -> list[PredBox]:
    """Minimal bounding box and saliency mass per 8-connected component;
    components smaller than MIN_COMPONENT_PIXELS pixels are dropped."""
    if mask_frame.shape != saliency_frame.shape:
        raise ConfigurationError("mask and saliency frame shapes differ")
    n, labels, stats, _ = cv2.connectedComponentsWithStats(
        mask_frame.astype(np.uint8), connectivity=8)
    boxes = []
    for lab in range(1, n):
        x, y, w, h, area = stats[lab]
        if area < MIN_COMPONENT_PIXELS:
            continue
        mass = float(saliency_frame[labels == lab].sum())
        if mass <= 0.0:
            continue  # no saliency evidence, not a prediction
        boxes.append(PredBox(frame_index, int(x), int(y), int(x + w), int(y + h), mass))
    return boxes


def box_iou(a, b) -> float:
    """IOU of two half-open boxes given as objects with x0/y0/x1/y1."""
    ix0, iy0 = max(a.x0, b.x0), max(a.y0, b.y0)
    ix1, iy1 = min(a.x1, b.x1), min(a.y1, b.y1)
    iw, ih = max(ix1 - ix0, 0), max(iy1 - iy0, 0)
    inter = iw * ih
    if inter == 0:
        return 0.0
    area_a = (a.x1 - a.x0) * (a.y1 - a.y0)
    area_b = (b.x1 - b.x0) * (b.y1 - b.y0)
    return inter / (area_a + area_b - inter)


def weighted_iou_frame(pred: list[PredBox], gt) -> float:
    """Mass-weighted best-match IOU of predictions against ground truth."""
    if not pred:
        return 0.0
    total_mass = sum(p.mass for p in pred)
    if total_mass <= 0:
        weights = [1.0 / len(pred)] * len(pred)
    else:
        weights = [p.mass / total_mass for p in pred]
    return sum(w * max((box_iou(p, g) for g in gt), default=0.0)
               for w, p in zip(weights, pred))


def weighted_iou(pred: list[PredBox], gt_boxes) -> float:
    """Clip-level score: mean over frames that have ground truth or
    predictions; frames with ground truth but no predictions score 0."""
    pred_by_frame = {}
    for p in pred:
        pred_by_frame.setdefault(p.frame_index, []).append(p)
    gt_by_frame = {}
    for g in gt_boxes:
        gt_by_frame.setdefault(g.frame_index, []).append(g)

    frame_scores = []
    for t in sorted(set(pred_by_frame) | set(gt_by_frame)):
        preds = pred_by_frame.get(t, [])
        gts = gt_by_frame.get(t, [])
        if not gts:
            frame_scores.append(0.0)
        elif not preds:
            frame_scores.append(0.0)
        else:
            frame_scores.append(weighted_iou_frame(preds, gts))
    if not frame_scores:
        return 0.0
    return float(np.mean(frame_scores))
