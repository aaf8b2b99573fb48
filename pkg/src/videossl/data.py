"""Video clip types, synthetic dataset generation, splitting and subsampling.

Clips are T x H x W float32 arrays with intensities in [0, 1]. The synthetic
generator produces ultrasound-like grayscale video: multiplicative speckle
with horizontal band artifacts for negatives, plus one bright drifting
ellipsoidal blob (with per-frame ground-truth boxes) for positives.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import ConfigurationError, InputError

SPLITS = ("train", "val", "test", "unlabeled")


@dataclass(frozen=True)
class VideoClip:
    frames: np.ndarray  # (T, H, W) float32 in [0, 1]
    frame_rate: float = 20.0

    def __post_init__(self):
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise InputError(f"clip must be T x H x W with T >= 1, got {self.frames.shape}")

    @property
    def shape(self):
        return self.frames.shape


@dataclass(frozen=True)
class GroundTruthBox:
    frame_index: int
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InputError(f"degenerate box {(self.x0, self.y0, self.x1, self.y1)}")


@dataclass
class LabeledClip:
    clip: VideoClip
    label: int
    boxes: list[GroundTruthBox]
    source_id: str
    clip_id: str = ""


@dataclass
class SourcedClip:
    clip: VideoClip
    source_id: str
    clip_id: str = ""


@dataclass
class DatasetManifest:
    labeled: list[LabeledClip] = field(default_factory=list)
    unlabeled: list[SourcedClip] = field(default_factory=list)
    splits: dict[str, str] = field(default_factory=dict)  # clip_id -> split

    def labeled_split(self, split):
        return [lc for lc in self.labeled if self.splits.get(lc.clip_id) == split]

    def check_source_separation(self):
        seen = {}
        for lc in self.labeled:
            split = self.splits.get(lc.clip_id)
            if split not in ("train", "val", "test"):
                continue
            prev = seen.setdefault(lc.source_id, split)
            if prev != split:
                raise ConfigurationError(
                    f"source {lc.source_id} appears in both {prev} and {split}"
                )


@dataclass
class SynthConfig:
    n_unlabeled: int = 100
    n_labeled: int = 40
    sources: int = 10
    T: int = 16
    H: int = 64
    W: int = 64
    positive_fraction: float = 0.5

    def validate(self):
        if self.n_unlabeled < 0 or self.n_labeled < 0:
            raise ConfigurationError("clip counts must be >= 0")
        if self.T < 1 or self.H < 16 or self.W < 16:
            raise ConfigurationError(
                f"invalid dimensions T={self.T}, H={self.H}, W={self.W} (need T>=1, H,W>=16)"
            )
        if self.sources < 1:
            raise ConfigurationError("need at least one source")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise ConfigurationError("positive_fraction must be in [0, 1]")


def _speckle(rng, T, H, W):
    """Multiplicative speckle texture: smoothed Gaussian field around 1."""
    raw = rng.standard_normal((T, H, W)).astype(np.float32)
    smoothed = np.stack([cv2.GaussianBlur(f, (5, 5), 1.2) for f in raw])
    return 1.0 + 2.2 * smoothed


def _band_background(rng, T, H, W):
    """Speckled background with horizontal reverberation bands."""
    depth = np.linspace(1.0, 0.55, H, dtype=np.float32)[None, :, None]
    base = 0.30 * depth * np.ones((T, H, W), dtype=np.float32)

    spacing = int(rng.integers(10, 16))
    offset = int(rng.integers(2, spacing))
    flicker = 1.0 + 0.1 * rng.standard_normal(T).astype(np.float32)
    rows = np.arange(offset, H, spacing)
    for r in rows:
        r0, r1 = max(r - 1, 0), min(r + 2, H)
        base[:, r0:r1, :] += 0.18 * flicker[:, None, None]

    frames = base * _speckle(rng, T, H, W)
    return np.clip(frames, 0.0, 1.0)


def _add_blob(rng, frames):
    """Add one bright ellipsoidal blob drifting <= 2 px/frame; return boxes."""
    T, H, W = frames.shape
    scale = min(H, W) / 64.0
    rx = max(float(rng.uniform(9, 15)) * scale, 2.0)
    ry = max(float(rng.uniform(9, 15)) * scale, 2.0)
    cx = float(rng.uniform(rx + 2, W - rx - 2))
    cy = float(rng.uniform(ry + 2, H - ry - 2))
    vx = float(rng.uniform(-1.5, 1.5))
    vy = float(rng.uniform(-1.5, 1.5))
    amp = float(rng.uniform(0.45, 0.60))

    ys = np.arange(H, dtype=np.float32)[:, None]
    xs = np.arange(W, dtype=np.float32)[None, :]
    boxes = []
    for t in range(T):
        d2 = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2
        profile = np.clip(1.0 - d2, 0.0, None).astype(np.float32)
        frames[t] = np.clip(frames[t] + amp * profile, 0.0, 1.0)
        x0 = max(int(math.floor(cx - rx)), 0)
        y0 = max(int(math.floor(cy - ry)), 0)
        x1 = min(int(math.ceil(cx + rx)) + 1, W)
        y1 = min(int(math.ceil(cy + ry)) + 1, H)
        boxes.append(GroundTruthBox(t, x0, y0, x1, y1))
        cx += vx
        cy += vy
        if not rx + 1 <= cx <= W - rx - 1:
            vx = -vx
            cx = min(max(cx, rx + 1), W - rx - 1)
        if not ry + 1 <= cy <= H - ry - 1:
            vy = -vy
            cy = min(max(cy, ry + 1), H - ry - 1)
    return frames, boxes


def _normalize_mean(frames, target=0.30):
    """Rescale to a fixed mean so global brightness carries no label signal."""
    m = float(frames.mean())
    if m > 0:
        frames = np.clip(frames * (target / m), 0.0, 1.0).astype(np.float32)
    return frames


def generate_synthetic_dataset(config: SynthConfig, seed: int) -> DatasetManifest:
    config.validate()
    rng = np.random.default_rng(seed)
    manifest = DatasetManifest()

    n_pos = int(math.floor(config.positive_fraction * config.n_labeled + 0.5))
    for i in range(config.n_labeled):
        positive = i < n_pos
        frames = _band_background(rng, config.T, config.H, config.W)
        boxes = []
        if positive:
            frames, boxes = _add_blob(rng, frames)
        frames = _normalize_mean(frames)
        clip_id = f"lab{i:05d}"
        source = f"src{i % config.sources:04d}"
        manifest.labeled.append(
            LabeledClip(VideoClip(frames), int(positive), boxes, source, clip_id)
        )
        manifest.splits[clip_id] = "train"

    for i in range(config.n_unlabeled):
        frames = _band_background(rng, config.T, config.H, config.W)
        if rng.random() < config.positive_fraction:
            frames, _ = _add_blob(rng, frames)
        frames = _normalize_mean(frames)
        clip_id = f"unl{i:05d}"
        source = f"src{int(rng.integers(0, config.sources)):04d}"
        manifest.unlabeled.append(SourcedClip(VideoClip(frames), source, clip_id))
        manifest.splits[clip_id] = "unlabeled"

    return manifest


def sample_window(clip: VideoClip, length: int, rng: np.random.Generator) -> VideoClip:
    T = clip.frames.shape[0]
    if length > T:
        raise InputError(f"window length {length} exceeds clip length {T}")
    offset = int(rng.integers(0, T - length + 1))
    return VideoClip(clip.frames[offset:offset + length], clip.frame_rate)


def center_window(clip: VideoClip, length: int) -> VideoClip:
    T = clip.frames.shape[0]
    if length > T:
        raise InputError(f"window length {length} exceeds clip length {T}")
    offset = (T - length) // 2
    return VideoClip(clip.frames[offset:offset + length], clip.frame_rate)


def split_by_source(manifest: DatasetManifest, ratios, seed: int) -> DatasetManifest:
    """Assign train/val/test at source level; clips inherit their source's split."""
    r = tuple(float(x) for x in ratios)
    if len(r) != 3 or any(x <= 0 for x in r) or abs(sum(r) - 1.0) > 1e-9:
        raise ConfigurationError(f"ratios must be 3 positive values summing to 1, got {r}")
    sources = sorted({lc.source_id for lc in manifest.labeled})
    if len(sources) < 3:
        raise ConfigurationError(f"need at least 3 labeled sources, got {len(sources)}")

    rng = np.random.default_rng(seed)
    order = [sources[i] for i in rng.permutation(len(sources))]
    n = len(order)
    cut1 = int(round(r[0] * n))
    cut2 = int(round((r[0] + r[1]) * n))
    assignment = {}
    for i, src in enumerate(order):
        assignment[src] = "train" if i < cut1 else ("val" if i < cut2 else "test")

    out = DatasetManifest(list(manifest.labeled), list(manifest.unlabeled), dict(manifest.splits))
    for lc in out.labeled:
        out.splits[lc.clip_id] = assignment[lc.source_id]
    out.check_source_separation()
    return out


def subsample_fraction(train, fraction: float, seed: int):
    """Uniform subsample of round-half-up(fraction * n) clips.

    A fixed seed yields nested subsets across fractions: the selection is a
    prefix of one seeded permutation.
    """
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(train)
    n = len(train)
    k = int(math.floor(fraction * n + 0.5))
    if k == 0:
        raise ConfigurationError(f"fraction {fraction} of {n} clips selects nothing")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(n)[:k]
    return [train[i] for i in idx]


def save_dataset(manifest: DatasetManifest, directory: str):
    """Persist as manifest.json plus one frame-major float32 file per clip."""
    os.makedirs(directory, exist_ok=True)
    entries = []
    for lc in manifest.labeled:
        entries.append({
            "clip_id": lc.clip_id,
            "kind": "labeled",
            "label": lc.label,
            "boxes": [[b.frame_index, b.x0, b.y0, b.x1, b.y1] for b in lc.boxes],
            "source_id": lc.source_id,
            "split": manifest.splits.get(lc.clip_id, "train"),
            "shape": list(lc.clip.frames.shape),
            "frame_rate": lc.clip.frame_rate,
            "file": f"{lc.clip_id}.f32",
        })
        lc.clip.frames.astype("<f4").tofile(os.path.join(directory, f"{lc.clip_id}.f32"))
    for uc in manifest.unlabeled:
        entries.append({
            "clip_id": uc.clip_id,
            "kind": "unlabeled",
            "source_id": uc.source_id,
            "split": "unlabeled",
            "shape": list(uc.clip.frames.shape),
            "frame_rate": uc.clip.frame_rate,
            "file": f"{uc.clip_id}.f32",
        })
        uc.clip.frames.astype("<f4").tofile(os.path.join(directory, f"{uc.clip_id}.f32"))
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump({"clips": entries}, fh, indent=1, sort_keys=True)


def load_dataset(directory: str) -> DatasetManifest:
    path = os.path.join(directory, "manifest.json")
    if not os.path.isfile(path):
        raise InputError(f"no manifest.json in {directory}")
    with open(path, encoding="utf-8") as fh:
        meta = json.load(fh)
    manifest = DatasetManifest()
    for e in meta["clips"]:
        shape = tuple(e["shape"])
        raw = np.fromfile(os.path.join(directory, e["file"]), dtype="<f4")
        if raw.size != int(np.prod(shape)):
            raise InputError(f"clip file {e['file']} has {raw.size} values, expected {np.prod(shape)}")
        clip = VideoClip(raw.reshape(shape), e.get("frame_rate", 20.0))
        if e["kind"] == "labeled":
            boxes = [GroundTruthBox(*b) for b in e.get("boxes", [])]
            manifest.labeled.append(LabeledClip(clip, e["label"], boxes, e["source_id"], e["clip_id"]))
        else:
            manifest.unlabeled.append(SourcedClip(clip, e["source_id"], e["clip_id"]))
        manifest.splits[e["clip_id"]] = e["split"]
    return manifest
