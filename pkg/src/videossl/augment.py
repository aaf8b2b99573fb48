"""Spatio-temporal augmentation pipeline for grayscale video clips.

Parameter drawing is separated from application: draw_augmentation() samples
a concrete AugmentationPlan from a seeded generator, and apply_plan() applies
it deterministically. The spatial group (affine, flip, jitter, noise, erasing)
uses the same transform on every frame; the temporal group (reversal, partial
shuffle, frame replacement) reorders or duplicates whole frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import cv2
import numpy as np

from .data import VideoClip


@dataclass
class AugmentationConfig:
    scale_range: float = 0.20
    translation_range: float = 0.10
    rotation_range: float = 10.0
    hflip_prob: float = 0.5
    brightness: float = 0.3
    contrast: float = 0.3
    noise_std: float = 0.03
    erase_area: tuple = (0.02, 0.10)
    erase_aspect: tuple = (0.3, 3.3)
    reverse_prob: float = 0.5
    shuffle_prob: float = 0.5
    shuffle_max_frames: int = 4
    replace_prob: float = 0.5
    replace_max_frames: int = 4
    temporal_enabled: bool = True

    def to_json_dict(self):
        d = asdict(self)
        d["erase_area"] = list(self.erase_area)
        d["erase_aspect"] = list(self.erase_aspect)
        return d

    @classmethod
    def from_json_dict(cls, d):
        kwargs = dict(d)
        if "erase_area" in kwargs:
            kwargs["erase_area"] = tuple(kwargs["erase_area"])
        if "erase_aspect" in kwargs:
            kwargs["erase_aspect"] = tuple(kwargs["erase_aspect"])
        return cls(**kwargs)


@dataclass
class AugmentationPlan:
    scale: float = 1.0
    tx: float = 0.0
    ty: float = 0.0
    rotation: float = 0.0  # degrees
    do_hflip: bool = False
    brightness_factor: float = 1.0
    contrast_factor: float = 1.0
    noise_seed: int = 0
    noise_std: float = 0.0
    erase_rect: tuple | None = None  # (x0, y0, x1, y1), half-open
    do_reverse: bool = False
    shuffle_indices: np.ndarray = field(default_factory=lambda: np.arange(0))
    replace_map: list = field(default_factory=list)  # [(dest, src), ...]


def _draw_erase_rect(rng, H, W, area_range, aspect_range, max_tries=100):
    """Pick a rectangle whose integer area and aspect honor the drawn ranges."""
    lo = int(np.ceil(area_range[0] * H * W))
    hi = int(np.floor(area_range[1] * H * W))
    if hi < max(lo, 1):
        return None
    for _ in range(max_tries):
        area = rng.uniform(area_range[0], area_range[1]) * H * W
        aspect = rng.uniform(aspect_range[0], aspect_range[1])  # h / w
        h0 = np.sqrt(area * aspect)
        w0 = np.sqrt(area / aspect)
        best = None
        for h in (int(np.floor(h0)), int(np.ceil(h0))):
            for w in (int(np.floor(w0)), int(np.ceil(w0))):
                if h < 1 or w < 1 or h > H or w > W:
                    continue
                if not lo <= h * w <= hi:
                    continue
                if not aspect_range[0] <= h / w <= aspect_range[1]:
                    continue
                if best is None or abs(h * w - area) < abs(best[0] * best[1] - area):
                    best = (h, w)
        if best is not None:
            h, w = best
            x0 = int(rng.integers(0, W - w + 1))
            y0 = int(rng.integers(0, H - h + 1))
            return (x0, y0, x0 + w, y0 + h)
    return None


def draw_augmentation(config: AugmentationConfig, T: int, rng: np.random.Generator,
                      H: int = 64, W: int = 64) -> AugmentationPlan:
    plan = AugmentationPlan()
    plan.scale = 1.0 + float(rng.uniform(-config.scale_range, config.scale_range))
    plan.tx = float(rng.uniform(-config.translation_range, config.translation_range))
    plan.ty = float(rng.uniform(-config.translation_range, config.translation_range))
    plan.rotation = float(rng.uniform(-config.rotation_range, config.rotation_range))
    plan.do_hflip = bool(rng.random() < config.hflip_prob)
    plan.brightness_factor = 1.0 + float(rng.uniform(-config.brightness, config.brightness))
    plan.contrast_factor = 1.0 + float(rng.uniform(-config.contrast, config.contrast))
    plan.noise_seed = int(rng.integers(0, 2**63 - 1))
    plan.noise_std = config.noise_std
    plan.erase_rect = _draw_erase_rect(rng, H, W, config.erase_area, config.erase_aspect)

    plan.shuffle_indices = np.arange(T)
    if config.temporal_enabled:
        plan.do_reverse = bool(rng.random() < config.reverse_prob)
        if rng.random() < config.shuffle_prob:
            k = min(int(rng.integers(0, config.shuffle_max_frames + 1)), T)
            if k >= 2:
                positions = rng.choice(T, size=k, replace=False)
                perm = positions[rng.permutation(k)]
                plan.shuffle_indices = np.arange(T)
                plan.shuffle_indices[positions] = perm
        if rng.random() < config.replace_prob and T >= 2:
            k = min(int(rng.integers(0, config.replace_max_frames + 1)), T)
            dests = rng.choice(T, size=k, replace=False)
            for dest in dests:
                src = int(rng.integers(0, T - 1))
                if src >= dest:
                    src += 1
                plan.replace_map.append((int(dest), src))
    return plan


def apply_affine(clip: VideoClip, scale: float, tx: float, ty: float,
                 rotation: float) -> VideoClip:
    """Same rotation/scale about the frame center plus (tx*W, ty*H) shift on
    every frame; bilinear sampling, zeros outside, output clamped to [0,1]."""
    if scale == 1.0 and tx == 0.0 and ty == 0.0 and rotation == 0.0:
        return VideoClip(clip.frames.copy(), clip.frame_rate)
    T, H, W = clip.frames.shape
    center = ((W - 1) / 2.0, (H - 1) / 2.0)
    M = cv2.getRotationMatrix2D(center, rotation, scale)
    M[0, 2] += tx * W
    M[1, 2] += ty * H
    out = np.empty_like(clip.frames)
    for t in range(T):
        out[t] = cv2.warpAffine(
            clip.frames[t], M, (W, H), flags=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_CONSTANT, borderValue=0.0)
    return VideoClip(np.clip(out, 0.0, 1.0), clip.frame_rate)


def apply_hflip(clip: VideoClip) -> VideoClip:
    return VideoClip(np.ascontiguousarray(clip.frames[:, :, ::-1]), clip.frame_rate)


def apply_intensity(clip: VideoClip, brightness_factor: float, contrast_factor: float,
                    noise_seed: int, noise_std: float) -> VideoClip:
    frames = clip.frames
    if brightness_factor != 1.0:
        frames = np.clip(frames * np.float32(brightness_factor), 0.0, 1.0)
    if contrast_factor != 1.0:
        mu = np.float32(frames.mean())
        frames = np.clip(mu + np.float32(contrast_factor) * (frames - mu), 0.0, 1.0)
    if noise_std > 0.0:
        noise = np.random.default_rng(noise_seed).normal(0.0, noise_std, frames.shape)
        frames = np.clip(frames + noise.astype(np.float32), 0.0, 1.0)
    if frames is clip.frames:
        frames = frames.copy()
    return VideoClip(frames, clip.frame_rate)


def apply_erasing(clip: VideoClip, erase_rect) -> VideoClip:
    if erase_rect is None:
        return VideoClip(clip.frames.copy(), clip.frame_rate)
    x0, y0, x1, y1 = erase_rect
    frames = clip.frames.copy()
    frames[:, y0:y1, x0:x1] = 0.0
    return VideoClip(frames, clip.frame_rate)


def apply_temporal(clip: VideoClip, do_reverse: bool, shuffle_indices,
                   replace_map) -> VideoClip:
    frames = clip.frames
    if do_reverse:
        frames = frames[::-1]
    shuffle_indices = np.asarray(shuffle_indices)
    if shuffle_indices.size and not np.array_equal(shuffle_indices, np.arange(frames.shape[0])):
        frames = frames[shuffle_indices]
    if replace_map:
        snapshot = frames
        frames = frames.copy()
        for dest, src in replace_map:
            frames[dest] = snapshot[src]
    return VideoClip(np.ascontiguousarray(frames), clip.frame_rate)


def apply_plan(clip: VideoClip, plan: AugmentationPlan) -> VideoClip:
    out = apply_affine(clip, plan.scale, plan.tx, plan.ty, plan.rotation)
    if plan.do_hflip:
        out = apply_hflip(out)
    out = apply_intensity(out, plan.brightness_factor, plan.contrast_factor,
                          plan.noise_seed, plan.noise_std)
    out = apply_erasing(out, plan.erase_rect)
    out = apply_temporal(out, plan.do_reverse, plan.shuffle_indices, plan.replace_map)
    return out
