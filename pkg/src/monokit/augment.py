"""Box-level data augmentations: Box-Mixup, Box-Cut-Paste, Cutout.

Given a reference frame A and a partner frame B with the same image size,
let M_B be the binary union mask of B's evaluation-class 2D boxes:

- Box-Mixup:     out = (0.5 A + 0.5 B) on M_B, A elsewhere; labels A + B
- Box-Cut-Paste: out = B on M_B, A elsewhere;              labels A + B
- Cutout:        fixed-size random rectangles erased;       labels kept

Mixup averaging is done in widened integer arithmetic and rounded half
away from zero so outputs are bit-reproducible.  All randomness is keyed
by (seed, frame_id, ...) so results are independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyPartnerPoolError,
    EmptyPipelineError,
)
from .kitti import EVAL_CLASSES, FrameSample, Object3D
from .seeding import derive_rng

AUGMENT_KINDS = ("boxmixup", "cutpaste", "cutout")


@dataclass
class AugmentConfig:
    pipeline: tuple[str, ...] = ("boxmixup",)
    cutout_holes: int = 4
    cutout_frac: float = 0.1
    fill: str = "zero"  # "zero" | "channel_mean"
    seed: int = 0
    partner_policy: str = "uniform_same_dims"

    def __post_init__(self):
        if isinstance(self.pipeline, str):
            self.pipeline = tuple(p for p in self.pipeline.split(",") if p)
        self.pipeline = tuple(p.strip().lower() for p in self.pipeline)
        for stage in self.pipeline:
            if stage not in AUGMENT_KINDS:
                raise ValueError(f"unknown augmentation {stage!r}; use one of {AUGMENT_KINDS}")
        if self.cutout_holes < 1:
            raise ValueError(f"cutout_holes must be >= 1, got {self.cutout_holes}")
        if not 0.0 < self.cutout_frac < 1.0:
            raise ValueError(f"cutout_frac must be in (0, 1), got {self.cutout_frac}")
        if self.fill not in ("zero", "channel_mean"):
            raise ValueError(f"unknown fill {self.fill!r}")
        if self.partner_policy != "uniform_same_dims":
            raise ValueError(f"unknown partner policy {self.partner_policy!r}")


def _px(v: float) -> int:
    # deterministic half-up rounding for pixel coordinates
    return int(math.floor(v + 0.5))


def boxes_mask(objects: Sequence[Object3D], image_hw: tuple[int, int]) -> np.ndarray:
    """H x W uint8 union mask of evaluation-class 2D boxes (DontCare and
    non-evaluation classes excluded)."""
    height, width = image_hw
    mask = np.zeros((height, width), dtype=np.uint8)
    for obj in objects:
        if obj.cls_type not in EVAL_CLASSES:
            continue
        l = np.clip(_px(obj.bbox2d[0]), 0, width)
        t = np.clip(_px(obj.bbox2d[1]), 0, height)
        r = np.clip(_px(obj.bbox2d[2]), 0, width)
        b = np.clip(_px(obj.bbox2d[3]), 0, height)
        mask[t:b, l:r] = 1
    return mask


def _check_dims(a: FrameSample, b: FrameSample) -> None:
    if a.image.shape != b.image.shape:
        raise DimensionMismatchError(
            f"image shapes differ: {a.image.shape} ({a.frame_id}) vs "
            f"{b.image.shape} ({b.frame_id})"
        )


def _merge_labels(a: FrameSample, b: FrameSample) -> tuple[list[Object3D], list[str]]:
    objects = list(a.objects) + list(b.objects)
    sources_a = a.object_sources or [a.frame_id] * len(a.objects)
    sources_b = b.object_sources or [b.frame_id] * len(b.objects)
    return objects, list(sources_a) + list(sources_b)


def box_mixup(a: FrameSample, b: FrameSample) -> FrameSample:
    """50/50 pixel blend restricted to B's box-union mask; labels unioned."""
    _check_dims(a, b)
    mask = boxes_mask(b.objects, b.image_hw)
    blend = ((a.image.astype(np.uint16) + b.image.astype(np.uint16) + 1) // 2).astype(np.uint8)
    out = np.where(mask[:, :, None].astype(bool), blend, a.image)
    objects, object_sources = _merge_labels(a, b)
    return FrameSample(
        frame_id=a.frame_id,
        image=out,
        objects=objects,
        calib=a.calib,
        object_sources=object_sources,
    )


def box_cut_paste(a: FrameSample, b: FrameSample) -> FrameSample:
    """Verbatim transplant of B's pixels under its box-union mask."""
    _check_dims(a, b)
    mask = boxes_mask(b.objects, b.image_hw)
    out = np.where(mask[:, :, None].astype(bool), b.image, a.image)
    objects, object_sources = _merge_labels(a, b)
    return FrameSample(
        frame_id=a.frame_id,
        image=out,
        objects=objects,
        calib=a.calib,
        object_sources=object_sources,
    )


def cutout(a: FrameSample, cfg: AugmentConfig, stage: int = 0) -> FrameSample:
    """Erase cfg.cutout_holes random rectangles; labels unchanged.

    Each hole spans cutout_frac of the corresponding image dimension
    (at least 1 px) and lies fully inside the image.
    """
    height, width = a.image_hw
    hh = max(1, _px(cfg.cutout_frac * height))
    hw = max(1, _px(cfg.cutout_frac * width))
    out = a.image.copy()
    if cfg.fill == "channel_mean":
        fill = np.floor(a.image.reshape(-1, 3).mean(axis=0) + 0.5).astype(np.uint8)
    else:
        fill = np.zeros(3, dtype=np.uint8)
    for hole in range(cfg.cutout_holes):
        rng = derive_rng(cfg.seed, "cutout", a.frame_id, stage, hole)
        top = int(rng.integers(0, height - hh, endpoint=True))
        left = int(rng.integers(0, width - hw, endpoint=True))
        out[top:top + hh, left:left + hw] = fill
    return FrameSample(
        frame_id=a.frame_id,
        image=out,
        objects=list(a.objects),
        calib=a.calib,
        object_sources=list(a.object_sources) if a.object_sources is not None else None,
    )


class PartnerPool:
    """Partner frames for pairing augmentations (uniform over same-dims
    candidates, excluding the frame being augmented)."""

    def __init__(self, entries: Sequence[tuple[str, tuple[int, int], Callable[[], FrameSample]]]):
        self._entries = list(entries)

    @classmethod
    def from_samples(cls, samples: Sequence[FrameSample]) -> "PartnerPool":
        return cls([(s.frame_id, s.image_hw, (lambda s=s: s)) for s in samples])

    @classmethod
    def from_root(cls, root, frame_ids: Sequence[str]) -> "PartnerPool":
        entries = []
        for fid in frame_ids:
            entries.append(
                (fid, root.image_hw(fid), (lambda fid=fid: root.load_frame(fid)))
            )
        return cls(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def pick(self, frame_id: str, image_hw: tuple[int, int],
             rng: np.random.Generator) -> FrameSample:
        candidates = [
            e for e in self._entries if e[0] != frame_id and e[1] == tuple(image_hw)
        ]
        if not candidates:
            raise EmptyPartnerPoolError(
                f"no partner with dims {image_hw} available for frame {frame_id}"
            )
        chosen = candidates[int(rng.integers(0, len(candidates)))]
        return chosen[2]()


def compose(
    a: FrameSample,
    pipeline: Sequence[str],
    frame_pool: PartnerPool | None,
    cfg: AugmentConfig,
) -> tuple[FrameSample, list[str]]:
    """Apply a pipeline left to right; returns (sample, source frame ids).

    Pairing stages (boxmixup, cutpaste) draw their partner from frame_pool
    with an RNG keyed by (seed, frame_id, stage index).
    """
    if not pipeline:
        raise EmptyPipelineError("augmentation pipeline is empty")
    current = a
    sources = [a.frame_id]
    for stage, op in enumerate(p.strip().lower() for p in pipeline):
        if op == "cutout":
            current = cutout(current, cfg, stage=stage)
            continue
        if frame_pool is None or len(frame_pool) == 0:
            raise EmptyPartnerPoolError(f"stage {op!r} needs a partner pool")
        rng = derive_rng(cfg.seed, "partner", a.frame_id, stage)
        partner = frame_pool.pick(a.frame_id, current.image_hw, rng)
        if op == "boxmixup":
            current = box_mixup(current, partner)
        elif op == "cutpaste":
            current = box_cut_paste(current, partner)
        else:
            raise ValueError(f"unknown augmentation {op!r}")
        sources.append(partner.frame_id)
    return current, sources
