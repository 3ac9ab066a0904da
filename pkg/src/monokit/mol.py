"""Multi-object-labeling pretext targets.

A pretext sample is a random window over the image plus a soft label: the
area proportion of each evaluation class's ground-truth boxes inside the
window, with the remainder assigned to background.  Per class the covered
area is the area of the *union* of that class's boxes clipped to the
window, so intra-class overlap is not double counted.  When boxes of
different classes overlap enough that the class proportions exceed 1, the
components are renormalized to sum to 1 with zero background, keeping the
label a distribution.

Window sampling is keyed by (seed, frame_id, window index), so a dataset
generates identically no matter how frames are batched or parallelized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .kitti import EVAL_CLASSES, Object3D
from .seeding import derive_rng


@dataclass(frozen=True)
class RandomWindow:
    """An axis-aligned window, fully inside the image, positive area.

    rect is (left, top, right, bottom) in pixels, half-open interval
    semantics: the window covers x in [left, right) and y in [top, bottom).
    """

    rect: tuple[int, int, int, int]
    frame_id: str
    index: int

    @property
    def area(self) -> float:
        l, t, r, b = self.rect
        return float(r - l) * float(b - t)


@dataclass(frozen=True)
class SoftLabel:
    """Per-class area proportions plus a trailing background component."""

    proportions: tuple[float, ...]
    classes: tuple[str, ...]

    @property
    def background(self) -> float:
        return self.proportions[-1]


@dataclass
class MOLConfig:
    n_windows: int = 8
    scale_range: tuple[float, float] = (0.1, 0.9)
    require_foreground: bool = False
    max_retries: int = 50
    seed: int = 0
    classes: tuple[str, ...] = EVAL_CLASSES

    def __post_init__(self):
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"scale_range must satisfy 0 < min <= max <= 1, got {self.scale_range}")
        if self.n_windows < 1:
            raise ValueError(f"n_windows must be >= 1, got {self.n_windows}")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def _draw_window(rng: np.random.Generator, image_hw: tuple[int, int],
                 scale_range: tuple[float, float]) -> tuple[int, int, int, int]:
    height, width = image_hw
    lo, hi = scale_range
    w = int(np.clip(round(rng.uniform(lo, hi) * width), 1, width))
    h = int(np.clip(round(rng.uniform(lo, hi) * height), 1, height))
    left = int(rng.integers(0, width - w, endpoint=True))
    top = int(rng.integers(0, height - h, endpoint=True))
    return (left, top, left + w, top + h)


def _touches_foreground(rect: tuple[int, int, int, int],
                        objects: Sequence[Object3D],
                        classes: Sequence[str]) -> bool:
    l, t, r, b = rect
    for obj in objects:
        if obj.cls_type not in classes:
            continue
        bl, bt, br, bb = obj.bbox2d
        if min(r, br) > max(l, bl) and min(b, bb) > max(t, bt):
            return True
    return False


def sample_windows(
    image_hw: tuple[int, int],
    cfg: MOLConfig,
    frame_id: str,
    objects: Sequence[Object3D] | None = None,
) -> list[RandomWindow]:
    """Sample cfg.n_windows windows over an (height, width) image.

    Side lengths are uniform in scale_range x image dims, positions uniform
    subject to full containment.  With require_foreground, each window is
    rejection-sampled (up to max_retries, within its own RNG stream) until
    it intersects at least one evaluation-class box; the last draw is kept
    if no retry succeeds.
    """
    height, width = image_hw
    if height <= 0 or width <= 0:
        raise ValueError(f"image dims must be positive, got {image_hw}")
    if cfg.require_foreground and objects is None:
        raise ValueError("require_foreground needs the frame's objects")

    windows = []
    for index in range(cfg.n_windows):
        rng = derive_rng(cfg.seed, "mol", frame_id, index)
        rect = _draw_window(rng, image_hw, cfg.scale_range)
        if cfg.require_foreground:
            for _ in range(cfg.max_retries):
                if _touches_foreground(rect, objects, cfg.classes):
                    break
                rect = _draw_window(rng, image_hw, cfg.scale_range)
        windows.append(RandomWindow(rect=rect, frame_id=frame_id, index=index))
    return windows


def rect_union_area(rects: Sequence[tuple[float, float, float, float]]) -> float:
    """Exact area of a union of axis-aligned rectangles (coordinate sweep)."""
    rects = [r for r in rects if r[2] > r[0] and r[3] > r[1]]
    if not rects:
        return 0.0
    if len(rects) == 1:
        r = rects[0]
        return (r[2] - r[0]) * (r[3] - r[1])
    xs = np.unique(np.array([v for r in rects for v in (r[0], r[2])], dtype=np.float64))
    ys = np.unique(np.array([v for r in rects for v in (r[1], r[3])], dtype=np.float64))
    covered = np.zeros((len(ys) - 1, len(xs) - 1), dtype=bool)
    for l, t, r, b in rects:
        xi0, xi1 = np.searchsorted(xs, l), np.searchsorted(xs, r)
        yi0, yi1 = np.searchsorted(ys, t), np.searchsorted(ys, b)
        covered[yi0:yi1, xi0:xi1] = True
    cell = np.outer(np.diff(ys), np.diff(xs))
    return float(cell[covered].sum())


def _clip_rect(box: tuple[float, float, float, float],
               rect: tuple[int, int, int, int]) -> tuple[float, float, float, float] | None:
    l = max(box[0], rect[0])
    t = max(box[1], rect[1])
    r = min(box[2], rect[2])
    b = min(box[3], rect[3])
    if r <= l or b <= t:
        return None
    return (l, t, r, b)


def soft_label(
    window: RandomWindow,
    objects: Sequence[Object3D],
    classes: Sequence[str] = EVAL_CLASSES,
) -> SoftLabel:
    """Soft label of a window: per-class union-area ratios + background."""
    area = window.area
    if area <= 0:
        raise ValueError(f"window {window.rect} has non-positive area")

    components = []
    for cls in classes:
        clipped = [
            c for obj in objects if obj.cls_type == cls
            if (c := _clip_rect(obj.bbox2d, window.rect)) is not None
        ]
        components.append(rect_union_area(clipped) / area)

    total = sum(components)
    if total > 1.0:
        # cross-class overlap pushed the sum past 1: renormalize, bg = 0
        values = tuple(c / total for c in components) + (0.0,)
    else:
        values = tuple(components) + (1.0 - total,)
    return SoftLabel(proportions=values, classes=tuple(classes))


def mol_records(
    frames: Iterable[tuple[str, tuple[int, int], Sequence[Object3D]]],
    cfg: MOLConfig,
) -> Iterator[dict]:
    """One JSON-ready record per window over (frame_id, (H, W), objects) frames.

    Records are emitted in canonical order: frames as given (sort upstream
    for a canonical dataset), window index ascending.
    """
    for frame_id, image_hw, objects in frames:
        for window in sample_windows(image_hw, cfg, frame_id, objects):
            label = soft_label(window, objects, cfg.classes)
            yield {
                "frame": frame_id,
                "window": list(window.rect),
                "label": list(label.proportions),
            }


def write_mol_jsonl(records: Iterable[dict], stream: IO[str]) -> int:
    """Write MOL records as JSON Lines; returns the record count."""
    n = 0
    for record in records:
        stream.write(json.dumps(record, separators=(", ", ": ")) + "\n")
        n += 1
    return n
