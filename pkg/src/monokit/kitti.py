"""KITTI label / calibration / split / image I/O.

Follows the KITTI object-detection devkit conventions:

- label lines have 15 fields (ground truth) or 16 fields (detection with a
  trailing score), whitespace separated::

      type truncated occluded alpha
      bbox_left bbox_top bbox_right bbox_bottom
      height width length
      x y z rotation_y [score]

- the camera frame is x right, y down, z forward; ``location`` is the
  center of the bottom face of the 3D box
- ``DontCare`` records carry -1 / -1000 / -10 sentinels and are kept on
  parse (evaluation needs them as ignore regions)

All loaders are pure functions of the file bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateFrameError,
    FieldCountError,
    FieldParseError,
    LabelFormatError,
    MissingP2Error,
    CalibFormatError,
)

EVAL_CLASSES: tuple[str, ...] = ("Car", "Pedestrian", "Cyclist")
DONT_CARE = "DontCare"

_FIELD_NAMES = (
    "type", "truncated", "occluded", "alpha",
    "bbox_left", "bbox_top", "bbox_right", "bbox_bottom",
    "height", "width", "length",
    "x", "y", "z", "rotation_y", "score",
)


def is_eval_class(cls_type: str, classes: Sequence[str] = EVAL_CLASSES) -> bool:
    return cls_type in classes


@dataclass
class Object3D:
    """One KITTI ground-truth or detection record.

    ``dims`` is (h, w, l) in meters, ``location`` is (x, y, z) in the
    camera frame, ``bbox2d`` is (left, top, right, bottom) in pixels.
    ``score`` is None for ground truth and a float for detections.
    """

    cls_type: str
    truncated: float
    occluded: int
    alpha: float
    bbox2d: tuple[float, float, float, float]
    dims: tuple[float, float, float]
    location: tuple[float, float, float]
    rotation_y: float
    score: float | None = None

    @property
    def is_detection(self) -> bool:
        return self.score is not None

    def bbox_height(self) -> float:
        return self.bbox2d[3] - self.bbox2d[1]


@dataclass
class Calibration:
    """Camera projection matrix P2 (3x4, row-major) for one frame."""

    p2: np.ndarray

    def __post_init__(self):
        self.p2 = np.asarray(self.p2, dtype=np.float64)
        if self.p2.shape != (3, 4):
            raise CalibFormatError(f"P2 must be 3x4, got {self.p2.shape}")


@dataclass
class FrameSample:
    """Image + labels + calibration for one frame.

    ``object_sources`` tracks, per object, the frame id it came from; it is
    populated by the augmentation ops and None for freshly loaded frames.
    """

    frame_id: str
    image: np.ndarray  # H x W x 3 uint8
    objects: list[Object3D] = field(default_factory=list)
    calib: Calibration | None = None
    object_sources: list[str] | None = None

    @property
    def image_hw(self) -> tuple[int, int]:
        return self.image.shape[0], self.image.shape[1]


def _num(fields: list[str], idx: int, line_no: int | None) -> float:
    try:
        return float(fields[idx])
    except ValueError:
        raise FieldParseError(_FIELD_NAMES[idx], fields[idx], line_no) from None


def parse_label_line(line: str, line_no: int | None = None) -> Object3D:
    """Parse one 15/16-field KITTI label line into an Object3D."""
    fields = line.split()
    if len(fields) not in (15, 16):
        raise FieldCountError(len(fields), line_no)
    return Object3D(
        cls_type=fields[0],
        truncated=_num(fields, 1, line_no),
        occluded=int(_num(fields, 2, line_no)),
        alpha=_num(fields, 3, line_no),
        bbox2d=tuple(_num(fields, i, line_no) for i in range(4, 8)),
        dims=tuple(_num(fields, i, line_no) for i in range(8, 11)),
        location=tuple(_num(fields, i, line_no) for i in range(11, 14)),
        rotation_y=_num(fields, 14, line_no),
        score=_num(fields, 15, line_no) if len(fields) == 16 else None,
    )


def parse_label_file(text: str) -> list[Object3D]:
    """Parse a label file: one object per non-empty line, order preserved."""
    objects = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        objects.append(parse_label_line(line, line_no=line_no))
    return objects


def serialize_object(obj: Object3D) -> str:
    """Serialize to the devkit's canonical fixed-point format (2 decimals).

    parse(serialize(o)) reproduces every numeric field of o within 1e-6
    provided o's values are representable at 2 decimals (true for all KITTI
    distribution files, which are written with the same format).
    """
    parts = [
        obj.cls_type,
        f"{obj.truncated:.2f}",
        f"{obj.occluded:d}",
        f"{obj.alpha:.2f}",
        *[f"{v:.2f}" for v in obj.bbox2d],
        *[f"{v:.2f}" for v in obj.dims],
        *[f"{v:.2f}" for v in obj.location],
        f"{obj.rotation_y:.2f}",
    ]
    if obj.score is not None:
        parts.append(f"{obj.score:.2f}")
    return " ".join(parts)


def serialize_label_file(objects: Iterable[Object3D]) -> str:
    return "".join(serialize_object(o) + "\n" for o in objects)


def parse_calib(text: str) -> Calibration:
    """Extract the P2 projection matrix from KITTI calibration text."""
    for line in text.splitlines():
        if not line.startswith("P2:"):
            continue
        values = line.split()[1:]
        if len(values) != 12:
            raise CalibFormatError(f"P2 line has {len(values)} values, expected 12")
        try:
            nums = [float(v) for v in values]
        except ValueError as exc:
            raise CalibFormatError(f"P2 line has a non-numeric value: {exc}") from None
        return Calibration(p2=np.array(nums, dtype=np.float64).reshape(3, 4))
    raise MissingP2Error()


def load_split(text: str) -> list[str]:
    """Parse a split file (one frame id per line); duplicates are rejected."""
    ids: list[str] = []
    seen: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        frame_id = line.strip()
        if not frame_id:
            continue
        if frame_id in seen:
            raise DuplicateFrameError(frame_id, line_no)
        seen.add(frame_id)
        ids.append(frame_id)
    return ids


# ── image codec (PNG via Pillow) ──

def load_image(path: str | os.PathLike) -> np.ndarray:
    """Decode an image file to an H x W x 3 uint8 RGB array."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(image: np.ndarray, path: str | os.PathLike) -> None:
    """Encode an H x W x 3 uint8 array as PNG (deterministic bytes)."""
    from PIL import Image

    arr = np.ascontiguousarray(image, dtype=np.uint8)
    Image.fromarray(arr, mode="RGB").save(os.fspath(path), format="PNG")


def image_size(path: str | os.PathLike) -> tuple[int, int]:
    """Return (height, width) from the image header without decoding pixels."""
    from PIL import Image

    with Image.open(path) as im:
        w, h = im.size
    return h, w


# ── dataset root (KITTI object layout) ──

@dataclass
class KittiRoot:
    """A directory in KITTI object layout: image_2/, label_2/, calib/."""

    root: str

    def image_path(self, frame_id: str) -> str:
        return os.path.join(self.root, "image_2", frame_id + ".png")

    def label_path(self, frame_id: str) -> str:
        return os.path.join(self.root, "label_2", frame_id + ".txt")

    def calib_path(self, frame_id: str) -> str:
        return os.path.join(self.root, "calib", frame_id + ".txt")

    def has_frame(self, frame_id: str, need_image: bool = True) -> bool:
        ok = os.path.isfile(self.label_path(frame_id))
        if need_image:
            ok = ok and os.path.isfile(self.image_path(frame_id))
        return ok

    def load_objects(self, frame_id: str) -> list[Object3D]:
        with open(self.label_path(frame_id), encoding="utf-8") as f:
            return parse_label_file(f.read())

    def load_calib(self, frame_id: str) -> Calibration:
        with open(self.calib_path(frame_id), encoding="utf-8") as f:
            return parse_calib(f.read())

    def image_hw(self, frame_id: str) -> tuple[int, int]:
        return image_size(self.image_path(frame_id))

    def load_frame(self, frame_id: str, with_calib: bool = True) -> FrameSample:
        """Load image + objects (+ calib); bbox2d clamped to image bounds."""
        image = load_image(self.image_path(frame_id))
        h, w = image.shape[0], image.shape[1]
        objects = [clamp_bbox2d(o, h, w) for o in self.load_objects(frame_id)]
        calib = None
        if with_calib and os.path.isfile(self.calib_path(frame_id)):
            calib = self.load_calib(frame_id)
        return FrameSample(frame_id=frame_id, image=image, objects=objects, calib=calib)


def clamp_bbox2d(obj: Object3D, height: int, width: int) -> Object3D:
    """Clamp a record's 2D box to [0, W] x [0, H]."""
    left, top, right, bottom = obj.bbox2d
    clamped = (
        min(max(left, 0.0), float(width)),
        min(max(top, 0.0), float(height)),
        min(max(right, 0.0), float(width)),
        min(max(bottom, 0.0), float(height)),
    )
    if clamped == obj.bbox2d:
        return obj
    return replace(obj, bbox2d=clamped)
