"""Shared fixtures: synthetic objects and throwaway KITTI-layout roots."""

from __future__ import annotations

import os
import sys
import zlib

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))  # make `oracles` importable

from monokit import Calibration, Object3D, serialize_label_file
from monokit.kitti import save_image


def make_object(
    cls_type: str = "Car",
    bbox2d=(10.0, 10.0, 30.0, 30.0),
    dims=(1.5, 1.6, 3.9),
    location=(0.0, 1.7, 20.0),
    rotation_y: float = 0.0,
    score: float | None = None,
    truncated: float = 0.0,
    occluded: int = 0,
    alpha: float = 0.0,
) -> Object3D:
    return Object3D(
        cls_type=cls_type,
        truncated=truncated,
        occluded=occluded,
        alpha=alpha,
        bbox2d=tuple(float(v) for v in bbox2d),
        dims=tuple(float(v) for v in dims),
        location=tuple(float(v) for v in location),
        rotation_y=float(rotation_y),
        score=score,
    )


CALIB_TEXT = (
    "P0: 700 0 600 0 0 700 180 0 0 0 1 0\n"
    "P1: 700 0 600 0 0 700 180 0 0 0 1 0\n"
    "P2: 700 0 600 0 0 700 180 0 0 0 1 0\n"
    "P3: 700 0 600 0 0 700 180 0 0 0 1 0\n"
)


def write_kitti_root(root, frames, image_hw=(48, 64), calib_text=CALIB_TEXT):
    """Create image_2/label_2/calib dirs for {frame_id: [Object3D, ...]}.

    Images are deterministic per-frame noise so augmentation tests have
    real pixel content.
    """
    os.makedirs(os.path.join(root, "image_2"), exist_ok=True)
    os.makedirs(os.path.join(root, "label_2"), exist_ok=True)
    os.makedirs(os.path.join(root, "calib"), exist_ok=True)
    h, w = image_hw
    for frame_id, objects in frames.items():
        rng = np.random.default_rng(zlib.crc32(frame_id.encode()))
        image = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        save_image(image, os.path.join(root, "image_2", frame_id + ".png"))
        with open(os.path.join(root, "label_2", frame_id + ".txt"), "w") as f:
            f.write(serialize_label_file(objects))
        with open(os.path.join(root, "calib", frame_id + ".txt"), "w") as f:
            f.write(calib_text)
    with open(os.path.join(root, "split.txt"), "w") as f:
        f.write("".join(fid + "\n" for fid in sorted(frames)))
    return os.path.join(root, "split.txt")


@pytest.fixture
def identity_calib() -> Calibration:
    return Calibration(p2=np.array([[700.0, 0, 600, 0], [0, 700.0, 180, 0], [0, 0, 1.0, 0]]))


def pytest_runtest_logreport(report):
    """One visible line per acceptance criterion, capture notwithstanding."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = getattr(report, "_criterion", None)
    if name is None:
        return
    status = "PASS" if report.passed else "FAIL"
    sys.stderr.write(f"\n[{status}] {name}")
    sys.stderr.flush()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    fn = getattr(item, "function", None)
    label = getattr(fn, "_criterion", None)
    if label is not None:
        report._criterion = label
