"""3D box geometry: corners, keypoint projection, and exact 2D/BEV/3D IoU.

BEV footprints are the yawed (x, z) rectangles of the boxes; their
intersection is computed exactly with Sutherland-Hodgman half-plane
clipping (both operands convex).  Degenerate footprints (area < 1e-12,
e.g. the -1 sentinel dims of DontCare records) give IoU 0.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import BehindCameraError
from .kitti import Calibration, Object3D

CLIP_EPS = 1e-9       # half-plane test / vertex dedup tolerance
DEGENERATE_AREA = 1e-12


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    pts = np.asarray(poly, dtype=np.float64)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _ensure_ccw(poly: np.ndarray) -> np.ndarray:
    return poly[::-1] if polygon_area(poly) < 0 else poly


def convex_clip(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Intersection of two convex polygons (possibly empty, shape (n, 2)).

    Clips `subject` successively against each half-plane of `clip`
    (Sutherland-Hodgman); consecutive vertices closer than CLIP_EPS are
    merged.
    """
    out = _ensure_ccw(np.asarray(subject, dtype=np.float64))
    clip = _ensure_ccw(np.asarray(clip, dtype=np.float64))
    if len(out) < 3 or len(clip) < 3:
        return np.empty((0, 2), dtype=np.float64)

    for i in range(len(clip)):
        if len(out) == 0:
            break
        a = clip[i]
        b = clip[(i + 1) % len(clip)]
        ex, ey = b[0] - a[0], b[1] - a[1]
        # signed distance of each vertex to the (a, b) edge; >= 0 is inside
        side = ex * (out[:, 1] - a[1]) - ey * (out[:, 0] - a[0])
        kept: list[np.ndarray] = []
        n = len(out)
        for j in range(n):
            cur, nxt = out[j], out[(j + 1) % n]
            s_cur, s_nxt = side[j], side[(j + 1) % n]
            if s_cur >= -CLIP_EPS:
                kept.append(cur)
            if (s_cur > CLIP_EPS and s_nxt < -CLIP_EPS) or (s_cur < -CLIP_EPS and s_nxt > CLIP_EPS):
                t = s_cur / (s_cur - s_nxt)
                kept.append(cur + t * (nxt - cur))
        out = np.asarray(kept, dtype=np.float64).reshape(-1, 2)

    return _dedup_vertices(out)


def _dedup_vertices(poly: np.ndarray) -> np.ndarray:
    if len(poly) == 0:
        return poly
    kept = [poly[0]]
    for p in poly[1:]:
        if abs(p[0] - kept[-1][0]) > CLIP_EPS or abs(p[1] - kept[-1][1]) > CLIP_EPS:
            kept.append(p)
    if len(kept) > 1 and abs(kept[0][0] - kept[-1][0]) <= CLIP_EPS and abs(kept[0][1] - kept[-1][1]) <= CLIP_EPS:
        kept.pop()
    out = np.asarray(kept, dtype=np.float64).reshape(-1, 2)
    return out if len(out) >= 3 else np.empty((0, 2), dtype=np.float64)


# ── 3D corners and projection ──

# footprint corner offsets in units of (l/2, w/2); CCW in the (x, z) plane
_FOOTPRINT_SIGNS = ((1, 1), (-1, 1), (-1, -1), (1, -1))


def footprint(obj: Object3D) -> np.ndarray:
    """Yawed (x, z) rectangle of the box, shape (4, 2), CCW for dims > 0."""
    h, w, l = obj.dims
    x0, _, z0 = obj.location
    c, s = math.cos(obj.rotation_y), math.sin(obj.rotation_y)
    pts = np.empty((4, 2), dtype=np.float64)
    for i, (sx, sz) in enumerate(_FOOTPRINT_SIGNS):
        dx, dz = sx * l / 2.0, sz * w / 2.0
        # KITTI yaw about the (downward) y axis: R = [[c, s], [-s, c]] in (x, z)
        pts[i, 0] = x0 + c * dx + s * dz
        pts[i, 1] = z0 - s * dx + c * dz
    return pts


class Corners3D(NamedTuple):
    """8 cuboid corners plus center, camera frame.

    corners: (8, 3), bottom face at 0-3 (CCW viewed from above), top face
    at 4-7 vertically aligned; center is the box midpoint (location lifted
    by h/2, camera y pointing down).
    """

    corners: np.ndarray
    center: np.ndarray


def box3d_corners(obj: Object3D) -> Corners3D:
    """Corners of the cuboid at obj.location (bottom-face center), yawed by rotation_y."""
    h = obj.dims[0]
    y_bottom = obj.location[1]
    foot = footprint(obj)
    corners = np.empty((8, 3), dtype=np.float64)
    corners[0:4, 0] = foot[:, 0]
    corners[0:4, 2] = foot[:, 1]
    corners[0:4, 1] = y_bottom
    corners[4:8, 0] = foot[:, 0]
    corners[4:8, 2] = foot[:, 1]
    corners[4:8, 1] = y_bottom - h
    center = np.array(
        [obj.location[0], y_bottom - h / 2.0, obj.location[2]], dtype=np.float64
    )
    return Corners3D(corners=corners, center=center)


def project_points(points: np.ndarray, calib: Calibration) -> np.ndarray:
    """Project (n, 3) camera-frame points to (n, 2) pixel coordinates."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if np.any(pts[:, 2] <= 0):
        bad = int(np.argmax(pts[:, 2] <= 0))
        raise BehindCameraError(
            f"point {bad} has z = {pts[bad, 2]:.3f} <= 0; cannot project"
        )
    hom = np.hstack([pts, np.ones((len(pts), 1))])
    uvw = hom @ calib.p2.T
    return uvw[:, :2] / uvw[:, 2:3]


def project_keypoints(box: Corners3D, calib: Calibration) -> np.ndarray:
    """The 9 cuboid keypoints (8 corners + center) in image space, (9, 2)."""
    return project_points(np.vstack([box.corners, box.center[None, :]]), calib)


# ── IoU ──

def iou_2d(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    """Axis-aligned IoU of two (left, top, right, bottom) rectangles."""
    area_a = max(0.0, a[2] - a[0]) * max(0.0, a[3] - a[1])
    area_b = max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (area_a + area_b - inter)


def _footprint_area(obj: Object3D) -> float:
    # sentinel / non-positive dims are degenerate even though a double sign
    # flip (w < 0 and l < 0) would yield a positive-area polygon
    if obj.dims[1] <= 0.0 or obj.dims[2] <= 0.0:
        return 0.0
    return polygon_area(footprint(obj))


def bev_intersection_area(a: Object3D, b: Object3D) -> float:
    fa, fb = footprint(a), footprint(b)
    # canonical operand order: intersection is symmetric, but clip rounding
    # is not, and iou_*(a, b) must equal iou_*(b, a) exactly
    if tuple(fb.ravel()) < tuple(fa.ravel()):
        fa, fb = fb, fa
    return max(0.0, polygon_area(convex_clip(fa, fb)))


def iou_bev(a: Object3D, b: Object3D) -> float:
    """IoU of the yawed (x, z) footprints; 0 if either is degenerate."""
    area_a = _footprint_area(a)
    area_b = _footprint_area(b)
    if area_a < DEGENERATE_AREA or area_b < DEGENERATE_AREA:
        return 0.0
    inter = bev_intersection_area(a, b)
    union = area_a + area_b - inter
    return min(max(inter / union, 0.0), 1.0)


def _y_overlap(a: Object3D, b: Object3D) -> float:
    # camera y points down: a box spans [y - h, y]
    top = max(a.location[1] - a.dims[0], b.location[1] - b.dims[0])
    bottom = min(a.location[1], b.location[1])
    return max(0.0, bottom - top)


def iou_3d(a: Object3D, b: Object3D) -> float:
    """Volumetric IoU: BEV intersection area times vertical overlap."""
    vol_a = _footprint_area(a) * a.dims[0]
    vol_b = _footprint_area(b) * b.dims[0]
    if vol_a < DEGENERATE_AREA or vol_b < DEGENERATE_AREA:
        return 0.0
    inter = bev_intersection_area(a, b) * _y_overlap(a, b)
    union = vol_a + vol_b - inter
    return min(max(inter / union, 0.0), 1.0)
