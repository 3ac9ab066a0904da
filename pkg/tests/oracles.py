"""Independent oracles used by the test suite.

Everything here avoids the library's own clipping/area code paths:
membership tests are plain cross-product sign checks, areas come from
stratified (jittered-grid) Monte-Carlo sampling or per-pixel
rasterization, and 3D volumes from voxel-grid counting.
"""

from __future__ import annotations

import numpy as np

from monokit import Object3D, footprint


def inside_convex(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Boolean mask: which points lie inside a CCW convex polygon."""
    ok = np.ones(len(points), dtype=bool)
    k = len(poly)
    for i in range(k):
        a, b = poly[i], poly[(i + 1) % k]
        cross = (b[0] - a[0]) * (points[:, 1] - a[1]) - (b[1] - a[1]) * (points[:, 0] - a[0])
        ok &= cross >= 0
    return ok


def ccw(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    area = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    return poly[::-1].copy() if area < 0 else poly


def shoelace(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return abs(0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def random_convex_polygon(rng: np.random.Generator, max_vertices: int = 8) -> np.ndarray:
    """Random convex polygon: vertices on a circle at sorted angles."""
    k = int(rng.integers(3, max_vertices + 1))
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=k))
    radius = rng.uniform(0.3, 2.0)
    center = rng.uniform(-1.0, 1.0, size=2)
    return np.stack(
        [center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)],
        axis=1,
    )


def _jittered_grid(lo: np.ndarray, hi: np.ndarray, n: int,
                   rng: np.random.Generator) -> np.ndarray:
    """n x n stratified sample points covering the [lo, hi] box."""
    span = hi - lo
    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    px = lo[0] + (ix.ravel() + rng.random(n * n)) * span[0] / n
    py = lo[1] + (iy.ravel() + rng.random(n * n)) * span[1] / n
    return np.stack([px, py], axis=1)


def sampled_intersection_area(a: np.ndarray, b: np.ndarray, n: int,
                              rng: np.random.Generator) -> tuple[float, float]:
    """(area estimate, nominal 1-sigma binomial sampling error).

    Stratified sampling over the intersection of the two polygons' AABBs;
    the reported sigma is the plain-MC binomial bound, which the jittered
    grid beats comfortably.
    """
    a, b = ccw(np.asarray(a, float)), ccw(np.asarray(b, float))
    lo = np.maximum(a.min(axis=0), b.min(axis=0))
    hi = np.minimum(a.max(axis=0), b.max(axis=0))
    if np.any(hi <= lo):
        return 0.0, 0.0
    pts = _jittered_grid(lo, hi, n, rng)
    both = inside_convex(pts, a) & inside_convex(pts, b)
    domain = float(np.prod(hi - lo))
    p = both.mean()
    sigma = domain * float(np.sqrt(max(p * (1 - p), 1e-12) / len(pts)))
    return p * domain, sigma


def sampled_iou_bev(a: Object3D, b: Object3D, n: int, rng: np.random.Generator) -> float:
    fa, fb = footprint(a), footprint(b)
    area_a = shoelace(fa)
    area_b = shoelace(fb)
    inter, _ = sampled_intersection_area(fa, fb, n, rng)
    return inter / (area_a + area_b - inter)


def sampled_iou_3d(a: Object3D, b: Object3D, n: int, rng: np.random.Generator) -> float:
    """Prism-factorized 3D IoU: sampled BEV intersection x exact y overlap.

    Yaw-only boxes are prisms along y, so the factorization is exact; only
    the footprint intersection is estimated.
    """
    fa, fb = footprint(a), footprint(b)
    area_a, area_b = shoelace(fa), shoelace(fb)
    vol_a = area_a * a.dims[0]
    vol_b = area_b * b.dims[0]
    y_top = max(a.location[1] - a.dims[0], b.location[1] - b.dims[0])
    y_bot = min(a.location[1], b.location[1])
    overlap = max(0.0, y_bot - y_top)
    inter_bev, _ = sampled_intersection_area(fa, fb, n, rng)
    inter = inter_bev * overlap
    return inter / (vol_a + vol_b - inter)


def voxel_iou_3d(a: Object3D, b: Object3D, n: int, rng: np.random.Generator) -> float:
    """Direct 3D IoU from a jittered n^3 voxel grid over the union AABB."""
    fa, fb = footprint(a), footprint(b)
    ya0, ya1 = a.location[1] - a.dims[0], a.location[1]
    yb0, yb1 = b.location[1] - b.dims[0], b.location[1]
    lo = np.array([min(fa[:, 0].min(), fb[:, 0].min()), min(ya0, yb0),
                   min(fa[:, 1].min(), fb[:, 1].min())])
    hi = np.array([max(fa[:, 0].max(), fb[:, 0].max()), max(ya1, yb1),
                   max(fa[:, 1].max(), fb[:, 1].max())])
    span = hi - lo
    g = np.arange(n)
    ix, iy, iz = np.meshgrid(g, g, g, indexing="ij")
    px = lo[0] + (ix.ravel() + rng.random(n ** 3)) * span[0] / n
    py = lo[1] + (iy.ravel() + rng.random(n ** 3)) * span[1] / n
    pz = lo[2] + (iz.ravel() + rng.random(n ** 3)) * span[2] / n
    pts_xz = np.stack([px, pz], axis=1)
    in_a = inside_convex(pts_xz, ccw(fa)) & (py >= ya0) & (py <= ya1)
    in_b = inside_convex(pts_xz, ccw(fb)) & (py >= yb0) & (py <= yb1)
    n_a, n_b, n_both = int(in_a.sum()), int(in_b.sum()), int((in_a & in_b).sum())
    denom = n_a + n_b - n_both
    return n_both / denom if denom else 0.0


def rasterized_proportions(
    rect: tuple[int, int, int, int],
    objects,
    classes,
) -> list[float]:
    """Per-class coverage of a window by filling a 1-px canvas per class.

    Exact for integer-aligned boxes; the trailing background component is
    NOT appended (only the class-area ratios are independent facts).
    """
    l, t, r, b = rect
    w, h = r - l, b - t
    out = []
    for cls in classes:
        canvas = np.zeros((h, w), dtype=bool)
        for obj in objects:
            if obj.cls_type != cls:
                continue
            bl, bt, br, bb = obj.bbox2d
            x0 = max(int(np.ceil(bl)), l) - l
            y0 = max(int(np.ceil(bt)), t) - t
            x1 = min(int(np.floor(br)), r) - l
            y1 = min(int(np.floor(bb)), b) - t
            if x1 > x0 and y1 > y0:
                canvas[y0:y1, x0:x1] = True
        out.append(float(canvas.sum()) / float(w * h))
    return out
