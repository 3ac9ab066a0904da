"""Matplotlib figure output for reports and box overlays.

matplotlib is imported lazily (Agg backend) so the data-path commands
(mol, augment) never pay for it.
"""

from __future__ import annotations

import numpy as np

from .errors import BehindCameraError
from .geometry import box3d_corners, footprint, project_keypoints
from .kitti import FrameSample, Object3D
from .metrics import EvalReport

# cuboid wireframe: bottom ring, top ring, vertical pillars
_BOX_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)

_CLASS_COLORS = {
    "Car": "#2ca02c",
    "Pedestrian": "#d62728",
    "Cyclist": "#1f77b4",
}


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_pr_curves(report: EvalReport, kind: str, path: str) -> None:
    """One PR-curve panel per IoU kind, all classes overlaid."""
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for cls in report.config.classes:
        res = report.per_class[kind][cls]
        color = _CLASS_COLORS.get(cls)
        if res.pr_points:
            recalls = [r for r, _ in res.pr_points]
            precisions = [p for _, p in res.pr_points]
        else:
            recalls, precisions = [0.0], [0.0]
        ax.plot(recalls, precisions, label=f"{cls} (AP {100 * res.ap:.2f}%)",
                color=color, drawstyle="steps-post")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title(
        f"PR ({kind.upper()}, IoU>{report.config.iou_threshold:g}, "
        f"{report.config.interpolation})"
    )
    ax.grid(alpha=0.3)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_class_stats(freq: dict[str, float], weight: dict[str, float], path: str) -> None:
    """Side-by-side bars of class frequency and ICFW weight."""
    plt = _mpl()
    classes = list(freq.keys())
    x = np.arange(len(classes))
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.bar(x - 0.2, [freq[c] for c in classes], width=0.4, label="frequency $f_c$")
    ax.bar(x + 0.2, [weight[c] for c in classes], width=0.4, label="ICFW weight $w_c$")
    ax.set_xticks(x, classes)
    ax.set_ylim(0, 1)
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_overlay(
    sample: FrameSample,
    objects: list[Object3D],
    path: str,
) -> tuple[int, int]:
    """Image with projected cuboid wireframes plus a BEV side panel.

    Returns (n_drawn, n_skipped); boxes behind the camera are skipped.
    """
    plt = _mpl()
    height, width = sample.image_hw
    fig, (ax_img, ax_bev) = plt.subplots(
        1, 2, figsize=(11.0, 4.0), width_ratios=[3.0, 1.0]
    )
    ax_img.imshow(sample.image)
    ax_img.set_xlim(0, width)
    ax_img.set_ylim(height, 0)
    ax_img.set_axis_off()

    drawn = skipped = 0
    for obj in objects:
        color = _CLASS_COLORS.get(obj.cls_type, "#999999")
        box = box3d_corners(obj)
        try:
            pts = project_keypoints(box, sample.calib)
        except BehindCameraError:
            skipped += 1
            continue
        for i, j in _BOX_EDGES:
            ax_img.plot([pts[i, 0], pts[j, 0]], [pts[i, 1], pts[j, 1]],
                        color=color, linewidth=1.0)
        ax_img.plot(pts[8, 0], pts[8, 1], marker="o", color=color, markersize=2.5)

        foot = footprint(obj)
        ring = np.vstack([foot, foot[:1]])
        ax_bev.plot(ring[:, 0], ring[:, 1], color=color, linewidth=1.0)
        drawn += 1

    ax_bev.set_xlabel("x [m]")
    ax_bev.set_ylabel("z [m]")
    ax_bev.set_aspect("equal")
    ax_bev.grid(alpha=0.3)
    ax_bev.set_title("BEV")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return drawn, skipped
