"""monokit: KITTI monocular-3D detection tooling.

Label/calibration parsing, 3D box geometry and rotated IoU, mAP and
inverse-class-frequency-weighted mAP evaluation, multi-object-labeling
pretext targets, and box-level data augmentation, with a reproducible
batch CLI on top.
"""

__version__ = "0.1.0"

from .augment import (
    AugmentConfig,
    PartnerPool,
    box_cut_paste,
    box_mixup,
    boxes_mask,
    compose,
    cutout,
)
from .geometry import (
    Corners3D,
    box3d_corners,
    convex_clip,
    footprint,
    iou_2d,
    iou_3d,
    iou_bev,
    polygon_area,
    project_keypoints,
)
from .kitti import (
    DONT_CARE,
    EVAL_CLASSES,
    Calibration,
    FrameSample,
    KittiRoot,
    Object3D,
    load_split,
    parse_calib,
    parse_label_file,
    parse_label_line,
    serialize_label_file,
    serialize_object,
)
from .metrics import (
    APResult,
    ClassWeights,
    EvalConfig,
    EvalReport,
    average_precision,
    class_frequencies,
    evaluate,
    evaluate_frames,
    icfw_map,
    icfw_weights,
    match_detections,
    mean_average_precision,
)
from .mol import (
    MOLConfig,
    RandomWindow,
    SoftLabel,
    mol_records,
    rect_union_area,
    sample_windows,
    soft_label,
)

__all__ = [
    "__version__",
    "AugmentConfig", "PartnerPool", "box_cut_paste", "box_mixup", "boxes_mask",
    "compose", "cutout",
    "Corners3D", "box3d_corners", "convex_clip", "footprint", "iou_2d",
    "iou_3d", "iou_bev", "polygon_area", "project_keypoints",
    "DONT_CARE", "EVAL_CLASSES", "Calibration", "FrameSample", "KittiRoot",
    "Object3D", "load_split", "parse_calib", "parse_label_file",
    "parse_label_line", "serialize_label_file", "serialize_object",
    "APResult", "ClassWeights", "EvalConfig", "EvalReport",
    "average_precision", "class_frequencies", "evaluate", "evaluate_frames",
    "icfw_map", "icfw_weights", "match_detections", "mean_average_precision",
    "MOLConfig", "RandomWindow", "SoftLabel", "mol_records",
    "rect_union_area", "sample_windows", "soft_label",
]
