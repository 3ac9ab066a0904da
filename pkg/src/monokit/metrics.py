"""Detection evaluation: matching, AP, mAP, and inverse-class-frequency
weighted (ICFW) mAP.

Matching follows KITTI devkit semantics: detections are taken in
descending score order and greedily consume their best-overlapping
unmatched ground-truth box of the same class; unmatched detections that
cover a DontCare region are dropped (neither TP nor FP).

AP uses interpolated precision sampled at fixed recall thresholds (R40 by
default, the official KITTI scheme since 2019; R11 selectable).  mAP is
the unweighted class mean; ICFW mAP weights each class AP by normalized
inverse class frequency, which emphasizes the rare classes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import (
    EmptyGroundTruthError,
    FrameSetMismatchError,
    MissingScoreError,
    ZeroFrequencyError,
)
from .geometry import iou_2d, iou_3d, iou_bev
from .kitti import DONT_CARE, EVAL_CLASSES, Object3D, parse_label_file

IOU_KINDS = ("2d", "bev", "3d")
INTERPOLATIONS = ("r11", "r40")

# difficulty regime -> (min 2D box height px, max occlusion, max truncation)
DIFFICULTY_BOUNDS = {
    "easy": (40.0, 0, 0.15),
    "moderate": (25.0, 1, 0.30),
    "hard": (25.0, 2, 0.50),
}


@dataclass
class EvalConfig:
    iou_kinds: tuple[str, ...] = IOU_KINDS
    iou_threshold: float = 0.5
    interpolation: str = "r40"
    classes: tuple[str, ...] = EVAL_CLASSES
    difficulty: str = "all"

    def __post_init__(self):
        if isinstance(self.iou_kinds, str):
            self.iou_kinds = (self.iou_kinds,)
        self.iou_kinds = tuple(k.lower() for k in self.iou_kinds)
        for kind in self.iou_kinds:
            if kind not in IOU_KINDS:
                raise ValueError(f"unknown iou kind {kind!r}; use one of {IOU_KINDS}")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        self.interpolation = self.interpolation.lower()
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        self.difficulty = self.difficulty.lower()
        if self.difficulty != "all" and self.difficulty not in DIFFICULTY_BOUNDS:
            raise ValueError(f"unknown difficulty {self.difficulty!r}")
        if not self.classes:
            raise ValueError("classes must be non-empty")
        self.classes = tuple(self.classes)


@dataclass
class APResult:
    cls: str
    ap: float
    pr_points: list[tuple[float, float]] = field(default_factory=list)
    n_gt: int = 0
    no_ground_truth: bool = False


@dataclass
class ClassWeights:
    freq: dict[str, float]
    weight: dict[str, float]


@dataclass
class EvalReport:
    config: EvalConfig
    per_class: dict[str, dict[str, APResult]]      # kind -> class -> APResult
    map_scores: dict[str, float]                   # kind -> mAP
    icfw_map_scores: dict[str, float | None]       # kind -> ICFW mAP (None if undefined)
    weights: ClassWeights | None
    gt_counts: dict[str, int]
    det_counts: dict[str, int]
    warnings: list[str] = field(default_factory=list)


def matches_difficulty(obj: Object3D, difficulty: str) -> bool:
    """KITTI difficulty gate on 2D box height, occlusion and truncation."""
    if difficulty == "all":
        return True
    min_h, max_occ, max_trunc = DIFFICULTY_BOUNDS[difficulty]
    return (
        obj.bbox_height() >= min_h
        and obj.occluded <= max_occ
        and obj.truncated <= max_trunc
    )


def _iou_fn(kind: str):
    if kind == "2d":
        return lambda det, gt: iou_2d(det.bbox2d, gt.bbox2d)
    if kind == "bev":
        return iou_bev
    if kind == "3d":
        return iou_3d
    raise ValueError(f"unknown iou kind {kind!r}")


def match_detections(
    gt: Sequence[Object3D],
    det: Sequence[Object3D],
    cfg: EvalConfig,
    cls: str,
    kind: str | None = None,
) -> list[tuple[int, bool]]:
    """Greedy per-frame matching for one class.

    Returns (index into det, is_tp) pairs, one per scored detection of
    `cls`, sorted by descending score (ties broken by input order).
    Detections that fail to match but overlap a DontCare box with 2D
    IoU above the threshold are dropped from the result entirely.
    """
    kind = (kind or cfg.iou_kinds[0]).lower()
    iou = _iou_fn(kind)

    cand = []
    for i, d in enumerate(det):
        if d.cls_type != cls:
            continue
        if d.score is None:
            raise MissingScoreError(f"detection {i} ({d.cls_type}) has no score")
        cand.append(i)
    cand.sort(key=lambda i: (-det[i].score, i))

    gt_pool = [g for g in gt if g.cls_type == cls and matches_difficulty(g, cfg.difficulty)]
    dont_care = [g for g in gt if g.cls_type == DONT_CARE]
    taken = [False] * len(gt_pool)

    results: list[tuple[int, bool]] = []
    for i in cand:
        d = det[i]
        best_j, best_iou = -1, 0.0
        for j, g in enumerate(gt_pool):
            if taken[j]:
                continue
            v = iou(d, g)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou > cfg.iou_threshold:
            taken[best_j] = True
            results.append((i, True))
        elif any(iou_2d(d.bbox2d, dc.bbox2d) > cfg.iou_threshold for dc in dont_care):
            continue
        else:
            results.append((i, False))
    return results


def _recall_thresholds(interpolation: str) -> list[float]:
    if interpolation == "r40":
        return [i / 40.0 for i in range(1, 41)]
    return [i / 10.0 for i in range(0, 11)]


def average_precision(
    ranked_hits: Sequence[bool],
    n_gt: int,
    interpolation: str = "r40",
    cls: str = "",
) -> APResult:
    """Interpolated AP over a score-ranked TP/FP sequence.

    AP is the mean, over the scheme's recall thresholds, of the maximum
    precision attained at recall >= threshold.  n_gt = 0 yields AP = 0
    with the no_ground_truth flag set.
    """
    if n_gt < 0:
        raise ValueError("n_gt must be >= 0")
    if n_gt == 0:
        return APResult(cls=cls, ap=0.0, pr_points=[], n_gt=0, no_ground_truth=True)

    pr_points: list[tuple[float, float]] = []
    tp = fp = 0
    for hit in ranked_hits:
        if hit:
            tp += 1
        else:
            fp += 1
        pr_points.append((tp / n_gt, tp / (tp + fp)))

    total = 0.0
    for r in _recall_thresholds(interpolation):
        p_max = max((p for rec, p in pr_points if rec >= r), default=0.0)
        total += p_max
    ap = total / len(_recall_thresholds(interpolation))
    return APResult(cls=cls, ap=ap, pr_points=pr_points, n_gt=n_gt)


def mean_average_precision(aps: Sequence[float]) -> float:
    """Unweighted class mean of AP values (exact-rational accumulation)."""
    if not aps:
        raise ValueError("cannot average an empty AP list")
    return float(sum(Fraction(a) for a in aps) / len(aps))


def class_frequencies(
    gt_frames: Iterable[Sequence[Object3D]],
    classes: Sequence[str] = EVAL_CLASSES,
) -> dict[str, float]:
    """Relative GT frequency per evaluation class over a set of frames.

    DontCare and non-evaluation classes are excluded from both numerator
    and denominator; absent classes get frequency 0.0.
    """
    counts = {c: 0 for c in classes}
    for objects in gt_frames:
        for obj in objects:
            if obj.cls_type in counts:
                counts[obj.cls_type] += 1
    total = sum(counts.values())
    if total == 0:
        raise EmptyGroundTruthError("no ground-truth objects of any evaluation class")
    return {c: counts[c] / total for c in classes}


def icfw_weights(freq: Mapping[str, float]) -> ClassWeights:
    """Normalized inverse-frequency weights: w_c = f_c^-1 / sum f_c^-1."""
    for c, f in freq.items():
        if f <= 0.0:
            raise ZeroFrequencyError(c)
    inv = {c: 1.0 / f for c, f in freq.items()}
    denom = sum(inv.values())
    return ClassWeights(freq=dict(freq), weight={c: v / denom for c, v in inv.items()})


def icfw_map(aps: Mapping[str, float], weights: ClassWeights) -> float:
    """Inverse-class-frequency weighted mAP: sum over classes of w_c * AP_c.

    Accumulated in exact rational arithmetic and normalized by the weight
    sum (== 1 by construction), so equal per-class APs reproduce the plain
    mAP bit-for-bit.
    """
    if set(aps.keys()) != set(weights.weight.keys()):
        raise ValueError(
            f"AP classes {sorted(aps)} do not match weight classes {sorted(weights.weight)}"
        )
    num = sum(Fraction(weights.weight[c]) * Fraction(aps[c]) for c in aps)
    den = sum(Fraction(weights.weight[c]) for c in aps)
    return float(num / den)


# ── directory-level evaluation ──

def _label_ids(directory: str) -> set[str]:
    return {
        name[:-4]
        for name in os.listdir(directory)
        if name.endswith(".txt")
    }


def _read_labels(directory: str, frame_id: str) -> list[Object3D]:
    with open(os.path.join(directory, frame_id + ".txt"), encoding="utf-8") as f:
        return parse_label_file(f.read())


def evaluate_frames(
    gt_by_frame: Mapping[str, Sequence[Object3D]],
    det_by_frame: Mapping[str, Sequence[Object3D]],
    cfg: EvalConfig,
) -> EvalReport:
    """Evaluate in-memory per-frame GT/detection maps (same key sets)."""
    frame_ids = sorted(gt_by_frame.keys())
    warnings: list[str] = []

    gt_counts = {c: 0 for c in cfg.classes}
    det_counts = {c: 0 for c in cfg.classes}
    for fid in frame_ids:
        for g in gt_by_frame[fid]:
            if g.cls_type in gt_counts and matches_difficulty(g, cfg.difficulty):
                gt_counts[g.cls_type] += 1
        for d in det_by_frame[fid]:
            if d.cls_type in det_counts:
                det_counts[d.cls_type] += 1

    per_class: dict[str, dict[str, APResult]] = {}
    map_scores: dict[str, float] = {}
    icfw_scores: dict[str, float | None] = {}

    for kind in cfg.iou_kinds:
        per_class[kind] = {}
        for cls in cfg.classes:
            # canonical global ranking: score desc, then frame order, then
            # in-frame detection index -- deterministic under any parallelism
            scored: list[tuple[float, int, int, bool]] = []
            for f_idx, fid in enumerate(frame_ids):
                matches = match_detections(
                    gt_by_frame[fid], det_by_frame[fid], cfg, cls, kind
                )
                for det_idx, is_tp in matches:
                    scored.append(
                        (det_by_frame[fid][det_idx].score, f_idx, det_idx, is_tp)
                    )
            scored.sort(key=lambda t: (-t[0], t[1], t[2]))
            result = average_precision(
                [t[3] for t in scored], gt_counts[cls], cfg.interpolation, cls=cls
            )
            if result.no_ground_truth:
                warnings.append(f"no {cfg.difficulty} ground truth for class {cls}; AP set to 0")
            per_class[kind][cls] = result
        map_scores[kind] = mean_average_precision(
            [per_class[kind][c].ap for c in cfg.classes]
        )

    try:
        freq = class_frequencies(gt_by_frame.values(), cfg.classes)
        weights = icfw_weights(freq)
    except (EmptyGroundTruthError, ZeroFrequencyError) as exc:
        weights = None
        warnings.append(f"ICFW mAP undefined: {exc}")

    for kind in cfg.iou_kinds:
        if weights is None:
            icfw_scores[kind] = None
        else:
            icfw_scores[kind] = icfw_map(
                {c: per_class[kind][c].ap for c in cfg.classes}, weights
            )

    # de-duplicate repeated warnings (same class flagged once per kind)
    seen: set[str] = set()
    warnings = [w for w in warnings if not (w in seen or seen.add(w))]

    return EvalReport(
        config=cfg,
        per_class=per_class,
        map_scores=map_scores,
        icfw_map_scores=icfw_scores,
        weights=weights,
        gt_counts=gt_counts,
        det_counts=det_counts,
        warnings=warnings,
    )


def evaluate(gt_dir: str, det_dir: str, cfg: EvalConfig | None = None) -> EvalReport:
    """Evaluate a detection directory against a ground-truth directory.

    Both directories hold KITTI label files keyed by frame id; the id sets
    must match exactly.
    """
    cfg = cfg or EvalConfig()
    gt_ids = _label_ids(gt_dir)
    det_ids = _label_ids(det_dir)
    if gt_ids != det_ids:
        raise FrameSetMismatchError(
            missing_det=sorted(gt_ids - det_ids),
            missing_gt=sorted(det_ids - gt_ids),
        )
    frame_ids = sorted(gt_ids)
    gt_by_frame = {fid: _read_labels(gt_dir, fid) for fid in frame_ids}
    det_by_frame = {fid: _read_labels(det_dir, fid) for fid in frame_ids}
    return evaluate_frames(gt_by_frame, det_by_frame, cfg)


# ── report serialization ──

def report_to_json(report: EvalReport) -> dict:
    """Fixed, versioned JSON schema for an EvalReport."""
    return {
        "schema_version": 1,
        "iou_threshold": report.config.iou_threshold,
        "interpolation": report.config.interpolation,
        "difficulty": report.config.difficulty,
        "classes": list(report.config.classes),
        "per_class_ap": {
            kind: {cls: res.ap for cls, res in by_cls.items()}
            for kind, by_cls in report.per_class.items()
        },
        "map": dict(report.map_scores),
        "icfw_map": dict(report.icfw_map_scores),
        "freq": None if report.weights is None else dict(report.weights.freq),
        "weights": None if report.weights is None else dict(report.weights.weight),
        "counts": {"gt": dict(report.gt_counts), "det": dict(report.det_counts)},
        "warnings": list(report.warnings),
    }


def _pct(value: float | None) -> str:
    return "   n/a" if value is None else f"{100.0 * value:6.2f}"


def format_table(report: EvalReport) -> str:
    """Plain-text table with one mAP / ICFW-mAP column pair per IoU kind."""
    kinds = list(report.per_class.keys())
    lines = []
    lines.append(
        f"IoU={report.config.iou_threshold:g}  interp={report.config.interpolation}"
        f"  difficulty={report.config.difficulty}  (values in %)"
    )
    header = f"{'':<14}" + "".join(f"  AP_{k.upper():<5}" for k in kinds)
    lines.append(header)
    for cls in report.config.classes:
        row = f"{cls:<14}"
        for kind in kinds:
            row += f"  {_pct(report.per_class[kind][cls].ap):>8}"
        lines.append(row)
    lines.append("-" * len(header))
    map_row = f"{'mAP':<14}"
    icfw_row = f"{'ICFW mAP':<14}"
    for kind in kinds:
        map_row += f"  {_pct(report.map_scores[kind]):>8}"
        icfw_row += f"  {_pct(report.icfw_map_scores[kind]):>8}"
    lines.append(map_row)
    lines.append(icfw_row)
    if report.weights is not None:
        freq = "  ".join(f"{c}={report.weights.freq[c]:.4f}" for c in report.config.classes)
        wts = "  ".join(f"{c}={report.weights.weight[c]:.4f}" for c in report.config.classes)
        lines.append(f"class freq:    {freq}")
        lines.append(f"icfw weights:  {wts}")
    for w in report.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"
