"""Exception types raised by monokit.

Everything derives from :class:`MonokitError` so callers can catch the
whole family; CLI maps these to exit code 2 (bad input).
"""


class MonokitError(Exception):
    """Base class for all monokit errors."""


class LabelFormatError(MonokitError, ValueError):
    """A KITTI label line or file is malformed."""


class FieldCountError(LabelFormatError):
    """Label line does not have 15 or 16 fields."""

    def __init__(self, count: int, line_no: int | None = None):
        self.count = count
        self.line_no = line_no
        where = f" at line {line_no}" if line_no is not None else ""
        super().__init__(f"expected 15 or 16 fields, got {count}{where}")


class FieldParseError(LabelFormatError):
    """A numeric label field failed to parse."""

    def __init__(self, field: str, value: str, line_no: int | None = None):
        self.field = field
        self.value = value
        self.line_no = line_no
        where = f" at line {line_no}" if line_no is not None else ""
        super().__init__(f"field '{field}' is not numeric: {value!r}{where}")


class CalibFormatError(MonokitError, ValueError):
    """Calibration file is malformed."""


class MissingP2Error(CalibFormatError):
    """Calibration file has no P2 line."""

    def __init__(self):
        super().__init__("calibration text contains no 'P2:' line")


class DuplicateFrameError(MonokitError, ValueError):
    """Split file lists a frame id more than once."""

    def __init__(self, frame_id: str, line_no: int):
        self.frame_id = frame_id
        self.line_no = line_no
        super().__init__(f"duplicate frame id {frame_id!r} at line {line_no}")


class BehindCameraError(MonokitError, ValueError):
    """A 3D point with z <= 0 cannot be projected."""


class MissingScoreError(MonokitError, ValueError):
    """A detection record has no confidence score."""


class EmptyGroundTruthError(MonokitError, ValueError):
    """No ground-truth objects of any evaluation class were found."""


class ZeroFrequencyError(MonokitError, ValueError):
    """A class frequency of zero cannot be inverse-weighted."""

    def __init__(self, cls: str):
        self.cls = cls
        super().__init__(f"class {cls!r} has zero frequency; ICFW weights undefined")


class FrameSetMismatchError(MonokitError, ValueError):
    """Ground-truth and detection directories cover different frame ids."""

    def __init__(self, missing_det: list[str], missing_gt: list[str]):
        self.missing_det = missing_det
        self.missing_gt = missing_gt
        parts = []
        if missing_det:
            parts.append(f"missing from detections: {', '.join(missing_det)}")
        if missing_gt:
            parts.append(f"missing from ground truth: {', '.join(missing_gt)}")
        super().__init__("frame id mismatch: " + "; ".join(parts))


class DimensionMismatchError(MonokitError, ValueError):
    """Two frames that must share image dimensions do not."""


class EmptyPipelineError(MonokitError, ValueError):
    """An augmentation pipeline must contain at least one stage."""


class EmptyPartnerPoolError(MonokitError, ValueError):
    """No partner frame is available for a pairing augmentation."""


class MissingFramesError(MonokitError, ValueError):
    """Split references frame ids that the dataset root cannot resolve."""

    def __init__(self, frame_ids: list[str]):
        self.frame_ids = frame_ids
        shown = ", ".join(frame_ids[:20])
        more = "" if len(frame_ids) <= 20 else f" (+{len(frame_ids) - 20} more)"
        super().__init__(f"unresolvable frame ids: {shown}{more}")
