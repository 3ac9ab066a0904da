import os
from fractions import Fraction

import numpy as np
import pytest

from monokit import (
    EvalConfig,
    average_precision,
    class_frequencies,
    evaluate,
    evaluate_frames,
    icfw_map,
    icfw_weights,
    match_detections,
    mean_average_precision,
    serialize_label_file,
)
from monokit.errors import (
    EmptyGroundTruthError,
    FrameSetMismatchError,
    MissingScoreError,
    ZeroFrequencyError,
)
from monokit.metrics import format_table, matches_difficulty, report_to_json
from conftest import make_object


def det(cls="Car", score=0.9, **kw):
    return make_object(cls_type=cls, score=score, **kw)


class TestMatching:
    def test_single_tp(self):
        gt = [make_object()]
        d = [det()]
        assert match_detections(gt, d, EvalConfig(), "Car") == [(0, True)]

    def test_gt_consumed_once(self):
        gt = [make_object()]
        d = [det(score=0.9), det(score=0.8)]
        assert match_detections(gt, d, EvalConfig(), "Car") == [(0, True), (1, False)]

    def test_dontcare_drops_detection(self):
        gt = [make_object(cls_type="DontCare", bbox2d=(10, 10, 30, 30))]
        d = [det(bbox2d=(10, 10, 30, 30))]
        assert match_detections(gt, d, EvalConfig(), "Car") == []

    def test_tp_wins_over_dontcare(self):
        gt = [make_object(), make_object(cls_type="DontCare", bbox2d=(10, 10, 30, 30))]
        d = [det()]
        assert match_detections(gt, d, EvalConfig(), "Car") == [(0, True)]

    def test_missing_score_rejected(self):
        with pytest.raises(MissingScoreError):
            match_detections([make_object()], [make_object()], EvalConfig(), "Car")

    def test_other_class_ignored(self):
        gt = [make_object(cls_type="Van")]
        d = [det(cls="Van", score=0.9)]
        assert match_detections(gt, d, EvalConfig(), "Car") == []

    def test_score_order_with_stable_ties(self):
        gt = [make_object(bbox2d=(0, 0, 10, 10), location=(0, 1, 5)),
              make_object(bbox2d=(40, 0, 50, 10), location=(8, 1, 5))]
        d = [det(bbox2d=(40, 0, 50, 10), location=(8, 1, 5), score=0.5),
             det(bbox2d=(0, 0, 10, 10), location=(0, 1, 5), score=0.5)]
        # equal scores: input order breaks the tie
        assert match_detections(gt, d, EvalConfig(), "Car") == [(0, True), (1, True)]

    def test_difficulty_filter_removes_gt(self):
        hard_gt = make_object(bbox2d=(0, 0, 10, 20), occluded=2)  # 20 px high
        cfg = EvalConfig(difficulty="easy")
        d = [det(bbox2d=(0, 0, 10, 20), occluded=0)]
        # GT filtered out -> detection is a plain FP
        assert match_detections([hard_gt], d, cfg, "Car") == [(0, False)]


class TestDifficulty:
    @pytest.mark.parametrize("difficulty,height,occ,trunc,expected", [
        ("easy", 45, 0, 0.10, True),
        ("easy", 39, 0, 0.10, False),
        ("easy", 45, 1, 0.10, False),
        ("easy", 45, 0, 0.20, False),
        ("moderate", 30, 1, 0.25, True),
        ("moderate", 24, 1, 0.25, False),
        ("hard", 30, 2, 0.45, True),
        ("hard", 30, 3, 0.45, False),
        ("all", 5, 3, 0.99, True),
    ])
    def test_bounds(self, difficulty, height, occ, trunc, expected):
        obj = make_object(bbox2d=(0, 0, 10, height), occluded=occ, truncated=trunc)
        assert matches_difficulty(obj, difficulty) is expected


class TestAveragePrecision:
    def test_single_tp_is_one(self):
        assert average_precision([True], 1).ap == 1.0

    def test_no_detections(self):
        assert average_precision([], 3).ap == 0.0

    def test_no_ground_truth_flag(self):
        res = average_precision([False], 0)
        assert res.ap == 0.0
        assert res.no_ground_truth

    def test_r40_fixture(self):
        # 2 GT, ranked [TP, FP, TP]: p_interp = 1 for r <= 1/2, 2/3 above
        # -> AP = (20*1 + 20*(2/3)) / 40 = 5/6
        res = average_precision([True, False, True], 2, "r40")
        assert res.ap == pytest.approx(5 / 6, abs=1e-6)

    def test_r11_fixture(self):
        # thresholds {0, .1, ..., 1}: six get precision 1, five get 2/3
        res = average_precision([True, False, True], 2, "r11")
        assert res.ap == pytest.approx(28 / 33, abs=1e-12)

    def test_recalls_nondecreasing(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            hits = list(rng.random(20) < 0.5)
            res = average_precision(hits, 25)
            recalls = [r for r, _ in res.pr_points]
            assert recalls == sorted(recalls)
            assert all(0 <= r <= 1 and 0 <= p <= 1 for r, p in res.pr_points)
            assert 0.0 <= res.ap <= 1.0

    def test_prepended_tp_never_decreases_ap(self):
        rng = np.random.default_rng(22)
        for _ in range(300):
            hits = list(rng.random(int(rng.integers(1, 15))) < 0.4)
            n_gt = int(sum(hits)) + int(rng.integers(1, 5))
            for interp in ("r11", "r40"):
                base = average_precision(hits, n_gt, interp).ap
                better = average_precision([True] + hits, n_gt, interp).ap
                assert better >= base - 1e-15


class TestMapAndWeights:
    def test_map_mean(self):
        assert mean_average_precision([0.10, 0.20, 0.30]) == pytest.approx(0.2, abs=1e-15)

    def test_map_of_equal(self):
        assert mean_average_precision([0.37, 0.37, 0.37]) == 0.37

    def test_map_baseline_scale_anchor(self):
        # three APs averaging to 19.12% keep that mean under Eq. (3)
        aps = [0.1912 + d for d in (-0.05, 0.0, 0.05)]
        assert mean_average_precision(aps) == pytest.approx(0.1912, abs=1e-12)

    def test_map_empty_errors(self):
        with pytest.raises(ValueError):
            mean_average_precision([])

    def test_frequencies(self):
        frames = [[make_object()] * 82, [make_object(cls_type="Pedestrian")] * 12,
                  [make_object(cls_type="Cyclist")] * 5,
                  [make_object(cls_type="DontCare"), make_object(cls_type="Van")]]
        freq = class_frequencies(frames)
        assert freq["Car"] == pytest.approx(82 / 99)
        assert freq["Pedestrian"] == pytest.approx(12 / 99)
        assert freq["Cyclist"] == pytest.approx(5 / 99)

    def test_frequencies_empty(self):
        with pytest.raises(EmptyGroundTruthError):
            class_frequencies([[make_object(cls_type="DontCare")]])

    def test_weights_paper_values(self):
        w = icfw_weights({"Car": 0.82, "Pedestrian": 0.12, "Cyclist": 0.05}).weight
        assert w["Car"] == pytest.approx(0.04, abs=0.02)
        assert w["Pedestrian"] == pytest.approx(0.27, abs=0.02)
        assert w["Cyclist"] == pytest.approx(0.69, abs=0.02)
        assert sum(w.values()) == pytest.approx(1.0, abs=1e-9)

    def test_weights_uniform(self):
        w = icfw_weights({"a": 1 / 3, "b": 1 / 3, "c": 1 / 3}).weight
        assert all(v == pytest.approx(1 / 3, abs=1e-15) for v in w.values())

    def test_weights_two_class(self):
        w = icfw_weights({"a": 0.5, "b": 0.5}).weight
        assert w == {"a": 0.5, "b": 0.5}

    def test_weights_zero_frequency(self):
        with pytest.raises(ZeroFrequencyError) as err:
            icfw_weights({"Car": 1.0, "Cyclist": 0.0})
        assert err.value.cls == "Cyclist"

    def test_weight_scale_invariance_power_of_two_exact(self):
        rng = np.random.default_rng(30)
        f = {c: float(v) for c, v in zip("abc", rng.uniform(0.01, 1, 3))}
        for j in (-3, 1, 7):
            scaled = {c: v * 2.0 ** j for c, v in f.items()}
            assert icfw_weights(scaled).weight == icfw_weights(f).weight

    def test_icfw_map_dot_products(self):
        w = icfw_weights({"Car": 0.82, "Pedestrian": 0.12, "Cyclist": 0.05})
        only_car = icfw_map({"Car": 1.0, "Pedestrian": 0.0, "Cyclist": 0.0}, w)
        only_cyc = icfw_map({"Car": 0.0, "Pedestrian": 0.0, "Cyclist": 1.0}, w)
        # independent check: straight dot product with the computed weights
        assert only_car == pytest.approx(w.weight["Car"], abs=1e-15)
        assert only_cyc == pytest.approx(w.weight["Cyclist"], abs=1e-15)
        assert 100 * only_car == pytest.approx(4.1, abs=2.0 * 0.1)
        assert 100 * only_cyc == pytest.approx(67.7, abs=2.0 * 0.1)

    def test_icfw_equals_map_for_equal_aps(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            f = {c: float(v) for c, v in zip("abc", rng.uniform(0.01, 1, 3))}
            a = float(rng.random())
            w = icfw_weights(f)
            aps = {c: a for c in f}
            assert icfw_map(aps, w) == mean_average_precision(list(aps.values())) == a

    def test_icfw_key_mismatch(self):
        w = icfw_weights({"Car": 0.5, "Cyclist": 0.5})
        with pytest.raises(ValueError):
            icfw_map({"Car": 1.0}, w)


# ── 5-frame synthetic fixture with hand-enumerated PR layout ──
#
# Car:       GT A,B,C.  Dets: 0.9 TP, 0.8 FP, 0.95 dropped (DontCare), 0.6 TP
#            hits [T,F,T], n=3 -> AP = (13 + 13*(2/3))/40 = 13/24
# Pedestrian: 2 GT, both found -> AP = 1
# Cyclist:   2 GT, dets 0.99 TP + 0.98 FP -> AP = 20/40 = 1/2
# mAP = (13/24 + 1 + 1/2)/3 = 49/72
# freq = (3/7, 2/7, 2/7) -> w = (1/4, 3/8, 3/8) -> ICFW = 67/96

def _far(i):
    return {"bbox2d": (400 + 12 * i, 0, 410 + 12 * i, 10),
            "location": (60 + 10 * i, 1.5, 60)}


def fixture_frames():
    car_a = make_object(bbox2d=(0, 0, 20, 20), location=(0, 1.5, 10))
    car_b = make_object(bbox2d=(30, 0, 50, 20), location=(6, 1.5, 10))
    car_c = make_object(bbox2d=(60, 0, 80, 20), location=(12, 1.5, 10))
    ped_1 = make_object(cls_type="Pedestrian", bbox2d=(100, 0, 110, 25),
                        location=(-6, 1.5, 10), dims=(1.8, 0.6, 0.7))
    ped_2 = make_object(cls_type="Pedestrian", bbox2d=(120, 0, 130, 25),
                        location=(-12, 1.5, 10), dims=(1.8, 0.6, 0.7))
    cyc_1 = make_object(cls_type="Cyclist", bbox2d=(140, 0, 150, 25),
                        location=(-18, 1.5, 10), dims=(1.8, 0.6, 1.8))
    cyc_2 = make_object(cls_type="Cyclist", bbox2d=(160, 0, 170, 25),
                        location=(-24, 1.5, 10), dims=(1.8, 0.6, 1.8))
    dont = make_object(cls_type="DontCare", bbox2d=(200, 0, 240, 30),
                       dims=(-1, -1, -1), location=(-1000, -1000, -1000))

    def as_det(obj, score):
        return make_object(cls_type=obj.cls_type, bbox2d=obj.bbox2d,
                           dims=obj.dims, location=obj.location,
                           rotation_y=obj.rotation_y, score=score)

    gt = {
        "f0": [car_a],
        "f1": [car_b, ped_1],
        "f2": [car_c, dont],
        "f3": [cyc_1],
        "f4": [ped_2, cyc_2],
    }
    dets = {
        "f0": [as_det(car_a, 0.9)],
        "f1": [det(score=0.8, **_far(1)), as_det(ped_1, 0.7)],
        "f2": [det(score=0.95, bbox2d=(200, 0, 240, 30), location=(60, 1.5, 80)),
               as_det(car_c, 0.6)],
        "f3": [],
        "f4": [as_det(ped_2, 0.5), as_det(cyc_2, 0.99),
               det(cls="Cyclist", score=0.98, **_far(2))],
    }
    return gt, dets


EXPECTED_AP = {"Car": Fraction(13, 24), "Pedestrian": Fraction(1), "Cyclist": Fraction(1, 2)}
EXPECTED_MAP = Fraction(49, 72)
EXPECTED_ICFW = Fraction(67, 96)


class TestEvaluate:
    def test_fixture_matches_hand_computation(self):
        gt, dets = fixture_frames()
        report = evaluate_frames(gt, dets, EvalConfig())
        for kind in ("2d", "bev", "3d"):
            for cls, expected in EXPECTED_AP.items():
                assert report.per_class[kind][cls].ap == pytest.approx(float(expected), abs=1e-12)
            assert report.map_scores[kind] == pytest.approx(float(EXPECTED_MAP), abs=1e-12)
            assert report.icfw_map_scores[kind] == pytest.approx(float(EXPECTED_ICFW), abs=1e-12)
        assert report.weights.weight == pytest.approx(
            {"Car": 0.25, "Pedestrian": 0.375, "Cyclist": 0.375})
        assert report.gt_counts == {"Car": 3, "Pedestrian": 2, "Cyclist": 2}

    def test_perfect_detector(self):
        gt, _ = fixture_frames()
        dets = {
            fid: [make_object(cls_type=o.cls_type, bbox2d=o.bbox2d, dims=o.dims,
                              location=o.location, rotation_y=o.rotation_y, score=1.0)
                  for o in objs if o.cls_type != "DontCare"]
            for fid, objs in gt.items()
        }
        report = evaluate_frames(gt, dets, EvalConfig())
        for kind in ("2d", "bev", "3d"):
            assert all(r.ap == 1.0 for r in report.per_class[kind].values())
            assert report.map_scores[kind] == 1.0
            assert report.icfw_map_scores[kind] == 1.0

    def test_empty_detections(self):
        gt, _ = fixture_frames()
        dets = {fid: [] for fid in gt}
        report = evaluate_frames(gt, dets, EvalConfig())
        assert all(r.ap == 0.0 for r in report.per_class["2d"].values())

    def test_frame_permutation_invariance(self):
        gt, dets = fixture_frames()
        renamed_gt = {f"z{k}": v for k, v in reversed(list(gt.items()))}
        renamed_det = {f"z{k}": v for k, v in reversed(list(dets.items()))}
        a = evaluate_frames(gt, dets, EvalConfig())
        b = evaluate_frames(renamed_gt, renamed_det, EvalConfig())
        assert a.map_scores == b.map_scores
        assert a.icfw_map_scores == b.icfw_map_scores

    def test_detection_line_order_invariance(self):
        gt, dets = fixture_frames()
        shuffled = {fid: list(reversed(objs)) for fid, objs in dets.items()}
        a = evaluate_frames(gt, dets, EvalConfig())
        b = evaluate_frames(gt, shuffled, EvalConfig())
        assert a.map_scores == b.map_scores

    def test_directory_evaluate_and_mismatch(self, tmp_path):
        gt, dets = fixture_frames()
        gt_dir, det_dir = tmp_path / "gt", tmp_path / "det"
        os.makedirs(gt_dir)
        os.makedirs(det_dir)
        for fid, objs in gt.items():
            (gt_dir / f"{fid}.txt").write_text(serialize_label_file(objs))
        for fid, objs in dets.items():
            (det_dir / f"{fid}.txt").write_text(serialize_label_file(objs))
        report = evaluate(str(gt_dir), str(det_dir), EvalConfig(iou_kinds=("2d",)))
        # serialization rounds to 2 decimals; fixture coordinates are exact
        assert report.map_scores["2d"] == pytest.approx(float(EXPECTED_MAP), abs=1e-12)

        (det_dir / "f4.txt").unlink()
        with pytest.raises(FrameSetMismatchError) as err:
            evaluate(str(gt_dir), str(det_dir))
        assert err.value.missing_det == ["f4"]

    def test_report_json_field_names(self):
        gt, dets = fixture_frames()
        payload = report_to_json(evaluate_frames(gt, dets, EvalConfig()))
        for key in ("per_class_ap", "map", "icfw_map", "freq", "weights"):
            assert key in payload
        assert payload["map"]["3d"] == pytest.approx(float(EXPECTED_MAP))
        assert set(payload["per_class_ap"]["bev"]) == {"Car", "Pedestrian", "Cyclist"}

    def test_format_table_percent(self):
        gt, dets = fixture_frames()
        table = format_table(evaluate_frames(gt, dets, EvalConfig()))
        assert "mAP" in table and "ICFW mAP" in table
        assert f"{float(EXPECTED_MAP) * 100:.2f}" in table

    def test_missing_class_warns_instead_of_failing(self):
        gt = {"f0": [make_object()]}
        dets = {"f0": [det(score=0.9)]}
        report = evaluate_frames(gt, dets, EvalConfig())
        assert report.icfw_map_scores["2d"] is None
        assert any("ICFW" in w for w in report.warnings)
        assert report.per_class["2d"]["Cyclist"].no_ground_truth
