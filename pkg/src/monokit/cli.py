"""monokit command line: evaluate / mol / augment / stats / render.

All commands are reproducible batch runs: every source of randomness flows
from --seed, outputs are written in canonical order regardless of --jobs,
and each run drops a manifest.json recording the exact configuration.
Exit codes: 0 success, 1 internal error, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .augment import AugmentConfig, PartnerPool, compose
from .errors import MissingFramesError, MonokitError
from .kitti import (
    KittiRoot,
    load_split,
    parse_label_file,
    save_image,
    serialize_label_file,
)
from .metrics import (
    EvalConfig,
    IOU_KINDS,
    class_frequencies,
    evaluate,
    format_table,
    icfw_weights,
    report_to_json,
)
from .mol import MOLConfig, mol_records, write_mol_jsonl


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _jobs_default() -> int:
    try:
        return max(1, int(os.environ.get("MONOKIT_JOBS", "1")))
    except ValueError:
        return 1


def _scale_range(value: str) -> tuple[float, float]:
    parts = value.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected MIN,MAX")
    return float(parts[0]), float(parts[1])


def _read_split(path: str) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return load_split(f.read())


def _check_resolvable(root: KittiRoot, ids: list[str], need_image: bool = True) -> None:
    missing = [fid for fid in ids if not root.has_frame(fid, need_image=need_image)]
    if missing:
        raise MissingFramesError(missing)


def _write_manifest(path: str, command: str, config: dict, seed: int | None,
                    inputs: dict, outputs: list[str], wall_time_s: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": inputs,
        "outputs": outputs,
        "version": __version__,
        "wall_time_s": round(wall_time_s, 3),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


# ── evaluate ──

def cmd_evaluate(args: argparse.Namespace) -> int:
    t0 = time.time()
    kinds = tuple(IOU_KINDS) if args.kind == "all" else (args.kind,)
    cfg = EvalConfig(
        iou_kinds=kinds,
        iou_threshold=args.iou,
        interpolation=args.interp,
        classes=tuple(args.classes.split(",")),
        difficulty=args.difficulty,
    )
    report = evaluate(args.gt_dir, args.det_dir, cfg)

    os.makedirs(args.out, exist_ok=True)
    outputs = []
    report_path = os.path.join(args.out, "report.json")
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report_to_json(report), f, indent=2, sort_keys=True)
        f.write("\n")
    outputs.append(report_path)

    table = format_table(report)
    table_path = os.path.join(args.out, "table.txt")
    with open(table_path, "w", encoding="utf-8") as f:
        f.write(table)
    outputs.append(table_path)
    sys.stdout.write(table)

    if not args.no_figures:
        from . import plots

        for kind in cfg.iou_kinds:
            fig_path = os.path.join(args.out, f"pr_curves_{kind}.png")
            plots.save_pr_curves(report, kind, fig_path)
            outputs.append(fig_path)

    _write_manifest(
        os.path.join(args.out, "manifest.json"),
        "evaluate",
        {
            "iou_threshold": cfg.iou_threshold,
            "iou_kinds": list(cfg.iou_kinds),
            "interpolation": cfg.interpolation,
            "classes": list(cfg.classes),
            "difficulty": cfg.difficulty,
            "figures": not args.no_figures,
        },
        None,
        {"gt_dir": args.gt_dir, "det_dir": args.det_dir},
        outputs,
        time.time() - t0,
    )
    return 0


# ── mol ──

def _mol_worker(root_path: str, frame_id: str, cfg: MOLConfig):
    try:
        root = KittiRoot(root_path)
        hw = root.image_hw(frame_id)
        objects = root.load_objects(frame_id)
        return frame_id, list(mol_records([(frame_id, hw, objects)], cfg)), None
    except Exception as exc:  # per-frame failures are reported, not fatal
        return frame_id, None, f"{type(exc).__name__}: {exc}"


def cmd_mol(args: argparse.Namespace) -> int:
    t0 = time.time()
    root = KittiRoot(args.root)
    ids = sorted(_read_split(args.split))
    _check_resolvable(root, ids)
    cfg = MOLConfig(
        n_windows=args.windows,
        scale_range=args.scale_range,
        require_foreground=args.require_foreground,
        seed=args.seed,
    )

    results: dict[str, list[dict]] = {}
    failures: list[tuple[str, str]] = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for fid, records, err in pool.map(
                _mol_worker, [args.root] * len(ids), ids, [cfg] * len(ids)
            ):
                if err is None:
                    results[fid] = records
                else:
                    failures.append((fid, err))
    else:
        for fid in ids:
            fid, records, err = _mol_worker(args.root, fid, cfg)
            if err is None:
                results[fid] = records
            else:
                failures.append((fid, err))

    for fid, err in failures:
        print(f"warning: frame {fid} skipped: {err}", file=sys.stderr)

    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as f:
        n = 0
        for fid in sorted(results):
            n += write_mol_jsonl(results[fid], f)
    print(f"wrote {n} MOL records for {len(results)} frames to {args.out}")

    _write_manifest(
        args.out + ".manifest.json",
        "mol",
        {
            "n_windows": cfg.n_windows,
            "scale_range": list(cfg.scale_range),
            "require_foreground": cfg.require_foreground,
            "max_retries": cfg.max_retries,
            "classes": list(cfg.classes),
        },
        cfg.seed,
        {"root": args.root, "split": args.split},
        [args.out],
        time.time() - t0,
    )
    return 0


# ── augment ──

def _augment_worker(root_path: str, frame_id: str, pool_dims: list,
                    cfg: AugmentConfig, out_dir: str):
    try:
        root = KittiRoot(root_path)
        sample = root.load_frame(frame_id, with_calib=False)
        pool = PartnerPool([
            (fid, tuple(hw), (lambda fid=fid: root.load_frame(fid, with_calib=False)))
            for fid, hw in pool_dims
        ])
        out, sources = compose(sample, cfg.pipeline, pool, cfg)

        save_image(out.image, os.path.join(out_dir, "image_2", frame_id + ".png"))
        with open(os.path.join(out_dir, "label_2", frame_id + ".txt"), "w",
                  encoding="utf-8") as f:
            f.write(serialize_label_file(out.objects))
        src_calib = root.calib_path(frame_id)
        if os.path.isfile(src_calib):
            shutil.copyfile(src_calib, os.path.join(out_dir, "calib", frame_id + ".txt"))
        provenance = {
            "output_frame": frame_id,
            "sources": sources,
            "pipeline": list(cfg.pipeline),
            "seed": cfg.seed,
            "object_sources": out.object_sources,
        }
        with open(os.path.join(out_dir, "provenance", frame_id + ".json"), "w",
                  encoding="utf-8") as f:
            json.dump(provenance, f, indent=2, sort_keys=True)
            f.write("\n")
        return frame_id, None
    except MonokitError as exc:
        return frame_id, f"{type(exc).__name__}: {exc}"


def cmd_augment(args: argparse.Namespace) -> int:
    t0 = time.time()
    root = KittiRoot(args.root)
    ids = sorted(_read_split(args.split))
    _check_resolvable(root, ids)
    pool_ids = sorted(_read_split(args.pool_split)) if args.pool_split else ids
    _check_resolvable(root, pool_ids)

    cfg = AugmentConfig(
        pipeline=tuple(args.pipeline.split(",")),
        cutout_holes=args.holes,
        cutout_frac=args.frac,
        fill=args.fill,
        seed=args.seed,
    )

    for sub in ("image_2", "label_2", "calib", "provenance"):
        os.makedirs(os.path.join(args.out, sub), exist_ok=True)
    pool_dims = [(fid, root.image_hw(fid)) for fid in pool_ids]

    failures: list[tuple[str, str]] = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for fid, err in pool.map(
                _augment_worker,
                [args.root] * len(ids), ids,
                [pool_dims] * len(ids), [cfg] * len(ids),
                [args.out] * len(ids),
            ):
                if err is not None:
                    failures.append((fid, err))
    else:
        for fid in ids:
            _, err = _augment_worker(args.root, fid, pool_dims, cfg, args.out)
            if err is not None:
                failures.append((fid, err))

    for fid, err in failures:
        print(f"warning: frame {fid} skipped: {err}", file=sys.stderr)
    done = len(ids) - len(failures)
    print(f"augmented {done}/{len(ids)} frames into {args.out}")

    _write_manifest(
        os.path.join(args.out, "manifest.json"),
        "augment",
        {
            "pipeline": list(cfg.pipeline),
            "cutout_holes": cfg.cutout_holes,
            "cutout_frac": cfg.cutout_frac,
            "fill": cfg.fill,
            "partner_policy": cfg.partner_policy,
        },
        cfg.seed,
        {"root": args.root, "split": args.split,
         "pool_split": args.pool_split or args.split},
        [args.out],
        time.time() - t0,
    )
    return 0


# ── stats ──

def cmd_stats(args: argparse.Namespace) -> int:
    t0 = time.time()
    root = KittiRoot(args.root)
    ids = _read_split(args.split)
    _check_resolvable(root, ids, need_image=False)
    frames = [root.load_objects(fid) for fid in ids]
    freq = class_frequencies(frames)
    weights = icfw_weights({c: f for c, f in freq.items() if f > 0})

    print(f"{'class':<14}{'count-share f_c':>18}{'icfw weight w_c':>18}")
    for cls, f in freq.items():
        w = weights.weight.get(cls)
        w_str = f"{w:18.4f}" if w is not None else f"{'n/a':>18}"
        print(f"{cls:<14}{f:18.4f}{w_str}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        stats_path = os.path.join(args.out, "stats.json")
        with open(stats_path, "w", encoding="utf-8") as f:
            json.dump({"freq": freq, "weights": weights.weight}, f,
                      indent=2, sort_keys=True)
            f.write("\n")
        from . import plots

        fig_path = os.path.join(args.out, "class_stats.png")
        plots.save_class_stats(freq, weights.weight, fig_path)
        _write_manifest(
            os.path.join(args.out, "manifest.json"),
            "stats", {}, None,
            {"root": args.root, "split": args.split},
            [stats_path, fig_path],
            time.time() - t0,
        )
    return 0


# ── render ──

def cmd_render(args: argparse.Namespace) -> int:
    root = KittiRoot(args.root)
    if not root.has_frame(args.frame):
        raise MissingFramesError([args.frame])
    sample = root.load_frame(args.frame)
    if args.dets:
        with open(args.dets, encoding="utf-8") as f:
            objects = parse_label_file(f.read())
    else:
        objects = sample.objects
    drawable = [o for o in objects if o.cls_type != "DontCare"]

    if not drawable:
        shutil.copyfile(root.image_path(args.frame), args.out)
        print(f"no boxes to draw; copied source image to {args.out}")
        return 0
    if sample.calib is None:
        raise MonokitError(f"frame {args.frame} has no calibration; cannot project")

    from . import plots

    drawn, skipped = plots.render_overlay(sample, drawable, args.out)
    if skipped:
        print(f"warning: skipped {skipped} box(es) behind the camera", file=sys.stderr)
    print(f"drew {drawn} box(es) to {args.out}")
    return 0


# ── parser ──

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monokit",
        description="KITTI monocular-3D toolkit: evaluation, pretext labels, augmentation",
    )
    parser.add_argument("--version", action="version", version=f"monokit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score detections against ground truth")
    p.add_argument("gt_dir", help="directory of ground-truth KITTI label files")
    p.add_argument("det_dir", help="directory of detection KITTI label files (with scores)")
    p.add_argument("--out", required=True, help="output directory for report files")
    p.add_argument("--iou", type=float, default=0.5, help="IoU threshold (default 0.5)")
    p.add_argument("--kind", choices=["all", *IOU_KINDS], default="all",
                   help="IoU kind to evaluate (default all)")
    p.add_argument("--interp", choices=["r11", "r40"], default="r40",
                   help="AP interpolation scheme (default r40)")
    p.add_argument("--classes", default="Car,Pedestrian,Cyclist")
    p.add_argument("--difficulty", choices=["all", "easy", "moderate", "hard"],
                   default="all")
    p.add_argument("--no-figures", action="store_true", help="skip PR-curve rendering")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mol", help="generate multi-object-labeling pretext records")
    p.add_argument("--root", required=True, help="KITTI root (image_2/, label_2/)")
    p.add_argument("--split", required=True, help="split file, one frame id per line")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--windows", type=_positive_int, default=8,
                   help="random windows per frame (default 8)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale-range", type=_scale_range, default=(0.1, 0.9),
                   metavar="MIN,MAX", help="window side as fraction of image dims")
    p.add_argument("--require-foreground", action="store_true",
                   help="rejection-sample windows that miss every object")
    p.add_argument("--jobs", type=_positive_int, default=_jobs_default())
    p.set_defaults(func=cmd_mol)

    p = sub.add_parser("augment", help="write an augmented KITTI-layout dataset")
    p.add_argument("--root", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--pipeline", required=True,
                   help="comma list of boxmixup,cutpaste,cutout (applied left to right)")
    p.add_argument("--holes", type=_positive_int, default=4, help="cutout hole count")
    p.add_argument("--frac", type=float, default=0.1, help="cutout hole size fraction")
    p.add_argument("--fill", choices=["zero", "channel_mean"], default="zero")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pool-split", default=None,
                   help="split file for the partner pool (default: same as --split)")
    p.add_argument("--jobs", type=_positive_int, default=_jobs_default())
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("stats", help="class frequencies and ICFW weights of a split")
    p.add_argument("--root", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", default=None, help="optional output directory")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("render", help="draw cuboid overlays and a BEV panel")
    p.add_argument("--root", required=True)
    p.add_argument("--frame", required=True, help="frame id to render")
    p.add_argument("--dets", default=None, help="optional detection label file to draw")
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MonokitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
