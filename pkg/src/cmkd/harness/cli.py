"""Command-line interface.

Subcommands: gen-data, train-teacher, pretrain-depth, train-student,
run-semi, ablate, eval, render-bev, bench-kernels. Every subcommand accepts
``--config <file>`` (flat dotted key = value text) and ``--seed``.
Exits 0 on success, nonzero with a one-line diagnostic otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="config file path")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--data-root", default=None, help="dataset root override")
    p.add_argument("--run-dir", default=None, help="run directory override")


def _build_config(args):
    from .config import load_config
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "data_root", None):
        overrides["data_root"] = args.data_root
    if getattr(args, "run_dir", None):
        overrides["run_dir"] = args.run_dir
    return load_config(args.config, overrides)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmkd",
        description="LiDAR-to-monocular cross-modality distillation on "
                    "synthetic scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic dataset")
    _add_common(p)

    p = sub.add_parser("train-teacher", help="train the LiDAR teacher")
    _add_common(p)
    p.add_argument("--resume", default=None, help="training state to resume")

    p = sub.add_parser("pretrain-depth",
                       help="depth pre-train the image backbone")
    _add_common(p)

    p = sub.add_parser("train-student", help="distill into the student")
    _add_common(p)
    p.add_argument("--teacher-ckpt", required=True)
    p.add_argument("--backbone-ckpt", default=None)
    p.add_argument("--splits", default=None,
                   help="comma-separated training splits")

    p = sub.add_parser("run-semi", help="semi-supervised pipeline")
    _add_common(p)
    p.add_argument("--with-baseline", action="store_true",
                   help="also train a labeled-only supervised baseline")

    p = sub.add_parser("ablate", help="run the mode-flag ablation grid")
    _add_common(p)
    p.add_argument("--seeds", default=None,
                   help="comma-separated seeds (default: config seed)")
    p.add_argument("--semi-root", default=None,
                   help="dataset root with an unlabeled split for the "
                        "unlabeled-data row")
    p.add_argument("--rows", default=None,
                   help="comma-separated row names to run")

    p = sub.add_parser("eval", help="evaluate detection files against GT")
    _add_common(p)
    p.add_argument("--detections", required=True,
                   help="directory of <frame>.label detection files")
    p.add_argument("--ground-truth", required=True,
                   help="directory of <frame>.label ground-truth files")
    p.add_argument("--out", default=None, help="write the record lines here")

    p = sub.add_parser("render-bev",
                       help="write teacher/pre-DA/post-DA BEV panels")
    _add_common(p)
    p.add_argument("--student-ckpt", required=True)
    p.add_argument("--teacher-ckpt", required=True)
    p.add_argument("--samples", default=None,
                   help="comma-separated sample ids (default: first of val)")
    p.add_argument("--count", type=int, default=1,
                   help="number of val samples when --samples is not given")
    p.add_argument("--out", default="bev_panels")

    p = sub.add_parser("bench-kernels",
                       help="benchmark numba vs numpy kernel backends")
    p.add_argument("--repeat", type=int, default=3)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:   # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "bench-kernels":
        from ..benchmarks.kernel_bench import run_benchmark
        run_benchmark(repeat=args.repeat)
        return 0

    cfg = _build_config(args)

    if args.command == "gen-data":
        from .experiments import generate_run_dataset
        info = generate_run_dataset(cfg)
        print(json.dumps(info))
        return 0

    if args.command == "train-teacher":
        from .train import train_teacher
        report = train_teacher(cfg, resume_from=args.resume)
        print(json.dumps({k: report[k] for k in
                          ("checkpoint", "val_ap_3d", "val_ap_bev")}))
        return 0

    if args.command == "pretrain-depth":
        from .train import pretrain_depth
        report = pretrain_depth(cfg)
        print(json.dumps({k: report[k] for k in
                          ("checkpoint", "mean_target_prob")}))
        return 0

    if args.command == "train-student":
        from .train import train_student
        splits = args.splits.split(",") if args.splits else None
        report = train_student(cfg, args.teacher_ckpt,
                               backbone_ckpt=args.backbone_ckpt,
                               train_splits=splits)
        print(json.dumps({k: report[k] for k in
                          ("checkpoint", "val_ap_3d", "val_ap_bev")}))
        return 0

    if args.command == "run-semi":
        from .experiments import run_semisupervised
        report = run_semisupervised(cfg, with_baseline=args.with_baseline)
        out = {"student_ap_3d": report["student"]["val_ap_3d"],
               "teacher_ap_3d": report["teacher"]["val_ap_3d"],
               "hard_label_firewall_ok": report["hard_label_firewall_ok"]}
        if "baseline" in report:
            out["baseline_ap_3d"] = report["baseline"]["val_ap_3d"]
            out["ap_gain_3d"] = report["ap_gain_3d"]
        print(json.dumps(out))
        return 0

    if args.command == "ablate":
        from .experiments import run_ablation_suite
        seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
        rows = args.rows.split(",") if args.rows else None
        report = run_ablation_suite(cfg, seeds=seeds,
                                    semi_root=args.semi_root, rows=rows)
        print(report["table"])
        for check in report["trends"]:
            status = "PASS" if check["pass"] else "FAIL"
            print(f"[{status}] {check['name']}: {check['detail']}")
        out_path = Path(cfg.run_dir) / "ablation_report.json"
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(json.dumps(report, indent=2, sort_keys=True))
        return 0 if all(c["pass"] for c in report["trends"]) else 1

    if args.command == "eval":
        from ..eval import EvalConfig, evaluate, record_lines, summary_table
        records = evaluate(args.detections, args.ground_truth,
                           EvalConfig(iou_threshold=cfg.eval_iou,
                                      recall_positions=cfg.recall_positions,
                                      max_range=cfg.max_range))
        print(summary_table(records), end="")
        if args.out:
            Path(args.out).write_text(record_lines(records))
        return 0

    if args.command == "render-bev":
        from ..synthdata import read_dataset
        from .render import render_bev_panels
        dataset = read_dataset(cfg.data_root)
        if args.samples:
            ids = args.samples.split(",")
        else:
            ids = dataset.sample_ids(cfg.val_split)[:args.count]
        written = render_bev_panels(args.student_ckpt, args.teacher_ckpt,
                                    dataset, ids, args.out)
        print(json.dumps({"written": written}))
        return 0

    raise ValueError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
