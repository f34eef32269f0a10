"""Experiment orchestration: dataset generation, cached runs, the
semi-supervised pipeline, and the ablation suite."""

from __future__ import annotations

import hashlib
import json
import statistics
from pathlib import Path

from ..synthdata import Dataset, generate_dataset, read_dataset
from .config import RunConfig
from .train import pretrain_depth, train_student, train_teacher


def generate_run_dataset(cfg: RunConfig, root=None) -> dict:
    """Generate the dataset a config describes (splits sized per config)."""
    root = Path(root or cfg.data_root)
    sizes = {}
    if cfg.n_train_labeled:
        sizes[cfg.train_split] = cfg.n_train_labeled
    if cfg.n_train_unlabeled:
        sizes[cfg.unlabeled_split] = cfg.n_train_unlabeled
    if cfg.n_val:
        sizes[cfg.val_split] = cfg.n_val
    splits = generate_dataset(cfg.scene_spec(), sizes, root)
    return {"root": str(root), "splits": {k: len(v) for k, v in splits.items()}}


def _key_hash(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def run_cached(kind: str, cfg: RunConfig, deps: dict, builder,
               quiet: bool = False) -> dict:
    """Run ``builder(run_id)`` once per unique (config, deps) and memoize
    its report under <run_dir>/<kind>_<hash>/report.json."""
    key = _key_hash({"kind": kind, "config": cfg.to_dict(), "deps": deps})
    run_id = f"{kind}_{key}"
    report_path = Path(cfg.run_dir) / run_id / "report.json"
    if report_path.is_file():
        report = json.loads(report_path.read_text())
        ckpt = report.get("checkpoint")
        if ckpt is None or Path(ckpt).is_file():
            return report
    return builder(run_id)


def ensure_teacher(cfg: RunConfig, dataset: Dataset | None = None,
                   quiet: bool = False) -> dict:
    relevant = {"role": "teacher"}
    return run_cached(
        "teacher", cfg, relevant,
        lambda rid: train_teacher(cfg, dataset=dataset, run_id=rid,
                                  quiet=quiet))


def ensure_depth_backbone(cfg: RunConfig, dataset: Dataset | None = None,
                          splits: list[str] | None = None,
                          quiet: bool = False) -> dict:
    deps = {"role": "depth", "splits": splits or [cfg.train_split]}
    return run_cached(
        "depth", cfg, deps,
        lambda rid: pretrain_depth(cfg, dataset=dataset, run_id=rid,
                                   splits=splits, quiet=quiet))


def ensure_student(cfg: RunConfig, teacher_report: dict,
                   backbone_report: dict | None = None,
                   dataset: Dataset | None = None,
                   train_splits: list[str] | None = None,
                   tag: str = "student", quiet: bool = False) -> dict:
    deps = {"teacher": teacher_report["checkpoint_hash"],
            "backbone": backbone_report["checkpoint_hash"]
            if backbone_report else None,
            "splits": train_splits or [cfg.train_split]}
    return run_cached(
        tag, cfg, deps,
        lambda rid: train_student(
            cfg, teacher_report["checkpoint"],
            backbone_ckpt=backbone_report["checkpoint"]
            if backbone_report else None,
            dataset=dataset, train_splits=train_splits, run_id=rid,
            quiet=quiet))


def run_semisupervised(cfg: RunConfig, dataset: Dataset | None = None,
                       with_baseline: bool = False,
                       quiet: bool = False) -> dict:
    """Semi-supervised pipeline: teacher on the labeled split, student
    distilled on labeled + unlabeled with purely soft guidance.

    The student phase is audited: its hard-label read count over the train
    splits must be zero (unlabeled samples structurally refuse label reads;
    the counter proves the labeled ones were never consulted either).
    Optionally also trains a hard-label-only baseline on the labeled split
    for comparison.
    """
    if cfg.hard_labels or not cfg.use_res:
        raise ValueError("the semi-supervised pipeline requires soft "
                         "response supervision (use_res, not hard_labels)")
    dataset = dataset or read_dataset(cfg.data_root)
    train_splits = [cfg.train_split]
    if cfg.unlabeled_split in dataset.splits:
        train_splits.append(cfg.unlabeled_split)
    teacher_report = ensure_teacher(cfg, dataset, quiet=quiet)
    backbone_report = ensure_depth_backbone(cfg, dataset, quiet=quiet) \
        if cfg.depth_pretrain else None
    student_report = ensure_student(
        cfg, teacher_report, backbone_report, dataset,
        train_splits=train_splits, tag="student_semi", quiet=quiet)

    reads = student_report["train_split_label_reads"]
    report = {
        "kind": "semisupervised",
        "teacher": teacher_report,
        "student": student_report,
        "train_splits": train_splits,
        "student_hard_label_reads": reads,
        "hard_label_firewall_ok": all(v == 0 for v in reads.values()),
    }
    if not report["hard_label_firewall_ok"]:
        raise RuntimeError(
            f"hard-label firewall violated during the student phase: {reads}")
    if with_baseline:
        base_cfg = cfg.replace(use_feat=False, use_res=False,
                               hard_labels=True)
        baseline = ensure_student(base_cfg, teacher_report, backbone_report,
                                  dataset, train_splits=[cfg.train_split],
                                  tag="student_supervised", quiet=quiet)
        report["baseline"] = baseline
        report["ap_gain_3d"] = (student_report["val_ap_3d"] or 0.0) \
            - (baseline["val_ap_3d"] or 0.0)
    return report


ABLATION_ROWS = (
    # name, pre, feat, res, un, da, conf
    ("base", False, False, False, False, True, False),
    ("pre", True, False, False, False, True, False),
    ("pre_res", True, False, True, False, True, True),
    ("pre_feat", True, True, False, False, True, False),
    ("full", True, True, True, False, True, True),
    ("full_no_da", True, True, True, False, False, True),
    ("full_no_conf", True, True, True, False, True, False),
    ("full_un", True, True, True, True, True, True),
)


def _row_config(cfg: RunConfig, pre: bool, feat: bool, res: bool,
                da: bool, conf: bool) -> RunConfig:
    return cfg.replace(use_feat=feat, use_res=res, use_conf_weight=conf,
                       use_domain_adapt=da, depth_pretrain=pre,
                       hard_labels=False)


def run_ablation_row(cfg: RunConfig, name: str, pre: bool, feat: bool,
                     res: bool, un: bool, da: bool, conf: bool,
                     dataset: Dataset | None = None,
                     semi_dataset: Dataset | None = None,
                     quiet: bool = False) -> dict:
    """Train one ablation configuration and return its report."""
    row_cfg = _row_config(cfg, pre, feat, res, da, conf)
    if un:
        if semi_dataset is None:
            raise ValueError("the unlabeled-data row needs a dataset with "
                             "an unlabeled split (semi_dataset)")
        semi_cfg = row_cfg.replace(
            data_root=str(semi_dataset.root),
            labeled_fraction=cfg.labeled_fraction)
        teacher_report = ensure_teacher(semi_cfg, semi_dataset, quiet=quiet)
        backbone_report = ensure_depth_backbone(semi_cfg, semi_dataset,
                                                quiet=quiet) if pre else None
        splits = [semi_cfg.train_split, semi_cfg.unlabeled_split]
        return ensure_student(semi_cfg, teacher_report, backbone_report,
                              semi_dataset, train_splits=splits,
                              tag=f"ablate_{name}", quiet=quiet)
    dataset = dataset or read_dataset(cfg.data_root)
    teacher_report = ensure_teacher(row_cfg, dataset, quiet=quiet)
    backbone_report = ensure_depth_backbone(row_cfg, dataset, quiet=quiet) \
        if pre else None
    return ensure_student(row_cfg, teacher_report, backbone_report, dataset,
                          tag=f"ablate_{name}", quiet=quiet)


def run_ablation_suite(cfg: RunConfig, seeds: list[int] | None = None,
                       semi_root=None, rows=None, quiet: bool = False) -> dict:
    """Run the mode-flag grid across seeds and emit the comparison table.

    Every row/seed run is cached under the run directory, so re-invocations
    only fill in what is missing. Rows needing an unlabeled split are
    skipped unless ``semi_root`` points at a dataset that has one. Returns
    {rows: {name: {aps, median_ap, flags, config_hash}}, table, trends}.
    """
    seeds = seeds or [cfg.seed]
    dataset = read_dataset(cfg.data_root)
    semi_dataset = read_dataset(semi_root) if semi_root else None
    chosen = rows or [r[0] for r in ABLATION_ROWS]
    results = {}
    for name, pre, feat, res, un, da, conf in ABLATION_ROWS:
        if name not in chosen:
            continue
        if un and semi_dataset is None:
            continue
        aps = []
        config_hash = None
        for seed in seeds:
            seed_cfg = cfg.replace(seed=seed)
            rep = run_ablation_row(seed_cfg, name, pre, feat, res, un, da,
                                   conf, dataset, semi_dataset, quiet=quiet)
            aps.append(rep["val_ap_3d"] or 0.0)
            config_hash = rep["config_hash"]
        results[name] = {
            "flags": {"Pre": pre, "Feat": feat, "Res": res, "Un": un,
                      "DA": da, "Conf": conf},
            "aps": aps,
            "median_ap": statistics.median(aps),
            "config_hash": config_hash,
        }

    header = (f"{'Pre':>4} {'Feat':>5} {'Res':>4} {'Un':>3} {'DA':>3} "
              f"{'Conf':>5} | {'3D AP (median)':>15}  {'per-seed':>20}")
    lines = [header, "-" * len(header)]
    for name, _pre, _feat, _res, _un, _da, _conf in ABLATION_ROWS:
        if name not in results:
            continue
        r = results[name]
        f = r["flags"]

        def mark(v):
            return "x" if v else "."
        per_seed = " ".join(f"{a:.3f}" for a in r["aps"])
        lines.append(
            f"{mark(f['Pre']):>4} {mark(f['Feat']):>5} {mark(f['Res']):>4} "
            f"{mark(f['Un']):>3} {mark(f['DA']):>3} {mark(f['Conf']):>5} | "
            f"{r['median_ap']:>15.4f}  {per_seed:>20}")
    table = "\n".join(lines) + "\n"

    trends = evaluate_trends(results)
    return {"rows": results, "table": table, "trends": trends,
            "seeds": seeds}


def evaluate_trends(results: dict) -> list[dict]:
    """Automatic pass/fail checks over the ablation medians."""
    def med(name):
        return results[name]["median_ap"] if name in results else None

    checks = []

    def add(name, ok, detail):
        checks.append({"name": name, "pass": bool(ok), "detail": detail})

    order = ["base", "pre", "pre_res", "pre_feat", "full"]
    if all(med(n) is not None for n in order):
        vals = [med(n) for n in order]
        gaps = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
        ordering_ok = all(g > 0 for g in gaps)
        gap_ok = all(g >= 0.01 for g in gaps[:2])
        vs_pre = (med("pre_feat") - med("pre") >= 0.02
                  and med("full") - med("pre") >= 0.02)
        add("component_ordering", ordering_ok,
            " < ".join(f"{n}={v:.4f}" for n, v in zip(order, vals)))
        add("early_gaps_ge_1pt", gap_ok,
            f"gaps {['%.4f' % g for g in gaps]}")
        add("feat_and_full_beat_pre_by_2pt", vs_pre,
            f"pre_feat-pre={med('pre_feat') - med('pre'):.4f}, "
            f"full-pre={med('full') - med('pre'):.4f}")
    if med("full") is not None and med("full_no_da") is not None:
        add("da_helps", med("full") - med("full_no_da") >= 0.005,
            f"full-no_da={med('full') - med('full_no_da'):.4f}")
    if med("full") is not None and med("full_no_conf") is not None:
        add("conf_helps", med("full") - med("full_no_conf") >= 0.005,
            f"full-no_conf={med('full') - med('full_no_conf'):.4f}")
    if med("full_un") is not None and med("full") is not None:
        add("unlabeled_helps", med("full_un") > med("full"),
            f"full_un={med('full_un'):.4f} vs full={med('full'):.4f}")
    return checks
