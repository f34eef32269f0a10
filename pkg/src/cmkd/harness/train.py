"""Training loops: teacher pre-training, depth pre-training, and the
two-phase student distillation schedule."""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..distill import (
    SoftLabelCache,
    assign_anchors,
    combine_student_loss,
    detection_loss,
    feature_distill_loss,
    generate_soft_labels,
    select_supervision,
    soft_labels_to_array,
)
from ..eval import EvalConfig, evaluate_frames, lookup_ap, record_lines
from ..geometry import boxes_to_array
from ..netblocks import (
    DepthDistributionHead,
    TinyImageBackbone,
    checkpoint_hash,
    load_checkpoint,
    load_into,
    save_checkpoint,
    transfer_prefixed,
)
from ..student import StudentNet, depth_loss, depth_targets
from ..synthdata import Dataset, read_dataset
from ..teacher import TeacherNet, pillar_mean_features
from .config import RunConfig


# ---------------------------------------------------------------------------
# run bookkeeping


class RunContext:
    """Per-run directory with a text log and a metrics JSONL stream."""

    def __init__(self, cfg: RunConfig, run_id: str, quiet: bool = False):
        self.cfg = cfg
        self.run_id = run_id
        self.dir = Path(cfg.run_dir) / run_id
        self.dir.mkdir(parents=True, exist_ok=True)
        self.quiet = quiet
        self._metrics = open(self.dir / "metrics.jsonl", "a")
        self._log = open(self.dir / "run.log", "a")

    def log(self, message: str):
        stamp = time.strftime("%H:%M:%S")
        line = f"[{stamp}] {message}"
        self._log.write(line + "\n")
        self._log.flush()
        if not self.quiet:
            print(f"[{self.run_id}] {message}", flush=True)

    def metric(self, epoch: int, phase: str, loss_name: str, value: float):
        rec = {"run_id": self.run_id, "epoch": epoch, "phase": phase,
               "loss_name": loss_name, "value": float(value)}
        self._metrics.write(json.dumps(rec) + "\n")
        self._metrics.flush()

    def write_report(self, report: dict):
        (self.dir / "report.json").write_text(json.dumps(report, indent=2,
                                                         sort_keys=True))

    def close(self):
        self._metrics.close()
        self._log.close()


def read_metrics(run_dir) -> list[dict]:
    path = Path(run_dir) / "metrics.jsonl"
    if not path.is_file():
        return []
    return [json.loads(line) for line in path.read_text().splitlines()
            if line.strip()]


# ---------------------------------------------------------------------------
# schedule / ordering helpers


def one_cycle_lr(step: int, total_steps: int, peak: float) -> float:
    """Linear warmup to the peak over the first 30%, cosine decay to 1% of
    the peak afterwards."""
    warm = max(1, int(0.3 * total_steps))
    if step < warm:
        return peak * (0.1 + 0.9 * (step + 1) / warm)
    t = (step - warm) / max(1, total_steps - warm)
    return peak * (0.01 + 0.99 * 0.5 * (1.0 + math.cos(math.pi * t)))


def set_lr(optimizer: torch.optim.Optimizer, lr: float):
    for group in optimizer.param_groups:
        group["lr"] = lr


def epoch_order(seed: int, epoch: int, ids: list[str]) -> list[str]:
    """Deterministic per-epoch shuffle derived from (seed, epoch) only, so
    resumed runs reproduce the unbroken data order."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 7919, epoch)))
    return [ids[i] for i in rng.permutation(len(ids))]


def _batches(order: list[str], batch_size: int):
    for i in range(0, len(order), batch_size):
        yield order[i:i + batch_size]


def _derived_seed(seed: int, tag: str) -> int:
    return (seed * 1000003 + sum(ord(c) for c in tag) * 7919) % (2 ** 31)


# ---------------------------------------------------------------------------
# model builders


def build_teacher(cfg: RunConfig) -> TeacherNet:
    torch.manual_seed(_derived_seed(cfg.seed, "teacher"))
    return TeacherNet(cfg.grid(), cfg.anchor_grid(), c_voxel=cfg.c_voxel,
                      **cfg.net_kwargs())


def build_student(cfg: RunConfig) -> StudentNet:
    torch.manual_seed(_derived_seed(cfg.seed, "student"))
    return StudentNet(cfg.image_size(), cfg.grid(), cfg.bins(),
                      cfg.anchor_grid(), c_reduced=cfg.c_reduced,
                      feat_channels=cfg.feat_channels,
                      out_channels=cfg.out_channels,
                      use_domain_adapt=cfg.use_domain_adapt,
                      **cfg.net_kwargs())


class DepthPretrainNet(nn.Module):
    """Image backbone plus depth head, trained on depth supervision alone.
    Submodule names match StudentNet so weights transfer by prefix."""

    def __init__(self, cfg: RunConfig):
        super().__init__()
        self.backbone = TinyImageBackbone(
            cfg.image_size(), in_channels=1, feat_channels=cfg.feat_channels,
            out_channels=cfg.out_channels, normalization=cfg.normalization)
        self.depth_head = DepthDistributionHead(
            cfg.out_channels, cfg.depth_bins, upsample_factor=2,
            normalization=cfg.normalization)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        _, f_out = self.backbone(images)
        return self.depth_head.forward_logits(f_out)


def load_teacher_checkpoint(path) -> tuple[TeacherNet, RunConfig]:
    arrays, meta = load_checkpoint(path)
    cfg = RunConfig.from_dict(meta["config"])
    net = build_teacher(cfg)
    load_into(net, arrays)
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net, cfg


def load_student_checkpoint(path) -> tuple[StudentNet, RunConfig]:
    arrays, meta = load_checkpoint(path)
    cfg = RunConfig.from_dict(meta["config"])
    net = build_student(cfg)
    load_into(net, arrays)
    net.eval()
    return net, cfg


# ---------------------------------------------------------------------------
# batching helpers


def _load_points(dataset: Dataset, ids: list[str]):
    return [dataset.load(sid).points for sid in ids]


def _pillar_batch(point_clouds, grid):
    feats = []
    occs = []
    for pts in point_clouds:
        f, o = pillar_mean_features(pts, grid)
        feats.append(torch.from_numpy(f))
        occs.append(torch.from_numpy(o))
    return torch.stack(feats), torch.stack(occs)


def _image_batch(dataset: Dataset, ids: list[str]) -> torch.Tensor:
    imgs = [dataset.load(sid).image[:, :, 0] for sid in ids]
    return torch.from_numpy(np.stack(imgs)).unsqueeze(1)


def _eval_config(cfg: RunConfig) -> EvalConfig:
    return EvalConfig(iou_threshold=cfg.eval_iou,
                      recall_positions=cfg.recall_positions,
                      max_range=cfg.max_range)


def _gt_frames(dataset: Dataset, ids: list[str]) -> dict:
    return {sid: boxes_to_array(dataset.labels(sid)) for sid in ids}


def evaluate_teacher(net: TeacherNet, dataset: Dataset, ids: list[str],
                     eval_cfg: EvalConfig):
    """Run teacher inference over a split and return AP records plus the
    per-frame detections."""
    dets = {}
    net.eval()
    with torch.no_grad():
        for sid in ids:
            pts = dataset.load(sid).points
            _, boxes = net.predict(pts)
            dets[sid] = boxes_to_array(boxes)
    records = evaluate_frames(dets, _gt_frames(dataset, ids), eval_cfg)
    return records, dets


def evaluate_student(net: StudentNet, dataset: Dataset, ids: list[str],
                     eval_cfg: EvalConfig, batch_size: int = 8):
    """Run monocular inference over a split (images + calibration only)."""
    dets = {}
    net.eval()
    with torch.no_grad():
        for chunk in _batches(ids, batch_size):
            images = _image_batch(dataset, chunk)
            grid, valid = net.sampling_grid(dataset.calib(chunk[0]))
            out = net.forward(images, grid, valid)
            for i, sid in enumerate(chunk):
                boxes = net.decode_detections(out.cls_logits[i],
                                              out.box_deltas[i])
                dets[sid] = boxes_to_array(boxes)
    records = evaluate_frames(dets, _gt_frames(dataset, ids), eval_cfg)
    return records, dets


# ---------------------------------------------------------------------------
# teacher training


def train_teacher(cfg: RunConfig, dataset: Dataset | None = None,
                  run_id: str | None = None, resume_from=None,
                  quiet: bool = False) -> dict:
    """Optimize the teacher on hard labels of the labeled split.

    Deterministic for a fixed (config, seed); resumable from the per-epoch
    training state it writes. Returns a report dict (checkpoint path, final
    val AP, per-epoch metrics live in metrics.jsonl).
    """
    dataset = dataset or read_dataset(cfg.data_root)
    ids = dataset.sample_ids(cfg.train_split)
    if not ids:
        raise ValueError(f"labeled split {cfg.train_split!r} is empty")
    run = RunContext(cfg, run_id or f"teacher_seed{cfg.seed}", quiet=quiet)
    anchors = cfg.anchor_grid()
    grid = cfg.grid()
    net = build_teacher(cfg)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr_teacher,
                           weight_decay=cfg.weight_decay)
    start_epoch = 0
    if resume_from is not None:
        state = torch.load(resume_from, weights_only=False)
        net.load_state_dict(state["model"])
        opt.load_state_dict(state["optimizer"])
        start_epoch = state["epoch"] + 1
        run.log(f"resumed from {resume_from} at epoch {start_epoch}")

    spe = math.ceil(len(ids) / cfg.batch_size)
    total_steps = cfg.teacher_epochs * spe
    assignments = {}
    eval_cfg = _eval_config(cfg)
    run.log(f"training teacher: {len(ids)} samples, "
            f"{cfg.teacher_epochs} epochs, {spe} steps/epoch")

    final_ap = None
    for epoch in range(start_epoch, cfg.teacher_epochs):
        net.train()
        order = epoch_order(cfg.seed, epoch, ids)
        sums = {}
        for bi, chunk in enumerate(_batches(order, cfg.batch_size)):
            feats, occ = _pillar_batch(_load_points(dataset, chunk), grid)
            asgs = []
            for sid in chunk:
                if sid not in assignments:
                    rows = select_supervision(
                        boxes_to_array(dataset.labels(sid)), None, True)
                    assignments[sid] = assign_anchors(rows, anchors)
                asgs.append(assignments[sid])
            set_lr(opt, one_cycle_lr(epoch * spe + bi, total_steps,
                                     cfg.lr_teacher))
            _, cls_logits, box_deltas = net(feats, occ)
            loss, parts = detection_loss(cls_logits, box_deltas, asgs,
                                         anchors)
            opt.zero_grad()
            loss.backward()
            opt.step()
            sums["teacher_loss"] = sums.get("teacher_loss", 0.0) + float(loss)
            sums["reg"] = sums.get("reg", 0.0) + float(parts["reg"])
            sums["cls"] = sums.get("cls", 0.0) + float(parts["cls"])
        for name, value in sums.items():
            run.metric(epoch, "teacher", name, value / spe)
        msg = f"epoch {epoch}: loss {sums['teacher_loss'] / spe:.4f}"
        if cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            records, _ = evaluate_teacher(
                net, dataset, dataset.sample_ids(cfg.val_split), eval_cfg)
            final_ap = lookup_ap(records, "3d", "overall")
            run.metric(epoch, "teacher", "val_ap_3d", final_ap or 0.0)
            msg += f" | val 3D AP {final_ap:.4f}" if final_ap is not None \
                else " | val 3D AP NA"
        run.log(msg)
        torch.save({"model": net.state_dict(),
                    "optimizer": opt.state_dict(), "epoch": epoch},
                   run.dir / "train_state.pt")

    ckpt = run.dir / "teacher.ckpt"
    save_checkpoint(ckpt, net, meta={"kind": "teacher",
                                     "config": cfg.to_dict(),
                                     "net": net.config()})
    records, _ = evaluate_teacher(net, dataset,
                                  dataset.sample_ids(cfg.val_split),
                                  eval_cfg)
    (run.dir / "val_report.txt").write_text(record_lines(records))
    report = {
        "kind": "teacher",
        "checkpoint": str(ckpt),
        "checkpoint_hash": checkpoint_hash(ckpt),
        "val_ap_3d": lookup_ap(records, "3d", "overall"),
        "val_ap_bev": lookup_ap(records, "bev", "overall"),
        "epochs": cfg.teacher_epochs,
        "config_hash": cfg.config_hash(),
    }
    run.write_report(report)
    run.log(f"done: val 3D AP {report['val_ap_3d']}")
    run.close()
    return report


# ---------------------------------------------------------------------------
# depth pre-training


def pretrain_depth(cfg: RunConfig, dataset: Dataset | None = None,
                   run_id: str | None = None, splits: list[str] | None = None,
                   quiet: bool = False) -> dict:
    """Train the image backbone + depth head on projected-LiDAR depth bins."""
    dataset = dataset or read_dataset(cfg.data_root)
    splits = splits or [cfg.train_split]
    ids = [sid for split in splits for sid in dataset.sample_ids(split)]
    if not ids:
        raise ValueError("depth pre-training needs a non-empty split")
    run = RunContext(cfg, run_id or f"depth_seed{cfg.seed}", quiet=quiet)
    torch.manual_seed(_derived_seed(cfg.seed, "depth"))
    net = DepthPretrainNet(cfg)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr_depth,
                           weight_decay=cfg.weight_decay)
    bins = cfg.bins()
    feature_size = net.backbone.feature_size
    spe = math.ceil(len(ids) / cfg.batch_size)
    total_steps = cfg.depth_epochs * spe
    target_cache = {}
    run.log(f"depth pre-training: {len(ids)} samples, "
            f"{cfg.depth_epochs} epochs")

    mean_p = 0.0
    for epoch in range(cfg.depth_epochs):
        net.train()
        order = epoch_order(cfg.seed, epoch, ids)
        loss_sum = 0.0
        p_sum = 0.0
        p_n = 0
        for bi, chunk in enumerate(_batches(order, cfg.batch_size)):
            images = _image_batch(dataset, chunk)
            tgt = []
            msk = []
            for sid in chunk:
                if sid not in target_cache:
                    sample = dataset.load(sid)
                    target_cache[sid] = depth_targets(
                        sample.points, sample.calib, bins, feature_size)
                t, m = target_cache[sid]
                tgt.append(torch.from_numpy(t))
                msk.append(torch.from_numpy(m))
            targets = torch.stack(tgt)
            mask = torch.stack(msk)
            set_lr(opt, one_cycle_lr(epoch * spe + bi, total_steps,
                                     cfg.lr_depth))
            logits = net(images)
            loss = depth_loss(logits, targets, mask)
            opt.zero_grad()
            loss.backward()
            opt.step()
            loss_sum += float(loss)
            with torch.no_grad():
                probs = torch.softmax(logits, dim=1)
                p_t = probs.gather(1, targets.unsqueeze(1)).squeeze(1)[mask]
                p_sum += float(p_t.sum())
                p_n += int(mask.sum())
        mean_p = p_sum / max(1, p_n)
        run.metric(epoch, "depth", "depth_loss", loss_sum / spe)
        run.metric(epoch, "depth", "depth_p_target", mean_p)
        run.log(f"epoch {epoch}: depth loss {loss_sum / spe:.4f}, "
                f"mean target-bin p {mean_p:.3f}")

    ckpt = run.dir / "depth.ckpt"
    save_checkpoint(ckpt, net, meta={"kind": "depth_backbone",
                                     "config": cfg.to_dict()})
    report = {"kind": "depth_backbone", "checkpoint": str(ckpt),
              "checkpoint_hash": checkpoint_hash(ckpt),
              "mean_target_prob": mean_p, "epochs": cfg.depth_epochs,
              "config_hash": cfg.config_hash()}
    run.write_report(report)
    run.close()
    return report


# ---------------------------------------------------------------------------
# student training


def _supervision_rows(cfg: RunConfig, dataset: Dataset, sid: str,
                      soft_cache: SoftLabelCache | None,
                      teacher: TeacherNet | None):
    """(N, 9) response-supervision rows for one sample per the mode flags."""
    hard_mode = cfg.hard_labels or not cfg.use_res
    if hard_mode:
        return select_supervision(boxes_to_array(dataset.labels(sid)), None,
                                  hard_mode=True)
    labels = soft_cache.get_or_compute(sid, teacher,
                                       dataset.load(sid).points)
    return select_supervision(None, soft_labels_to_array(labels),
                              hard_mode=False)


def train_student(cfg: RunConfig, teacher_ckpt, backbone_ckpt=None,
                  dataset: Dataset | None = None,
                  train_splits: list[str] | None = None,
                  run_id: str | None = None, quiet: bool = False) -> dict:
    """Two-phase distillation training of the monocular student.

    Phase A (ceil(phase_split * epochs) epochs, present only when the
    feature term is enabled) optimizes the BEV feature-mimic loss alone; at
    the phase boundary the teacher's BEV backbone and detection head are
    copied into the student (name-matched, shape-checked). Phase B
    optimizes the full loss per the mode flags.
    """
    dataset = dataset or read_dataset(cfg.data_root)
    train_splits = train_splits or [cfg.train_split]
    ids = [sid for split in train_splits for sid in dataset.sample_ids(split)]
    if not ids:
        raise ValueError("student training needs non-empty splits")
    run = RunContext(cfg, run_id or f"student_seed{cfg.seed}", quiet=quiet)

    teacher, t_cfg = load_teacher_checkpoint(teacher_ckpt)
    teacher_arrays, _ = load_checkpoint(teacher_ckpt)
    t_hash = checkpoint_hash(teacher_ckpt)
    run.log(f"teacher checkpoint {teacher_ckpt} (hash {t_hash})")

    student = build_student(cfg)
    if backbone_ckpt is not None:
        arrays, _ = load_checkpoint(backbone_ckpt)
        transfer_prefixed(arrays, student, ("backbone.", "depth_head."))
        run.log(f"loaded depth-pretrained backbone {backbone_ckpt} "
                f"(hash {checkpoint_hash(backbone_ckpt)})")
    opt = torch.optim.Adam(student.parameters(), lr=cfg.lr_student,
                           weight_decay=cfg.weight_decay)

    grid_spec = cfg.grid()
    anchors = cfg.anchor_grid()
    bins = cfg.bins()
    eval_cfg = _eval_config(cfg)
    hard_mode = cfg.hard_labels or not cfg.use_res
    soft_cache = None
    if not hard_mode:
        soft_cache = SoftLabelCache(Path(cfg.run_dir) / "softlabels", t_hash)

    label_reads_before = dataset.label_read_counts()

    # supervision/assignment caches (static per sample across epochs)
    assignments: dict[str, object] = {}

    def assignment_for(sid: str):
        if sid not in assignments:
            rows = _supervision_rows(cfg, dataset, sid, soft_cache, teacher)
            asg = assign_anchors(rows, anchors, use_confidence_weight=True)
            if not cfg.use_conf_weight:
                asg.fg_weight = np.ones_like(asg.fg_weight)
            assignments[sid] = asg
        return assignments[sid]

    depth_cache: dict[str, tuple] = {}

    def depth_batch(chunk):
        tgt, msk = [], []
        for sid in chunk:
            if sid not in depth_cache:
                sample = dataset.load(sid)
                depth_cache[sid] = depth_targets(
                    sample.points, sample.calib, bins,
                    student.feature_size)
            t, m = depth_cache[sid]
            tgt.append(torch.from_numpy(t))
            msk.append(torch.from_numpy(m))
        return torch.stack(tgt), torch.stack(msk)

    n_epochs = cfg.student_epochs
    n_phase_a = math.ceil(cfg.phase_split * n_epochs) if cfg.use_feat else 0
    n_phase_a = min(n_phase_a, n_epochs)
    spe = math.ceil(len(ids) / cfg.batch_size)
    total_steps = n_epochs * spe
    transferred = False
    run.log(f"training student: {len(ids)} samples over {train_splits}, "
            f"{n_phase_a} feature-only epochs + {n_epochs - n_phase_a} "
            f"full-loss epochs")

    final_ap = None
    for epoch in range(n_epochs):
        phase = "A" if epoch < n_phase_a else "B"
        if phase == "B" and cfg.use_feat and not transferred:
            copied = transfer_prefixed(teacher_arrays, student,
                                       ("bev_backbone.", "head."))
            transferred = True
            run.metric(epoch, "B", "weight_transfer", float(len(copied)))
            run.log(f"phase boundary: copied {len(copied)} teacher "
                    "BEV-backbone/head tensors into the student")
        student.train()
        order = epoch_order(cfg.seed, epoch, ids)
        sums: dict[str, float] = {}
        for bi, chunk in enumerate(_batches(order, cfg.batch_size)):
            images = _image_batch(dataset, chunk)
            grid_t, valid_t = student.sampling_grid(dataset.calib(chunk[0]))
            set_lr(opt, one_cycle_lr(epoch * spe + bi, total_steps,
                                     cfg.lr_student))
            teacher_bev = None
            if cfg.use_feat:
                feats, occ = _pillar_batch(_load_points(dataset, chunk),
                                           grid_spec)
                with torch.no_grad():
                    teacher_bev = teacher.bev_features(feats, occ)
            if phase == "A":
                _, post_da, _ = student.bev_maps(images, grid_t, valid_t)
                loss = feature_distill_loss(post_da, teacher_bev)
                parts = {"feat": float(loss), "total": float(loss)}
            else:
                out = student(images, grid_t, valid_t)
                feat_term = feature_distill_loss(out.bev_post_da,
                                                 teacher_bev) \
                    if cfg.use_feat else None
                asgs = [assignment_for(sid) for sid in chunk]
                res_term, res_parts = detection_loss(
                    out.cls_logits, out.box_deltas, asgs, anchors,
                    cls_target_mode=cfg.cls_target_mode)
                depth_term = None
                if cfg.use_depth_loss:
                    targets, mask = depth_batch(chunk)
                    depth_term = depth_loss(out.depth_logits, targets, mask)
                loss, parts = combine_student_loss(
                    feat_term, res_term, depth_term,
                    use_depth=cfg.use_depth_loss)
                parts["res_reg"] = float(res_parts["reg"])
                parts["res_cls"] = float(res_parts["cls"])
            opt.zero_grad()
            loss.backward()
            opt.step()
            for name, value in parts.items():
                sums[name] = sums.get(name, 0.0) + value
        for name, value in sums.items():
            run.metric(epoch, phase, name, value / spe)
        msg = f"epoch {epoch} (phase {phase}): total {sums['total']/spe:.4f}"
        if cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            records, _ = evaluate_student(
                student, dataset, dataset.sample_ids(cfg.val_split),
                eval_cfg)
            final_ap = lookup_ap(records, "3d", "overall")
            run.metric(epoch, phase, "val_ap_3d", final_ap or 0.0)
            msg += f" | val 3D AP {final_ap:.4f}" if final_ap is not None \
                else " | val 3D AP NA"
        run.log(msg)

    ckpt = run.dir / "student.ckpt"
    save_checkpoint(ckpt, student, meta={"kind": "student",
                                         "config": cfg.to_dict(),
                                         "net": student.config(),
                                         "teacher_hash": t_hash})
    records, dets = evaluate_student(student, dataset,
                                     dataset.sample_ids(cfg.val_split),
                                     eval_cfg)
    (run.dir / "val_report.txt").write_text(record_lines(records))

    reads_after = dataset.label_read_counts()
    train_label_reads = {
        split: reads_after.get(split, 0) - label_reads_before.get(split, 0)
        for split in train_splits}
    report = {
        "kind": "student",
        "checkpoint": str(ckpt),
        "checkpoint_hash": checkpoint_hash(ckpt),
        "teacher_checkpoint": str(teacher_ckpt),
        "backbone_checkpoint": str(backbone_ckpt) if backbone_ckpt else None,
        "val_ap_3d": lookup_ap(records, "3d", "overall"),
        "val_ap_bev": lookup_ap(records, "bev", "overall"),
        "val_ap_3d_near": lookup_ap(records, "3d", "0-30m"),
        "val_ap_3d_far": lookup_ap(records, "3d", "30-50m"),
        "phase_a_epochs": n_phase_a,
        "phase_b_epochs": n_epochs - n_phase_a,
        "weight_transfer_done": transferred,
        "train_split_label_reads": train_label_reads,
        "mode": {"use_feat": cfg.use_feat, "use_res": cfg.use_res,
                 "use_conf_weight": cfg.use_conf_weight,
                 "use_depth_loss": cfg.use_depth_loss,
                 "hard_labels": cfg.hard_labels,
                 "use_domain_adapt": cfg.use_domain_adapt,
                 "depth_pretrain": backbone_ckpt is not None},
        "config_hash": cfg.config_hash(),
    }
    run.write_report(report)
    run.log(f"done: val 3D AP {report['val_ap_3d']}")
    run.close()
    return report
