"""BEV feature-map rendering: four grayscale panels per sample comparing
the image branch (initial / after feature mimicry / after domain
adaptation) against the LiDAR branch."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from ..synthdata import Dataset
from ..teacher import pillar_mean_features
from .train import build_student, load_student_checkpoint, \
    load_teacher_checkpoint


def write_pgm(path, gray: np.ndarray):
    """Write a (H, W) array in [0, 1] as a binary 8-bit PGM image."""
    arr = np.clip(np.asarray(gray, np.float64), 0.0, 1.0)
    data = (arr * 255.0 + 0.5).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(data.tobytes())


def bev_to_gray(bev: torch.Tensor) -> np.ndarray:
    """Mean absolute activation over channels, normalized to [0, 1]."""
    mag = bev.detach().abs().mean(dim=0).cpu().numpy()
    peak = mag.max()
    return mag / peak if peak > 0 else mag


def render_bev_panels(student_ckpt, teacher_ckpt, dataset: Dataset,
                      sample_ids: list[str], out_dir) -> list[str]:
    """Write 4 PGM panels per sample.

    <id>_1_image_initial.pgm: pre-DA image BEV from a freshly initialized
    student (same seed, untrained); <id>_2_image_feat.pgm: pre-DA BEV of
    the trained student; <id>_3_image_feat_da.pgm: post-DA BEV of the
    trained student; <id>_4_lidar.pgm: teacher BEV features.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    student, s_cfg = load_student_checkpoint(student_ckpt)
    fresh = build_student(s_cfg)
    fresh.eval()
    teacher, _ = load_teacher_checkpoint(teacher_ckpt)
    written = []
    with torch.no_grad():
        for sid in sample_ids:
            sample = dataset.load(sid)
            image = torch.from_numpy(sample.image[:, :, 0])[None, None]
            grid, valid = student.sampling_grid(sample.calib)
            pre_t, post_t, _ = student.bev_maps(image, grid, valid)
            pre_0, _, _ = fresh.bev_maps(image, grid, valid)
            feats, occ = pillar_mean_features(sample.points, s_cfg.grid())
            t_bev = teacher.bev_features(torch.from_numpy(feats)[None],
                                         torch.from_numpy(occ)[None])
            panels = [
                (f"{sid}_1_image_initial.pgm", bev_to_gray(pre_0[0])),
                (f"{sid}_2_image_feat.pgm", bev_to_gray(pre_t[0])),
                (f"{sid}_3_image_feat_da.pgm", bev_to_gray(post_t[0])),
                (f"{sid}_4_lidar.pgm", bev_to_gray(t_bev[0])),
            ]
            for name, gray in panels:
                path = out_dir / name
                write_pgm(path, gray)
                written.append(str(path))
    return written
