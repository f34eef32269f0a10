"""Numpy backend: interpreted scalar kernels plus vectorized twins.

The pairwise IoU / NMS kernels run the interpreted ``_scalar`` code (slow
but identical math). The per-pixel and per-point kernels, which would be
unusably slow interpreted, have vectorized numpy implementations built from
the same elementwise arithmetic so results stay bit-identical with the
numba backend.
"""

import numpy as np

from ._scalar import (  # noqa: F401  (re-exported backend surface)
    iou_3d_matrix,
    iou_3d_pair,
    iou_bev_matrix,
    iou_bev_pair,
    nms_rotated,
    point_counts_in_boxes as _point_counts_scalar,
    rect_intersection_area,
)


def voxelize_points(points, origin, voxel_size, counts):
    idx_f = np.floor((points[:, :3] - origin[None, :]) / voxel_size[None, :])
    idx = idx_f.astype(np.int64)
    inside = np.all((idx_f >= 0) & (idx_f < counts[None, :]), axis=1)
    return idx, inside


def point_counts_in_boxes(points, boxes, cos_yaw, sin_yaw, inflate):
    m = boxes.shape[0]
    out = np.zeros(m, np.int64)
    for j in range(m):
        dx = points[:, 0] - boxes[j, 0]
        dy = points[:, 1] - boxes[j, 1]
        dz = points[:, 2] - boxes[j, 2]
        c = cos_yaw[j]
        s = sin_yaw[j]
        lx = c * dx + s * dy
        ly = -s * dx + c * dy
        hh = 0.5 * boxes[j, 3] + inflate
        hw = 0.5 * boxes[j, 4] + inflate
        hl = 0.5 * boxes[j, 5] + inflate
        out[j] = int(np.count_nonzero(
            (np.abs(lx) <= hl) & (np.abs(ly) <= hw) & (np.abs(dz) <= hh)))
    return out


def raycast_scene(dirs, cam_pos, boxes, cos_yaw, sin_yaw, ground_z,
                  light, ambient, diffuse, shade_far):
    h, w = dirs.shape[:2]
    dx = dirs[:, :, 0]
    dy = dirs[:, :, 1]
    dz = dirs[:, :, 2]

    best = np.full((h, w), np.inf, np.float64)
    nx = np.zeros((h, w), np.float64)
    ny = np.zeros((h, w), np.float64)
    nz = np.zeros((h, w), np.float64)

    # ground plane
    with np.errstate(divide="ignore", invalid="ignore"):
        sg = (ground_z - cam_pos[2]) / dz
    ground_hit = (np.abs(dz) > 1e-12) & (sg > 1e-6)
    best[ground_hit] = sg[ground_hit]
    nz[ground_hit] = 1.0

    for j in range(boxes.shape[0]):
        c = cos_yaw[j]
        s = sin_yaw[j]
        rx = cam_pos[0] - boxes[j, 0]
        ry = cam_pos[1] - boxes[j, 1]
        rz = cam_pos[2] - boxes[j, 2]
        o = np.array([c * rx + s * ry, -s * rx + c * ry, rz])
        f0 = c * dx + s * dy
        f1 = -s * dx + c * dy
        f2 = dz
        halves = (0.5 * boxes[j, 5], 0.5 * boxes[j, 4], 0.5 * boxes[j, 3])

        t_enter = np.full((h, w), -np.inf)
        t_exit = np.full((h, w), np.inf)
        axis = np.full((h, w), -1, np.int8)
        miss = np.zeros((h, w), np.bool_)
        ent_sign = np.zeros((h, w), np.float64)
        for a, f in enumerate((f0, f1, f2)):
            half = halves[a]
            par = np.abs(f) < 1e-12
            miss |= par & ((o[a] < -half) | (o[a] > half))
            with np.errstate(divide="ignore", invalid="ignore"):
                t0 = (-half - o[a]) / f
                t1 = (half - o[a]) / f
            lo = np.minimum(t0, t1)
            hi = np.maximum(t0, t1)
            upd = ~par & (lo > t_enter)
            t_enter = np.where(upd, lo, t_enter)
            axis = np.where(upd, np.int8(a), axis)
            ent_sign = np.where(upd, np.where(f > 0.0, -1.0, 1.0), ent_sign)
            t_exit = np.where(par, t_exit, np.minimum(t_exit, hi))
            miss |= t_enter > t_exit
        hit = (~miss & (axis >= 0) & (t_enter > 1e-6) & (t_enter < best))
        if not hit.any():
            continue
        best = np.where(hit, t_enter, best)
        lnx = np.where(axis == 0, ent_sign, 0.0)
        lny = np.where(axis == 1, ent_sign, 0.0)
        lnz = np.where(axis == 2, ent_sign, 0.0)
        nx = np.where(hit, c * lnx - s * lny, nx)
        ny = np.where(hit, s * lnx + c * lny, ny)
        nz = np.where(hit, lnz, nz)

    hit_any = best < np.inf
    flip = (nx * dx + ny * dy + nz * dz) > 0.0
    sgn = np.where(flip, -1.0, 1.0)
    nx, ny, nz = nx * sgn, ny * sgn, nz * sgn
    lam = np.maximum(0.0, nx * light[0] + ny * light[1] + nz * light[2])
    att = np.clip(1.0 - best / shade_far, 0.05, 1.0)
    val = np.clip((ambient + diffuse * lam) * att, 0.0, 1.0)
    shade = np.where(hit_any, val, 0.0).astype(np.float32)
    depth = np.where(hit_any, best, np.inf)
    return shade, depth
