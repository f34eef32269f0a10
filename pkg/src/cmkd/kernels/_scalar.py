"""Scalar compute kernels shared by the numba and numpy backends.

Everything in this module is written in njit-compatible style: plain loops,
``math`` scalar calls, preallocated buffers, float64 arithmetic. The numba
backend compiles these functions unchanged; the numpy backend interprets the
same code (vectorized twins exist only where interpretation would be
hopelessly slow, see ``_numpy.py``). Keeping one source for the scalar math
makes the two backends bit-identical.

BEV boxes are ``(x, y, w, l, yaw)`` rows; full boxes are
``(x, y, z, h, w, l, yaw)`` rows. ``l`` extends along the heading axis at
yaw 0, ``w`` across it, yaw is counterclockwise about +z.
"""

import math

import numpy as np

_EPS_AREA = 1e-12


def box_corners_bev(cx, cy, w, l, yaw, xs, ys):
    """Fill xs/ys (len 4) with the footprint corners in CCW order."""
    c = math.cos(yaw)
    s = math.sin(yaw)
    hl = 0.5 * l
    hw = 0.5 * w
    xs[0] = cx + c * hl - s * hw
    ys[0] = cy + s * hl + c * hw
    xs[1] = cx - c * hl - s * hw
    ys[1] = cy - s * hl + c * hw
    xs[2] = cx - c * hl + s * hw
    ys[2] = cy - s * hl - c * hw
    xs[3] = cx + c * hl + s * hw
    ys[3] = cy + s * hl - c * hw


def polygon_area(xs, ys, n):
    """Shoelace area of the first n vertices (positive for CCW)."""
    acc = 0.0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        acc += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * acc


def _clip_by_edge(sx, sy, ns, ax, ay, bx, by, ox, oy):
    """Clip polygon (sx, sy, ns) by the half-plane left of edge a->b.

    Writes the result into (ox, oy) and returns the new vertex count.
    Buffers must hold at least ns + 4 vertices.
    """
    ex = bx - ax
    ey = by - ay
    n_out = 0
    for i in range(ns):
        j = i + 1
        if j == ns:
            j = 0
        px = sx[i]
        py = sy[i]
        qx = sx[j]
        qy = sy[j]
        side_p = ex * (py - ay) - ey * (px - ax)
        side_q = ex * (qy - ay) - ey * (qx - ax)
        p_in = side_p >= 0.0
        q_in = side_q >= 0.0
        if p_in:
            ox[n_out] = px
            oy[n_out] = py
            n_out += 1
        if p_in != q_in:
            t = side_p / (side_p - side_q)
            ox[n_out] = px + t * (qx - px)
            oy[n_out] = py + t * (qy - py)
            n_out += 1
    return n_out


def rect_intersection_area(x1, y1, w1, l1, t1, x2, y2, w2, l2, t2):
    """Exact overlap area of two rotated rectangles (Sutherland-Hodgman)."""
    sx = np.empty(16, np.float64)
    sy = np.empty(16, np.float64)
    tx = np.empty(16, np.float64)
    ty = np.empty(16, np.float64)
    cxs = np.empty(4, np.float64)
    cys = np.empty(4, np.float64)
    box_corners_bev(x1, y1, w1, l1, t1, sx, sy)
    box_corners_bev(x2, y2, w2, l2, t2, cxs, cys)
    ns = 4
    for e in range(4):
        f = e + 1
        if f == 4:
            f = 0
        ns = _clip_by_edge(sx, sy, ns, cxs[e], cys[e], cxs[f], cys[f], tx, ty)
        if ns == 0:
            return 0.0
        for k in range(ns):
            sx[k] = tx[k]
            sy[k] = ty[k]
    area = polygon_area(sx, sy, ns)
    if area < 0.0:
        return 0.0
    return area


def _bev_less(x1, y1, w1, l1, t1, x2, y2, w2, l2, t2):
    """Lexicographic order on BEV box parameters (for exact symmetry)."""
    if x1 != x2:
        return x1 < x2
    if y1 != y2:
        return y1 < y2
    if w1 != w2:
        return w1 < w2
    if l1 != l2:
        return l1 < l2
    return t1 < t2


def iou_bev_pair(x1, y1, w1, l1, t1, x2, y2, w2, l2, t2):
    """Rotated BEV IoU of two boxes. Exactly symmetric in its arguments."""
    if _bev_less(x2, y2, w2, l2, t2, x1, y1, w1, l1, t1):
        x1, y1, w1, l1, t1, x2, y2, w2, l2, t2 = (
            x2, y2, w2, l2, t2, x1, y1, w1, l1, t1)
    a1 = w1 * l1
    a2 = w2 * l2
    if a1 <= _EPS_AREA or a2 <= _EPS_AREA:
        return 0.0
    # quick reject on circumscribed circles
    r1 = 0.5 * math.sqrt(w1 * w1 + l1 * l1)
    r2 = 0.5 * math.sqrt(w2 * w2 + l2 * l2)
    dx = x2 - x1
    dy = y2 - y1
    if dx * dx + dy * dy > (r1 + r2) * (r1 + r2):
        return 0.0
    inter = rect_intersection_area(x1, y1, w1, l1, t1, x2, y2, w2, l2, t2)
    if inter <= 0.0:
        return 0.0
    return inter / (a1 + a2 - inter)


def _full_less(a, b):
    """Lexicographic order on (x, y, z, h, w, l, yaw) rows."""
    for k in range(7):
        if a[k] != b[k]:
            return a[k] < b[k]
    return False


def iou_3d_pair(a, b):
    """3D IoU of two (x, y, z, h, w, l, yaw) boxes (BEV overlap x height)."""
    if _full_less(b, a):
        a, b = b, a
    h1 = a[3]
    h2 = b[3]
    v1 = h1 * a[4] * a[5]
    v2 = h2 * b[4] * b[5]
    if v1 <= _EPS_AREA or v2 <= _EPS_AREA:
        return 0.0
    zlo = max(a[2] - 0.5 * h1, b[2] - 0.5 * h2)
    zhi = min(a[2] + 0.5 * h1, b[2] + 0.5 * h2)
    dz = zhi - zlo
    if dz <= 0.0:
        return 0.0
    inter_bev = rect_intersection_area(
        a[0], a[1], a[4], a[5], a[6], b[0], b[1], b[4], b[5], b[6])
    vol = inter_bev * dz
    if vol <= 0.0:
        return 0.0
    return vol / (v1 + v2 - vol)


def iou_bev_matrix(boxes_a, boxes_b):
    """Pairwise rotated BEV IoU. Inputs (N, 5) and (M, 5), output (N, M)."""
    n = boxes_a.shape[0]
    m = boxes_b.shape[0]
    out = np.zeros((n, m), np.float64)
    for i in range(n):
        for j in range(m):
            out[i, j] = iou_bev_pair(
                boxes_a[i, 0], boxes_a[i, 1], boxes_a[i, 2], boxes_a[i, 3],
                boxes_a[i, 4],
                boxes_b[j, 0], boxes_b[j, 1], boxes_b[j, 2], boxes_b[j, 3],
                boxes_b[j, 4])
    return out


def iou_3d_matrix(boxes_a, boxes_b):
    """Pairwise 3D IoU. Inputs (N, 7) and (M, 7), output (N, M)."""
    n = boxes_a.shape[0]
    m = boxes_b.shape[0]
    out = np.zeros((n, m), np.float64)
    for i in range(n):
        for j in range(m):
            out[i, j] = iou_3d_pair(boxes_a[i], boxes_b[j])
    return out


def nms_rotated(boxes_bev, order, iou_threshold):
    """Greedy rotated NMS.

    boxes_bev: (N, 5) BEV boxes, order: (N,) int64 visit order (already
    sorted by descending score with deterministic tie-breaking). Returns a
    (N,) bool keep mask indexed like boxes_bev.
    """
    n = boxes_bev.shape[0]
    keep = np.zeros(n, np.bool_)
    dead = np.zeros(n, np.bool_)
    for oi in range(n):
        i = order[oi]
        if dead[i]:
            continue
        keep[i] = True
        for oj in range(oi + 1, n):
            j = order[oj]
            if dead[j]:
                continue
            iou = iou_bev_pair(
                boxes_bev[i, 0], boxes_bev[i, 1], boxes_bev[i, 2],
                boxes_bev[i, 3], boxes_bev[i, 4],
                boxes_bev[j, 0], boxes_bev[j, 1], boxes_bev[j, 2],
                boxes_bev[j, 3], boxes_bev[j, 4])
            if iou >= iou_threshold:
                dead[j] = True
    return keep


def voxelize_points(points, origin, voxel_size, counts):
    """Assign points to half-open voxel cells.

    Returns ((N, 3) int64 cell indices, (N,) bool in-range mask). Indices of
    out-of-range points are still the floor-arithmetic values.
    """
    n = points.shape[0]
    idx = np.empty((n, 3), np.int64)
    inside = np.empty(n, np.bool_)
    for i in range(n):
        ok = True
        for a in range(3):
            v = math.floor((points[i, a] - origin[a]) / voxel_size[a])
            idx[i, a] = int(v)
            if v < 0 or v >= counts[a]:
                ok = False
        inside[i] = ok
    return idx, inside


def point_counts_in_boxes(points, boxes, cos_yaw, sin_yaw, inflate):
    """Count points inside each (x, y, z, h, w, l, yaw) box, inflated by
    ``inflate`` meters on every half-extent."""
    n = points.shape[0]
    m = boxes.shape[0]
    counts = np.zeros(m, np.int64)
    for j in range(m):
        cx = boxes[j, 0]
        cy = boxes[j, 1]
        cz = boxes[j, 2]
        hh = 0.5 * boxes[j, 3] + inflate
        hw = 0.5 * boxes[j, 4] + inflate
        hl = 0.5 * boxes[j, 5] + inflate
        c = cos_yaw[j]
        s = sin_yaw[j]
        for i in range(n):
            dx = points[i, 0] - cx
            dy = points[i, 1] - cy
            dz = points[i, 2] - cz
            lx = c * dx + s * dy
            ly = -s * dx + c * dy
            if -hl <= lx <= hl and -hw <= ly <= hw and -hh <= dz <= hh:
                counts[j] += 1
    return counts


def raycast_scene(dirs, cam_pos, boxes, cos_yaw, sin_yaw, ground_z,
                  light, ambient, diffuse, shade_far):
    """Depth-buffer ray cast of cuboids plus an infinite ground plane.

    dirs: (H, W, 3) ray directions in the world (LiDAR) frame, scaled so the
    ray parameter equals camera-frame depth. boxes: (M, 7) full boxes with
    per-box cos/sin of yaw passed in (so both backends consume identical
    trig values). Returns (shade (H, W) float32 in [0, 1], depth (H, W)
    float64, inf where nothing is hit).
    """
    h = dirs.shape[0]
    w = dirs.shape[1]
    m = boxes.shape[0]
    shade = np.zeros((h, w), np.float32)
    depth = np.full((h, w), np.inf, np.float64)
    for iy in range(h):
        for ix in range(w):
            dx = dirs[iy, ix, 0]
            dy = dirs[iy, ix, 1]
            dz = dirs[iy, ix, 2]
            best_s = np.inf
            nx = 0.0
            ny = 0.0
            nz = 0.0
            # ground plane z = ground_z, normal +z
            if dz < -1e-12 or dz > 1e-12:
                sg = (ground_z - cam_pos[2]) / dz
                if sg > 1e-6:
                    best_s = sg
                    nx = 0.0
                    ny = 0.0
                    nz = 1.0
            for j in range(m):
                c = cos_yaw[j]
                s = sin_yaw[j]
                # ray origin/direction in the box frame
                rx = cam_pos[0] - boxes[j, 0]
                ry = cam_pos[1] - boxes[j, 1]
                rz = cam_pos[2] - boxes[j, 2]
                ox = c * rx + s * ry
                oy = -s * rx + c * ry
                oz = rz
                fx = c * dx + s * dy
                fy = -s * dx + c * dy
                fz = dz
                hl = 0.5 * boxes[j, 5]
                hw = 0.5 * boxes[j, 4]
                hh = 0.5 * boxes[j, 3]
                t_enter = -np.inf
                t_exit = np.inf
                axis = -1
                miss = False
                for a in range(3):
                    if a == 0:
                        o = ox
                        f = fx
                        half = hl
                    elif a == 1:
                        o = oy
                        f = fy
                        half = hw
                    else:
                        o = oz
                        f = fz
                        half = hh
                    if -1e-12 < f < 1e-12:
                        if o < -half or o > half:
                            miss = True
                            break
                    else:
                        t0 = (-half - o) / f
                        t1 = (half - o) / f
                        if t0 > t1:
                            tt = t0
                            t0 = t1
                            t1 = tt
                        if t0 > t_enter:
                            t_enter = t0
                            axis = a
                        if t1 < t_exit:
                            t_exit = t1
                        if t_enter > t_exit:
                            miss = True
                            break
                if miss or axis < 0:
                    continue
                if t_enter <= 1e-6 or t_enter >= best_s:
                    continue
                best_s = t_enter
                # entering-face normal in the box frame, then back to world
                if axis == 0:
                    lnx = -1.0 if fx > 0.0 else 1.0
                    lny = 0.0
                    lnz = 0.0
                elif axis == 1:
                    lnx = 0.0
                    lny = -1.0 if fy > 0.0 else 1.0
                    lnz = 0.0
                else:
                    lnx = 0.0
                    lny = 0.0
                    lnz = -1.0 if fz > 0.0 else 1.0
                nx = c * lnx - s * lny
                ny = s * lnx + c * lny
                nz = lnz
            if best_s < np.inf:
                if nx * dx + ny * dy + nz * dz > 0.0:
                    nx = -nx
                    ny = -ny
                    nz = -nz
                lam = nx * light[0] + ny * light[1] + nz * light[2]
                if lam < 0.0:
                    lam = 0.0
                att = 1.0 - best_s / shade_far
                if att < 0.05:
                    att = 0.05
                elif att > 1.0:
                    att = 1.0
                val = (ambient + diffuse * lam) * att
                if val < 0.0:
                    val = 0.0
                elif val > 1.0:
                    val = 1.0
                shade[iy, ix] = np.float32(val)
                depth[iy, ix] = best_s
    return shade, depth
