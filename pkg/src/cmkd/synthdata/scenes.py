"""Procedural scene generation: boxes on a ground plane, simulated LiDAR
returns, and a shaded depth render for the monocular branch.

Everything is a pure function of (SceneSpec, index): regenerating a scene
with the same inputs is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..geometry import (
    Box3D,
    Calibration,
    VoxelGridSpec,
    boxes_to_array,
    iou_bev_matrix,
)

# shading constants shared by every render
LIGHT_DIR = np.array([-0.35, 0.25, 0.9]) / math.sqrt(
    0.35 * 0.35 + 0.25 * 0.25 + 0.9 * 0.9)
AMBIENT = 0.25
DIFFUSE = 0.75
SHADE_FAR = 80.0

# default vehicle-like size intervals: (h, w, l) in meters
DEFAULT_SIZE_RANGES = {0: ((1.4, 1.9), (1.6, 2.1), (3.4, 4.6))}


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one family of procedurally generated scenes."""

    seed: int
    sensor: Calibration
    grid: VoxelGridSpec
    n_objects_range: tuple[int, int] = (1, 5)
    object_size_ranges: dict = field(
        default_factory=lambda: dict(DEFAULT_SIZE_RANGES))
    placement_region: tuple[float, float, float, float] = (8.0, 50.0, -18.0, 18.0)
    lidar_points_per_scene: int = 4096
    ground_noise_std: float = 0.03
    ground_z: float = -1.6
    min_points_per_box: int = 20
    object_point_fraction: float = 0.45
    keep_in_camera_fov: bool = True
    fov_margin_px: float = 6.0

    def __post_init__(self):
        lo, hi = self.n_objects_range
        if lo > hi or lo < 0:
            raise ValueError("n_objects_range must satisfy 0 <= min <= max")
        for cls, ranges in self.object_size_ranges.items():
            for interval in ranges:
                if not (0 < interval[0] <= interval[1]):
                    raise ValueError(
                        f"size interval for class {cls} must be positive")
        x0, x1, y0, y1 = self.placement_region
        gmin = self.grid.extent_min
        gmax = self.grid.extent_max
        if not (gmin[0] <= x0 < x1 <= gmax[0]
                and gmin[1] <= y0 < y1 <= gmax[1]):
            raise ValueError(
                "placement region must lie inside the voxel grid footprint")
        if self.lidar_points_per_scene < 1:
            raise ValueError("lidar_points_per_scene must be >= 1")


@dataclass
class SceneSample:
    """One paired training example."""

    image: np.ndarray            # (H, W, 1) float32 in [0, 1]
    points: np.ndarray           # (N, 4) float32: x, y, z, intensity
    calib: Calibration
    hard_labels: list[Box3D] | None
    sample_id: str
    labeled: bool = True


def _camera_rays(calib: Calibration) -> np.ndarray:
    """(H, W, 3) LiDAR-frame ray directions through pixel centers, scaled so
    the ray parameter equals camera-frame depth."""
    w, h = calib.image_size
    u = np.arange(w) + 0.5
    v = np.arange(h) + 0.5
    uu, vv = np.meshgrid(u, v)
    pix = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
    kinv = np.linalg.inv(calib.intrinsics)
    dirs_cam = pix @ kinv.T
    # rows of cam_from_lidar rotate lidar->cam; transpose goes back
    return dirs_cam @ calib.cam_from_lidar[:3, :3]


def render_scene(boxes: np.ndarray, calib: Calibration, ground_z: float):
    """Ray-cast shaded depth render. Returns (image (H, W, 1) float32,
    depth (H, W) float64 camera-frame depth, inf where nothing is hit)."""
    boxes = np.asarray(boxes, np.float64).reshape(-1, 7)
    dirs = _camera_rays(calib)
    cam = calib.camera_center_lidar()
    cos_yaw = np.cos(boxes[:, 6])
    sin_yaw = np.sin(boxes[:, 6])
    shade, depth = kernels.raycast_scene(
        dirs, cam, boxes, cos_yaw, sin_yaw, float(ground_z), LIGHT_DIR,
        AMBIENT, DIFFUSE, SHADE_FAR)
    return shade[..., None], depth


def render_image(boxes: np.ndarray, calib: Calibration,
                 ground_z: float) -> np.ndarray:
    """(H, W, 1) float32 shaded depth render (z-buffer nearest hit)."""
    return render_scene(boxes, calib, ground_z)[0]


def _visible_faces(box: np.ndarray, sensor_pos: np.ndarray):
    """Faces of a cuboid facing the sensor.

    Yields (center (3,), u_axis (3,), v_axis (3,), u_half, v_half, area).
    """
    x, y, z, h, w, l, yaw = box
    c, s = math.cos(yaw), math.sin(yaw)
    ax_l = np.array([c, s, 0.0])
    ax_w = np.array([-s, c, 0.0])
    ax_h = np.array([0.0, 0.0, 1.0])
    center = np.array([x, y, z])
    faces = (
        (ax_l, l / 2, ax_w, w / 2, ax_h, h / 2),   # +/- length faces
        (ax_w, w / 2, ax_l, l / 2, ax_h, h / 2),   # +/- width faces
        (ax_h, h / 2, ax_l, l / 2, ax_w, w / 2),   # top / bottom
    )
    out = []
    for normal_ax, n_half, u_ax, u_half, v_ax, v_half in faces:
        for sign in (1.0, -1.0):
            fc = center + sign * n_half * normal_ax
            if float(np.dot(sign * normal_ax, sensor_pos - fc)) <= 0.0:
                continue
            out.append((fc, u_ax, u_half, v_ax, v_half,
                        4.0 * u_half * v_half))
    return out


def simulate_lidar(boxes: np.ndarray, spec: SceneSpec,
                   rng: np.random.Generator) -> np.ndarray:
    """Sample LiDAR returns for placed boxes plus the ground plane.

    Object points are drawn on sensor-facing cuboid faces with per-face
    counts proportional to area / squared distance (with a small per-box
    floor); ground points cover the grid footprint with clipped Gaussian
    height noise. Intensity is 1.0 for objects, 0.2 for ground. All points
    lie inside the voxel grid.
    """
    boxes = np.asarray(boxes, np.float64).reshape(-1, 7)
    sensor = np.zeros(3)
    total = spec.lidar_points_per_scene
    n_obj_target = int(round(total * spec.object_point_fraction)) \
        if len(boxes) else 0

    chunks = []
    if n_obj_target > 0:
        per_box_faces = [_visible_faces(b, sensor) for b in boxes]
        weights = []
        for faces in per_box_faces:
            for fc, _, _, _, _, area in faces:
                d2 = max(1.0, float(fc @ fc))
                weights.append(area / d2)
        weights = np.asarray(weights)
        alloc = np.round(n_obj_target * weights / weights.sum()).astype(int)
        # per-box floor so every object stays detectable
        floor = max(spec.min_points_per_box + 4, 24)
        pos = 0
        for faces in per_box_faces:
            k = len(faces)
            short = floor - int(alloc[pos:pos + k].sum())
            if short > 0 and k > 0:
                order = np.argsort(-weights[pos:pos + k])
                alloc[pos + order[0]] += short
            pos += k
        pos = 0
        for faces in per_box_faces:
            for fc, u_ax, u_half, v_ax, v_half, _ in faces:
                n = int(alloc[pos])
                pos += 1
                if n <= 0:
                    continue
                a = rng.uniform(-u_half, u_half, n)
                b = rng.uniform(-v_half, v_half, n)
                pts = fc[None, :] + a[:, None] * u_ax[None, :] \
                    + b[:, None] * v_ax[None, :]
                chunks.append(np.column_stack([pts, np.ones(n)]))

    n_ground = max(1, total - sum(len(c) for c in chunks))
    gmin = spec.grid.extent_min
    gmax = spec.grid.extent_max
    margin = 1e-3
    gx = rng.uniform(gmin[0] + margin, gmax[0] - margin, n_ground)
    gy = rng.uniform(gmin[1] + margin, gmax[1] - margin, n_ground)
    noise = np.clip(rng.normal(0.0, spec.ground_noise_std, n_ground),
                    -5.0 * spec.ground_noise_std,
                    5.0 * spec.ground_noise_std)
    gz = spec.ground_z + noise
    chunks.append(np.column_stack([gx, gy, gz, np.full(n_ground, 0.2)]))

    pts = np.concatenate(chunks, axis=0)
    inside = np.all((pts[:, :3] >= gmin) & (pts[:, :3] < gmax), axis=1)
    pts = pts[inside]
    if len(pts) == 0:   # degenerate spec; keep the N >= 1 invariant
        pts = np.array([[gmin[0] + margin, gmin[1] + margin,
                         spec.ground_z, 0.2]])
    return pts.astype(np.float32)


def _sample_boxes(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample non-overlapping, optionally camera-visible boxes.

    Returns (M, 8): box7 + class id. Placement failures shrink the scene
    rather than erroring.
    """
    lo, hi = spec.n_objects_range
    n_target = int(rng.integers(lo, hi + 1))
    class_ids = sorted(spec.object_size_ranges)
    placed = []
    classes = []
    x0, x1, y0, y1 = spec.placement_region
    for _ in range(n_target):
        for _attempt in range(100):
            cls = class_ids[int(rng.integers(0, len(class_ids)))]
            (h0, h1), (w0, w1), (l0, l1) = spec.object_size_ranges[cls]
            h = float(rng.uniform(h0, h1))
            w = float(rng.uniform(w0, w1))
            l = float(rng.uniform(l0, l1))
            x = float(rng.uniform(x0, x1))
            y = float(rng.uniform(y0, y1))
            yaw = float(rng.uniform(-math.pi, math.pi))
            z = spec.ground_z + h / 2.0
            cand = np.array([x, y, z, h, w, l, yaw])
            if spec.keep_in_camera_fov:
                uv, _, ok = spec.sensor.project_to_image(cand[None, :3])
                m = spec.fov_margin_px
                wpx, hpx = spec.sensor.image_size
                if not ok[0] or not (m <= uv[0, 0] <= wpx - m
                                     and m <= uv[0, 1] <= hpx - m):
                    continue
            if placed:
                grown = cand.copy()
                grown[4] += 0.5   # quarter-meter clearance per side
                grown[5] += 0.5
                if iou_bev_matrix(grown[None, :], np.asarray(placed)).max() > 0.0:
                    continue
            placed.append(cand)
            classes.append(cls)
            break
    if not placed:
        return np.zeros((0, 8))
    return np.column_stack([np.asarray(placed), np.asarray(classes, float)])


def generate_scene(spec: SceneSpec, index: int) -> SceneSample:
    """Generate one deterministic scene.

    If a sampled layout leaves any box with fewer than
    ``spec.min_points_per_box`` simulated LiDAR points, the whole scene is
    regenerated from a derived seed.
    """
    for attempt in range(50):
        rng = np.random.default_rng(
            np.random.SeedSequence((spec.seed, index, attempt)))
        boxes8 = _sample_boxes(spec, rng)
        boxes7 = boxes8[:, :7]
        points = simulate_lidar(boxes7, spec, rng)
        if len(boxes7):
            counts = kernels.point_counts_in_boxes(
                points[:, :3].astype(np.float64),
                np.ascontiguousarray(boxes7),
                np.cos(boxes7[:, 6]), np.sin(boxes7[:, 6]), 0.01)
            if counts.min() < spec.min_points_per_box:
                continue
        image = render_image(boxes7, spec.sensor, spec.ground_z)
        labels = [Box3D(x=b[0], y=b[1], z=b[2], h=b[3], w=b[4], l=b[5],
                        yaw=b[6], class_id=int(b[7]), score=1.0)
                  for b in boxes8]
        return SceneSample(image=image, points=points, calib=spec.sensor,
                           hard_labels=labels,
                           sample_id=f"s{index:06d}", labeled=True)
    raise RuntimeError(
        f"scene {index} failed the min-points rule 50 times; the spec's "
        "point budget is too small for its object sizes")


def scene_labels_array(sample: SceneSample) -> np.ndarray:
    """(N, 9) label array of a labeled sample."""
    if sample.hard_labels is None:
        raise ValueError(f"sample {sample.sample_id} has no labels")
    return boxes_to_array(sample.hard_labels)
