"""Voxel grids, depth-bin discretizations, and frustum sampling coords."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .calib import Calibration

DEPTH_MODES = ("uniform", "linear-increasing")


@dataclass(frozen=True)
class VoxelGridSpec:
    """Regular 3D grid over the scene, LiDAR frame, half-open cells."""

    origin: tuple[float, float, float]
    voxel_size: tuple[float, float, float]
    counts: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "voxel_size",
                           tuple(float(v) for v in self.voxel_size))
        object.__setattr__(self, "counts", tuple(int(v) for v in self.counts))
        if any(v <= 0 for v in self.voxel_size):
            raise ValueError("voxel_size components must be positive")
        if any(c < 1 for c in self.counts):
            raise ValueError("counts must be >= 1")

    @property
    def extent_min(self) -> np.ndarray:
        return np.array(self.origin, np.float64)

    @property
    def extent_max(self) -> np.ndarray:
        return self.extent_min + np.array(self.counts) * np.array(self.voxel_size)

    def cell_center(self, idx: np.ndarray) -> np.ndarray:
        """Centers of cells given (..., 3) integer indices."""
        idx = np.asarray(idx, np.float64)
        return (self.extent_min + (idx + 0.5) * np.array(self.voxel_size))

    def all_cell_centers(self) -> np.ndarray:
        """(X, Y, Z, 3) array of all cell centers."""
        nx, ny, nz = self.counts
        ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                                 indexing="ij")
        idx = np.stack([ix, iy, iz], axis=-1)
        return self.cell_center(idx)


@dataclass(frozen=True)
class DepthBinSpec:
    """Discretization of a metric depth range into n_bins bins."""

    d_min: float
    d_max: float
    n_bins: int
    mode: str = "linear-increasing"

    def __post_init__(self):
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        if self.mode not in DEPTH_MODES:
            raise ValueError(f"mode must be one of {DEPTH_MODES}")


def depth_bin_edges(spec: DepthBinSpec) -> np.ndarray:
    """(n_bins + 1,) strictly increasing edge vector.

    uniform: equal widths. linear-increasing: widths grow linearly with bin
    index; edge_i = d_min + delta * i(i+1)/2 with
    delta = 2 (d_max - d_min) / (D (D + 1)).
    """
    d = spec.n_bins
    if spec.mode == "uniform":
        return np.linspace(spec.d_min, spec.d_max, d + 1)
    i = np.arange(d + 1, dtype=np.float64)
    delta = 2.0 * (spec.d_max - spec.d_min) / (d * (d + 1))
    edges = spec.d_min + delta * i * (i + 1) / 2.0
    edges[-1] = spec.d_max
    return edges


def depth_to_bin_coord(depth: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Continuous bin coordinate: containing-bin index plus the fractional
    position inside it, so the middle of bin k maps to k + 0.5. Values are
    computed for all inputs; range validity is the caller's concern."""
    depth = np.asarray(depth, np.float64)
    d = len(edges) - 1
    k = np.clip(np.searchsorted(edges, depth, side="right") - 1, 0, d - 1)
    lo = edges[k]
    hi = edges[k + 1]
    return k + (depth - lo) / (hi - lo)


def voxelize(points: np.ndarray, spec: VoxelGridSpec):
    """Assign (N, >=3) points to cells.

    Returns ((N, 3) int64 indices from floor arithmetic, (N,) bool in-range
    mask for half-open cells [lo, hi) on every axis).
    """
    pts = np.ascontiguousarray(np.asarray(points, np.float64)[:, :3])
    return kernels.voxelize_points(
        pts, np.array(spec.origin), np.array(spec.voxel_size),
        np.array(spec.counts, np.int64))


def frustum_sampling_coords(spec: VoxelGridSpec, bins: DepthBinSpec,
                            calib: Calibration,
                            feature_size: tuple[int, int]):
    """Continuous frustum coordinates of every voxel center.

    feature_size is the (W_I, H_I) spatial size of the reduced image
    feature map; image-plane pixel coordinates are rescaled into
    feature-map units where integer u_f/v_f sit at feature-pixel centers.
    The depth coordinate d_f is the continuous bin coordinate in [0, D].

    Returns (coords (X, Y, Z, 3) float32 with (u_f, v_f, d_f), valid
    (X, Y, Z) bool). A voxel is valid iff its center projects inside the
    image with positive camera depth inside [d_min, d_max].
    """
    w_i, h_i = feature_size
    w, h = calib.image_size
    centers = spec.all_cell_centers()
    flat = centers.reshape(-1, 3)
    uv, depth, proj_valid = calib.project_to_image(flat)
    u_f = uv[:, 0] * (w_i / w) - 0.5
    v_f = uv[:, 1] * (h_i / h) - 0.5
    edges = depth_bin_edges(bins)
    d_f = depth_to_bin_coord(depth, edges)
    valid = proj_valid & (depth >= bins.d_min) & (depth <= bins.d_max)
    coords = np.stack([u_f, v_f, d_f], axis=-1)
    coords[~valid] = -1e4
    shape = spec.counts
    return (coords.reshape(shape + (3,)).astype(np.float32),
            valid.reshape(shape))
