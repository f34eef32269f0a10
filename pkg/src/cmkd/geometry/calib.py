"""Pinhole camera calibration and LiDAR-to-image projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Calibration:
    """Camera intrinsics plus the rigid LiDAR -> camera transform.

    intrinsics: (3, 3) camera matrix (fx, fy focal lengths and cx, cy
    principal point, all in pixels). cam_from_lidar: (4, 4) rigid transform
    taking LiDAR-frame points (meters) to camera-frame points. image_size:
    (W, H) pixels.
    """

    intrinsics: np.ndarray
    cam_from_lidar: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self):
        k = np.asarray(self.intrinsics, np.float64)
        t = np.asarray(self.cam_from_lidar, np.float64)
        if k.shape != (3, 3):
            raise ValueError(f"intrinsics must be 3x3, got {k.shape}")
        if t.shape != (4, 4):
            raise ValueError(f"cam_from_lidar must be 4x4, got {t.shape}")
        w, h = self.image_size
        if not (k[0, 0] > 0 and k[1, 1] > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < k[0, 2] < w and 0 < k[1, 2] < h):
            raise ValueError("principal point must lie inside the image")
        r = t[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation block is not orthonormal")
        if not np.isclose(np.linalg.det(r), 1.0, atol=1e-6):
            raise ValueError("rotation block must have determinant 1")
        if not (np.allclose(t[3, :3], 0.0) and np.isclose(t[3, 3], 1.0)):
            raise ValueError("last row of cam_from_lidar must be [0 0 0 1]")
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "cam_from_lidar", t)
        object.__setattr__(self, "image_size",
                           (int(self.image_size[0]), int(self.image_size[1])))

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])

    def lidar_to_cam(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 3) LiDAR-frame points to the camera frame."""
        p = np.asarray(points, np.float64)
        return p @ self.cam_from_lidar[:3, :3].T + self.cam_from_lidar[:3, 3]

    def camera_center_lidar(self) -> np.ndarray:
        """Camera center expressed in the LiDAR frame."""
        r = self.cam_from_lidar[:3, :3]
        t = self.cam_from_lidar[:3, 3]
        return -(r.T @ t)

    def project_to_image(self, points: np.ndarray):
        """Project (N, 3) LiDAR-frame points onto the image plane.

        Returns (uv (N, 2) float64, depth (N,) float64 camera-frame depth,
        valid (N,) bool). A point is valid iff its camera depth is positive
        and (u, v) falls inside [0, W) x [0, H). Invalid points keep their
        computed coordinates so callers can inspect them.
        """
        pc = self.lidar_to_cam(points)
        z = pc[:, 2]
        safe_z = np.where(z != 0.0, z, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * pc[:, 0] / safe_z + self.cx
            v = self.fy * pc[:, 1] / safe_z + self.cy
        w, h = self.image_size
        valid = (z > 0) & (u >= 0) & (u < w) & (v >= 0) & (v < h)
        return np.stack([u, v], axis=1), z, valid

    def to_text(self) -> str:
        """Serialize in the plain-text calibration format."""
        p = np.hstack([self.intrinsics, np.zeros((3, 1))])
        vals_p = " ".join(repr(float(x)) for x in p.ravel())
        vals_t = " ".join(repr(float(x))
                          for x in self.cam_from_lidar.ravel())
        w, h = self.image_size
        return f"P: {vals_p}\nTr: {vals_t}\nsize: {w} {h}\n"

    @classmethod
    def from_text(cls, text: str) -> "Calibration":
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ValueError(f"malformed calibration line: {line!r}")
            key, _, rest = line.partition(":")
            fields[key.strip()] = rest.split()
        for key, count in (("P", 12), ("Tr", 16), ("size", 2)):
            if key not in fields:
                raise ValueError(f"calibration missing key {key!r}")
            if len(fields[key]) != count:
                raise ValueError(
                    f"calibration key {key!r} expects {count} values, "
                    f"got {len(fields[key])}")
        p = np.array([float(x) for x in fields["P"]]).reshape(3, 4)
        tr = np.array([float(x) for x in fields["Tr"]]).reshape(4, 4)
        w, h = (int(x) for x in fields["size"])
        if not np.allclose(p[:, 3], 0.0):
            raise ValueError("projection matrix must be [K|0]")
        return cls(intrinsics=p[:, :3], cam_from_lidar=tr, image_size=(w, h))


def project_to_image(points: np.ndarray, calib: Calibration):
    """Functional form of :meth:`Calibration.project_to_image`."""
    return calib.project_to_image(points)


def forward_facing_calibration(image_size=(256, 256), focal=256.0,
                               cam_height=0.0) -> Calibration:
    """Camera at the LiDAR origin looking along LiDAR +x.

    Camera axes: x right (-y LiDAR), y down (-z LiDAR), z forward (+x
    LiDAR). ``cam_height`` displaces the camera along LiDAR z.
    """
    w, h = image_size
    k = np.array([[focal, 0.0, w / 2.0],
                  [0.0, focal, h / 2.0],
                  [0.0, 0.0, 1.0]])
    r = np.array([[0.0, -1.0, 0.0],
                  [0.0, 0.0, -1.0],
                  [1.0, 0.0, 0.0]])
    t = np.eye(4)
    t[:3, :3] = r
    t[:3, 3] = -r @ np.array([0.0, 0.0, cam_height])
    return Calibration(intrinsics=k, cam_from_lidar=t, image_size=(w, h))
