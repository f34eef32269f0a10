"""Dataset persistence.

Per sample: ``<id>.img`` (two little-endian int32 dims H W, then row-major
float32 pixels), ``<id>.pts`` (little-endian int32 count, then N x 4
float32), ``<id>.calib`` (text), ``<id>.label`` (text, one
``class x y z h w l yaw score`` line per box; absent for unlabeled
samples). ``manifest.txt`` lists ``split_name sample_id`` per line.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..geometry import Box3D, Calibration
from .scenes import SceneSample, SceneSpec, generate_scene

MANIFEST = "manifest.txt"


class DatasetError(RuntimeError):
    """Missing or malformed dataset file."""


class UnlabeledAccessError(RuntimeError):
    """Hard labels were requested for a sample that has none."""


def _write_image(path: Path, image: np.ndarray):
    img = np.asarray(image, np.float32)
    if img.ndim == 3:
        img = img[:, :, 0]
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<ii", h, w))
        f.write(np.ascontiguousarray(img, "<f4").tobytes())


def _read_image(path: Path) -> np.ndarray:
    try:
        raw = path.read_bytes()
        h, w = struct.unpack_from("<ii", raw)
        n = h * w
        img = np.frombuffer(raw, "<f4", count=n, offset=8)
        if len(img) != n or len(raw) != 8 + 4 * n:
            raise ValueError("truncated image payload")
        return img.reshape(h, w, 1).copy()
    except (struct.error, ValueError) as exc:
        raise DatasetError(f"malformed image file {path}: {exc}") from exc


def _write_points(path: Path, points: np.ndarray):
    pts = np.ascontiguousarray(np.asarray(points, np.float32).reshape(-1, 4),
                               "<f4")
    with open(path, "wb") as f:
        f.write(struct.pack("<i", len(pts)))
        f.write(pts.tobytes())


def _read_points(path: Path) -> np.ndarray:
    try:
        raw = path.read_bytes()
        (n,) = struct.unpack_from("<i", raw)
        pts = np.frombuffer(raw, "<f4", count=n * 4, offset=4)
        if len(pts) != n * 4 or len(raw) != 4 + 16 * n:
            raise ValueError("truncated point payload")
        return pts.reshape(n, 4).copy()
    except (struct.error, ValueError) as exc:
        raise DatasetError(f"malformed point file {path}: {exc}") from exc


def write_labels(path: Path, boxes: list[Box3D]):
    lines = [f"{b.class_id:d} {b.x!r} {b.y!r} {b.z!r} {b.h!r} {b.w!r} "
             f"{b.l!r} {b.yaw!r} {b.score!r}" for b in boxes]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def read_labels(path: Path) -> list[Box3D]:
    boxes = []
    try:
        for ln, line in enumerate(path.read_text().splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 9:
                raise ValueError(f"line {ln}: expected 9 fields, "
                                 f"got {len(parts)}")
            cls = int(parts[0])
            x, y, z, h, w, l, yaw, score = (float(v) for v in parts[1:])
            boxes.append(Box3D(x=x, y=y, z=z, h=h, w=w, l=l, yaw=yaw,
                               class_id=cls, score=score))
    except (ValueError, OSError) as exc:
        raise DatasetError(f"malformed label file {path}: {exc}") from exc
    return boxes


def write_sample(root: Path, sample: SceneSample):
    root = Path(root)
    sid = sample.sample_id
    _write_image(root / f"{sid}.img", sample.image)
    _write_points(root / f"{sid}.pts", sample.points)
    (root / f"{sid}.calib").write_text(sample.calib.to_text())
    if sample.labeled:
        write_labels(root / f"{sid}.label", sample.hard_labels or [])


def write_dataset(samples_by_split: dict[str, list[SceneSample]],
                  root) -> None:
    """Persist samples and a manifest. Round-trips exactly."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for split, samples in samples_by_split.items():
        for sample in samples:
            write_sample(root, sample)
            lines.append(f"{split} {sample.sample_id}")
    (root / MANIFEST).write_text("\n".join(lines) + ("\n" if lines else ""))


def generate_dataset(spec: SceneSpec, split_sizes: dict[str, int], root,
                     start_index: int = 0) -> dict[str, list[str]]:
    """Generate and stream scenes to disk.

    Scene indices run sequentially across splits in the order given, so two
    datasets generated from the same spec share their underlying scenes
    regardless of how the split boundaries are drawn. Splits whose name
    contains "unlabeled" are written without label files.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    index = start_index
    manifest_lines = []
    splits: dict[str, list[str]] = {}
    for split, size in split_sizes.items():
        unlabeled = "unlabeled" in split
        ids = []
        for _ in range(size):
            sample = generate_scene(spec, index)
            if unlabeled:
                sample.labeled = False
                sample.hard_labels = None
            write_sample(root, sample)
            ids.append(sample.sample_id)
            manifest_lines.append(f"{split} {sample.sample_id}")
            index += 1
        splits[split] = ids
    (root / MANIFEST).write_text("\n".join(manifest_lines)
                                 + ("\n" if manifest_lines else ""))
    return splits


class Dataset:
    """Read view over a persisted dataset.

    ``load`` returns samples without hard labels; label access goes through
    :meth:`labels`, which errors on unlabeled samples and counts reads per
    split so training runs can prove which supervision they touched.
    """

    def __init__(self, root):
        self.root = Path(root)
        manifest = self.root / MANIFEST
        if not manifest.is_file():
            raise DatasetError(f"missing manifest {manifest}")
        self.splits: dict[str, list[str]] = {}
        self._split_of: dict[str, str] = {}
        for ln, line in enumerate(manifest.read_text().splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DatasetError(
                    f"malformed manifest line {ln} in {manifest}: {line!r}")
            split, sid = parts
            self.splits.setdefault(split, []).append(sid)
            self._split_of[sid] = split
            for ext in (".img", ".pts", ".calib"):
                p = self.root / f"{sid}{ext}"
                if not p.is_file():
                    raise DatasetError(
                        f"manifest lists unknown sample {sid!r}: "
                        f"missing {p}")
        self.label_reads: dict[str, int] = {}
        self._calib_cache: dict[str, Calibration] = {}

    def sample_ids(self, split: str) -> list[str]:
        if split not in self.splits:
            raise DatasetError(f"dataset has no split {split!r} "
                               f"(has {sorted(self.splits)})")
        return list(self.splits[split])

    def split_of(self, sample_id: str) -> str:
        return self._split_of[sample_id]

    def is_labeled(self, sample_id: str) -> bool:
        return (self.root / f"{sample_id}.label").is_file()

    def calib(self, sample_id: str) -> Calibration:
        key = sample_id
        if key not in self._calib_cache:
            path = self.root / f"{sample_id}.calib"
            try:
                self._calib_cache[key] = Calibration.from_text(
                    path.read_text())
            except (ValueError, OSError) as exc:
                raise DatasetError(
                    f"malformed calibration file {path}: {exc}") from exc
        return self._calib_cache[key]

    def load(self, sample_id: str) -> SceneSample:
        """Load image/points/calib. Hard labels are never attached here."""
        if sample_id not in self._split_of:
            raise DatasetError(f"unknown sample id {sample_id!r}")
        return SceneSample(
            image=_read_image(self.root / f"{sample_id}.img"),
            points=_read_points(self.root / f"{sample_id}.pts"),
            calib=self.calib(sample_id),
            hard_labels=None,
            sample_id=sample_id,
            labeled=self.is_labeled(sample_id))

    def labels(self, sample_id: str) -> list[Box3D]:
        """Hard labels of a labeled sample; counted per split."""
        path = self.root / f"{sample_id}.label"
        if not path.is_file():
            raise UnlabeledAccessError(
                f"sample {sample_id!r} is unlabeled; hard labels are not "
                "available to this code path")
        split = self._split_of.get(sample_id, "?")
        self.label_reads[split] = self.label_reads.get(split, 0) + 1
        return read_labels(path)

    def label_read_counts(self) -> dict[str, int]:
        return dict(self.label_reads)


def read_dataset(root) -> Dataset:
    return Dataset(root)
