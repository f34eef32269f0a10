"""Soft labels: teacher predictions used as response supervision."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import Box3D, boxes_to_array
from ..synthdata import read_labels, write_labels


@dataclass(frozen=True)
class SoftLabel:
    """One teacher prediction: box, class, and IoU-aware confidence s."""

    box: Box3D
    class_id: int
    s: float

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.s}")

    @classmethod
    def from_box(cls, box: Box3D) -> "SoftLabel":
        return cls(box=box, class_id=box.class_id, s=box.score)


def generate_soft_labels(teacher, points: np.ndarray) -> list[SoftLabel]:
    """Run the (frozen) teacher on a point cloud and wrap every surviving
    detection as a soft label with s equal to its predicted score."""
    _, detections = teacher.predict(points)
    return [SoftLabel.from_box(b) for b in detections]


def soft_labels_to_array(labels: list[SoftLabel]) -> np.ndarray:
    """(N, 9) supervision rows; the score column carries s."""
    return boxes_to_array([sl.box for sl in labels])


class SoftLabelCache:
    """Disk cache of soft labels keyed by teacher checkpoint hash.

    Labels live under ``<root>/<teacher_hash>/<sample_id>.label`` in the
    standard label text format (score column = s), so a changed teacher
    checkpoint automatically invalidates the cache.
    """

    def __init__(self, root, teacher_hash: str):
        self.dir = Path(root) / teacher_hash
        self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, sample_id: str) -> Path:
        return self.dir / f"{sample_id}.label"

    def has(self, sample_id: str) -> bool:
        return self.path(sample_id).is_file()

    def store(self, sample_id: str, labels: list[SoftLabel]):
        write_labels(self.path(sample_id), [sl.box for sl in labels])

    def load(self, sample_id: str) -> list[SoftLabel]:
        boxes = read_labels(self.path(sample_id))
        return [SoftLabel.from_box(b) for b in boxes]

    def get_or_compute(self, sample_id: str, teacher,
                       points: np.ndarray) -> list[SoftLabel]:
        if not self.has(sample_id):
            self.store(sample_id, generate_soft_labels(teacher, points))
        return self.load(sample_id)
