"""Run configuration: defaults, config-file parsing, derived objects.

Config files are flat ``key = value`` text with dotted section prefixes
("train.lr_student = 0.002"); the part after the first dot names a
RunConfig field. ``#`` starts a comment.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..geometry import (
    Calibration,
    DepthBinSpec,
    VoxelGridSpec,
    forward_facing_calibration,
)
from ..netblocks import AnchorGrid
from ..synthdata import SceneSpec

ENV_DATA_ROOT = "CMKD_DATA_ROOT"


@dataclass
class RunConfig:
    """Everything a run needs; defaults are the desk-scale configuration."""

    # dataset location and split names
    data_root: str = ""
    train_split: str = "train_labeled"
    unlabeled_split: str = "train_unlabeled"
    val_split: str = "val"

    # dataset generation
    n_train_labeled: int = 2000
    n_train_unlabeled: int = 0
    n_val: int = 500
    dataset_seed: int = 7240901

    # shared discretizations
    grid_origin: tuple = (0.0, -40.0, -3.0)
    grid_voxel_size: tuple = (0.625, 0.625, 0.5)
    grid_counts: tuple = (128, 128, 8)
    d_min: float = 2.0
    d_max: float = 60.0
    depth_bins: int = 48
    depth_mode: str = "linear-increasing"

    # sensor and scenes
    image_width: int = 256
    image_height: int = 256
    focal: float = 256.0
    objects_min: int = 1
    objects_max: int = 5
    points_per_scene: int = 4096
    ground_noise_std: float = 0.03
    region_x_min: float = 8.0
    region_x_max: float = 50.0
    region_y_min: float = -18.0
    region_y_max: float = 18.0

    # channel plan (z * c_voxel must equal c_reduced)
    c_reduced: int = 32
    c_voxel: int = 4
    feat_channels: int = 32
    out_channels: int = 48
    stage_channels: tuple = (48, 64)
    decode_channels: int = 56
    head_channels: int = 64
    normalization: str = "batch"

    # optimization
    lr_teacher: float = 3e-3
    lr_student: float = 2.5e-3
    lr_depth: float = 2.5e-3
    weight_decay: float = 0.0
    batch_size: int = 4
    teacher_epochs: int = 12
    student_epochs: int = 4
    depth_epochs: int = 3
    phase_split: float = 0.75
    seed: int = 0
    eval_every: int = 1

    # mode flags (the ablation axes)
    use_feat: bool = True
    use_res: bool = True
    use_conf_weight: bool = True
    use_depth_loss: bool = False
    hard_labels: bool = False
    depth_pretrain: bool = True
    use_domain_adapt: bool = True
    cls_target_mode: str = "quality"

    # semi-supervised
    labeled_fraction: float = 1.0

    # evaluation
    eval_iou: float = 0.5
    recall_positions: int = 40
    max_range: float = 60.0

    # bookkeeping
    run_dir: str = "runs"
    run_id: str = ""

    def __post_init__(self):
        if not self.data_root:
            self.data_root = os.environ.get(ENV_DATA_ROOT, "runs/data")
        self.grid_origin = tuple(float(v) for v in self.grid_origin)
        self.grid_voxel_size = tuple(float(v) for v in self.grid_voxel_size)
        self.grid_counts = tuple(int(v) for v in self.grid_counts)
        self.stage_channels = tuple(int(v) for v in self.stage_channels)
        if not 0.0 < self.phase_split < 1.0:
            raise ValueError("phase_split must be in (0, 1)")
        if not 0.0 <= self.labeled_fraction <= 1.0:
            raise ValueError("labeled_fraction must be in [0, 1]")
        z = self.grid_counts[2]
        if z * self.c_voxel != self.c_reduced:
            raise ValueError(
                f"feature-distillation contract violated: Z * c_voxel = "
                f"{z} * {self.c_voxel} != c_reduced = {self.c_reduced}")

    # ---- derived objects -------------------------------------------------

    def grid(self) -> VoxelGridSpec:
        return VoxelGridSpec(origin=self.grid_origin,
                             voxel_size=self.grid_voxel_size,
                             counts=self.grid_counts)

    def bins(self) -> DepthBinSpec:
        return DepthBinSpec(d_min=self.d_min, d_max=self.d_max,
                            n_bins=self.depth_bins, mode=self.depth_mode)

    def calib(self) -> Calibration:
        return forward_facing_calibration(
            image_size=(self.image_width, self.image_height),
            focal=self.focal)

    def scene_spec(self, seed: int | None = None) -> SceneSpec:
        return SceneSpec(
            seed=self.dataset_seed if seed is None else seed,
            sensor=self.calib(), grid=self.grid(),
            n_objects_range=(self.objects_min, self.objects_max),
            placement_region=(self.region_x_min, self.region_x_max,
                              self.region_y_min, self.region_y_max),
            lidar_points_per_scene=self.points_per_scene,
            ground_noise_std=self.ground_noise_std)

    def size_prior(self) -> tuple[float, float, float]:
        """Mean (h, w, l) of the class-0 size intervals."""
        spec = self.scene_spec()
        (h0, h1), (w0, w1), (l0, l1) = spec.object_size_ranges[0]
        return ((h0 + h1) / 2, (w0 + w1) / 2, (l0 + l1) / 2)

    def anchor_grid(self) -> AnchorGrid:
        h, w, l = self.size_prior()
        spec = self.scene_spec()
        z_center = spec.ground_z + h / 2.0
        return AnchorGrid(self.grid(), size_priors=[(h, w, l)],
                          z_centers=[z_center],
                          yaws=(0.0, math.pi / 2), class_ids=[0])

    def image_size(self) -> tuple[int, int]:
        return (self.image_width, self.image_height)

    def net_kwargs(self) -> dict:
        return dict(stage_channels=self.stage_channels,
                    decode_channels=self.decode_channels,
                    head_channels=self.head_channels,
                    normalization=self.normalization)

    # ---- (de)serialization -----------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        unknown = set(values) - cls.field_names()
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**values)


def _coerce(raw: str, default):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        parts = raw.replace(",", " ").split()
        elem = default[0] if default else 0.0
        return tuple(type(elem)(p) for p in parts)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse flat ``section.key = value`` lines into RunConfig kwargs."""
    defaults = RunConfig()
    names = RunConfig.field_names()
    out = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {ln}: expected key = value, "
                             f"got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        name = key.split(".", 1)[1] if "." in key else key
        name = name.strip().replace(".", "_")
        if name not in names:
            raise ValueError(f"config line {ln}: unknown key {key!r}")
        out[name] = _coerce(raw.strip(), getattr(defaults, name))
    return out


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path:
        values.update(parse_config_text(Path(path).read_text()))
    if overrides:
        values.update(overrides)
    return RunConfig.from_dict(values)


SECTION_OF = {
    "data_root": "data", "train_split": "data", "unlabeled_split": "data",
    "val_split": "data",
    "n_train_labeled": "gen", "n_train_unlabeled": "gen", "n_val": "gen",
    "dataset_seed": "gen",
    "grid_origin": "grid", "grid_voxel_size": "grid", "grid_counts": "grid",
    "d_min": "bins", "d_max": "bins", "depth_bins": "bins",
    "depth_mode": "bins",
    "image_width": "image", "image_height": "image", "focal": "image",
    "objects_min": "scene", "objects_max": "scene",
    "points_per_scene": "scene", "ground_noise_std": "scene",
    "region_x_min": "scene", "region_x_max": "scene",
    "region_y_min": "scene", "region_y_max": "scene",
    "labeled_fraction": "semi",
    "eval_iou": "eval", "recall_positions": "eval", "max_range": "eval",
    "run_dir": "run", "run_id": "run",
}


def config_to_text(cfg: RunConfig) -> str:
    """Serialize a config in the flat dotted-key format."""
    lines = []
    for f in dataclasses.fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            rendered = " ".join(str(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = str(value)
        section = SECTION_OF.get(f.name)
        if section is None:
            if f.name.startswith(("use_", "hard_", "depth_pretrain",
                                  "cls_target")):
                section = "mode"
            elif f.name in ("c_reduced", "c_voxel", "feat_channels",
                            "out_channels", "stage_channels",
                            "decode_channels", "head_channels",
                            "normalization"):
                section = "net"
            else:
                section = "train"
        lines.append(f"{section}.{f.name} = {rendered}")
    return "\n".join(lines) + "\n"
