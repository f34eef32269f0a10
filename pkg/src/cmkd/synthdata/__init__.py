"""Deterministic procedural dataset generation and persistence."""

from .io import (
    Dataset,
    DatasetError,
    UnlabeledAccessError,
    generate_dataset,
    read_dataset,
    read_labels,
    write_dataset,
    write_labels,
)
from .scenes import (
    SceneSample,
    SceneSpec,
    generate_scene,
    render_image,
    render_scene,
    scene_labels_array,
    simulate_lidar,
)

__all__ = [
    "Dataset",
    "DatasetError",
    "SceneSample",
    "SceneSpec",
    "UnlabeledAccessError",
    "generate_dataset",
    "generate_scene",
    "read_dataset",
    "read_labels",
    "render_image",
    "render_scene",
    "scene_labels_array",
    "simulate_lidar",
    "write_dataset",
    "write_labels",
]
