"""Cross-modality knowledge distillation for monocular 3D detection.

A LiDAR-based teacher detector supplies BEV feature maps and
quality-weighted soft labels to a monocular image-based student, trained
and evaluated end to end on procedurally generated scenes.
"""

__version__ = "0.1.0"
