"""Loss primitives: quality focal loss, smooth L1, BEV feature mimicry."""

from __future__ import annotations

import torch
import torch.nn.functional as F

PROB_EPS = 1e-7


def smooth_l1(residual: torch.Tensor) -> torch.Tensor:
    """Elementwise smooth L1: 0.5 r^2 for |r| < 1, |r| - 0.5 otherwise."""
    a = residual.abs()
    return torch.where(a < 1.0, 0.5 * residual * residual, a - 0.5)


def qfl(target: torch.Tensor, logit: torch.Tensor | None = None,
        prob: torch.Tensor | None = None, beta: float = 2.0) -> torch.Tensor:
    """Quality focal loss with a continuous target in [0, 1], elementwise.

    qfl(y, sigma) = -|y - sigma|^beta * ((1 - y) log(1 - sigma)
                                         + y log sigma).
    Prefer the logit form (numerically stable, same value); direct
    probabilities are clamped to [1e-7, 1 - 1e-7].
    """
    if (logit is None) == (prob is None):
        raise ValueError("pass exactly one of logit= or prob=")
    if logit is not None:
        sigma = torch.sigmoid(logit)
        ce = F.binary_cross_entropy_with_logits(logit, target,
                                                reduction="none")
    else:
        sigma = prob.clamp(PROB_EPS, 1.0 - PROB_EPS)
        ce = -(target * torch.log(sigma)
               + (1.0 - target) * torch.log(1.0 - sigma))
    return (target - sigma).abs().pow(beta) * ce


def feature_distill_loss(student_bev: torch.Tensor,
                         teacher_bev: torch.Tensor) -> torch.Tensor:
    """Mean squared error between the student BEV map and the (detached)
    teacher BEV map. Shapes must match exactly."""
    if student_bev.shape != teacher_bev.shape:
        raise ValueError(
            f"BEV shape mismatch: student {tuple(student_bev.shape)} vs "
            f"teacher {tuple(teacher_bev.shape)}")
    diff = student_bev - teacher_bev.detach()
    return (diff * diff).mean()
