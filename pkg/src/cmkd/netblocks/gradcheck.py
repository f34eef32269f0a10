"""Central finite-difference gradient checking for differentiable ops."""

from __future__ import annotations

import torch


def finite_diff_check(scalar_fn, tensors, step: float = 1e-3) -> float:
    """Compare autograd gradients against central finite differences.

    scalar_fn: nullary callable returning a scalar tensor built from the
    current values of ``tensors`` (leaf float64 tensors, requires_grad).
    Perturbs every element of every tensor by +/- step. Returns the worst
    relative error max|fd - grad| / max(max|grad|, max|fd|, 1e-6).
    """
    tensors = list(tensors)
    for t in tensors:
        if t.dtype != torch.float64:
            raise ValueError("finite differences need float64 tensors")
        if t.grad is not None:
            t.grad = None
    loss = scalar_fn()
    loss.backward()
    grads = [t.grad.detach().clone() if t.grad is not None
             else torch.zeros_like(t) for t in tensors]

    worst_abs = 0.0
    scale = max(1e-6, max(float(g.abs().max()) for g in grads))
    with torch.no_grad():
        for t, g in zip(tensors, grads):
            flat = t.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + step
                up = float(scalar_fn())
                flat[i] = orig - step
                dn = float(scalar_fn())
                flat[i] = orig
                fd = (up - dn) / (2.0 * step)
                scale = max(scale, abs(fd))
                worst_abs = max(worst_abs, abs(fd - float(gflat[i])))
    return worst_abs / scale


def weighted_sum(out, seed: int = 0) -> torch.Tensor:
    """Deterministic random-weighted scalar over one or more tensors, so a
    gradient check exercises every output element."""
    if isinstance(out, torch.Tensor):
        out = (out,)
    gen = torch.Generator().manual_seed(seed)
    total = None
    for t in out:
        w = torch.rand(t.shape, generator=gen, dtype=t.dtype)
        term = (t * w).sum()
        total = term if total is None else total + term
    return total
