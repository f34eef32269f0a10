"""Checkpoint files: a flat map from dotted parameter path to float32
arrays plus a JSON metadata header with the network configuration."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch

META_KEY = "_meta_json"
_SKIP_SUFFIX = "num_batches_tracked"


def state_arrays(module: torch.nn.Module) -> dict[str, np.ndarray]:
    """Parameters and buffers as float32 numpy arrays, dotted paths."""
    out = {}
    for name, tensor in module.state_dict().items():
        if name.endswith(_SKIP_SUFFIX):
            continue
        out[name] = tensor.detach().cpu().numpy().astype(np.float32)
    return out


def save_checkpoint(path, module: torch.nn.Module, meta: dict | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = state_arrays(module)
    meta_bytes = np.frombuffer(
        json.dumps(meta or {}, sort_keys=True).encode(), np.uint8)
    np.savez(path, **arrays, **{META_KEY: meta_bytes})
    if path.suffix != ".npz":   # np.savez appends .npz
        Path(str(path) + ".npz").replace(path)


def load_checkpoint(path):
    """Returns (arrays: dict[str, float32 ndarray], meta: dict)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path) as data:
        meta = json.loads(bytes(data[META_KEY]).decode()) \
            if META_KEY in data.files else {}
        arrays = {k: data[k] for k in data.files if k != META_KEY}
    return arrays, meta


def load_into(module: torch.nn.Module, arrays: dict[str, np.ndarray],
              strict: bool = True):
    """Copy arrays into a module by dotted path, shape-checked."""
    state = module.state_dict()
    expected = {k for k in state if not k.endswith(_SKIP_SUFFIX)}
    missing = sorted(expected - set(arrays))
    unexpected = sorted(set(arrays) - set(state))
    problems = []
    if strict and missing:
        problems.append(f"missing keys: {missing}")
    if strict and unexpected:
        problems.append(f"unexpected keys: {unexpected}")
    for name, arr in arrays.items():
        if name not in state:
            continue
        if tuple(state[name].shape) != tuple(arr.shape):
            problems.append(
                f"shape mismatch at {name}: module "
                f"{tuple(state[name].shape)} vs checkpoint {arr.shape}")
    if problems:
        raise ValueError("checkpoint load failed: " + "; ".join(problems))
    with torch.no_grad():
        for name, arr in arrays.items():
            if name in state:
                state[name].copy_(torch.from_numpy(np.asarray(arr)))
    module.load_state_dict(state)


def transfer_prefixed(src_arrays: dict[str, np.ndarray],
                      dst_module: torch.nn.Module,
                      prefixes: tuple[str, ...]) -> list[str]:
    """Copy all entries under the given dotted prefixes into dst_module.

    Every destination entry under a prefix must be present with a matching
    shape; offenders are collected and reported together. Returns the list
    of copied paths.
    """
    state = dst_module.state_dict()
    wanted = [k for k in state
              if k.startswith(prefixes) and not k.endswith(_SKIP_SUFFIX)]
    problems = []
    for name in wanted:
        if name not in src_arrays:
            problems.append(f"missing in source: {name}")
        elif tuple(src_arrays[name].shape) != tuple(state[name].shape):
            problems.append(
                f"shape mismatch at {name}: destination "
                f"{tuple(state[name].shape)} vs source "
                f"{tuple(src_arrays[name].shape)}")
    if problems:
        raise ValueError("weight transfer failed: " + "; ".join(problems))
    with torch.no_grad():
        for name in wanted:
            state[name].copy_(torch.from_numpy(np.asarray(src_arrays[name])))
    dst_module.load_state_dict(state)
    return wanted


def checkpoint_hash(path) -> str:
    """Stable content hash (first 16 hex chars of sha256)."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]
