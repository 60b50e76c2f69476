from __future__ import annotations

import numpy as np
import torch

from ..exceptions import DegenerateTarget


def relative_l2_per_sample(pred, target):
    """``|pred - target| / |target|`` per sample, norms over all field entries."""
    if tuple(pred.shape) != tuple(target.shape):
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    if isinstance(pred, torch.Tensor):
        diff = (pred - target).flatten(1).norm(dim=1)
        ref = target.flatten(1).norm(dim=1)
        zero = ref == 0
        if bool(zero.any()):
            raise DegenerateTarget(f"zero-norm target at batch indices {torch.nonzero(zero).flatten().tolist()}")
        return diff / ref
    pred, target = np.asarray(pred), np.asarray(target)
    n = len(target)
    diff = np.linalg.norm((pred - target).reshape(n, -1), axis=1)
    ref = np.linalg.norm(target.reshape(n, -1), axis=1)
    if np.any(ref == 0):
        raise DegenerateTarget(f"zero-norm target at batch indices {np.flatnonzero(ref == 0).tolist()}")
    return diff / ref


def relative_l2(pred, target):
    """Batch mean of the per-sample relative L2 error."""
    return relative_l2_per_sample(pred, target).mean()
