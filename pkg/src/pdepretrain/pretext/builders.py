"""Inputs and labels for the shuffling, regression and masking pretext tasks.

Builders accept one trajectory ``[n_t, n_x, n_y]`` (array or ``Trajectory``)
or a stack ``[B, n_t, n_x, n_y]`` and draw one permutation or mask per sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..datagen.types import GridSpec, Trajectory
from ..exceptions import ShapeError
from .permutations import invert, jigsaw_bank, lexicographic_permutations

# optional normalization scales for the (nu, c_x, c_y) label
COEFF_SCALE = np.array([2e-2, 2.5, 2.5])
N_SORT_PATCHES = 4


@dataclass(frozen=True)
class PatchSpec:
    t_patch: int
    x_patch: int
    y_patch: int

    def counts(self, shape) -> tuple[int, int, int]:
        n_t, n_x, n_y = shape[-3:]
        for size, dim, name in ((self.t_patch, n_t, "t"), (self.x_patch, n_x, "x"), (self.y_patch, n_y, "y")):
            if size < 1 or dim % size:
                raise ShapeError(f"{name} patch {size} does not divide {dim}")
        return n_t // self.t_patch, n_x // self.x_patch, n_y // self.y_patch

    def n_patches(self, shape) -> int:
        return math.prod(self.counts(shape))

    @classmethod
    def temporal(cls, shape, n=N_SORT_PATCHES) -> "PatchSpec":
        n_t, n_x, n_y = shape[-3:]
        return cls(n_t // n, n_x, n_y)

    @classmethod
    def jigsaw(cls, shape) -> "PatchSpec":
        n_t, n_x, n_y = shape[-3:]
        return cls(n_t // 2, n_x // 2, n_y // 2)

    @classmethod
    def masked(cls, shape) -> "PatchSpec":
        n_t, n_x, n_y = shape[-3:]
        return cls(8, n_x // 4, n_y // 4)


@dataclass
class PretextBatch:
    task_id: str
    inputs: np.ndarray
    labels: np.ndarray
    mask: np.ndarray | None = None
    perms: np.ndarray | None = None
    patch_spec: PatchSpec | None = None
    extra: dict = field(default_factory=dict)


def _as_stack(traj):
    if isinstance(traj, Trajectory):
        traj = traj.u
    u = np.asarray(traj)
    if u.ndim == 3:
        return u[None], True
    if u.ndim != 4:
        raise ShapeError(f"expected [n_t, n_x, n_y] or [B, n_t, n_x, n_y], got {u.shape}")
    return u, False


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def to_patches(u, spec: PatchSpec):
    """``[B, n_t, n_x, n_y]`` -> ``[B, P, t, x, y]``; patches enumerated t-major,
    then x, then y. Works for numpy arrays and torch tensors."""
    b = u.shape[0]
    nt, nx, ny = spec.counts(u.shape)
    v = u.reshape(b, nt, spec.t_patch, nx, spec.x_patch, ny, spec.y_patch)
    v = _transpose(v, (0, 1, 3, 5, 2, 4, 6))
    return v.reshape(b, nt * nx * ny, spec.t_patch, spec.x_patch, spec.y_patch)


def from_patches(p, spec: PatchSpec, shape):
    b = p.shape[0]
    nt, nx, ny = spec.counts(shape)
    v = p.reshape(b, nt, nx, ny, spec.t_patch, spec.x_patch, spec.y_patch)
    v = _transpose(v, (0, 1, 4, 2, 5, 3, 6))
    return v.reshape(b, nt * spec.t_patch, nx * spec.x_patch, ny * spec.y_patch)


def _transpose(v, axes):
    if isinstance(v, np.ndarray):
        return v.transpose(axes)
    return v.permute(*axes)


def shuffle_patches(u, spec: PatchSpec, perms):
    """Position ``p`` of the output holds original patch ``perms[b, p]``."""
    patches = to_patches(u, spec)
    perms = np.asarray(perms)
    out = np.take_along_axis(patches, perms[:, :, None, None, None], axis=1)
    return from_patches(out, spec, u.shape)


def unshuffle_patches(u, spec: PatchSpec, perms):
    inv = np.stack([invert(p) for p in np.asarray(perms)])
    return shuffle_patches(u, spec, inv)


def _finish(batch, single):
    if single:
        batch.inputs = batch.inputs[0]
        batch.labels = batch.labels[0]
        if batch.mask is not None:
            batch.mask = batch.mask[0]
        if batch.perms is not None:
            batch.perms = batch.perms[0]
    return batch


def build_binary(traj, patch_spec: PatchSpec | None = None, rng=None) -> PretextBatch:
    """Label 1: the original; label 0: temporal patches under a non-identity permutation."""
    u, single = _as_stack(traj)
    rng = _rng(rng)
    spec = patch_spec or PatchSpec.temporal(u.shape)
    n = spec.n_patches(u.shape)
    perms = np.tile(np.arange(n), (len(u), 1))
    labels = (rng.random(len(u)) < 0.5).astype(np.float32)
    for i in np.flatnonzero(labels == 0):
        p = np.arange(n)
        while np.array_equal(p, np.arange(n)):
            p = rng.permutation(n)
        perms[i] = p
    inputs = shuffle_patches(u, spec, perms)
    return _finish(PretextBatch("binary", inputs, labels, perms=perms, patch_spec=spec), single)


_SORT_AXIS = {"time": 0, "space_x": 1, "space_y": 2}


def sort_patch_spec(shape, axis: str) -> PatchSpec:
    if axis not in _SORT_AXIS:
        raise ValueError(f"axis must be one of {sorted(_SORT_AXIS)}")
    dims = list(shape[-3:])
    dims[_SORT_AXIS[axis]] //= N_SORT_PATCHES
    return PatchSpec(*dims)


def build_sort(traj, axis: str = "time", rng=None) -> PretextBatch:
    """Four patches along ``axis``; the label indexes S_4 in lexicographic order."""
    u, single = _as_stack(traj)
    rng = _rng(rng)
    spec = sort_patch_spec(u.shape, axis)
    if spec.n_patches(u.shape) != N_SORT_PATCHES:
        raise ShapeError("sorting needs exactly four patches")
    table = np.array(lexicographic_permutations(N_SORT_PATCHES))
    labels = rng.integers(0, len(table), len(u))
    perms = table[labels]
    inputs = shuffle_patches(u, spec, perms)
    task = "timesort" if axis == "time" else "spacesort"
    return _finish(PretextBatch(task, inputs, labels.astype(np.int64), perms=perms, patch_spec=spec), single)


def decode_sort(inputs, labels, axis: str = "time"):
    u, single = _as_stack(inputs)
    table = np.array(lexicographic_permutations(N_SORT_PATCHES))
    out = unshuffle_patches(u, sort_patch_spec(u.shape, axis), table[np.atleast_1d(labels)])
    return out[0] if single else out


def build_jigsaw(traj, patch_spec: PatchSpec | None = None, bank=None, rng=None) -> PretextBatch:
    u, single = _as_stack(traj)
    rng = _rng(rng)
    spec = patch_spec or PatchSpec.jigsaw(u.shape)
    bank = jigsaw_bank() if bank is None else np.asarray(bank)
    if spec.n_patches(u.shape) != bank.shape[1]:
        raise ShapeError(f"{spec.n_patches(u.shape)} patches but bank permutes {bank.shape[1]}")
    labels = rng.integers(0, len(bank), len(u))
    perms = bank[labels]
    inputs = shuffle_patches(u, spec, perms)
    return _finish(PretextBatch("jigsaw", inputs, labels.astype(np.int64), perms=perms, patch_spec=spec), single)


def coefficient_label(coeffs, normalize: bool = False) -> np.ndarray:
    """``(nu, c_x, c_y)`` with absent entries 0. Accepts ``PdeCoefficients`` or
    rows in the ``(nu, c_x, c_y, A)`` storage layout."""
    rows = coeffs.as_row() if hasattr(coeffs, "as_row") else np.asarray(coeffs, dtype=float)
    lab = np.nan_to_num(rows[..., :3], nan=0.0)
    return lab / COEFF_SCALE if normalize else lab


def build_coefficient(traj, coeffs=None, normalize: bool = False) -> PretextBatch:
    if isinstance(traj, Trajectory):
        coeffs = traj.coeffs if coeffs is None else coeffs
    if coeffs is None:
        raise ValueError("coefficient labels need the sample's coefficients")
    u, single = _as_stack(traj)
    lab = np.atleast_2d(coefficient_label(coeffs, normalize)).astype(np.float32)
    return _finish(PretextBatch("coefficient", u, lab), single)


DERIVATIVE_FIELDS = ("u_x", "u_y", "u_xx", "u_yy", "u_t")


def derivative_fields(u, grid: GridSpec) -> np.ndarray:
    """Second-order central differences of ``[..., n_t, n_x, n_y]``: periodic in
    space, one-sided second-order stencils at the first and last frame.
    Returns ``[..., 5, n_t, n_x, n_y]`` in ``DERIVATIVE_FIELDS`` order."""
    u = np.asarray(u, dtype=np.float64)
    dx, dy = grid.dx, grid.dy
    ux = (np.roll(u, -1, -2) - np.roll(u, 1, -2)) / (2 * dx)
    uy = (np.roll(u, -1, -1) - np.roll(u, 1, -1)) / (2 * dy)
    uxx = (np.roll(u, -1, -2) - 2 * u + np.roll(u, 1, -2)) / dx ** 2
    uyy = (np.roll(u, -1, -1) - 2 * u + np.roll(u, 1, -1)) / dy ** 2
    ut = np.gradient(u, grid.dt_save, axis=-3, edge_order=2)
    return np.stack([ux, uy, uxx, uyy, ut], axis=-4)


def build_derivative(traj, grid: GridSpec | None = None, start: int = 0, window: int = 8) -> PretextBatch:
    """Input: frames ``[start, start + window)``; label: their five derivative fields."""
    if isinstance(traj, Trajectory):
        grid = traj.grid if grid is None else grid
    if grid is None:
        raise ValueError("derivative labels need the grid spacing")
    u, single = _as_stack(traj)
    if not (0 <= start and start + window <= u.shape[1]):
        raise ShapeError(f"window [{start}, {start + window}) outside {u.shape[1]} frames")
    labels = derivative_fields(u, grid)[:, :, start:start + window].astype(np.float32)
    inputs = u[:, start:start + window]
    return _finish(PretextBatch("derivative", inputs, labels, extra={"start": start}), single)


def mask_count(n_patches: int, ratio: float) -> int:
    return int(round(ratio * n_patches))


def build_masked(traj, patch_spec: PatchSpec | None = None, ratio: float = 0.75, rng=None,
                 mask_token=None) -> PretextBatch:
    """Exactly ``round(ratio * P)`` patches per sample replaced by ``mask_token``.

    ``mask_token`` is a patch-shaped array (zeros when omitted); the training
    loop re-applies its learnable token with :func:`apply_mask_token`.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError("mask ratio must lie in [0, 1)")
    u, single = _as_stack(traj)
    rng = _rng(rng)
    spec = patch_spec or PatchSpec.masked(u.shape)
    n = spec.n_patches(u.shape)
    k = mask_count(n, ratio)
    mask = np.zeros((len(u), n), dtype=bool)
    for i in range(len(u)):
        mask[i, rng.choice(n, size=k, replace=False)] = True
    if mask_token is None:
        mask_token = np.zeros((spec.t_patch, spec.x_patch, spec.y_patch), dtype=u.dtype)
    inputs = apply_mask_token(u, mask, mask_token, spec)
    return _finish(PretextBatch("masked", inputs, u.copy(), mask=mask, patch_spec=spec), single)


def apply_mask_token(u, mask, token, spec: PatchSpec):
    """Replace masked patches with ``token``; numpy or torch (keeps autograd)."""
    patches = to_patches(u, spec)
    if isinstance(u, np.ndarray):
        m = np.asarray(mask)[:, :, None, None, None]
        out = np.where(m, np.asarray(token, dtype=u.dtype)[None, None], patches)
    else:
        import torch

        m = torch.as_tensor(mask, device=u.device)[:, :, None, None, None]
        out = torch.where(m, token[None, None].to(u.dtype), patches)
    return from_patches(out, spec, u.shape)


__all__ = [
    "DERIVATIVE_FIELDS", "PatchSpec", "PretextBatch", "apply_mask_token", "build_binary",
    "build_coefficient", "build_derivative", "build_jigsaw", "build_masked", "build_sort",
    "coefficient_label", "decode_sort", "derivative_fields", "from_patches", "mask_count",
    "shuffle_patches", "to_patches", "unshuffle_patches"
]
