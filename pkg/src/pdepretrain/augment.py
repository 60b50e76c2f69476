"""Noise, shift and scale augmentations plus the dataset-doubling policy."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state

from .datagen.dataset import PdeDataset
from .datagen.types import Trajectory
from .spectral import periodic_shift

log = logging.getLogger(__name__)

KINDS = ("none", "noise", "shift", "scale")
SMALL_SCALE = 1e-3


@dataclass(frozen=True)
class AugmentationSpec:
    kind: str = "none"
    noise_variance: float = 1e-7
    shift_range: tuple[float, float] = (-0.5, 0.5)
    scale_range: tuple[float, float] = (-0.5, 0.5)
    apply_probability: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmentation {self.kind!r}; expected one of {KINDS}")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")
        for name in ("shift_range", "scale_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} must be a nonempty interval")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ValueError("apply_probability must lie in [0, 1]")

    @classmethod
    def from_dict(cls, cfg: dict | None) -> "AugmentationSpec":
        cfg = dict(cfg or {})
        if "variance" in cfg:
            cfg["noise_variance"] = cfg.pop("variance")
        if "probability" in cfg:
            cfg["apply_probability"] = cfg.pop("probability")
        return cls(**cfg)


# -- array level ---------------------------------------------------------------
# u has shape [..., n_t, n_x, n_y]; one draw per leading-index trajectory.

def noise_array(u, variance, rng):
    u = np.asarray(u)
    if variance == 0:
        return u.copy()
    # the stated recipe is X + sigma^2 N(0, I): sigma^2 multiplies the draw directly
    return u + variance * rng.standard_normal(u.shape).astype(u.dtype, copy=False)


def shift_array(u, dx_shift, dy_shift, lx, ly):
    return periodic_shift(u, dx_shift, dy_shift, lx, ly).astype(np.asarray(u).dtype, copy=False)


def scale_array(u, s):
    return np.asarray(u) * np.asarray(s, dtype=np.asarray(u).dtype)


def _draw_scale(spec, rng):
    s = float(rng.uniform(*spec.scale_range))
    if abs(s) < SMALL_SCALE:
        log.warning("scale factor %.2e is close to zero; the sample is nearly erased", s)
    return s


# -- trajectory level ----------------------------------------------------------

def apply_noise(traj: Trajectory, spec: AugmentationSpec, rng) -> Trajectory:
    rng = check_random_state_np(rng)
    return traj.replace_u(noise_array(traj.u, spec.noise_variance, rng), augmented="noise")


def apply_shift(traj: Trajectory, spec: AugmentationSpec, rng, delta=None) -> Trajectory:
    """Translate every frame by one (dx, dy); ``delta`` forces the offset."""
    if delta is None:
        rng = check_random_state_np(rng)
        delta = rng.uniform(*spec.shift_range, size=2)
    dx_s, dy_s = map(float, delta)
    u = shift_array(traj.u, dx_s, dy_s, traj.grid.lx, traj.grid.ly)
    return traj.replace_u(u, augmented="shift", shift=(dx_s, dy_s))


def apply_scale(traj: Trajectory, spec: AugmentationSpec, rng, factor=None) -> Trajectory:
    if factor is None:
        factor = _draw_scale(spec, check_random_state_np(rng))
    return traj.replace_u(scale_array(traj.u, factor), augmented="scale", scale=float(factor))


_APPLY = {"noise": apply_noise, "shift": apply_shift, "scale": apply_scale}


def augment_trajectory(traj, spec, rng):
    if spec.kind == "none":
        return traj
    return _APPLY[spec.kind](traj, spec, rng)


def check_random_state_np(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# -- dataset level -------------------------------------------------------------

def augment_batch(u, spec: AugmentationSpec, rng, lx=2.0, ly=2.0):
    """Augment every trajectory of a ``[N, n_t, n_x, n_y]`` stack."""
    rng = check_random_state_np(rng)
    u = np.asarray(u)
    if spec.kind == "none" or len(u) == 0:
        return u.copy()
    if spec.kind == "noise":
        return noise_array(u, spec.noise_variance, rng)
    if spec.kind == "shift":
        out = np.empty_like(u)
        for i in range(len(u)):
            d = rng.uniform(*spec.shift_range, size=2)
            out[i] = shift_array(u[i], d[0], d[1], lx, ly)
        return out
    s = np.array([_draw_scale(spec, rng) for _ in range(len(u))], dtype=u.dtype)
    return u * s[:, None, None, None]


def expand_dataset(dataset: PdeDataset, spec: AugmentationSpec, rng) -> PdeDataset:
    """Originals followed by one copy per sample; each copy is augmented with
    probability ``spec.apply_probability`` and is otherwise an exact duplicate."""
    if spec.kind == "none":
        raise ValueError("expand_dataset needs an augmentation kind other than 'none'")
    rng = check_random_state_np(rng)
    mask = rng.random(len(dataset)) < spec.apply_probability
    copy_u = dataset.u.copy()
    idx = np.flatnonzero(mask)
    if len(idx):
        copy_u[idx] = augment_batch(dataset.u[idx], spec, rng, dataset.grid.lx, dataset.grid.ly)
    copies = PdeDataset(copy_u, dataset.coeffs.copy(), dataset.pde.copy(), dataset.grid,
                        dataset.seeds.copy(), dataset.distribution, mask)
    return PdeDataset.concat([dataset, copies])


class TrajectoryAugmenter(TransformerMixin, BaseEstimator):
    """Stateless transformer over ``[N, n_t, n_x, n_y]`` arrays."""

    def __init__(self, kind="noise", noise_variance=1e-7, shift_range=(-0.5, 0.5),
                 scale_range=(-0.5, 0.5), domain_length=(2.0, 2.0), random_state=None):
        self.kind = kind
        self.noise_variance = noise_variance
        self.shift_range = shift_range
        self.scale_range = scale_range
        self.domain_length = domain_length
        self.random_state = random_state

    def _spec(self):
        return AugmentationSpec(self.kind, self.noise_variance, tuple(self.shift_range),
                                tuple(self.scale_range))

    def fit(self, X, y=None):
        self._spec()
        X = np.asarray(X)
        if X.ndim != 4:
            raise ValueError(f"expected a [N, n_t, n_x, n_y] array, got shape {X.shape}")
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def transform(self, X):
        X = np.asarray(X)
        seed = check_random_state(self.random_state).randint(0, 2 ** 31 - 1)
        lx, ly = self.domain_length
        return augment_batch(X, self._spec(), np.random.default_rng(seed), lx, ly)


class DatasetExpander(BaseEstimator):
    def __init__(self, kind="noise", apply_probability=0.5, noise_variance=1e-7,
                 shift_range=(-0.5, 0.5), scale_range=(-0.5, 0.5), random_state=None):
        self.kind = kind
        self.apply_probability = apply_probability
        self.noise_variance = noise_variance
        self.shift_range = shift_range
        self.scale_range = scale_range
        self.random_state = random_state

    def fit(self, dataset, y=None):
        return self

    def transform(self, dataset: PdeDataset) -> PdeDataset:
        spec = AugmentationSpec(self.kind, self.noise_variance, tuple(self.shift_range),
                                tuple(self.scale_range), self.apply_probability)
        seed = check_random_state(self.random_state).randint(0, 2 ** 31 - 1)
        return expand_dataset(dataset, spec, np.random.default_rng(seed))

    def fit_transform(self, dataset, y=None):
        return self.fit(dataset).transform(dataset)
