"""Split definitions, deterministic generation and the HDF5 container."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import h5py
import numpy as np

from ..exceptions import BenchError, SampleGenerationError
from .coefficients import sample_coefficients
from .initial_conditions import sample_grf_ic, sample_sine_ic
from .solvers import solve
from .types import PDE, PRETRAIN_PDES, GridSpec, PdeCoefficients, Trajectory

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SplitSpec:
    pdes: tuple[PDE, ...]
    distribution: str
    n_per_pde: int
    # split whose initial-condition streams are reused (Burgers out-of-distribution)
    ic_source: str | None = None


SPLITS = {
    "pretrain": SplitSpec(PRETRAIN_PDES, "in", 3072),
    "finetune_in": SplitSpec(PRETRAIN_PDES, "in", 1024),
    "finetune_out": SplitSpec(PRETRAIN_PDES, "out", 1024, ic_source="finetune_in"),
    "validation_in": SplitSpec(PRETRAIN_PDES, "in", 256),
    "validation_out": SplitSpec(PRETRAIN_PDES, "out", 256, ic_source="validation_in"),
    "finetune_ns": SplitSpec((PDE.NAVIER_STOKES,), "in", 1024),
    "validation_ns": SplitSpec((PDE.NAVIER_STOKES,), "in", 256),
}
_SPLIT_KEYS = {name: i for i, name in enumerate(SPLITS)}
_PDE_KEYS = {p: i for i, p in enumerate(PDE)}


def split_grid(split: str, resolution: int = 32) -> GridSpec:
    if SPLITS[split].pdes == (PDE.NAVIER_STOKES,):
        return GridSpec.for_navier_stokes(64)
    return GridSpec.for_pretraining(resolution)


def sample_seed_sequence(master_seed: int, split: str, pde, index: int, stream: int):
    """Independent stream per (split, pde, sample, purpose); stream 0 = IC, 1 = coefficients."""
    return np.random.SeedSequence(
        master_seed, spawn_key=(_SPLIT_KEYS[split], _PDE_KEYS[PDE(pde)], index, stream))


def sample_seed(master_seed: int, split: str, pde, index: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(_SPLIT_KEYS[split], _PDE_KEYS[PDE(pde)], index))
    return int(ss.generate_state(1, np.uint64)[0])


def generate_trajectory(master_seed: int, split: str, pde, index: int, grid: GridSpec) -> Trajectory:
    spec = SPLITS[split]
    pde = PDE(pde)
    ic_split = split
    if spec.ic_source is not None and pde is PDE.BURGERS:
        ic_split = spec.ic_source
    ic_rng = np.random.default_rng(sample_seed_sequence(master_seed, ic_split, pde, index, 0))
    coeff_rng = np.random.default_rng(sample_seed_sequence(master_seed, split, pde, index, 1))
    sample_id = f"{split}/{pde.value}/{index}"
    if pde is PDE.NAVIER_STOKES:
        ic = sample_grf_ic(ic_rng, grid)
        ic_params = None
    else:
        ic, ic_params = sample_sine_ic(ic_rng, grid)
    coeffs = sample_coefficients(pde, spec.distribution, coeff_rng)
    try:
        traj = solve(pde, ic, coeffs, grid, sample_id=sample_id)
    except Exception as exc:  # noqa: BLE001 - re-raised with sample identity
        raise SampleGenerationError(sample_id, exc) from exc
    traj.ic_params = ic_params
    traj.rng_seed = sample_seed(master_seed, split, pde, index)
    return traj


def _solve_job(args):
    master_seed, split, pde, index, grid = args
    traj = generate_trajectory(master_seed, split, pde, index, grid)
    return traj.u.astype(np.float32), traj.coeffs.as_row(), traj.rng_seed


@dataclass
class PdeDataset:
    """A stack of trajectories sharing one grid.

    ``u`` is ``[N, n_t, n_x, n_y]``; ``coeffs`` rows are ``(nu, c_x, c_y, A)``.
    """

    u: np.ndarray
    coeffs: np.ndarray
    pde: np.ndarray
    grid: GridSpec
    seeds: np.ndarray | None = None
    distribution: str = "in"
    augmented: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.u)
        self.pde = np.asarray(self.pde, dtype=object)
        if self.seeds is None:
            self.seeds = np.zeros(n, dtype=np.uint64)
        if self.augmented is None:
            self.augmented = np.zeros(n, dtype=bool)
        if not (len(self.coeffs) == len(self.pde) == len(self.seeds) == n):
            raise ValueError("dataset fields must have matching lengths")

    def __len__(self):
        return len(self.u)

    def subset(self, idx) -> "PdeDataset":
        idx = np.asarray(idx)
        return PdeDataset(self.u[idx], self.coeffs[idx], self.pde[idx], self.grid,
                          self.seeds[idx], self.distribution, self.augmented[idx])

    def select(self, pde) -> "PdeDataset":
        return self.subset(np.flatnonzero(self.pde == PDE(pde).value))

    def trajectory(self, i: int) -> Trajectory:
        coeffs = PdeCoefficients.from_row(self.pde[i], self.coeffs[i], self.distribution)
        return Trajectory(np.asarray(self.u[i], dtype=np.float64), coeffs, self.grid,
                          sample_id=str(i), rng_seed=int(self.seeds[i]))

    @classmethod
    def from_trajectories(cls, trajs) -> "PdeDataset":
        trajs = list(trajs)
        return cls(np.stack([t.u for t in trajs]).astype(np.float32),
                   np.stack([t.coeffs.as_row() for t in trajs]),
                   np.array([t.pde_id.value for t in trajs], dtype=object),
                   trajs[0].grid,
                   np.array([t.rng_seed or 0 for t in trajs], dtype=np.uint64),
                   trajs[0].coeffs.distribution,
                   np.array([bool(t.meta.get("augmented", False)) for t in trajs]))

    @classmethod
    def concat(cls, parts) -> "PdeDataset":
        parts = list(parts)
        return cls(np.concatenate([p.u for p in parts]),
                   np.concatenate([p.coeffs for p in parts]),
                   np.concatenate([p.pde for p in parts]),
                   parts[0].grid,
                   np.concatenate([p.seeds for p in parts]),
                   parts[0].distribution,
                   np.concatenate([p.augmented for p in parts]))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.u).tobytes())
        h.update(np.ascontiguousarray(self.coeffs).tobytes())
        return h.hexdigest()[:16]


@dataclass
class DatasetManifest:
    split: str
    path: str
    counts: dict[str, int]
    master_seed: int
    resolution: int
    format_version: int = FORMAT_VERSION
    complete: bool = True
    payload_sha256: dict[str, str] = field(default_factory=dict)


def dataset_path(out_dir, split: str, resolution: int) -> Path:
    res = 64 if SPLITS[split].pdes == (PDE.NAVIER_STOKES,) else resolution
    return Path(out_dir) / f"{split}_{res}.h5"


def generate_dataset(split: str, master_seed: int, out_dir, resolution: int = 32,
                     n_per_pde: int | None = None, workers: int = 1,
                     provenance: dict | None = None) -> DatasetManifest:
    """Solve and persist one split. The file is flagged incomplete until every
    PDE group has been written. ``provenance`` is stored as a JSON root attribute."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {sorted(SPLITS)}")
    spec = SPLITS[split]
    grid = split_grid(split, resolution)
    n = spec.n_per_pde if n_per_pde is None else int(n_per_pde)
    path = dataset_path(out_dir, split, resolution)
    path.parent.mkdir(parents=True, exist_ok=True)

    counts, digests = {}, {}
    with h5py.File(path, "w", track_order=True) as f:
        f.attrs["format_version"] = FORMAT_VERSION
        f.attrs["complete"] = False
        f.attrs["split"] = split
        f.attrs["distribution"] = spec.distribution
        f.attrs["master_seed"] = master_seed
        f.attrs["x_bounds"] = (grid.x_min, grid.x_max)
        f.attrs["y_bounds"] = (grid.y_min, grid.y_max)
        f.attrs["t_end"] = grid.t_end
        f.attrs["n_t"] = grid.n_t
        f.attrs["n_per_pde"] = n
        f.attrs["provenance"] = json.dumps(provenance or {}, sort_keys=True)
        for pde in spec.pdes:
            jobs = [(master_seed, split, pde, i, grid) for i in range(n)]
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_solve_job, jobs, chunksize=8))
            else:
                results = [_solve_job(j) for j in jobs]
            u = np.stack([r[0] for r in results]) if results else np.empty((0, grid.n_t, grid.n_x, grid.n_y), np.float32)
            coeffs = np.stack([r[1] for r in results]) if results else np.empty((0, 4))
            seeds = np.array([r[2] for r in results], dtype=np.uint64)
            g = f.create_group(pde.value)
            g.create_dataset("u", data=u, dtype="float32", track_times=False)
            g.create_dataset("coeffs", data=coeffs, dtype="float64", track_times=False)
            g.create_dataset("seeds", data=seeds, dtype="uint64", track_times=False)
            counts[pde.value] = n
            digests[pde.value] = hashlib.sha256(u.tobytes() + coeffs.tobytes() + seeds.tobytes()).hexdigest()
            log.info("wrote %d %s samples to %s", n, pde.value, path)
        f.attrs["complete"] = True
    return DatasetManifest(split, str(path), counts, master_seed, grid.n_x, payload_sha256=digests)


def is_complete(path, master_seed=None, n_per_pde=None) -> bool:
    """True when ``path`` holds a finished split matching the given seed and size."""
    path = Path(path)
    if not path.exists():
        return False
    try:
        with h5py.File(path, "r") as f:
            a = f.attrs
            if not bool(a.get("complete", False)) or int(a.get("format_version", -1)) != FORMAT_VERSION:
                return False
            if master_seed is not None and int(a["master_seed"]) != int(master_seed):
                return False
            return n_per_pde is None or int(a.get("n_per_pde", -1)) == int(n_per_pde)
    except OSError:
        return False


def load_split(path, pdes=None) -> PdeDataset:
    path = Path(path)
    with h5py.File(path, "r") as f:
        if not bool(f.attrs.get("complete", False)):
            raise BenchError(f"{path} is marked incomplete")
        if int(f.attrs["format_version"]) != FORMAT_VERSION:
            raise BenchError(f"{path}: unsupported format version {f.attrs['format_version']}")
        xb, yb = f.attrs["x_bounds"], f.attrs["y_bounds"]
        parts = []
        names = [PDE(p).value for p in pdes] if pdes else list(f.keys())
        for name in names:
            g = f[name]
            u = g["u"][...]
            grid = GridSpec(n_t=u.shape[1], n_x=u.shape[2], n_y=u.shape[3],
                            x_min=float(xb[0]), x_max=float(xb[1]),
                            y_min=float(yb[0]), y_max=float(yb[1]), t_end=float(f.attrs["t_end"]))
            parts.append(PdeDataset(u, g["coeffs"][...], np.array([name] * len(u), dtype=object),
                                    grid, g["seeds"][...], str(f.attrs["distribution"])))
    return PdeDataset.concat(parts)


def default_data_root():
    return Path(os.environ.get("BENCH_DATA_ROOT", "data"))
