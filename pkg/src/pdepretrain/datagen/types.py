from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


class PDE(str, Enum):
    HEAT = "heat"
    ADVECTION = "advection"
    BURGERS = "burgers"
    NAVIER_STOKES = "navier_stokes"


PRETRAIN_PDES = (PDE.HEAT, PDE.ADVECTION, PDE.BURGERS)


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic space-time grid.

    Spatial points are ``x_min + i * dx`` for ``i < n_x`` so the right edge is
    the periodic image of the left one.
    """

    n_t: int = 32
    n_x: int = 32
    n_y: int = 32
    x_min: float = -1.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0
    t_end: float = 2.0
    periodic: bool = True

    def __post_init__(self):
        if self.n_t < 2 or self.n_x < 2 or self.n_y < 2:
            raise ValueError("grid needs at least two points per axis")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("domain bounds must be increasing")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.periodic:
            raise ValueError("only periodic grids are supported")

    @classmethod
    def for_pretraining(cls, resolution: int = 32) -> "GridSpec":
        return cls(n_x=resolution, n_y=resolution)

    @classmethod
    def for_navier_stokes(cls, resolution: int = 64) -> "GridSpec":
        return cls(n_x=resolution, n_y=resolution, x_min=0.0, x_max=1.0,
                   y_min=0.0, y_max=1.0, t_end=7.75)

    @property
    def lx(self) -> float:
        return self.x_max - self.x_min

    @property
    def ly(self) -> float:
        return self.y_max - self.y_min

    @property
    def dx(self) -> float:
        return self.lx / self.n_x

    @property
    def dy(self) -> float:
        return self.ly / self.n_y

    @property
    def dt_save(self) -> float:
        return self.t_end / (self.n_t - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_t)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.x_min + self.dx * np.arange(self.n_x)
        y = self.y_min + self.dy * np.arange(self.n_y)
        return x, y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays of shape (n_x, n_y); axis 0 is x."""
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular wavenumbers matching ``np.fft.fft2`` on the spatial grid."""
        kx = 2 * np.pi * np.fft.fftfreq(self.n_x, d=self.dx)
        ky = 2 * np.pi * np.fft.fftfreq(self.n_y, d=self.dy)
        return np.meshgrid(kx, ky, indexing="ij")

    def to_dict(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class PdeCoefficients:
    pde_id: PDE
    nu: float | None = None
    c_x: float | None = None
    c_y: float | None = None
    amplitude_A: float | None = None
    distribution: str = "in"

    def __post_init__(self):
        object.__setattr__(self, "pde_id", PDE(self.pde_id))
        if self.nu is not None and self.nu < 0:
            raise ValueError("nu must be non-negative")
        used = _USED_FIELDS[self.pde_id]
        for name in ("nu", "c_x", "c_y", "amplitude_A"):
            present = getattr(self, name) is not None
            if present != (name in used):
                state = "missing" if name in used else "not used"
                raise ValueError(f"{name} is {state} for {self.pde_id.value}")

    def as_row(self) -> np.ndarray:
        """Fixed layout ``(nu, c_x, c_y, A)``; absent entries are NaN."""
        return np.array([math.nan if v is None else float(v)
                         for v in (self.nu, self.c_x, self.c_y, self.amplitude_A)])

    @classmethod
    def from_row(cls, pde_id, row, distribution="in") -> "PdeCoefficients":
        vals = [None if np.isnan(v) else float(v) for v in row]
        return cls(PDE(pde_id), *vals, distribution=distribution)


_USED_FIELDS = {
    PDE.HEAT: {"nu"},
    PDE.ADVECTION: {"c_x", "c_y"},
    PDE.BURGERS: {"nu", "c_x", "c_y"},
    PDE.NAVIER_STOKES: {"nu", "amplitude_A"},
}


@dataclass(frozen=True)
class SineIcParams:
    amplitudes: tuple[float, ...]
    l_x: tuple[int, ...]
    l_y: tuple[int, ...]
    phases: tuple[float, ...]
    # drawn for provenance only; the initial condition does not use it
    omegas: tuple[float, ...] = ()
    J: int = 5
    L: float = 2.0

    def __post_init__(self):
        n = len(self.amplitudes)
        if not (n == self.J == len(self.l_x) == len(self.l_y) == len(self.phases)):
            raise ValueError("expected exactly J terms")


@dataclass
class Trajectory:
    u: np.ndarray
    coeffs: PdeCoefficients
    grid: GridSpec
    ic_params: SineIcParams | int | None = None
    sample_id: str = ""
    rng_seed: int | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        expected = (self.grid.n_t, self.grid.n_x, self.grid.n_y)
        if self.u.shape != expected:
            raise ValueError(f"u has shape {self.u.shape}, grid expects {expected}")

    @property
    def pde_id(self) -> PDE:
        return self.coeffs.pde_id

    def replace_u(self, u: np.ndarray, **meta) -> "Trajectory":
        merged = dict(self.meta)
        merged.update(meta)
        return Trajectory(u, self.coeffs, self.grid, self.ic_params,
                          self.sample_id, self.rng_seed, merged)
