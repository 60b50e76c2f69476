"""Random initial conditions: sine sums for the pretraining PDEs, Gaussian
random fields for Navier-Stokes vorticity."""
from __future__ import annotations

import numpy as np

from .types import GridSpec, SineIcParams


def sine_field(params: SineIcParams, grid: GridSpec, x_shift=0.0, y_shift=0.0):
    """Evaluate sum_j A_j sin(2 pi l_xj x / L + 2 pi l_yj y / L + phi_j).

    ``x_shift``/``y_shift`` evaluate the field at ``(x - x_shift, y - y_shift)``.
    """
    X, Y = grid.mesh()
    X = X - x_shift
    Y = Y - y_shift
    out = np.zeros_like(X)
    for a, lx, ly, phi in zip(params.amplitudes, params.l_x, params.l_y, params.phases):
        out += a * np.sin(2 * np.pi * lx * X / params.L + 2 * np.pi * ly * Y / params.L + phi)
    return out


def sample_sine_ic(rng: np.random.Generator, grid: GridSpec, J: int = 5, L: float = 2.0):
    amplitudes = rng.uniform(-0.5, 0.5, J)
    omegas = rng.uniform(-0.4, 0.4, J)
    l_x = rng.integers(1, 4, J)
    l_y = rng.integers(1, 4, J)
    phases = rng.uniform(0.0, 2 * np.pi, J)
    params = SineIcParams(
        amplitudes=tuple(float(a) for a in amplitudes),
        l_x=tuple(int(v) for v in l_x),
        l_y=tuple(int(v) for v in l_y),
        phases=tuple(float(p) for p in phases),
        omegas=tuple(float(w) for w in omegas),
        J=J,
        L=L,
    )
    return sine_field(params, grid), params


def grf_spectrum(grid: GridSpec, alpha: float = 2.5, tau: float = 7.0) -> np.ndarray:
    """Square-root eigenvalues of tau^(2 alpha - 2) (-Lap + tau^2 I)^(-alpha)."""
    kx, ky = grid.wavenumbers()
    sigma = tau ** (0.5 * (2 * alpha - 2.0))
    sqrt_eig = np.sqrt(2.0) * sigma * (kx ** 2 + ky ** 2 + tau ** 2) ** (-alpha / 2.0)
    sqrt_eig[0, 0] = 0.0
    return sqrt_eig


def sample_grf_ic(rng: np.random.Generator, grid: GridSpec, alpha: float = 2.5,
                  tau: float = 7.0, return_imag: bool = False):
    """Zero-mean periodic Gaussian random field.

    Real white noise is coloured in Fourier space with a real, even filter, so
    the spectrum stays Hermitian and the inverse transform is real.
    """
    noise = rng.standard_normal((grid.n_x, grid.n_y))
    filt = grf_spectrum(grid, alpha, tau) * np.sqrt(grid.n_x * grid.n_y)
    field = np.fft.ifft2(filt * np.fft.fft2(noise))
    if return_imag:
        return field.real, float(np.max(np.abs(field.imag)))
    return field.real
