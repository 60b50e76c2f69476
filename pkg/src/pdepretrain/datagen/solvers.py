"""Reference solvers for the four PDE families.

Heat and Burgers use explicit finite differences (forward Euler, central
diffusion, first-order upwind convection). Advection is solved exactly by a
Fourier phase shift. Navier-Stokes (vorticity form) is pseudo-spectral with
Crank-Nicolson viscosity, Adams-Bashforth convection and 2/3 dealiasing.
"""
from __future__ import annotations

import math

import numpy as np

from ..exceptions import NonFiniteError, StabilityViolation
from ..spectral import periodic_shift
from .types import PDE, GridSpec, PdeCoefficients, Trajectory

SAFETY = 0.9
NS_DT = 1e-3


def laplacian(u, dx, dy):
    return ((np.roll(u, -1, -2) - 2 * u + np.roll(u, 1, -2)) / dx ** 2
            + (np.roll(u, -1, -1) - 2 * u + np.roll(u, 1, -1)) / dy ** 2)


def upwind_gradient(u, vel_x, vel_y, dx, dy):
    """One-sided differences taken against the local transport direction."""
    back_x = (u - np.roll(u, 1, -2)) / dx
    fwd_x = (np.roll(u, -1, -2) - u) / dx
    back_y = (u - np.roll(u, 1, -1)) / dy
    fwd_y = (np.roll(u, -1, -1) - u) / dy
    gx = np.where(vel_x >= 0, back_x, fwd_x)
    gy = np.where(vel_y >= 0, back_y, fwd_y)
    return gx, gy


def heat_rhs(u, nu, grid):
    return nu * laplacian(u, grid.dx, grid.dy)


def burgers_rhs(u, nu, c_x, c_y, grid):
    vx, vy = c_x * u, c_y * u
    gx, gy = upwind_gradient(u, vx, vy, grid.dx, grid.dy)
    return -(vx * gx + vy * gy) + nu * laplacian(u, grid.dx, grid.dy)


def heat_dt_limit(nu, grid):
    if nu == 0:
        return math.inf
    return 0.25 / (nu * (1 / grid.dx ** 2 + 1 / grid.dy ** 2))


def burgers_dt_limit(nu, c_x, c_y, u_max, grid):
    # positivity of the upwind/central update keeps max|u| from growing
    conv = u_max * (abs(c_x) / grid.dx + abs(c_y) / grid.dy)
    diff = 2 * nu * (1 / grid.dx ** 2 + 1 / grid.dy ** 2)
    total = conv + diff
    cfl = math.inf if total == 0 else 1.0 / total
    return min(cfl, heat_dt_limit(nu, grid))


def substeps(dt_save, dt_limit, dt=None):
    """Number of equal internal steps per save interval and their size."""
    if dt is not None:
        if dt > dt_limit * (1 + 1e-12):
            raise StabilityViolation(f"dt={dt:.3e} exceeds stability limit {dt_limit:.3e}")
        n = max(1, math.ceil(dt_save / dt - 1e-9))
    elif math.isinf(dt_limit):
        n = 1
    else:
        n = max(1, math.ceil(dt_save / (SAFETY * dt_limit)))
    return n, dt_save / n


def _integrate(u0, rhs, grid, n_sub, dt, sample_id=""):
    frames = np.empty((grid.n_t,) + u0.shape)
    u = np.array(u0, dtype=np.float64)
    frames[0] = u
    for k in range(1, grid.n_t):
        for _ in range(n_sub):
            u = u + dt * rhs(u)
        if not np.all(np.isfinite(u)):
            raise NonFiniteError(f"non-finite state at frame {k}", where=sample_id)
        frames[k] = u
    return frames


def solve_heat(ic, coeffs: PdeCoefficients, grid: GridSpec, dt=None, sample_id="") -> Trajectory:
    nu = coeffs.nu
    if nu is None or nu <= 0:
        raise ValueError("heat solver needs nu > 0")
    n_sub, h = substeps(grid.dt_save, heat_dt_limit(nu, grid), dt)
    u = _integrate(ic, lambda v: heat_rhs(v, nu, grid), grid, n_sub, h, sample_id)
    return Trajectory(u, coeffs, grid, sample_id=sample_id,
                      meta={"dt_internal": h, "n_substeps": n_sub})


def solve_advection(ic, coeffs: PdeCoefficients, grid: GridSpec, sample_id="") -> Trajectory:
    ic = np.asarray(ic, dtype=np.float64)
    frames = np.empty((grid.n_t,) + ic.shape)
    frames[0] = ic
    for k, t in enumerate(grid.times[1:], start=1):
        frames[k] = periodic_shift(ic, coeffs.c_x * t, coeffs.c_y * t, grid.lx, grid.ly)
    return Trajectory(frames, coeffs, grid, sample_id=sample_id, meta={"method": "spectral_shift"})


def solve_burgers(ic, coeffs: PdeCoefficients, grid: GridSpec, dt=None, sample_id="") -> Trajectory:
    nu, c_x, c_y = coeffs.nu, coeffs.c_x, coeffs.c_y
    if nu is None or nu <= 0:
        raise ValueError("burgers solver needs nu > 0")
    u_max = float(np.max(np.abs(ic)))
    n_sub, h = substeps(grid.dt_save, burgers_dt_limit(nu, c_x, c_y, u_max, grid), dt)
    u = _integrate(ic, lambda v: burgers_rhs(v, nu, c_x, c_y, grid), grid, n_sub, h, sample_id)
    return Trajectory(u, coeffs, grid, sample_id=sample_id,
                      meta={"dt_internal": h, "n_substeps": n_sub})


def ns_forcing(grid: GridSpec, amplitude: float):
    X, Y = grid.mesh()
    return amplitude * (np.sin(2 * np.pi * (X + Y)) + np.cos(2 * np.pi * (X + Y)))


def solve_navier_stokes(ic, coeffs: PdeCoefficients, grid: GridSpec, dt: float = NS_DT,
                        sample_id="") -> Trajectory:
    """Vorticity form: w_t + u . grad w - nu lap w = f, with u from a streamfunction."""
    nu = coeffs.nu
    amp = coeffs.amplitude_A or 0.0
    nx, ny = grid.n_x, grid.n_y
    kx = 2 * np.pi * np.fft.fftfreq(nx, d=grid.dx)
    ky = 2 * np.pi * np.fft.rfftfreq(ny, d=grid.dy)
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    k2 = KX ** 2 + KY ** 2
    inv_k2 = np.where(k2 == 0, 0.0, 1.0 / np.where(k2 == 0, 1.0, k2))
    kmax_x = np.max(np.abs(kx))
    kmax_y = np.max(np.abs(ky))
    dealias = (np.abs(KX) <= (2 / 3) * kmax_x) & (np.abs(KY) <= (2 / 3) * kmax_y)

    f_hat = np.fft.rfft2(ns_forcing(grid, amp))
    f_hat[0, 0] = 0.0
    w_hat = np.fft.rfft2(np.asarray(ic, dtype=np.float64))
    w_hat[0, 0] = 0.0

    def nonlinear(w_h):
        psi_h = w_h * inv_k2
        u = np.fft.irfft2(1j * KY * psi_h, s=(nx, ny))
        v = np.fft.irfft2(-1j * KX * psi_h, s=(nx, ny))
        wx = np.fft.irfft2(1j * KX * w_h, s=(nx, ny))
        wy = np.fft.irfft2(1j * KY * w_h, s=(nx, ny))
        n_h = np.fft.rfft2(u * wx + v * wy) * dealias
        n_h[0, 0] = 0.0
        return n_h

    steps_per_frame = max(1, round(grid.dt_save / dt))
    if not math.isclose(steps_per_frame * dt, grid.dt_save, rel_tol=1e-9):
        raise ValueError(f"dt={dt} does not divide the save interval {grid.dt_save}")
    lhs = 1.0 + 0.5 * dt * nu * k2
    rhs_diag = 1.0 - 0.5 * dt * nu * k2

    frames = np.empty((grid.n_t, nx, ny))
    frames[0] = np.fft.irfft2(w_hat, s=(nx, ny))
    n_prev = None
    for k in range(1, grid.n_t):
        for _ in range(steps_per_frame):
            n_now = nonlinear(w_hat)
            conv = n_now if n_prev is None else 1.5 * n_now - 0.5 * n_prev
            w_hat = (rhs_diag * w_hat + dt * (f_hat - conv)) / lhs
            n_prev = n_now
        frame = np.fft.irfft2(w_hat, s=(nx, ny))
        if not np.all(np.isfinite(frame)):
            raise NonFiniteError(f"navier-stokes blow-up at frame {k}", where=sample_id)
        frames[k] = frame
    return Trajectory(frames, coeffs, grid, sample_id=sample_id,
                      meta={"dt_internal": dt, "n_substeps": steps_per_frame})


def solve(pde_id, ic, coeffs, grid, sample_id=""):
    pde = PDE(pde_id)
    if pde is PDE.HEAT:
        return solve_heat(ic, coeffs, grid, sample_id=sample_id)
    if pde is PDE.ADVECTION:
        return solve_advection(ic, coeffs, grid, sample_id=sample_id)
    if pde is PDE.BURGERS:
        return solve_burgers(ic, coeffs, grid, sample_id=sample_id)
    return solve_navier_stokes(ic, coeffs, grid, sample_id=sample_id)


def discrete_residual(traj: Trajectory, pde_id=None, coeffs=None):
    """Max over frames of |u[k+1] - step(u[k])|, relative to max|u|.

    ``step`` re-applies the explicit scheme over one save interval with the
    trajectory's recorded internal step. ``pde_id``/``coeffs`` default to the
    trajectory's own, which lets callers test a trajectory against another
    operator.
    """
    pde = PDE(pde_id or traj.pde_id)
    c = coeffs or traj.coeffs
    grid = traj.grid
    n_sub = traj.meta.get("n_substeps")
    h = traj.meta.get("dt_internal")
    if pde is PDE.HEAT:
        rhs = lambda v: heat_rhs(v, c.nu, grid)  # noqa: E731
    elif pde is PDE.BURGERS:
        rhs = lambda v: burgers_rhs(v, c.nu, c.c_x, c.c_y, grid)  # noqa: E731
    else:
        raise ValueError("discrete residual is defined for heat and burgers only")
    res = 0.0
    for k in range(grid.n_t - 1):
        v = traj.u[k].astype(np.float64)
        for _ in range(n_sub):
            v = v + h * rhs(v)
        res = max(res, float(np.max(np.abs(traj.u[k + 1] - v))))
    scale = float(np.max(np.abs(traj.u)))
    return res / scale if scale > 0 else res
