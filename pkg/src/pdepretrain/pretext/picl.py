"""Physics-informed contrastive pretraining with a generalized contrastive loss."""
from __future__ import annotations

import logging

import numpy as np
import torch

from ..datagen.types import PDE, GridSpec

log = logging.getLogger(__name__)

DEFAULT_TAU = 1.0


def picl_theta(coeff_rows, pde_ids) -> np.ndarray:
    """Per-sample ``[|c_burgers|, nu, |c_advection|]``; slots of other PDEs stay 0."""
    rows = np.nan_to_num(np.atleast_2d(np.asarray(coeff_rows, dtype=float)), nan=0.0)
    theta = np.zeros((len(rows), 3))
    for i, (row, pde) in enumerate(zip(rows, pde_ids)):
        pde = PDE(pde)
        speed = float(np.hypot(row[1], row[2]))
        if pde is PDE.BURGERS:
            theta[i] = (speed, row[0], 0.0)
        elif pde is PDE.ADVECTION:
            theta[i] = (0.0, 0.0, speed)
        else:
            theta[i] = (0.0, row[0], 0.0)
    return theta


def psi_matrix(theta):
    """Magnitude-aware cosine similarity sqrt|t_i . t_j| / max(|t_i|, |t_j|)."""
    theta = torch.as_tensor(theta, dtype=torch.float64)
    dots = theta @ theta.T
    norms = theta.norm(dim=1)
    denom = torch.maximum(norms[:, None], norms[None, :])
    both_zero = denom == 0
    if bool(both_zero.any()):
        log.info("psi set to 1 for %d pairs with two zero coefficient vectors", int(both_zero.sum()))
    psi = dots.abs().sqrt() / torch.where(both_zero, torch.ones_like(denom), denom)
    return torch.where(both_zero, torch.ones_like(psi), psi).clamp(0.0, 1.0)


def _upwind(u, vx, vy, dx, dy):
    back_x = (u - torch.roll(u, 1, -2)) / dx
    fwd_x = (torch.roll(u, -1, -2) - u) / dx
    back_y = (u - torch.roll(u, 1, -1)) / dy
    fwd_y = (torch.roll(u, -1, -1) - u) / dy
    return torch.where(vx >= 0, back_x, fwd_x), torch.where(vy >= 0, back_y, fwd_y)


def euler_update(u, coeff_rows, pde_ids, grid: GridSpec, dt=None):
    """One forward-Euler step of each sample's own PDE over ``dt`` (the save
    interval by default). ``u`` is ``[B, W, n_x, n_y]``."""
    dt = grid.dt_save if dt is None else dt
    rows = torch.as_tensor(np.nan_to_num(np.asarray(coeff_rows, dtype=float), nan=0.0),
                           dtype=u.dtype, device=u.device)
    nu, cx, cy = (rows[:, k].view(-1, 1, 1, 1) for k in range(3))
    burgers = torch.tensor([PDE(p) is PDE.BURGERS for p in pde_ids], device=u.device).view(-1, 1, 1, 1)
    vx = torch.where(burgers, cx * u, cx.expand_as(u))
    vy = torch.where(burgers, cy * u, cy.expand_as(u))
    gx, gy = _upwind(u, vx, vy, grid.dx, grid.dy)
    lap = ((torch.roll(u, -1, -2) - 2 * u + torch.roll(u, 1, -2)) / grid.dx ** 2
           + (torch.roll(u, -1, -1) - 2 * u + torch.roll(u, 1, -1)) / grid.dy ** 2)
    return u + dt * (nu * lap - vx * gx - vy * gy)


def pairwise_physics_distance(a, b):
    """``d[i, j] = mean((a_i - b_j)^2)`` over field entries."""
    a = a.flatten(1)
    b = b.flatten(1)
    n = a.shape[1]
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2 * a @ b.T
    return d.clamp_min(0.0) / n


def gcl_loss(d_phys, psi, tau: float = DEFAULT_TAU):
    """Mean over ordered pairs i != j of the generalized contrastive loss."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    psi = psi.to(d_phys.dtype)
    per_pair = 0.5 * psi * d_phys ** 2 + 0.5 * (1 - psi) * torch.relu(tau - d_phys) ** 2
    b = d_phys.shape[0]
    off = ~torch.eye(b, dtype=torch.bool, device=d_phys.device)
    if b < 2:
        return per_pair.sum() * 0.0
    return per_pair[off].mean()


def picl_loss(model, u, coeff_rows, pde_ids, grid: GridSpec, start: int = 0,
              tau: float = DEFAULT_TAU, in_frames: int = 8, theta=None):
    """GCL loss on one window.

    The model sees frames ``[start, start + in_frames)`` and predicts ``u^t``,
    the next ``W`` frames. With ``u^{t+1}`` the same window one frame later:
    ``d_system = u_i^{t+1} - u_j^t`` and ``d_update = F(G(u_i)) - G(u_j)``.
    """
    x = u[:, start:start + in_frames]
    g = model(x)
    w = g.shape[1]
    t0 = start + in_frames
    if t0 + 1 + w > u.shape[1]:
        raise ValueError(f"window starting at {start} leaves no frame for u^(t+1)")
    u_t = u[:, t0:t0 + w]
    u_t1 = u[:, t0 + 1:t0 + 1 + w]
    f_g = euler_update(g, coeff_rows, pde_ids, grid)
    # d_system - d_update = (u_i^{t+1} - F(G u_i)) - (u_j^t - G u_j)
    d_phys = pairwise_physics_distance(u_t1 - f_g, u_t - g)
    if theta is None:
        theta = picl_theta(coeff_rows, pde_ids)
    return gcl_loss(d_phys, psi_matrix(theta).to(u.device), tau)
