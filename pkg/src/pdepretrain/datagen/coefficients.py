from __future__ import annotations

import numpy as np

from .types import PDE, PdeCoefficients

# (low, high) uniform ranges; c ranges apply to both components
COEFFICIENT_RANGES = {
    (PDE.HEAT, "in"): {"nu": (2e-3, 2e-2)},
    (PDE.HEAT, "out"): {"nu": (2e-2, 3e-2)},
    (PDE.ADVECTION, "in"): {"c": (0.1, 2.5)},
    (PDE.ADVECTION, "out"): {"c": (2.5, 3.0)},
    (PDE.BURGERS, "in"): {"nu": (7.5e-3, 1.5e-2), "c": (0.5, 1.0)},
    (PDE.BURGERS, "out"): {"nu": (5.0e-3, 7.5e-3), "c": (1.0, 1.25)},
}

NS_VISCOSITIES = np.array([m * 10.0 ** -e for e in (6, 7, 8, 9) for m in range(1, 10)])
NS_AMPLITUDES = np.arange(1, 11) * 1e-3

DISTRIBUTIONS = ("in", "out")


def sample_coefficients(pde_id, distribution: str, rng: np.random.Generator) -> PdeCoefficients:
    pde = PDE(pde_id)
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}")
    if pde is PDE.NAVIER_STOKES:
        if distribution != "in":
            raise ValueError("navier_stokes has no out-of-distribution coefficient range")
        nu = float(rng.choice(NS_VISCOSITIES))
        amp = float(rng.choice(NS_AMPLITUDES))
        return PdeCoefficients(pde, nu=nu, amplitude_A=amp, distribution=distribution)

    ranges = COEFFICIENT_RANGES[(pde, distribution)]
    kwargs = {}
    if "nu" in ranges:
        kwargs["nu"] = float(rng.uniform(*ranges["nu"]))
    if "c" in ranges:
        c = rng.uniform(*ranges["c"], size=2)
        kwargs["c_x"], kwargs["c_y"] = float(c[0]), float(c[1])
    return PdeCoefficients(pde, distribution=distribution, **kwargs)
