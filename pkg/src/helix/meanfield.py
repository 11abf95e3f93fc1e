"""Exact solution of the deterministic mean-field limit equation.

The limit equation has constant coefficients, so each Fourier mode evolves
independently under a 3x3 linear ODE whose exponential is known in closed
form (see :mod:`helix.drift`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drift import DriftBlock
from .lattice import SpectralField, zeta_limit
from .noise import Regime, RegimeParams


@dataclass(frozen=True)
class LimitParams:
    """Coefficients of the limit drift: eddy diffusivities, alpha strength, resistivity."""

    lam_limit_H: float
    lam_limit_V: float
    a_rho_limit: float
    eta: float

    @classmethod
    def from_regime(cls, p: RegimeParams) -> "LimitParams":
        if p.regime is Regime.ISOTROPIC:
            lam = 2.0 * zeta_limit(3, "s") / (3.0 * p.cv**2)
            lam_H = lam_V = lam
        elif p.regime is Regime.PERTURBED_2D or abs(p.alpha - 2.0) < 1e-12:
            lam_H, lam_V = zeta_limit(2, "H") / (2.0 * p.c1h**2), 0.0
        else:
            lam_H = lam_V = 0.0
        a = 2.0 * math.pi * p.rho * math.log(2.0) / (p.c1h * p.c2h)
        return cls(lam_H, lam_V, a, p.eta)

    def drift(self, modes: np.ndarray) -> DriftBlock:
        return DriftBlock.build(modes, self.eta, self.lam_limit_H, self.lam_limit_V, self.a_rho_limit)


def evolve_limit(B0: SpectralField, p: RegimeParams, t: float) -> SpectralField:
    """Limit solution at time ``t`` started from ``B0``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    E = LimitParams.from_regime(p).drift(B0.modes).exponential(t)
    return SpectralField(B0.K_max, np.einsum("hij,hj->hi", E, B0.coeffs))


def evolve_limit_b3(B0: SpectralField, p: RegimeParams, t: float) -> np.ndarray:
    """Third component of the limit solution, from its own scalar equation.

    The vertical component diffuses and is forced by the horizontal curl of
    the horizontal field, ``a (d1 B2 - d2 B1)``. Integrating the forcing
    against the horizontal evolution gives, per mode,
    ``b3(t) = e^{-c t} (b3(0) + [N int_0^t e^{uN} du b(0)]_3)``.
    Returns coefficients over ``B0.modes``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    block = LimitParams.from_regime(p).drift(B0.modes)
    forced = np.einsum("hij,hjk,hk->hi", block.alpha_part(), block.integrated_exponential(t), B0.coeffs)
    return np.exp(-block.decay * t) * (B0.coeffs[:, 2] + forced[:, 2])


def decay_rate(B0: SpectralField, p: RegimeParams) -> float:
    """Exact exponential decay rate of the limit solution for single-mode data.

    This is minus the largest real eigenvalue of the limit drift on the
    divergence-free plane at the supporting wave vector.
    """
    support = np.nonzero(np.abs(B0.coeffs).sum(axis=1) > 0)[0]
    if len(support) != 1:
        raise ValueError(f"decay_rate needs data on a single mode pair, got {len(support)} modes")
    block = LimitParams.from_regime(p).drift(B0.modes[support])
    return float(-block.growth_rates()[0])


def beltrami_rate(lam: int, p: RegimeParams) -> float:
    """Rate ``g`` with ``||B_t|| = e^{g t} ||B_0||`` for the Beltrami datum of wavenumber ``lam``."""
    lp = LimitParams.from_regime(p)
    return lp.a_rho_limit * lam - (lp.eta + lp.lam_limit_V) * lam * lam
