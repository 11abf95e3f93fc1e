"""Lie derivatives along noise modes and the Ito-Stratonovich corrector.

A noise mode ``sigma = theta a e^{ik.x}`` acts on a divergence-free field by
the Lie derivative ``L_sigma B = sigma.grad B - B.grad sigma``. In Fourier
space this shifts the coefficient at ``h`` to ``h + k`` and multiplies it by
``i theta [(a.h) b - (k.b) a]``. Averaging the double action over the noise
gives a second-order operator (eddy diffusion) plus a first-order curl term
(alpha effect) whose coefficients are fixed by the covariance sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba as nb
import numpy as np

from .lattice import SpectralField, Truncated, accumulate_modes
from .noise import NoiseMode, RegimeParams, alpha_coefficient, covariance_at_zero, noise_table


def shift_lie(k, theta: complex, a: np.ndarray, hv: np.ndarray, hb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply one complex noise mode to coefficients ``hb`` sitting at wave vectors ``hv``.

    Returns the new wave vectors ``hv + k`` and their coefficients.
    """
    k = np.asarray(k, dtype=np.int64)
    a = np.asarray(a, dtype=np.float64)
    ah = hv.astype(np.float64) @ a
    kb = hb @ k.astype(np.float64)
    out = 1j * theta * (ah[:, None] * hb - kb[:, None] * a[None, :])
    return hv + k[None, :], out


def lie_derivative(mode: NoiseMode, F: SpectralField, K_out: int | None = None) -> Truncated:
    """Action of the real noise field ``sigma_{k,j} + sigma_{-k,j}`` on ``F``.

    The mirror mode ``-k`` carries the conjugate amplitude and the same frame
    vector, so the result is again a real field. ``K_out`` defaults to
    ``F.K_max + |k|`` rounded up, which loses nothing.
    """
    k = np.asarray(mode.k, dtype=np.int64)
    if K_out is None:
        K_out = F.K_max + int(np.ceil(np.sqrt(float(k @ k))))
    hv, hb = F.full()
    v1, c1 = shift_lie(k, mode.theta, mode.a, hv, hb)
    v2, c2 = shift_lie(-k, np.conj(mode.theta), mode.a, hv, hb)
    return accumulate_modes(np.concatenate([v1, v2]), np.concatenate([c1, c2]), K_out)


@nb.njit(cache=True)
def _double_shift(kv, th_out, a_out, th_in, a_in, weight, hv, hb, out):
    # out[h] += weight * L_{(k, th_out, a_out)} L_{(-k, th_in, a_in)} b_h, for every row k
    nk = kv.shape[0]
    nh = hv.shape[0]
    for r in range(nk):
        k0 = kv[r, 0]
        k1 = kv[r, 1]
        k2 = kv[r, 2]
        ai0, ai1, ai2 = a_in[r, 0], a_in[r, 1], a_in[r, 2]
        ao0, ao1, ao2 = a_out[r, 0], a_out[r, 1], a_out[r, 2]
        ci = 1j * th_in[r]
        co = 1j * th_out[r] * weight[r]
        for i in range(nh):
            h0 = hv[i, 0]
            h1 = hv[i, 1]
            h2 = hv[i, 2]
            b0, b1, b2 = hb[i, 0], hb[i, 1], hb[i, 2]
            # inner mode -k: lands at g = h - k
            ah = ai0 * h0 + ai1 * h1 + ai2 * h2
            mkb = -(k0 * b0 + k1 * b1 + k2 * b2)
            g0 = ci * (ah * b0 - mkb * ai0)
            g1 = ci * (ah * b1 - mkb * ai1)
            g2 = ci * (ah * b2 - mkb * ai2)
            # outer mode +k acting on the coefficient at h - k: lands back at h
            ag = ao0 * (h0 - k0) + ao1 * (h1 - k1) + ao2 * (h2 - k2)
            kg = k0 * g0 + k1 * g1 + k2 * g2
            out[i, 0] += co * (ag * g0 - kg * ao0)
            out[i, 1] += co * (ag * g1 - kg * ao1)
            out[i, 2] += co * (ag * g2 - kg * ao2)


def ito_corrector_direct(n: int, p: RegimeParams, F: SpectralField) -> SpectralField:
    """Corrector obtained by composing Lie derivatives mode by mode.

    Sums ``L_{k,j} L_{-k,j} F`` over the shell and adds ``rho`` times the mixed
    compositions ``L_{k,1} L_{-k,2} + L_{k,2} L_{-k,1}`` on planar modes. Each
    double shift returns to the modes of ``F``, so nothing is truncated.
    """
    t = noise_table(n, p)
    hv, hb = F.full()
    hv = np.ascontiguousarray(hv)
    hb = np.ascontiguousarray(hb)
    mir = t.mirror
    out = np.zeros_like(hb)
    ones = np.ones(len(t.vecs))
    for j in (0, 1):
        _double_shift(t.vecs, t.theta[:, j], t.frames[:, j], t.theta[mir, j], t.frames[mir, j], ones, hv, hb, out)
    if p.rho != 0.0:
        w = np.where(t.planar, p.rho, 0.0)
        for j, l in ((0, 1), (1, 0)):
            _double_shift(t.vecs, t.theta[:, j], t.frames[:, j], t.theta[mir, l], t.frames[mir, l], w, hv, hb, out)
    return SpectralField(F.K_max, out[: len(F.coeffs)])


@dataclass(frozen=True)
class CorrectorMultipliers:
    """Coefficients of the averaged drift of scale ``n``.

    The second-order part has symbol ``-(lam_H |h_H|^2 + lam_V h3^2)``; the
    first-order part is ``curl(A F)`` with ``A = a_rho diag(1, 1, 0)``.
    """

    lam_H: float
    lam_V: float
    a_rho: float


@lru_cache(maxsize=64)
def corrector_multipliers(n: int, p: RegimeParams) -> CorrectorMultipliers:
    """Multipliers read off the covariance at the origin (direct sums)."""
    qbar, qprime, _ = covariance_at_zero(n, p)
    q = qbar + qprime
    return CorrectorMultipliers(0.5 * q[0, 0], 0.5 * q[2, 2], alpha_coefficient(n, p))


def diffusion_symbol(modes: np.ndarray, lam_H: float, lam_V: float) -> np.ndarray:
    h = np.asarray(modes, dtype=np.float64)
    return -(lam_H * (h[:, 0] ** 2 + h[:, 1] ** 2) + lam_V * h[:, 2] ** 2)


def apply_alpha(modes: np.ndarray, coeffs: np.ndarray, a_rho: float) -> np.ndarray:
    """``i h x (A b_h)`` with ``A = a_rho diag(1, 1, 0)``."""
    h = np.asarray(modes, dtype=np.float64)
    ab = coeffs.copy()
    ab[..., 2] = 0.0
    return 1j * a_rho * np.cross(h, ab)


def lambda_n(n: int, p: RegimeParams, F: SpectralField) -> SpectralField:
    m = corrector_multipliers(n, p)
    return SpectralField(F.K_max, diffusion_symbol(F.modes, m.lam_H, m.lam_V)[:, None] * F.coeffs)


def lambda_rho(n: int, p: RegimeParams, F: SpectralField) -> SpectralField:
    m = corrector_multipliers(n, p)
    return SpectralField(F.K_max, apply_alpha(F.modes, F.coeffs, m.a_rho))


def lambda_total(n: int, p: RegimeParams, F: SpectralField) -> SpectralField:
    return lambda_n(n, p, F) + lambda_rho(n, p, F)


def cross_norm_sum(n: int, p: RegimeParams, F: SpectralField, chunk: int = 256) -> float:
    """``sum_{k,j} ||sigma_{k,j} x F||^2`` by explicit summation over modes.

    For fixed ``(k, j)`` the product shifts each coefficient of ``F`` to a
    distinct wave vector, so its squared norm is ``sum_h |theta a x b_h|^2``.
    """
    t = noise_table(n, p)
    _, hb = F.full()
    amp = t.vector_amplitudes().reshape(-1, 3)
    total = 0.0
    for s in range(0, len(amp), chunk):
        c = np.cross(amp[s : s + chunk, None, :], hb[None, :, :])
        total += float((np.abs(c) ** 2).sum())
    return total
