"""Shell transport noise: regimes, coefficients, Brownian increments, covariances.

The noise is ``sum_{k,j} theta_{k,j} a_{k,j} e^{ik.x} W^{k,j}`` over the shell
``n <= |k| <= 2n``. Planar modes (``k3 = 0``) carry a horizontal swirl
(``j = 1``) and a vertical jet (``j = 2``) whose Brownian motions are
correlated with coefficient ``rho``; this correlation is the source of noise
helicity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np

from .lattice import gamma_plus_mask, in_gamma_plus, mode_frames, shell_modes, zeta_limit, zeta_shell

_EXACT = 1e-12


class Regime(str, enum.Enum):
    HELICAL = "Helical"
    PERTURBED_2D = "Perturbed2D"
    ISOTROPIC = "Isotropic"

    @classmethod
    def parse(cls, text: str) -> "Regime":
        for r in cls:
            if r.value.lower() == text.strip().lower():
                return r
        raise ValueError(f"unknown regime {text!r}; expected one of {[r.value for r in cls]}")


@dataclass(frozen=True)
class RegimeParams:
    """Spectral exponents, amplitudes, correlation and resistivity of one noise family."""

    regime: Regime
    alpha: float
    beta: float
    gamma: float
    c1h: float
    c2h: float
    cv: float
    rho: float
    eta: float

    @classmethod
    def isotropic(cls, cv: float, rho: float, eta: float) -> "RegimeParams":
        return cls(Regime.ISOTROPIC, 3.0, 3.0, 3.0, cv, cv, cv, rho, eta)

    def replace(self, **changes) -> "RegimeParams":
        d = dict(self.__dict__)
        d.update(changes)
        return RegimeParams(**d)


def validate_regime(p: RegimeParams) -> list[str]:
    """Violated constraints of the declared regime, each with both sides evaluated.

    An empty list means the parameters are admissible.
    """
    out: list[str] = []

    def need(ok: bool, msg: str) -> None:
        if not ok:
            out.append(msg)

    def eq(a: float, b: float) -> bool:
        return abs(a - b) <= _EXACT * max(1.0, abs(b))

    need(p.eta > 0, f"eta = {p.eta} must be > 0")
    for name in ("c1h", "c2h", "cv"):
        v = getattr(p, name)
        need(v > 0, f"{name} = {v} must be > 0")
    need(-1.0 <= p.rho <= 1.0, f"rho = {p.rho} must lie in [-1, 1]")
    if out:
        return out

    zh2 = zeta_limit(2, "H")
    bound_h = math.sqrt(zh2 / p.eta)
    if p.regime is Regime.HELICAL:
        need(p.alpha >= 2, f"alpha = {p.alpha} must be >= 2")
        need(p.beta > 2, f"beta = {p.beta} must be > 2")
        need(p.gamma > 3, f"gamma = {p.gamma} must be > 3")
        need(eq(p.alpha + p.beta, 6.0), f"alpha + beta = {p.alpha + p.beta} must equal 6")
        if eq(p.alpha, 2.0):
            need(p.c1h > bound_h, f"c1h = {p.c1h} <= sqrt(zeta_H2/eta) = {bound_h:.6g}")
    elif p.regime is Regime.PERTURBED_2D:
        need(eq(p.alpha, 2.0), f"alpha = {p.alpha} must equal 2")
        need(eq(p.beta, 4.0), f"beta = {p.beta} must equal 4")
        need(p.gamma >= 5, f"gamma = {p.gamma} must be >= 5")
        need(p.c1h > bound_h, f"c1h = {p.c1h} <= sqrt(zeta_H2/eta) = {bound_h:.6g}")
    else:
        for name in ("alpha", "beta", "gamma"):
            v = getattr(p, name)
            need(eq(v, 3.0), f"{name} = {v} must equal 3")
        need(eq(p.c1h, p.c2h) and eq(p.c2h, p.cv), f"c1h, c2h, cv = {p.c1h}, {p.c2h}, {p.cv} must be equal")
        bound = math.sqrt(2.0 * zeta_limit(3, "s") / (3.0 * p.eta))
        need(p.cv > bound, f"cv = {p.cv} <= sqrt(2 zeta_s3/(3 eta)) = {bound:.6g}")
    return out


# ---------------------------------------------------------------------------
# coefficients and the mode table
# ---------------------------------------------------------------------------


def theta(n: int, k, j: int, p: RegimeParams) -> complex:
    """Amplitude of the noise mode ``(k, j)`` at scale ``n``."""
    k = tuple(int(c) for c in k)
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    r2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    if not (n * n <= r2 <= 4 * n * n):
        return 0j
    r = math.sqrt(r2)
    if k[2] == 0:
        if j == 1:
            sign = 1.0 if in_gamma_plus(k) else -1.0
            return complex(0.0, sign / (p.c1h * r ** (p.alpha / 2)))
        return complex(1.0 / (p.c2h * r ** (p.beta / 2)))
    return complex(1.0 / (p.cv * r ** (p.gamma / 2)))


def theta_array(vecs: np.ndarray, p: RegimeParams) -> np.ndarray:
    """Vectorised :func:`theta` for shell vectors: ``(N, 2)`` complex, columns ``j = 1, 2``."""
    v = np.asarray(vecs, dtype=np.int64)
    r = np.sqrt((v * v).sum(axis=1).astype(np.float64))
    planar = v[:, 2] == 0
    sign = np.where(gamma_plus_mask(v), 1.0, -1.0)
    out = np.empty((len(v), 2), dtype=np.complex128)
    out[:, 0] = np.where(planar, 1j * sign / (p.c1h * r ** (p.alpha / 2)), 1.0 / (p.cv * r ** (p.gamma / 2)))
    out[:, 1] = np.where(planar, 1.0 / (p.c2h * r ** (p.beta / 2)), 1.0 / (p.cv * r ** (p.gamma / 2)))
    return out


class NoiseMode(NamedTuple):
    k: tuple
    j: int
    theta: complex
    a: np.ndarray


@dataclass(frozen=True)
class NoiseModeTable:
    """Active noise modes of scale ``n``.

    ``vecs``, ``theta`` and ``frames`` cover the whole shell (both half
    lattices, lexicographic order); ``plus`` selects the Gamma+ rows on which
    Brownian motions are sampled.
    """

    n: int
    params: RegimeParams

    @cached_property
    def vecs(self) -> np.ndarray:
        return shell_modes(self.n)

    @cached_property
    def theta(self) -> np.ndarray:
        return theta_array(self.vecs, self.params)

    @cached_property
    def frames(self) -> np.ndarray:
        return mode_frames(self.vecs)

    @cached_property
    def plus(self) -> np.ndarray:
        return np.nonzero(gamma_plus_mask(self.vecs))[0]

    @cached_property
    def mirror(self) -> np.ndarray:
        """Row index of ``-k`` for every row ``k``."""
        v = self.vecs
        lookup = {tuple(x): i for i, x in enumerate(v.tolist())}
        return np.array([lookup[tuple(-x for x in row)] for row in v.tolist()], dtype=np.int64)

    @cached_property
    def planar(self) -> np.ndarray:
        return self.vecs[:, 2] == 0

    def entries(self):
        """Iterate over all ``(k, j)`` modes of the shell as :class:`NoiseMode` records."""
        for i, k in enumerate(self.vecs):
            for j in (1, 2):
                yield NoiseMode(tuple(int(c) for c in k), j, complex(self.theta[i, j - 1]), self.frames[i, j - 1])

    def vector_amplitudes(self) -> np.ndarray:
        """``theta_{k,j} a_{k,j}`` as an ``(N, 2, 3)`` complex array."""
        return self.theta[:, :, None] * self.frames


@lru_cache(maxsize=64)
def noise_table(n: int, p: RegimeParams) -> NoiseModeTable:
    return NoiseModeTable(int(n), p)


# ---------------------------------------------------------------------------
# Brownian increments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BrownianBlock:
    """Complex increments over one step for the Gamma+ rows of a table.

    ``increments[i, j-1]`` belongs to the mode ``table.vecs[table.plus[i]]``.
    """

    dt: float
    increments: np.ndarray

    def full(self, table: NoiseModeTable) -> np.ndarray:
        """Increments on every shell row; Gamma- rows are conjugates."""
        out = np.empty((len(table.vecs), 2), dtype=np.complex128)
        out[table.plus] = self.increments
        out[table.mirror[table.plus]] = np.conj(self.increments)
        return out


def correlated_normals(planar: np.ndarray, rho: float, z: np.ndarray) -> np.ndarray:
    """Map iid normals ``z[..., 2]`` to pairs with correlation ``rho`` on planar rows."""
    out = z.copy()
    s = math.sqrt(max(0.0, 1.0 - rho * rho))
    out[planar, 1] = rho * z[planar, 0] + s * z[planar, 1]
    return out


def sample_block(table: NoiseModeTable, dt: float, rng: np.random.Generator) -> BrownianBlock:
    """Draw ``Delta W^{k,j}`` for all Gamma+ modes.

    Real and imaginary parts are independent Gaussian pairs with variance
    ``dt`` each and correlation ``rho`` between ``j = 1, 2`` on planar modes,
    so ``E|dW|^2 = 2 dt`` and ``E[dW^{k,1} conj(dW^{k,2})] = 2 rho dt``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    rho = table.params.rho
    if abs(rho) > 1:
        raise ValueError("|rho| must not exceed 1")
    m = len(table.plus)
    planar = table.planar[table.plus]
    z = rng.standard_normal((2, m, 2))
    re = correlated_normals(planar, rho, z[0])
    im = correlated_normals(planar, rho, z[1])
    return BrownianBlock(dt, math.sqrt(dt) * (re + 1j * im))


# ---------------------------------------------------------------------------
# covariance diagnostics
# ---------------------------------------------------------------------------


class Diffusivities(NamedTuple):
    eta_T: float
    eta_R: float
    eta_V: float
    eta_RV: float
    eta_iso: float


def _outer_sum(weights: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    # deterministic, compensated summation of weights_i * v_i v_i^T
    terms = weights[:, None, None] * vectors[:, :, None] * vectors[:, None, :]
    out = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            out[a, b] = math.fsum(terms[:, a, b].tolist())
    return out


def covariance_at_zero(n: int, p: RegimeParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Direct sums for the noise covariance at the origin.

    Returns ``(Qbar0, Qprime0, Qrho0)``: the planar-mode part, the
    tilted-mode part and the ``rho`` cross part.
    """
    t = noise_table(n, p)
    amp2 = np.abs(t.theta) ** 2
    planar = t.planar
    qbar = 2.0 * (_outer_sum(amp2[planar, 0], t.frames[planar, 0]) + _outer_sum(amp2[planar, 1], t.frames[planar, 1]))
    rest = ~planar
    qprime = 2.0 * (_outer_sum(amp2[rest, 0], t.frames[rest, 0]) + _outer_sum(amp2[rest, 1], t.frames[rest, 1]))
    # rho part: 2 rho sum_{k3=0} [theta1 conj(theta2) a1 a2^T + theta2 conj(theta1) a2 a1^T]
    c = t.theta[planar, 0] * np.conj(t.theta[planar, 1])
    a1, a2 = t.frames[planar, 0], t.frames[planar, 1]
    terms = c[:, None, None] * a1[:, :, None] * a2[:, None, :]
    terms = terms + np.conj(c)[:, None, None] * a2[:, :, None] * a1[:, None, :]
    qrho = 2.0 * p.rho * terms.sum(axis=0)
    return qbar, qprime, qrho.real


def diffusivities_from_sums(n: int, p: RegimeParams) -> Diffusivities:
    """Eddy diffusivities read off the direct covariance sums."""
    qbar, qprime, _ = covariance_at_zero(n, p)
    eta_T = 0.5 * qbar[0, 0]
    eta_R = 0.5 * qbar[2, 2]
    eta_RV = qprime[0, 0] - qprime[2, 2]
    eta_V = 0.5 * qprime[2, 2] + eta_RV
    eta_iso = 0.5 * (qbar + qprime)[0, 0] if p.regime is Regime.ISOTROPIC else math.nan
    return Diffusivities(eta_T, eta_R, eta_V, eta_RV, eta_iso)


def covariance_closed_form(n: int, p: RegimeParams) -> Diffusivities:
    """Eddy diffusivities from the shell constants."""
    eta_T = zeta_shell(n, p.alpha, "H") / (2.0 * p.c1h**2 * n ** (p.alpha - 2))
    eta_R = zeta_shell(n, p.beta, "H") / (p.c2h**2 * n ** (p.beta - 2))
    eta_V = 2.0 * zeta_shell(n, p.gamma, "s") / (3.0 * p.cv**2 * n ** (p.gamma - 3))
    eta_RV = zeta_shell(n, p.gamma, "H") / (p.cv**2 * n ** (p.gamma - 2))
    eta_iso = 2.0 * zeta_shell(n, 3, "s") / (3.0 * p.cv**2) if p.regime is Regime.ISOTROPIC else math.nan
    return Diffusivities(eta_T, eta_R, eta_V, eta_RV, eta_iso)


def grad_Qrho_at_zero(n: int, p: RegimeParams) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal gradient of the ``rho`` covariance at the origin.

    ``R[r, s] = d_s Q^{3,r}(0)`` and ``V[r, s] = d_s Q^{r,3}(0)`` for
    ``r, s in {1, 2}``, summed directly over the planar modes.
    """
    t = noise_table(n, p)
    pl = t.planar
    k = t.vecs[pl].astype(np.float64)
    c = t.theta[pl, 0] * np.conj(t.theta[pl, 1])
    a1 = t.frames[pl, 0]
    # Q^{r,3}(x) = 2 rho sum c a1_r e^{ik.x}   (a2 = e3)
    # Q^{3,r}(x) = 2 rho sum conj(c) a1_r e^{ik.x}
    R = np.empty((2, 2))
    V = np.empty((2, 2))
    for r in range(2):
        for s in range(2):
            V[r, s] = (2.0 * p.rho * (1j * k[:, s]) * c * a1[:, r]).sum().real
            R[r, s] = (2.0 * p.rho * (1j * k[:, s]) * np.conj(c) * a1[:, r]).sum().real
    return R, V


def alpha_coefficient(n: int, p: RegimeParams) -> float:
    """Strength of the first-order (alpha) term, read from the direct sum ``R[1, 0]``."""
    R, _ = grad_Qrho_at_zero(n, p)
    return float(R[1, 0])


def helicity(n: int, p: RegimeParams) -> float:
    """Noise helicity ``E[W . curl W] / (2t)`` summed mode by mode."""
    t = noise_table(n, p)
    pl = np.nonzero(t.planar)[0]
    k = t.vecs[pl].astype(np.float64)
    th = t.theta[pl]
    a = t.frames[pl]
    total = 0.0
    # sum over (k, j, l) of theta_kj a_kj . (-i k x theta_kl^* a_kl) * E[dW^kj conj dW^kl] / (2 dt)
    for j, l in ((0, 1), (1, 0)):
        curl_part = -1j * np.cross(k, a[:, l]) * np.conj(th[:, l])[:, None]
        total += p.rho * float(np.real((th[:, j][:, None] * a[:, j] * curl_part).sum()))
    return total


def helicity_closed_form(n: int, p: RegimeParams) -> float:
    m = (p.alpha + p.beta - 2.0) / 2.0
    return -2.0 * p.rho * zeta_shell(n, m, "H") / (p.c1h * p.c2h * n ** ((p.alpha + p.beta - 6.0) / 2.0))


def helicity_limit(p: RegimeParams) -> float:
    if abs(p.alpha + p.beta - 6.0) > _EXACT:
        raise ValueError("the helicity limit requires alpha + beta = 6")
    return -4.0 * math.pi * p.rho * math.log(2.0) / (p.c1h * p.c2h)
