"""Lattice geometry, shell constants, mode frames and spectral fields on the 3-torus.

Fields are stored by their Fourier coefficients against the orthonormal basis
``a e^{ik.x} / (2 pi)^{3/2}``. Only the half lattice ``Gamma+`` is stored; the
coefficient at ``-k`` is the complex conjugate of the one at ``k``, so every
stored field is real in physical space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

TWO_PI_32 = (2.0 * math.pi) ** 1.5


# ---------------------------------------------------------------------------
# lattice points
# ---------------------------------------------------------------------------


def in_gamma_plus(k) -> bool:
    """Return True if the lattice vector ``k`` lies in the half lattice Gamma+."""
    k1, k2, k3 = (int(c) for c in k)
    if (k1, k2, k3) == (0, 0, 0):
        raise ValueError("the zero vector is not a wave vector")
    return k3 > 0 or (k3 == 0 and (k2 > 0 or (k2 == 0 and k1 > 0)))


def gamma_plus_mask(vecs: np.ndarray) -> np.ndarray:
    """Vectorised :func:`in_gamma_plus` over an ``(N, 3)`` integer array."""
    v = np.asarray(vecs)
    k1, k2, k3 = v[:, 0], v[:, 1], v[:, 2]
    return (k3 > 0) | ((k3 == 0) & ((k2 > 0) | ((k2 == 0) & (k1 > 0))))


def _cube(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    g = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)
    return g.reshape(-1, 3).astype(np.int64)


@lru_cache(maxsize=None)
def _shell_cached(n: int, horizontal_only: bool) -> np.ndarray:
    g = _cube(2 * n)
    if horizontal_only:
        g = g[g[:, 2] == 0]
    s = (g * g).sum(axis=1)
    out = g[(s >= n * n) & (s <= 4 * n * n)]
    out.setflags(write=False)
    return out


def shell_modes(n: int, horizontal_only: bool = False) -> np.ndarray:
    """All lattice vectors with ``n <= |k| <= 2n``, in lexicographic order.

    Membership is decided on the integer ``|k|^2`` so the shell boundary is
    exact. With ``horizontal_only`` the third coordinate is fixed to zero.
    """
    if n < 1:
        raise ValueError("shell index n must be >= 1")
    return _shell_cached(int(n), bool(horizontal_only))


@lru_cache(maxsize=None)
def _ball_cached(K: int) -> np.ndarray:
    g = _cube(K)
    s = (g * g).sum(axis=1)
    g = g[(s > 0) & (s <= K * K)]
    out = g[gamma_plus_mask(g)]
    out.setflags(write=False)
    return out


def ball_modes(K: int) -> np.ndarray:
    """Gamma+ lattice vectors with ``0 < |h| <= K`` in lexicographic order.

    This fixes the storage order of every :class:`SpectralField` with cutoff ``K``.
    """
    if K < 1:
        raise ValueError("cutoff K must be >= 1")
    return _ball_cached(int(K))


# ---------------------------------------------------------------------------
# shell constants
# ---------------------------------------------------------------------------


def zeta_shell(n: int, j: float, kind: str) -> float:
    """Normalised lattice sum over the shell ``n <= |k| <= 2n``.

    ``kind="s"`` sums over the 3D shell with prefactor ``n^(j-3)``; ``kind="H"``
    sums over the planar shell with prefactor ``n^(j-2)``.
    """
    if kind == "s":
        pts, dim = shell_modes(n), 3
    elif kind == "H":
        pts, dim = shell_modes(n, horizontal_only=True), 2
    else:
        raise ValueError(f"kind must be 's' or 'H', got {kind!r}")
    r2 = (pts * pts).sum(axis=1).astype(np.float64)
    total = math.fsum((r2 ** (-0.5 * j)).tolist())
    return float(n) ** (j - dim) * total


def zeta_limit(j: float, kind: str) -> float:
    """Large-``n`` limit of :func:`zeta_shell` (a radial integral over ``[1, 2]``)."""
    if kind == "s":
        d, area = 3, 4.0 * math.pi
    elif kind == "H":
        d, area = 2, 2.0 * math.pi
    else:
        raise ValueError(f"kind must be 's' or 'H', got {kind!r}")
    if j == d:
        return area * math.log(2.0)
    return area * (2.0 ** (d - j) - 1.0) / (d - j)


def chi(alpha: float, beta: float, gamma: float) -> float:
    """Rate function of the spectral exponents used by the convergence estimate."""
    if alpha == 3 and beta == 3 and gamma == 3:
        return 1.0
    if alpha == 2 and beta == 4 and gamma > 3:
        return min(gamma - 3.0, 1.0)
    if alpha > 2 and beta > 2 and gamma > 3:
        return min(alpha - 2.0, beta - 2.0, gamma - 3.0)
    return 0.0


# ---------------------------------------------------------------------------
# mode frames
# ---------------------------------------------------------------------------


class ModeFrame(NamedTuple):
    a1: np.ndarray
    a2: np.ndarray


def mode_frames(vecs: np.ndarray) -> np.ndarray:
    """Frames for an ``(N, 3)`` array of wave vectors, returned as ``(N, 2, 3)``.

    Planar vectors get ``a1 = k_perp/|k|`` and ``a2 = e3`` (built from the
    Gamma+ representative). Otherwise ``a1`` is the normalised ``k x e3`` of the
    representative, or ``e1`` on the vertical axis, and ``a2 = khat x a1``.
    The frame of ``-k`` equals the frame of ``k``.
    """
    v = np.asarray(vecs, dtype=np.int64)
    rep = np.where(gamma_plus_mask(v)[:, None], v, -v).astype(np.float64)
    norm = np.sqrt((rep * rep).sum(axis=1))
    khat = rep / norm[:, None]
    a1 = np.empty_like(rep)
    a2 = np.empty_like(rep)

    planar = v[:, 2] == 0
    a1[planar] = np.stack([-rep[planar, 1], rep[planar, 0], np.zeros(planar.sum())], axis=1) / norm[planar, None]
    a2[planar] = (0.0, 0.0, 1.0)

    rest = ~planar
    kh2 = rep[:, 0] ** 2 + rep[:, 1] ** 2
    tilted = rest & (kh2 > 0)
    kx = np.stack([rep[tilted, 1], -rep[tilted, 0], np.zeros(tilted.sum())], axis=1)
    a1[tilted] = kx / np.sqrt(kh2[tilted])[:, None]
    vertical = rest & (kh2 == 0)
    a1[vertical] = (1.0, 0.0, 0.0)
    a2[rest] = np.cross(khat[rest], a1[rest])
    return np.stack([a1, a2], axis=1)


def mode_frame(k) -> ModeFrame:
    """Orthonormal completion ``(a1, a2)`` of ``k/|k|``."""
    f = mode_frames(np.asarray([k], dtype=np.int64))[0]
    return ModeFrame(f[0], f[1])


# ---------------------------------------------------------------------------
# spectral fields
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _index_map(K: int) -> dict:
    return {tuple(int(c) for c in v): i for i, v in enumerate(ball_modes(K))}


@dataclass(frozen=True)
class SpectralField:
    """Real vector field truncated to the ball ``|h| <= K_max``.

    ``coeffs[i]`` is the complex 3-vector at ``ball_modes(K_max)[i]``.
    """

    K_max: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        expected = (len(ball_modes(self.K_max)), 3)
        if c.shape != expected:
            raise ValueError(f"coefficient array has shape {c.shape}, expected {expected}")
        object.__setattr__(self, "coeffs", c)

    @property
    def modes(self) -> np.ndarray:
        return ball_modes(self.K_max)

    @classmethod
    def zeros(cls, K_max: int) -> "SpectralField":
        return cls(K_max, np.zeros((len(ball_modes(K_max)), 3), dtype=np.complex128))

    @classmethod
    def from_modes(cls, K_max: int, entries: dict) -> "SpectralField":
        """Build from ``{k: b_k}``; entries given at ``-k`` are conjugated into Gamma+."""
        out = np.zeros((len(ball_modes(K_max)), 3), dtype=np.complex128)
        idx = _index_map(K_max)
        for k, b in entries.items():
            b = np.asarray(b, dtype=np.complex128)
            key = tuple(int(c) for c in k)
            if not in_gamma_plus(key):
                key, b = tuple(-c for c in key), np.conj(b)
            if key not in idx:
                raise ValueError(f"mode {k} lies outside the ball |h| <= {K_max}")
            out[idx[key]] += b
        return cls(K_max, out)

    def coefficient(self, k) -> np.ndarray:
        """Coefficient at any ``k`` (conjugated when ``k`` is in Gamma-)."""
        key = tuple(int(c) for c in k)
        conj = not in_gamma_plus(key)
        if conj:
            key = tuple(-c for c in key)
        i = _index_map(self.K_max).get(key)
        if i is None:
            return np.zeros(3, dtype=np.complex128)
        return np.conj(self.coeffs[i]) if conj else self.coeffs[i].copy()

    def full(self) -> tuple[np.ndarray, np.ndarray]:
        """Modes and coefficients over the whole ball: Gamma+ rows then their mirrors."""
        m = self.modes
        return np.concatenate([m, -m]), np.concatenate([self.coeffs, np.conj(self.coeffs)])

    def with_cutoff(self, K_max: int) -> "SpectralField":
        """Copy into a different ball; modes outside a smaller ball are dropped."""
        out = SpectralField.zeros(K_max)
        idx = _index_map(K_max)
        for v, c in zip(self.modes, self.coeffs):
            i = idx.get(tuple(int(x) for x in v))
            if i is not None:
                out.coeffs[i] = c
        return out

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_ball(self, other)
        return SpectralField(self.K_max, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_ball(self, other)
        return SpectralField(self.K_max, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.K_max, self.coeffs * float(scalar))

    __rmul__ = __mul__


def _same_ball(a: SpectralField, b: SpectralField) -> None:
    if a.K_max != b.K_max:
        raise ValueError(f"cutoff mismatch: {a.K_max} vs {b.K_max}")


def random_field(K_max: int, rng: np.random.Generator, decay: float = 0.0) -> SpectralField:
    """Random divergence-free field with Gaussian coefficients scaled by ``|h|^-decay``."""
    m = ball_modes(K_max)
    c = rng.standard_normal((len(m), 3)) + 1j * rng.standard_normal((len(m), 3))
    c *= ((m * m).sum(axis=1) ** (-0.5 * decay))[:, None]
    return leray_project(SpectralField(K_max, c))


def beltrami_field(lam: int, K_max: int) -> SpectralField:
    """The field ``(sin(lam x3), cos(lam x3), 0)``, an eigenfield of the curl."""
    if lam == 0 or abs(lam) > K_max:
        raise ValueError("need 0 < |lambda| <= K_max")
    b = TWO_PI_32 * np.array([-0.5j, 0.5, 0.0])
    return SpectralField.from_modes(K_max, {(0, 0, int(lam)): b})


def abc_field(lam: int, K_max: int) -> SpectralField:
    """Arnold-Beltrami-Childress field with unit amplitudes and wavenumber ``lam``.

    ``(sin lz + cos ly, cos lz + sin lx, cos lx + sin ly)`` with curl equal to
    ``lam`` times itself.
    """
    if lam == 0 or abs(lam) > K_max:
        raise ValueError("need 0 < |lambda| <= K_max")
    c = TWO_PI_32
    l = int(lam)
    entries = {
        (0, 0, l): c * np.array([-0.5j, 0.5, 0.0]),
        (l, 0, 0): c * np.array([0.0, -0.5j, 0.5]),
        (0, l, 0): c * np.array([0.5, 0.0, -0.5j]),
    }
    return SpectralField.from_modes(K_max, entries)


# ---------------------------------------------------------------------------
# norms and vector calculus
# ---------------------------------------------------------------------------


def mode_weights(K_max: int, s: float) -> np.ndarray:
    """``|h|^(2s)`` over the stored modes."""
    m = ball_modes(K_max)
    return ((m * m).sum(axis=1).astype(np.float64)) ** s


def sobolev_norm(F: SpectralField, s: float) -> float:
    """``||F||_{H^s} = (2 sum_{Gamma+} |b_h|^2 |h|^{2s})^{1/2}``."""
    e = (np.abs(F.coeffs) ** 2).sum(axis=1)
    return math.sqrt(2.0 * float(np.dot(e, mode_weights(F.K_max, s))))


def curl(F: SpectralField) -> SpectralField:
    return SpectralField(F.K_max, 1j * np.cross(F.modes.astype(np.float64), F.coeffs))


def divergence(F: SpectralField) -> np.ndarray:
    """Scalar coefficients ``i h . b_h`` on the stored modes."""
    return 1j * (F.modes * F.coeffs).sum(axis=1)


def leray_project(F: SpectralField) -> SpectralField:
    h = F.modes.astype(np.float64)
    h2 = (h * h).sum(axis=1)
    c = F.coeffs - h * ((h * F.coeffs).sum(axis=1) / h2)[:, None]
    return SpectralField(F.K_max, c)


def divergence_residual(F: SpectralField) -> float:
    """``max |h . b_h| / |h|`` relative to ``max |b_h|`` (0 for the zero field)."""
    h = F.modes.astype(np.float64)
    scale = np.abs(F.coeffs).max(initial=0.0)
    if scale == 0.0:
        return 0.0
    d = np.abs((h * F.coeffs).sum(axis=1)) / np.sqrt((h * h).sum(axis=1))
    return float(d.max() / scale)


class Truncated(NamedTuple):
    """A field together with the L2 energy that fell outside its ball."""

    field: SpectralField
    discarded: float


def accumulate_modes(vecs: np.ndarray, coeffs: np.ndarray, K_out: int) -> Truncated:
    """Sum complex 3-vector contributions at arbitrary wave vectors into a real field.

    The contributions must describe a real field (each ``k`` matched by a
    conjugate at ``-k``). Contributions at ``k = 0`` or outside ``|k| <= K_out``
    are dropped and their energy reported.
    """
    vecs = np.asarray(vecs, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    r2 = (vecs * vecs).sum(axis=1)
    inside = (r2 > 0) & (r2 <= K_out * K_out)
    plus = inside & gamma_plus_mask(vecs)
    K = K_out
    span = 2 * K + 1
    code = ((vecs[plus, 0] + K) * span + (vecs[plus, 1] + K)) * span + (vecs[plus, 2] + K)
    m = ball_modes(K_out)
    mcode = ((m[:, 0] + K) * span + (m[:, 1] + K)) * span + (m[:, 2] + K)
    pos = np.searchsorted(mcode, code)
    out = np.zeros((len(m), 3), dtype=np.complex128)
    np.add.at(out, pos, coeffs[plus])

    # energy outside (merge duplicates first so interference is counted)
    outside = ~inside
    discarded = 0.0
    if outside.any():
        ov = vecs[outside]
        uniq, inv = np.unique(ov, axis=0, return_inverse=True)
        acc = np.zeros((len(uniq), 3), dtype=np.complex128)
        np.add.at(acc, inv.ravel(), coeffs[outside])
        discarded = float((np.abs(acc) ** 2).sum())
    return Truncated(SpectralField(K_out, out), discarded)


def cross(G: SpectralField, F: SpectralField, K_out: int | None = None) -> Truncated:
    """Pointwise cross product ``G x F`` computed as an explicit mode convolution.

    With ``K_out=None`` the result is exact (cutoff ``G.K_max + F.K_max``).
    """
    if K_out is None:
        K_out = G.K_max + F.K_max
    gv, gc = G.full()
    fv, fc = F.full()
    nz_g = np.abs(gc).sum(axis=1) > 0
    nz_f = np.abs(fc).sum(axis=1) > 0
    gv, gc, fv, fc = gv[nz_g], gc[nz_g], fv[nz_f], fc[nz_f]
    vecs = (gv[:, None, :] + fv[None, :, :]).reshape(-1, 3)
    prod = np.cross(gc[:, None, :], fc[None, :, :]).reshape(-1, 3) / TWO_PI_32
    return accumulate_modes(vecs, prod, K_out)


def physical_values(F: SpectralField, points: np.ndarray) -> np.ndarray:
    """Evaluate ``F`` at physical points by direct Fourier summation (complex result)."""
    v, c = F.full()
    phase = np.exp(1j * np.asarray(points, dtype=np.float64) @ v.T.astype(np.float64))
    return phase @ c / TWO_PI_32


# ---------------------------------------------------------------------------
# anisotropic heat semigroup
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnisotropicMultiplier:
    """Symbol of ``mu (d11 + d22) + nu d33``."""

    mu: float
    nu: float

    def __post_init__(self):
        if self.mu < 0 or self.nu < 0:
            raise ValueError("diffusivities must be non-negative")

    def __add__(self, other: "AnisotropicMultiplier") -> "AnisotropicMultiplier":
        return AnisotropicMultiplier(self.mu + other.mu, self.nu + other.nu)


def semigroup_multiplier(m: AnisotropicMultiplier, t: float, k) -> np.ndarray | float:
    """``exp(-(mu |k_H|^2 + nu k3^2) t)``; ``k`` may be one vector or an ``(N, 3)`` array."""
    if t < 0:
        raise ValueError("t must be non-negative")
    k = np.asarray(k, dtype=np.float64)
    kh2 = k[..., 0] ** 2 + k[..., 1] ** 2
    val = np.exp(-(m.mu * kh2 + m.nu * k[..., 2] ** 2) * t)
    return float(val) if val.ndim == 0 else val
