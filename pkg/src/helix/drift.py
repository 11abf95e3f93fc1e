"""Per-mode linear drift ``-c_h P_h + i a h x (D P_h .)`` and its exact exponential.

``P_h`` is the projector onto the plane orthogonal to ``h`` and
``D = diag(1, 1, 0)``. The first-order part ``N_h = i a [h]_x D P_h`` maps the
plane into itself and is trace free there, so ``(N_h)^2 = s^2 P_h`` with
``s^2 = tr(N_h^2) / 2``. Hence

    exp(t M_h) P_h = e^{-c_h t} (cosh(s t) P_h + sinh(s t)/s N_h).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def projectors(modes: np.ndarray) -> np.ndarray:
    h = np.asarray(modes, dtype=np.float64)
    h2 = (h * h).sum(axis=1)
    return np.eye(3)[None] - h[:, :, None] * h[:, None, :] / h2[:, None, None]


def skew(v: np.ndarray) -> np.ndarray:
    """Matrices of ``x -> v x x`` for each row of ``v``."""
    z = np.zeros(len(v))
    return np.stack(
        [
            np.stack([z, -v[:, 2], v[:, 1]], axis=1),
            np.stack([v[:, 2], z, -v[:, 0]], axis=1),
            np.stack([-v[:, 1], v[:, 0], z], axis=1),
        ],
        axis=1,
    )


def _sinhc(x: np.ndarray) -> np.ndarray:
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(safe) / safe)


@dataclass(frozen=True)
class DriftBlock:
    """Linear drift of a constant-coefficient induction equation on a set of modes.

    ``decay[i]`` is ``eta |h|^2 + lam_H |h_H|^2 + lam_V h3^2`` and ``a_rho`` the
    alpha coefficient.
    """

    modes: np.ndarray
    decay: np.ndarray
    a_rho: float

    @classmethod
    def build(cls, modes: np.ndarray, eta: float, lam_H: float, lam_V: float, a_rho: float) -> "DriftBlock":
        h = np.asarray(modes, dtype=np.float64)
        hh2 = h[:, 0] ** 2 + h[:, 1] ** 2
        decay = eta * (hh2 + h[:, 2] ** 2) + lam_H * hh2 + lam_V * h[:, 2] ** 2
        return cls(np.asarray(modes), decay, float(a_rho))

    def projector(self) -> np.ndarray:
        return projectors(self.modes)

    def alpha_part(self) -> np.ndarray:
        """``N_h = i a [h]_x D P_h`` as ``(N, 3, 3)`` complex."""
        h = np.asarray(self.modes, dtype=np.float64)
        D = np.diag([1.0, 1.0, 0.0])
        return 1j * self.a_rho * skew(h) @ D @ self.projector()

    def matrix(self) -> np.ndarray:
        """``M_h`` restricted to divergence-free input, i.e. ``M_h P_h``."""
        return -self.decay[:, None, None] * self.projector() + self.alpha_part()

    def split_rate(self) -> np.ndarray:
        """``s`` with ``N_h^2 = s^2 P_h`` (complex in general)."""
        N = self.alpha_part()
        s2 = 0.5 * np.einsum("nij,nji->n", N, N)
        return np.sqrt(s2.astype(np.complex128))

    def exponential(self, t: float) -> np.ndarray:
        """``exp(t M_h) P_h`` in closed form, ``(N, 3, 3)`` complex."""
        if t == 0:
            return self.projector().astype(np.complex128)
        s = self.split_rate()
        P = self.projector()
        N = self.alpha_part()
        ch = np.cosh(s * t)
        sh = t * _sinhc(s * t)
        return np.exp(-self.decay * t)[:, None, None] * (ch[:, None, None] * P + sh[:, None, None] * N)

    def integrated_exponential(self, t: float) -> np.ndarray:
        """``int_0^t exp(u N_h) P_h du`` in closed form (no diffusion factor)."""
        s = self.split_rate()
        P = self.projector()
        N = self.alpha_part()
        st = s * t
        f1 = t * _sinhc(st)
        small = np.abs(st) < 1e-4
        safe = np.where(small, 1.0, s)
        f2 = np.where(small, t * t * (0.5 + st * st / 24.0), (np.cosh(st) - 1.0) / np.where(small, 1.0, safe * safe))
        return f1[:, None, None] * P + f2[:, None, None] * N

    def growth_rates(self) -> np.ndarray:
        """Largest real part of the eigenvalues of ``M_h`` on the plane, per mode."""
        return -self.decay + np.abs(self.split_rate().real)
