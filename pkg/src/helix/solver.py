"""Truncated Galerkin integration of the stochastic induction equation.

Each step applies the noise increment at the left point (Ito) and then the
exact exponential of the per-mode linear drift:

    b^+ = exp(dt M_h) [b + sum_{k,j} L_{k,j} b dW^{k,j}].

Noise increments of all modes with the same wave vector are combined into one
complex vector ``U_k = sum_j theta_{k,j} a_{k,j} dW^{k,j}``, so the noise term at
an output ``o`` is ``-i o x sum_k U_k x b_{o-k}``. Paths run in fixed-width
batches; batch lanes beyond the requested path count hold the zero field, which
keeps every path bit-identical regardless of how many paths are requested.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import _kernels
from .drift import DriftBlock
from .lattice import SpectralField, ball_modes, beltrami_field, mode_weights
from .noise import NoiseModeTable, RegimeParams, correlated_normals, noise_table
from .operators import corrector_multipliers

log = logging.getLogger(__name__)

LANES = _kernels.LANES


class NonFiniteStateError(RuntimeError):
    """A path produced a non-finite coefficient."""

    def __init__(self, path: int, step: int, mode: tuple):
        super().__init__(f"non-finite coefficient on path {path} at step {step}, mode {mode}")
        self.path = path
        self.step = step
        self.mode = mode


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation parameters of one run."""

    n: int
    K_max: int
    dt: float
    T: float
    base_seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.T < self.dt:
            raise ValueError("T must be at least dt")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def record_steps(self) -> np.ndarray:
        s = np.arange(0, self.steps + 1, self.record_every)
        if s[-1] != self.steps:
            s = np.append(s, self.steps)
        return s


def path_rng(base_seed: int, path: int) -> np.random.Generator:
    """Independent stream of one path: seeded with ``base_seed XOR path``."""
    return np.random.Generator(np.random.PCG64(int(base_seed) ^ int(path)))


class GalerkinSystem:
    """Precomputed geometry, noise and drift of the truncated system at scale ``n``."""

    def __init__(self, n: int, p: RegimeParams, K_max: int, dt: float, loss_power: float = -1.0):
        self.n = int(n)
        self.params = p
        self.K_max = int(K_max)
        self.dt = float(dt)
        self.loss_power = float(loss_power)
        self.modes = ball_modes(self.K_max)
        self.table: NoiseModeTable = noise_table(self.n, p)
        self.mult = corrector_multipliers(self.n, p)
        N = len(self.modes)
        self.N = N
        full = np.concatenate([self.modes, -self.modes])
        K = self.K_max
        cube = -np.ones((2 * K + 1,) * 3, dtype=np.int32)
        cube[full[:, 0] + K, full[:, 1] + K, full[:, 2] + K] = np.arange(2 * N, dtype=np.int32)
        self.cube = cube
        self.shell_vecs = np.ascontiguousarray(self.table.vecs)
        self.amplitudes = self.table.vector_amplitudes()
        self.drift = DriftBlock.build(self.modes, p.eta, self.mult.lam_H, self.mult.lam_V, self.mult.a_rho)
        self.inviscid = DriftBlock.build(self.modes, p.eta, 0.0, 0.0, 0.0)
        self.w_minus1 = mode_weights(K, -1.0)

    @cached_property
    def step_matrix(self) -> np.ndarray:
        return np.ascontiguousarray(self.drift.exponential(self.dt))

    @cached_property
    def molecular_step_matrix(self) -> np.ndarray:
        return np.ascontiguousarray(self.inviscid.exponential(self.dt))

    @cached_property
    def tiles(self) -> tuple:
        return (*_kernels.box_tiles(self.modes), *_kernels.box_tiles(self.shell_vecs))

    @cached_property
    def pair_count(self) -> int:
        return int(_kernels.count_pairs(self.modes, self.shell_vecs, self.K_max))

    def increment_covariance(self) -> np.ndarray:
        """``E[U_k U_k^H]`` per shell row for one step, ``(M, 3, 3)`` complex."""
        t = self.table
        amp = self.amplitudes
        corr = np.where(t.planar, self.params.rho, 0.0)
        C = np.zeros((len(t.vecs), 3, 3), dtype=np.complex128)
        for j in range(2):
            for l in range(2):
                c = np.ones(len(t.vecs)) if j == l else corr
                C += (2.0 * self.dt * c)[:, None, None] * amp[:, j, :, None] * np.conj(amp[:, l, None, :])
        return C

    @cached_property
    def loss_matrices(self) -> np.ndarray:
        """Per stored mode, the form giving the expected weighted energy lost per step."""
        edge = (self.modes * self.modes).sum(axis=1) > (self.K_max - 2 * self.n) ** 2
        A = np.zeros((self.N, 3, 3), dtype=np.complex128)
        idx = np.nonzero(edge)[0]
        if len(idx):
            A[idx] = _kernels.loss_forms(
                np.ascontiguousarray(self.modes[idx]), self.shell_vecs, self.increment_covariance(), self.K_max, self.loss_power
            )
        return A

    # ------------------------------------------------------------------ batches

    def sample_u(self, rngs: list, active: int) -> np.ndarray:
        """Combined increments ``U_k`` for one step as a ``(M, 6, LANES)`` float array."""
        t = self.table
        plus = t.plus
        planar = t.planar[plus]
        rho = self.params.rho
        sq = math.sqrt(self.dt)
        dW = np.zeros((len(plus), 2, LANES), dtype=np.complex128)
        for lane in range(active):
            z = rngs[lane].standard_normal((2, len(plus), 2))
            dW[:, :, lane] = sq * (correlated_normals(planar, rho, z[0]) + 1j * correlated_normals(planar, rho, z[1]))
        Up = np.einsum("mjc,mjl->mcl", self.amplitudes[plus], dW)
        U = np.empty((len(t.vecs), 3, LANES), dtype=np.complex128)
        U[plus] = Up
        U[t.mirror[plus]] = np.conj(Up)
        return np.ascontiguousarray(np.concatenate([U.real, U.imag], axis=1))

    def noise_term(self, b: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Noise increment on the stored modes for a ``(N, 3, LANES)`` complex batch."""
        B = np.empty((2 * self.N, 6, LANES))
        B[: self.N, :3] = b.real
        B[: self.N, 3:] = b.imag
        B[self.N :, :3] = b.real
        B[self.N :, 3:] = -b.imag
        C = np.empty((self.N, 6, LANES))
        _kernels.noise_increment(self.modes, self.shell_vecs, self.cube, self.K_max, U, B, C, *self.tiles)
        return C[:, :3] + 1j * C[:, 3:]

    def expected_loss(self, b: np.ndarray) -> np.ndarray:
        """Expected weighted energy pushed out of the ball by the next step, per lane."""
        return 2.0 * np.einsum("hil,hij,hjl->l", np.conj(b), self.loss_matrices, b).real

    def apply(self, E: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.einsum("hij,hjl->hil", E, b)


# ---------------------------------------------------------------------- results

Probe = Callable[[np.ndarray, int], np.ndarray]


@dataclass
class Ensemble:
    """Recorded observables of a set of paths: ``values[name]`` has shape ``(paths, records)``."""

    times: np.ndarray
    values: dict = field(default_factory=dict)
    energy_functional: np.ndarray | None = None
    initial_h_minus1_sq: float = 0.0

    @property
    def paths(self) -> int:
        return next(iter(self.values.values())).shape[0]

    def mean(self, name: str) -> np.ndarray:
        return self.values[name].mean(axis=0)

    def stderr(self, name: str) -> np.ndarray:
        v = self.values[name]
        if v.shape[0] < 2:
            return np.full(v.shape[1], np.nan)
        return v.std(axis=0, ddof=1) / math.sqrt(v.shape[0])


TRAJECTORY_COLUMNS = ("t", "h_minus1_sq", "l2_sq", "h_theta", "b_lambda", "div_residual", "trunc_loss")


def b_lambda(state: SpectralField, lam: int) -> float:
    """Real inner product of ``state`` with the Beltrami field of wavenumber ``lam``."""
    g = beltrami_field(lam, state.K_max)
    return 2.0 * float(np.real(np.vdot(g.coeffs, state.coeffs)))


def _b_lambda_batch(state_modes, lam: int, K: int, b: np.ndarray) -> np.ndarray:
    g = beltrami_field(lam, K)
    i = int(np.nonzero(np.abs(g.coeffs).sum(axis=1))[0][0])
    return 2.0 * np.real(np.einsum("c,cl->l", np.conj(g.coeffs[i]), b[i]))


def simulate(
    system: GalerkinSystem,
    cfg: SolverConfig,
    B0: SpectralField,
    paths: int | list[int],
    *,
    theta: float = 1.0,
    lam: int = 1,
    probes: dict[str, Probe] | None = None,
    scheme: str = "ito",
) -> Ensemble:
    """Run a batch of paths and record the standard trajectory observables.

    ``paths`` is a count (paths ``0 .. paths-1``) or an explicit list of path
    indices. ``probes`` adds named observables evaluated on the recorded
    ``(N, 3, lanes)`` coefficient batch and record index. ``scheme`` is
    ``"ito"`` (exponential Euler-Maruyama with the corrector) or
    ``"stratonovich-heun"`` (Heun predictor-corrector without it).
    """
    if system.K_max != cfg.K_max or system.n != cfg.n or system.dt != cfg.dt:
        raise ValueError("solver configuration does not match the prebuilt system")
    if B0.K_max != cfg.K_max:
        B0 = B0.with_cutoff(cfg.K_max)
    if scheme not in ("ito", "stratonovich-heun"):
        raise ValueError(f"unknown scheme {scheme!r}")
    ids = list(range(paths)) if isinstance(paths, int) else [int(x) for x in paths]
    probes = probes or {}
    rec = cfg.record_steps()
    R = len(rec)
    names = list(TRAJECTORY_COLUMNS[1:]) + list(probes)
    values = {k: np.zeros((len(ids), R)) for k in names}
    energy = np.zeros(len(ids))
    w_m1 = system.w_minus1
    w_l2 = np.ones(system.N)
    w_th = mode_weights(cfg.K_max, -1.0 - theta)
    hv = system.modes.astype(np.float64)
    hnorm = np.sqrt((hv * hv).sum(axis=1))
    eta = system.params.eta
    E = system.step_matrix if scheme == "ito" else system.molecular_step_matrix
    b0_m1 = 2.0 * float(np.dot((np.abs(B0.coeffs) ** 2).sum(axis=1), w_m1))

    for start in range(0, len(ids), LANES):
        lane_ids = ids[start : start + LANES]
        active = len(lane_ids)
        rngs = [path_rng(cfg.base_seed, i) for i in lane_ids]
        b = np.zeros((system.N, 3, LANES), dtype=np.complex128)
        b[:, :, :active] = B0.coeffs[:, :, None]
        loss = np.zeros(LANES)
        integral = np.zeros(LANES)
        sup_functional = np.zeros(LANES)
        r = 0
        for step in range(cfg.steps + 1):
            e2 = (np.abs(b) ** 2).sum(axis=1)
            l2 = 2.0 * (w_l2 @ e2)
            hm1 = 2.0 * (w_m1 @ e2)
            sup_functional = np.maximum(sup_functional, hm1 + eta * integral)
            if r < R and step == rec[r]:
                sl = slice(start, start + active)
                values["h_minus1_sq"][sl, r] = hm1[:active]
                values["l2_sq"][sl, r] = l2[:active]
                values["h_theta"][sl, r] = np.sqrt(2.0 * (w_th @ e2))[:active]
                values["b_lambda"][sl, r] = _b_lambda_batch(system.modes, lam, cfg.K_max, b)[:active]
                div = np.abs((hv[:, :, None] * b).sum(axis=1)) / hnorm[:, None]
                scale = np.abs(b).max(axis=(0, 1))
                values["div_residual"][sl, r] = np.where(scale > 0, div.max(axis=0) / np.where(scale > 0, scale, 1.0), 0.0)[:active]
                values["trunc_loss"][sl, r] = loss[:active]
                for name, fn in probes.items():
                    values[name][sl, r] = fn(b, r)[:active]
                r += 1
            if step == cfg.steps:
                break
            U = system.sample_u(rngs, active)
            loss += system.expected_loss(b)
            integral += l2 * cfg.dt
            incr = system.noise_term(b, U)
            if scheme == "ito":
                nxt = b + incr
            else:
                pred = b + incr
                nxt = b + 0.5 * (incr + system.noise_term(pred, U))
            b = system.apply(E, nxt)
            if not np.isfinite(b).all():
                bad = np.argwhere(~np.isfinite(b))[0]
                raise NonFiniteStateError(lane_ids[min(int(bad[2]), active - 1)], step + 1, tuple(int(c) for c in system.modes[bad[0]]))
        energy[start : start + active] = sup_functional[:active]
        log.debug("finished paths %d..%d", lane_ids[0], lane_ids[-1])
    return Ensemble(rec * cfg.dt, values, energy, b0_m1)


def final_states(system: GalerkinSystem, cfg: SolverConfig, B0: SpectralField, paths: int | list[int], scheme: str = "ito") -> list[SpectralField]:
    """Terminal fields of the given paths (used by tests and diagnostics)."""
    store: dict[int, np.ndarray] = {}
    last = len(cfg.record_steps()) - 1
    ids = list(range(paths)) if isinstance(paths, int) else list(paths)

    def grab(b, r):
        if r == last:
            store[len(store)] = b.copy()
        return np.zeros(LANES)

    simulate(system, cfg, B0, ids, probes={"_": grab}, scheme=scheme)
    out = []
    for batch in range(len(store)):
        b = store[batch]
        for lane in range(min(LANES, len(ids) - batch * LANES)):
            out.append(SpectralField(cfg.K_max, b[:, :, lane]))
    return out


def simulate_path(system: GalerkinSystem, cfg: SolverConfig, B0: SpectralField, path: int = 0, **kw) -> Ensemble:
    """One realisation; the result has a single row per observable."""
    return simulate(system, cfg, B0, [path], **kw)


def step(system: GalerkinSystem, state: SpectralField, increments: np.ndarray) -> SpectralField:
    """Advance one field by one step with explicitly given Gamma+ increments.

    ``increments`` has shape ``(len(table.plus), 2)`` and holds ``dW^{k,j}``.
    """
    t = system.table
    Up = np.einsum("mjc,mj->mc", system.amplitudes[t.plus], increments)
    U = np.empty((len(t.vecs), 3), dtype=np.complex128)
    U[t.plus] = Up
    U[t.mirror[t.plus]] = np.conj(Up)
    Ub = np.zeros((len(t.vecs), 6, LANES))
    Ub[:, :3, 0] = U.real
    Ub[:, 3:, 0] = U.imag
    b = np.zeros((system.N, 3, LANES), dtype=np.complex128)
    b[:, :, 0] = state.coeffs
    nxt = system.apply(system.step_matrix, b + system.noise_term(b, Ub))
    return SpectralField(state.K_max, nxt[:, :, 0])
