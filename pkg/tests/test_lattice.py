import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helix.lattice import (
    TWO_PI_32,
    AnisotropicMultiplier,
    SpectralField,
    abc_field,
    ball_modes,
    beltrami_field,
    chi,
    cross,
    curl,
    divergence,
    divergence_residual,
    gamma_plus_mask,
    in_gamma_plus,
    leray_project,
    mode_frame,
    mode_frames,
    physical_values,
    random_field,
    semigroup_multiplier,
    shell_modes,
    sobolev_norm,
    zeta_limit,
    zeta_shell,
)

lattice_vec = st.tuples(*(st.integers(-64, 64),) * 3).filter(lambda k: k != (0, 0, 0))


def brute_shell(n, planar=False):
    r = 2 * n
    pts = []
    for k in itertools.product(range(-r, r + 1), repeat=3):
        if planar and k[2] != 0:
            continue
        if n * n <= k[0] ** 2 + k[1] ** 2 + k[2] ** 2 <= 4 * n * n:
            pts.append(k)
    return pts


@given(lattice_vec)
def test_half_lattice_partition(k):
    assert in_gamma_plus(k) != in_gamma_plus(tuple(-c for c in k))


def test_half_lattice_small_cases():
    assert in_gamma_plus((0, 0, 1)) and in_gamma_plus((5, -3, 1))
    assert in_gamma_plus((0, 1, 0)) and in_gamma_plus((-4, 1, 0))
    assert in_gamma_plus((1, 0, 0)) and not in_gamma_plus((-1, 0, 0))
    assert not in_gamma_plus((3, 3, -1))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_shell_matches_brute_force(n):
    assert sorted(map(tuple, shell_modes(n).tolist())) == sorted(brute_shell(n))
    assert sorted(map(tuple, shell_modes(n, True).tolist())) == sorted(brute_shell(n, True))


def test_shell_sizes_n1():
    # 6 + 12 + 8 + 6 points at |k|^2 = 1, 2, 3, 4; the planar shell has 4 + 4 + 4
    assert len(shell_modes(1)) == 32
    assert len(shell_modes(1, True)) == 12


def test_ball_is_half_of_punctured_ball():
    K = 4
    full = [k for k in itertools.product(range(-K, K + 1), repeat=3) if 0 < sum(c * c for c in k) <= K * K]
    m = ball_modes(K)
    assert len(m) * 2 == len(full)
    assert gamma_plus_mask(m).all()


def test_zeta_shell_frozen_n1():
    assert zeta_shell(1, 2, "H") == pytest.approx(7.0, abs=1e-15)
    expected = 6 + 12 / 2**1.5 + 8 / 3**1.5 + 6 / 8
    assert zeta_shell(1, 3, "s") == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("j,kind", [(2, "H"), (3, "s"), (4, "H"), (5, "s")])
def test_zeta_shell_approaches_radial_integral(j, kind):
    ns = [8, 16, 32]
    err = [abs(zeta_shell(n, j, kind) - zeta_limit(j, kind)) for n in ns]
    order = -np.polyfit(np.log(ns), np.log(err), 1)[0]
    assert order >= 0.9


def test_zeta_limit_closed_values():
    assert zeta_limit(2, "H") == pytest.approx(2 * math.pi * math.log(2))
    assert zeta_limit(3, "s") == pytest.approx(4 * math.pi * math.log(2))
    assert zeta_limit(4, "H") == pytest.approx(2 * math.pi * (1 - 0.25) / 2)


def test_chi_cases():
    assert chi(3, 3, 3) == 1.0
    assert chi(2, 4, 5) == 1.0
    assert chi(2, 4, 3.5) == 0.5
    assert chi(2.5, 3.5, 5) == 0.5


@given(lattice_vec)
def test_frames_orthonormal_and_oriented(k):
    e1, e2 = mode_frame(k)
    kv = np.array(k, dtype=float)
    for e in (e1, e2):
        assert abs(np.linalg.norm(e) - 1) < 1e-14
        assert abs(e @ kv) < 1e-12 * np.linalg.norm(kv)
    assert abs(e1 @ e2) < 1e-14
    if k[2] == 0:
        assert np.allclose(e2, [0, 0, 1])
        assert abs(e1[2]) < 1e-15


@given(lattice_vec)
def test_frames_even_in_k(k):
    a = mode_frames(np.array([k, [-c for c in k]]))
    assert np.array_equal(a[0], a[1])


def test_frames_full_sweep():
    K = 12
    m = ball_modes(K)
    f = mode_frames(m)
    kv = m.astype(float)
    assert np.abs(np.einsum("nji,ni->nj", f, kv)).max() < 1e-12 * K
    gram = np.einsum("nai,nbi->nab", f, f)
    assert np.abs(gram - np.eye(2)).max() < 1e-14


def test_beltrami_is_curl_eigenfield():
    for lam in (1, -2, 3):
        B = beltrami_field(lam, 4)
        np.testing.assert_allclose(curl(B).coeffs, lam * B.coeffs, atol=1e-13)
    A = abc_field(2, 3)
    np.testing.assert_allclose(curl(A).coeffs, 2 * A.coeffs, atol=1e-13)


def test_beltrami_physical_values():
    B = beltrami_field(2, 3)
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 2 * np.pi, (10, 3))
    ref = np.stack([np.sin(2 * x[:, 2]), np.cos(2 * x[:, 2]), 0 * x[:, 0]], axis=1)
    np.testing.assert_allclose(physical_values(B, x), ref, atol=1e-13)


def test_beltrami_coefficient_frozen():
    B = beltrami_field(1, 2)
    np.testing.assert_allclose(B.coefficient((0, 0, 1)), TWO_PI_32 * np.array([-0.5j, 0.5, 0]))
    np.testing.assert_allclose(B.coefficient((0, 0, -1)), TWO_PI_32 * np.array([0.5j, 0.5, 0]))
    # ||B||_{L2}^2 = (2 pi)^3 / 2 * 2 components * ... = |T^3| * mean(sin^2 + cos^2)
    assert sobolev_norm(B, 0) ** 2 == pytest.approx((2 * np.pi) ** 3)


def test_random_field_divergence_free():
    F = random_field(6, np.random.default_rng(0))
    assert divergence_residual(F) < 1e-14
    assert np.abs(divergence(F)).max() < 1e-12


def test_leray_idempotent():
    rng = np.random.default_rng(2)
    m = ball_modes(4)
    G = SpectralField(4, rng.standard_normal((len(m), 3)) + 0j)
    P = leray_project(G)
    np.testing.assert_allclose(leray_project(P).coeffs, P.coeffs, atol=1e-14)


@given(st.floats(-2, 2), st.integers(0, 2**32 - 1))
def test_sobolev_norm_monotone_in_s(s, seed):
    F = random_field(3, np.random.default_rng(seed))
    assert sobolev_norm(F, s) <= sobolev_norm(F, s + 0.5) * (1 + 1e-12)


def test_sobolev_norm_matches_physical_quadrature():
    F = random_field(2, np.random.default_rng(3))
    g = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    v = physical_values(F, pts)
    quad = (np.abs(v) ** 2).sum() * (2 * np.pi / 8) ** 3
    assert sobolev_norm(F, 0) ** 2 == pytest.approx(quad, rel=1e-12)


def test_cross_matches_pointwise_product():
    rng = np.random.default_rng(4)
    F, G = random_field(2, rng), random_field(2, rng)
    H = cross(G, F).field
    x = rng.uniform(0, 2 * np.pi, (7, 3))
    # the product has a mean, which the zero-mean field space drops
    diff = np.cross(physical_values(G, x), physical_values(F, x)) - physical_values(H, x)
    np.testing.assert_allclose(diff, np.broadcast_to(diff[0], diff.shape), atol=1e-12)


def test_cross_truncation_reports_discarded_energy():
    rng = np.random.default_rng(5)
    F, G = random_field(2, rng), random_field(2, rng)
    full = cross(G, F)
    cut = cross(G, F, K_out=2)
    total = sobolev_norm(full.field, 0) ** 2 + full.discarded
    assert sobolev_norm(cut.field, 0) ** 2 + cut.discarded == pytest.approx(total, rel=1e-12)


@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 2), st.floats(0, 2), lattice_vec)
def test_semigroup_bounds_and_composition(mu, nu, s, t, k):
    m = AnisotropicMultiplier(mu, nu)
    v = semigroup_multiplier(m, s + t, k)
    assert 0 <= v <= 1
    assert v == pytest.approx(semigroup_multiplier(m, s, k) * semigroup_multiplier(m, t, k), rel=1e-12, abs=1e-300)


def test_semigroup_rejects_negative_time():
    with pytest.raises(ValueError):
        semigroup_multiplier(AnisotropicMultiplier(1, 1), -0.1, (1, 0, 0))
    with pytest.raises(ValueError):
        AnisotropicMultiplier(-1, 0)
