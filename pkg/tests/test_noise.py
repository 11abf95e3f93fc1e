import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helix.lattice import random_field, shell_modes, sobolev_norm, zeta_shell
from helix.noise import (
    Regime,
    RegimeParams,
    alpha_coefficient,
    covariance_at_zero,
    covariance_closed_form,
    diffusivities_from_sums,
    grad_Qrho_at_zero,
    helicity,
    helicity_closed_form,
    helicity_limit,
    noise_table,
    sample_block,
    theta,
    theta_array,
    validate_regime,
)
from helix.operators import cross_norm_sum

P2D = RegimeParams(Regime.PERTURBED_2D, 2.0, 4.0, 5.0, 1.0, 1.0, 1.0, 1.0, 1.0)
HEL = RegimeParams(Regime.HELICAL, 2.5, 3.5, 4.0, 1.5, 0.7, 2.0, -0.4, 1.0)
ISO = RegimeParams.isotropic(3.0, 0.5, 1.0)
ALL = [P2D, HEL, ISO]


def test_regime_parse():
    assert Regime.parse("perturbed2d") is Regime.PERTURBED_2D
    with pytest.raises(ValueError):
        Regime.parse("Toroidal")


def test_validate_accepts_admissible():
    assert validate_regime(P2D.replace(c1h=3.0)) == []
    assert validate_regime(ISO) == []
    assert validate_regime(HEL) == []


def test_validate_itemises_violations():
    msgs = validate_regime(RegimeParams(Regime.HELICAL, 1.5, 4.0, 3.0, 1, 1, 1, 0, 1))
    assert any("alpha = 1.5" in m for m in msgs)
    assert any("gamma = 3.0" in m for m in msgs)
    assert any("alpha + beta = 5.5" in m for m in msgs)
    iso = validate_regime(RegimeParams.isotropic(1.0, 0.0, 1.0))
    assert len(iso) == 1 and "cv = 1.0" in iso[0]
    assert validate_regime(ISO.replace(eta=0.0)) == ["eta = 0.0 must be > 0"]


def test_theta_frozen_values():
    p = RegimeParams(Regime.HELICAL, 2.0, 4.0, 5.0, 2.0, 3.0, 5.0, 0.0, 1.0)
    assert theta(1, (1, 1, 0), 1, p) == pytest.approx(1j / (2.0 * math.sqrt(2)))
    assert theta(1, (-1, -1, 0), 1, p) == pytest.approx(-1j / (2.0 * math.sqrt(2)))
    assert theta(1, (2, 0, 0), 2, p) == pytest.approx(1 / (3.0 * 4.0))
    assert theta(1, (1, 1, 1), 1, p) == pytest.approx(1 / (5.0 * 3 ** 1.25))
    assert theta(1, (3, 0, 0), 1, p) == 0
    with pytest.raises(ValueError):
        theta(1, (1, 0, 0), 3, p)


@pytest.mark.parametrize("p", ALL)
@pytest.mark.parametrize("n", range(1, 9))
def test_theta_conjugate_symmetry(p, n):
    t = noise_table(n, p)
    np.testing.assert_array_equal(t.theta[t.mirror], np.conj(t.theta))


@pytest.mark.parametrize("p", ALL)
@pytest.mark.parametrize("n", [1, 3])
def test_theta_vectorisation(p, n):
    t = noise_table(n, p)
    for i in range(0, len(t.vecs), 7):
        for j in (1, 2):
            assert t.theta[i, j - 1] == pytest.approx(theta(n, t.vecs[i], j, p), rel=1e-15)


def test_mode_table_mirror_and_plus():
    t = noise_table(2, P2D)
    np.testing.assert_array_equal(t.vecs[t.mirror], -t.vecs)
    assert len(t.plus) * 2 == len(t.vecs)
    assert len(list(t.entries())) == 2 * len(shell_modes(2))


@pytest.mark.parametrize("rho", [0.0, 0.6, -1.0])
def test_sample_moments(rho):
    p = P2D.replace(rho=rho)
    t = noise_table(2, p)
    rng = np.random.default_rng(7)
    dt = 0.01
    draws = np.stack([sample_block(t, dt, rng).increments for _ in range(4000)])
    planar = t.planar[t.plus]
    sq = np.abs(draws) ** 2 / (2 * dt)
    m, se = sq.mean(), sq.std() / math.sqrt(sq.size)
    assert abs(m - 1) <= 4 * se
    cross = (draws[:, planar, 0] * np.conj(draws[:, planar, 1])).real / (2 * dt)
    assert abs(cross.mean() - rho) <= 4 * cross.std() / math.sqrt(cross.size) + 1e-12
    tilted = (draws[:, ~planar, 0] * np.conj(draws[:, ~planar, 1])).real / (2 * dt)
    assert abs(tilted.mean()) <= 4 * tilted.std() / math.sqrt(tilted.size)


def test_sample_block_reproducible_and_mirrors():
    t = noise_table(1, P2D)
    a = sample_block(t, 0.1, np.random.default_rng(3))
    b = sample_block(t, 0.1, np.random.default_rng(3))
    np.testing.assert_array_equal(a.increments, b.increments)
    f = a.full(t)
    np.testing.assert_array_equal(f[t.mirror], np.conj(f))
    with pytest.raises(ValueError):
        sample_block(t, 0.0, np.random.default_rng(0))


def test_diffusivities_frozen_n1():
    p = P2D.replace(c1h=2.0)
    d = diffusivities_from_sums(1, p)
    # planar sums at n = 1: sum 1/r^2 = 7, sum 1/r^4 = 5.25
    assert d.eta_T == pytest.approx(7 / 8, rel=1e-14)
    assert d.eta_R == pytest.approx(5.25, rel=1e-14)
    assert math.isnan(d.eta_iso)


@pytest.mark.parametrize("p", ALL)
@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_diffusivities_closed_forms(p, n):
    direct, closed = diffusivities_from_sums(n, p), covariance_closed_form(n, p)
    for a, b in zip(direct, closed):
        if math.isnan(b):
            assert math.isnan(a)
        else:
            assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("p", ALL)
def test_covariance_structure(p):
    qbar, qprime, qrho = covariance_at_zero(3, p)
    for q in (qbar, qprime):
        np.testing.assert_allclose(q, q.T, atol=1e-15)
        assert np.all(np.linalg.eigvalsh(q) >= -1e-14)
        assert abs(q[0, 1]) < 1e-13 and abs(q[0, 2]) < 1e-13 and abs(q[1, 2]) < 1e-13
        assert q[0, 0] == pytest.approx(q[1, 1], rel=1e-13)
    assert np.abs(qrho).max() < 1e-13


@pytest.mark.parametrize("p", ALL)
@pytest.mark.parametrize("n", [1, 2, 4])
def test_covariance_first_derivatives_vanish(p, n):
    # d_l of the planar and tilted covariances at 0: sum i k_l |theta|^2 a a^T
    t = noise_table(n, p)
    w = np.abs(t.theta) ** 2
    k = t.vecs.astype(float)
    for part in (t.planar, ~t.planar):
        for l in range(3):
            d = sum((1j * k[part, l] * w[part, j])[:, None, None] * t.frames[part, j, :, None] * t.frames[part, j, None, :] for j in range(2)).sum(axis=0)
            assert np.abs(d).max() <= 1e-12


def test_alpha_gradient_frozen():
    R, V = grad_Qrho_at_zero(1, P2D)
    np.testing.assert_allclose(R, 7.0 * np.array([[0, -1], [1, 0]]), atol=1e-13)
    np.testing.assert_allclose(V, -R, atol=1e-13)
    p = P2D.replace(c1h=3.0, rho=0.5)
    assert alpha_coefficient(4, p) == pytest.approx(0.5 * zeta_shell(4, 2, "H") / 3.0, rel=1e-13)


def test_helicity_frozen_n1():
    assert helicity(1, P2D) == pytest.approx(-14.0, rel=1e-14)
    assert helicity(1, P2D.replace(rho=0.0)) == 0.0


@pytest.mark.parametrize("p", ALL)
@pytest.mark.parametrize("n", [1, 2, 5])
def test_helicity_closed_form(p, n):
    assert helicity(n, p) == pytest.approx(helicity_closed_form(n, p), rel=1e-12)


def test_helicity_equals_twice_negative_alpha():
    for n in (1, 3):
        assert helicity(n, HEL) == pytest.approx(-2 * alpha_coefficient(n, HEL), rel=1e-12)


def test_helicity_limit_value_and_domain():
    p = P2D.replace(c1h=3.0, rho=0.5)
    assert helicity_limit(p) == pytest.approx(-4 * math.pi * 0.5 * math.log(2) / 3.0)
    with pytest.raises(ValueError):
        helicity_limit(HEL.replace(alpha=2.5, beta=4.0))


@given(st.integers(0, 2**32 - 1))
def test_isotropic_cross_identity(seed):
    F = random_field(3, np.random.default_rng(seed))
    ref = 4 * zeta_shell(2, 3, "s") / (3 * ISO.cv**2) * sobolev_norm(F, 0) ** 2
    assert cross_norm_sum(2, ISO, F) == pytest.approx(ref, rel=1e-10)


def test_helical_cross_norm_bound():
    # sum_{k,j} ||sigma x F||^2 <= 2 sum_k |theta|^2 ||F||^2 for any regime
    F = random_field(3, np.random.default_rng(11))
    t = noise_table(2, HEL)
    bound = (np.abs(t.theta) ** 2).sum() * sobolev_norm(F, 0) ** 2
    assert cross_norm_sum(2, HEL, F) <= bound * (1 + 1e-12)


def test_theta_array_handles_planar_sign():
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 0, 2]])
    th = theta_array(v, P2D)
    assert th[0, 0] == pytest.approx(1j) and th[1, 0] == pytest.approx(-1j)
    assert th[2, 0] == pytest.approx(2 ** -2.5)
