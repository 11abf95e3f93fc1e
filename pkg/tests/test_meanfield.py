import math

import numpy as np
import pytest

from helix.lattice import abc_field, beltrami_field, random_field, sobolev_norm, zeta_limit
from helix.meanfield import LimitParams, beltrami_rate, decay_rate, evolve_limit, evolve_limit_b3
from helix.noise import Regime, RegimeParams
from helix.operators import corrector_multipliers

P2D = RegimeParams(Regime.PERTURBED_2D, 2.0, 4.0, 5.0, 3.0, 1.0, 1.0, 1.0, 0.5)
HEL = RegimeParams(Regime.HELICAL, 2.5, 3.5, 4.0, 1.5, 0.7, 2.0, -0.4, 1.0)
HEL2 = RegimeParams(Regime.HELICAL, 2.0, 4.0, 5.0, 3.0, 1.0, 1.0, 1.0, 0.5)


def iso(rho, cv=3.0, eta=1.0):
    return RegimeParams.isotropic(cv, rho, eta)


def test_limit_params_cases():
    lp = LimitParams.from_regime(iso(0.5))
    assert lp.lam_limit_H == lp.lam_limit_V == pytest.approx(8 * math.pi * math.log(2) / 27)
    assert lp.a_rho_limit == pytest.approx(2 * math.pi * 0.5 * math.log(2) / 9)
    lp = LimitParams.from_regime(P2D)
    assert lp.lam_limit_H == pytest.approx(2 * math.pi * math.log(2) / 18) and lp.lam_limit_V == 0
    assert LimitParams.from_regime(HEL2) == LimitParams.from_regime(P2D)
    lp = LimitParams.from_regime(HEL)
    assert lp.lam_limit_H == lp.lam_limit_V == 0


@pytest.mark.parametrize("p", [P2D, iso(0.5), HEL2])
def test_multipliers_converge_to_limit(p):
    lp = LimitParams.from_regime(p)
    ns = [8, 16, 32]
    for name, lim in (("lam_H", lp.lam_limit_H), ("lam_V", lp.lam_limit_V), ("a_rho", lp.a_rho_limit)):
        e = [abs(getattr(corrector_multipliers(n, p), name) - lim) for n in ns]
        if max(e) < 1e-12:
            continue
        order = -np.polyfit(np.log(ns), np.log(e), 1)[0]
        assert order >= 0.9, (name, e)


@pytest.mark.parametrize("rho", [0.0, 0.5, -0.5, 1.0, -1.0])
def test_beta_rate_formula(rho):
    p = iso(rho)
    lam = -1 if rho < 0 else 1
    rate = decay_rate(beltrami_field(lam, 1), p)
    assert rate == pytest.approx(1 + (8 - 6 * abs(rho)) * math.pi * math.log(2) / 27, abs=1e-8)
    assert -beltrami_rate(lam, p) == pytest.approx(rate, abs=1e-12)


def test_beltrami_exponential_in_time():
    B0 = beltrami_field(1, 2)
    g = beltrami_rate(1, P2D)
    for t in (0.0, 0.1, 0.7):
        Bt = evolve_limit(B0, P2D, t)
        np.testing.assert_allclose(Bt.coeffs, math.exp(g * t) * B0.coeffs, atol=1e-13)


def test_limit_semigroup_and_divergence():
    F = random_field(4, np.random.default_rng(0))
    a = evolve_limit(evolve_limit(F, HEL, 0.1), HEL, 0.2)
    b = evolve_limit(F, HEL, 0.3)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-12)
    h = F.modes.astype(float)
    assert np.abs((h * b.coeffs).sum(axis=1)).max() < 1e-12


@pytest.mark.parametrize("p", [P2D, iso(0.5)])
def test_b3_scalar_route(p):
    B0 = abc_field(1, 3)
    for t in (0.05, 0.4):
        np.testing.assert_allclose(evolve_limit_b3(B0, p, t), evolve_limit(B0, p, t).coeffs[:, 2], atol=1e-13)


def test_decay_rate_requires_single_mode():
    with pytest.raises(ValueError):
        decay_rate(abc_field(1, 2), P2D)
    with pytest.raises(ValueError):
        evolve_limit(beltrami_field(1, 2), P2D, -1.0)


def test_zero_helicity_limit_is_pure_diffusion():
    p = iso(0.0)
    F = random_field(3, np.random.default_rng(1))
    t = 0.2
    c = 1.0 + 8 * math.pi * math.log(2) / 27
    k2 = (F.modes ** 2).sum(axis=1)
    np.testing.assert_allclose(evolve_limit(F, p, t).coeffs, np.exp(-c * k2 * t)[:, None] * F.coeffs, atol=1e-13)
    assert sobolev_norm(evolve_limit(F, p, t), 0) < sobolev_norm(F, 0)
