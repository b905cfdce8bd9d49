import math

import numpy as np
import pytest

from fvsim.core_types import AtomMeasure
from fvsim.kernels import (FormulaNormalizationError, Params, ip_kernel_step,
                           kernel_step, laplace_L, mean_L, p_keep,
                           p_keep_candidates, p_keep_interp, _p_keep_raw,
                           sample_L, sample_Q, sssp_grid_path,
                           sssp_negative_theta)
from fvsim.pd_sampling import sample_pdip_masses, sample_pdrm
from fvsim.rng import RngStream


def test_sample_L_matches_closed_forms():
    b, r, alpha = 1.0, 1.0, 0.5
    gen = RngStream(1).generator()
    draws = sample_L(b, r, alpha, gen, size=200_000)
    se = draws.std() / np.sqrt(draws.size)
    assert draws.mean() == pytest.approx(mean_L(b, r, alpha), abs=4.0 * se)
    for lam in (0.5, 2.0):
        mc = np.exp(-lam * draws).mean()
        ref = laplace_L(b, r, alpha, lam)
        se = np.exp(-lam * draws).std() / np.sqrt(draws.size)
        assert mc == pytest.approx(ref, abs=4.0 * se)


def test_laplace_L_reference_point():
    assert laplace_L(1.0, 1.0, 0.5, 1.0) == pytest.approx(0.53393, abs=1e-5)


def test_sample_L_rejects_bad_arguments():
    gen = RngStream(0).generator()
    with pytest.raises(ValueError):
        sample_L(0.0, 1.0, 0.5, gen)
    with pytest.raises(ValueError):
        sample_L(1.0, 1.0, 1.5, gen)


def test_p_keep_interp_matches_direct():
    for alpha in (0.3, 0.5, 0.75):
        z = np.exp(np.linspace(np.log(1e-8), np.log(14.9), 400))
        np.testing.assert_allclose(p_keep_interp(z, alpha),
                                   _p_keep_raw(z, alpha), atol=1e-5)
        assert p_keep_interp(np.array([20.0]), alpha)[0] == 1.0


def test_p_keep_series_asymptotic_continuity():
    for alpha in (0.25, 0.5, 0.9):
        lo = _p_keep_raw(np.array([14.999]), alpha)[0]
        hi = _p_keep_raw(np.array([15.001]), alpha)[0]
        assert abs(lo - hi) < 1e-7


def test_p_keep_monotone_and_bounded():
    z = np.exp(np.linspace(np.log(1e-6), np.log(40.0), 500))
    p = p_keep(z ** 2 / 4.0, 1.0, 1.0, 0.5)  # z = 2 r sqrt(b c)
    assert np.all(p >= 0.0) and np.all(p <= 1.0)
    assert np.all(np.diff(p) > -1e-12)


def test_p_keep_normalization_audit():
    # half-argument power term stays a probability at small z; the literal
    # reading does not
    half, literal = p_keep_candidates(1e-6, 1.0, 1e-6, 0.5)
    assert 0.0 <= half <= 1.0
    assert not (0.0 <= literal <= 1.0)


def test_p_keep_rejects_bad_arguments():
    with pytest.raises(ValueError):
        p_keep(-1.0, 1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        p_keep(1.0, 1.0, 1.0, 0.0)


def test_sample_Q_mean_total_is_martingale():
    # offspring total mass has mean b (zero-dimension branching)
    b, s = 0.8, 0.4
    r = 1.0 / (2.0 * s)
    gen = RngStream(2).generator()
    totals = np.array([sample_Q(b, 0.5, r, 0.5, gen, n_sticks=50).total_mass
                       for _ in range(4000)])
    se = totals.std() / np.sqrt(totals.size)
    assert totals.mean() == pytest.approx(b, abs=4.0 * se)


def test_kernel_step_mass_mean_and_locations():
    # E[total after s] = total + 2 theta s
    params = Params(0.5, 0.5)
    s = 0.3
    mu = AtomMeasure(locations=[0.2, 0.7], masses=[0.6, 0.4])
    gen = RngStream(3).generator()
    totals = []
    for _ in range(3000):
        out = kernel_step(mu, s, params, gen, n_sticks=50)
        totals.append(out.total_mass)
        assert np.unique(out.locations).size == len(out)
    totals = np.asarray(totals)
    ref = mu.total_mass + 2.0 * params.theta * s
    se = totals.std() / np.sqrt(totals.size)
    assert totals.mean() == pytest.approx(ref, abs=4.0 * se)


def test_kernel_step_rejects_negative_theta():
    mu = sample_pdrm(0.5, 0.5, n_sticks=20, rng=RngStream(4))
    with pytest.raises(ValueError):
        kernel_step(mu, 0.1, Params(0.5, -0.25), RngStream(4))


def test_ip_kernel_step_mass_mean():
    params = Params(0.5, 0.5)
    s = 0.3
    beta0 = sample_pdip_masses(0.5, 0.5, n_sticks=60, rng=RngStream(5))
    gen = RngStream(6).generator()
    totals = np.array([ip_kernel_step(beta0, s, params, gen,
                                      n_sticks=50).total_mass
                       for _ in range(3000)])
    ref = beta0.total_mass + 2.0 * params.theta * s
    se = totals.std() / np.sqrt(totals.size)
    assert totals.mean() == pytest.approx(ref, abs=4.0 * se)


def test_sssp_grid_path_clock_monotone():
    mu0 = sample_pdrm(0.5, 0.5, n_sticks=40, rng=RngStream(7))
    path = sssp_grid_path(mu0, 0.05, 0.3, Params(0.5, 0.5), RngStream(8),
                          n_sticks=40)
    assert np.all(np.diff(path.times) > 0)
    assert np.all(np.diff(path.clock) > 0)
    assert path.total_masses()[0] == pytest.approx(mu0.total_mass)


def test_sssp_negative_theta_mean_mass():
    # E[total at s] = 1 + 2 theta s while mass survives, theta in (-alpha, 0)
    alpha, theta, s = 0.5, -0.25, 0.2
    mu0 = sample_pdrm(alpha, theta, n_sticks=60, rng=RngStream(9))
    mu0 = AtomMeasure(locations=mu0.locations,
                      masses=mu0.masses / mu0.total_mass)
    gen = RngStream(10).generator()
    totals = np.array([
        sssp_negative_theta(mu0, s, s, alpha, theta, gen,
                            n_sticks=40).total_masses()[-1]
        for _ in range(1500)])
    ref = 1.0 + 2.0 * theta * s
    se = totals.std() / np.sqrt(totals.size)
    assert totals.mean() == pytest.approx(ref, abs=4.0 * se)
