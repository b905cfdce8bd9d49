import math

import numpy as np
import pytest
from scipy.special import gamma as sc_gamma

from fvsim.rng import RngStream
from fvsim.specialfn import (bessel_i, bessel_i_tail, gamma_rate, log_gamma,
                             sample_standard, zt_poisson)


def test_bessel_reference_values():
    # I_{1/2}(z) = sqrt(2/(pi z)) sinh z, I_{-1/2}(z) = sqrt(2/(pi z)) cosh z
    for z in (0.3, 1.0, 2.5, 10.0, 40.0):
        ref_p = math.sqrt(2.0 / (math.pi * z)) * math.sinh(z)
        ref_m = math.sqrt(2.0 / (math.pi * z)) * math.cosh(z)
        assert bessel_i(0.5, z) == pytest.approx(ref_p, rel=1e-12)
        assert bessel_i(-0.5, z) == pytest.approx(ref_m, rel=1e-12)


def test_bessel_recurrence():
    # I_{v-1}(z) - I_{v+1}(z) = (2 v / z) I_v(z)
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = rng.uniform(-3.0, 3.0)
        z = float(np.exp(rng.uniform(np.log(0.05), np.log(300.0))))
        lhs = bessel_i(v - 1.0, z) - bessel_i(v + 1.0, z)
        rhs = 2.0 * v / z * bessel_i(v, z)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_bessel_tail_removes_leading_term():
    v = -1.5
    z = np.array([0.7, 2.0])
    lead = (z / 2.0) ** v / sc_gamma(v + 1.0)
    full = np.array([bessel_i(v, float(s)) for s in z])
    np.testing.assert_allclose(bessel_i_tail(v, z) + lead, full, rtol=1e-10)


def test_bessel_rejects_bad_arguments():
    with pytest.raises(ValueError):
        bessel_i(0.5, -1.0)
    with pytest.raises(ValueError):
        bessel_i(0.5, np.array([1.0, np.nan]))


def test_zt_poisson_support_and_mean():
    gen = RngStream(1).generator()
    for mu in (0.05, 1.0, 8.0, 50.0):
        k = zt_poisson(gen, np.full(100_000, mu))
        assert k.min() >= 1
        ref = mu / (1.0 - math.exp(-mu))
        assert k.mean() == pytest.approx(ref, rel=0.01)


def test_zt_poisson_scalar():
    gen = RngStream(2).generator()
    assert isinstance(zt_poisson(gen, 2.0), int)


def test_gamma_rate_zero_shape():
    gen = RngStream(3).generator()
    assert gamma_rate(gen, 0.0, 2.0) == 0.0
    vals = gamma_rate(gen, np.array([0.0, 1.0]), 1.0)
    assert vals[0] == 0.0 and vals[1] > 0.0


def test_log_gamma_sign():
    val, sign = log_gamma(-0.5)
    # Gamma(-1/2) = -2 sqrt(pi)
    assert sign == -1
    assert val == pytest.approx(math.log(2.0 * math.sqrt(math.pi)), rel=1e-12)
    with pytest.raises(ValueError):
        log_gamma(-2.0)


def test_sample_standard_dispatch():
    gen = RngStream(4).generator()
    assert sample_standard("gamma", (2.0, 4.0), gen, size=10).shape == (10,)
    assert np.all(sample_standard("beta", (0.5, 0.5), gen, size=10) <= 1.0)
    assert sample_standard("zero_truncated_poisson", (1.0,), gen) >= 1
    with pytest.raises(ValueError):
        sample_standard("cauchy", (), gen)
