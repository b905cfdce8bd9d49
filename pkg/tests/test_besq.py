import numpy as np
import pytest
from scipy import stats

from fvsim.besq import (besq_additive_path, besq_negative_batch,
                        besq_negative_path, besq_transition)
from fvsim.rng import RngStream


def test_transition_moments():
    # E[Z_s] = b + 2r s, Var[Z_s] = 4 s b + 2 (2r) s^2
    b, two_r, s = 1.0, 1.0, 0.3
    gen = RngStream(1).generator()
    z = besq_transition(b, two_r, s, gen, size=200_000)
    mean_ref = b + two_r * s
    var_ref = 4.0 * s * b + 2.0 * two_r * s * s
    assert z.mean() == pytest.approx(mean_ref, abs=4.0 * z.std() / np.sqrt(z.size))
    assert z.var() == pytest.approx(var_ref, rel=0.03)


def test_transition_zero_dimension_absorbs():
    # BESQ(0) from 0 is identically 0
    gen = RngStream(2).generator()
    z = besq_transition(0.0, 0.0, 1.0, gen, size=100)
    assert np.all(z == 0.0)


def test_transition_zero_start_is_gamma():
    # from b = 0 the marginal is Gamma(r, rate 1/(2s)) exactly
    two_r, s = 1.0, 0.5
    gen = RngStream(3).generator()
    z = besq_transition(0.0, two_r, s, gen, size=50_000)
    p = stats.kstest(z, stats.gamma(two_r / 2.0, scale=2.0 * s).cdf).pvalue
    assert p > 0.01


def test_transition_rejects_bad_arguments():
    gen = RngStream(0).generator()
    with pytest.raises(ValueError):
        besq_transition(-1.0, 1.0, 0.5, gen)
    with pytest.raises(ValueError):
        besq_transition(1.0, -1.0, 0.5, gen)
    with pytest.raises(ValueError):
        besq_transition(1.0, 1.0, 0.0, gen)


def test_negative_path_absorbs_and_stays():
    path = besq_negative_path(0.05, 0.5, 1e-4, 2.0, RngStream(4))
    assert path.absorption_time is not None
    k = int(np.searchsorted(path.grid, path.absorption_time))
    assert np.all(path.values[k + 1:] == 0.0)
    assert "time,value" in path.to_csv().splitlines()[0]


def test_negative_batch_absorption_law():
    # for BESQ_b(-2 alpha) the absorption time S satisfies
    # b / (2 S) ~ Gamma(1 + alpha)
    alpha, b = 0.5, 0.3
    n = 20_000
    gen = RngStream(5).generator()
    end, s_abs = besq_negative_batch(np.full(n, b), alpha, 2e-4, 40.0, gen)
    assert np.isnan(s_abs).mean() < 1e-3
    g = b / (2.0 * s_abs[~np.isnan(s_abs)])
    p = stats.kstest(g, stats.gamma(1.0 + alpha).cdf).pvalue
    assert p > 0.01


def test_additive_path_sum():
    comps = [(0.5, 1.0), (0.25, 0.5)]
    paths, total = besq_additive_path(comps, 0.1, 1.0, RngStream(6))
    assert len(paths) == 2
    np.testing.assert_allclose(total.values,
                               paths[0].values + paths[1].values)
    assert total.dimension == pytest.approx(1.5)
