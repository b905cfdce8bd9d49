import numpy as np
import pytest
from scipy import stats

from fvsim.fdiff import (apply_jacobi_gen, apply_wf_gen, jacobi_batch,
                         jacobi_mean, jacobi_path, warren_yor_jacobi, wf_path)
from fvsim.rng import RngStream


def test_jacobi_mean_solves_ode():
    # check d/dt m = 2(r - (r+r') m) by finite differences
    b, r, rp = 0.3, 0.7, 0.4
    h = 1e-6
    for t in (0.05, 0.4, 2.0):
        lhs = (jacobi_mean(b, r, rp, t + h) - jacobi_mean(b, r, rp, t - h)) / (2 * h)
        rhs = 2.0 * (r - (r + rp) * jacobi_mean(b, r, rp, t))
        assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-6)
    assert jacobi_mean(b, r, rp, 0.0) == pytest.approx(b)


def test_jacobi_batch_matches_mean():
    b, r, rp, t = 0.9, -0.5, 1.0, 0.1
    n = 50_000
    gen = RngStream(1).generator()
    x = jacobi_batch(np.full(n, b), r, rp, 1e-4, t, gen)
    ref = jacobi_mean(b, r, rp, t)
    se = x.std() / np.sqrt(n)
    assert x.mean() == pytest.approx(ref, abs=4.0 * se)


def test_jacobi_path_absorbs_at_zero_for_negative_rate():
    path = jacobi_path(0.05, -0.5, 1.0, 1e-3, 3.0, RngStream(2))
    vals = np.asarray(path.states)
    hit = np.flatnonzero(vals == 0.0)
    assert hit.size > 0
    assert np.all(vals[hit[0]:] == 0.0)


def test_jacobi_stationary_beta_moments():
    # with r, r' > 0 the stationary law is Beta(r, r')
    r, rp = 1.0, 2.0
    n = 30_000
    gen = RngStream(3).generator()
    x = jacobi_batch(np.full(n, 1.0 / 3.0), r, rp, 1e-3, 3.0, gen)
    ref_mean = r / (r + rp)
    assert x.mean() == pytest.approx(ref_mean, abs=4.0 * x.std() / np.sqrt(n))
    ref_var = r * rp / ((r + rp) ** 2 * (r + rp + 1.0))
    assert x.var() == pytest.approx(ref_var, rel=0.1)


def test_warren_yor_jacobi_matches_euler_marginal():
    b, r, rp, t = 0.5, 0.5, 0.5, 0.2
    n = 800
    wy = np.array([warren_yor_jacobi(b, r, rp, 4e-3, 2.0, RngStream(4, i),
                                     t_grid=[t]).states[0]
                   for i in range(n)])
    gen = RngStream(5).generator()
    eu = jacobi_batch(np.full(4 * n, b), r, rp, 1e-4, t, gen)
    assert stats.ks_2samp(wy, eu).pvalue > 0.01


def test_wf_path_stays_on_simplex():
    path = wf_path([0.5, 0.3, 0.2], [0.5, 0.5, 0.5], 1e-3, 0.5, RngStream(6))
    arr = np.asarray(path.states)
    np.testing.assert_allclose(arr.sum(axis=1), 1.0, atol=1e-12)
    assert arr.min() >= 0.0


def test_wf_two_coordinates_matches_jacobi_mean():
    # two-coordinate case reduces to the Jacobi diffusion for w_1
    r = np.array([0.7, 0.4])
    n = 2000
    t = 0.15
    ends = np.array([wf_path([0.3, 0.7], r, 1e-3, t,
                             RngStream(7, i)).states[-1][0]
                     for i in range(n)])
    ref = jacobi_mean(0.3, r[0], r[1], t)
    se = ends.std() / np.sqrt(n)
    assert ends.mean() == pytest.approx(ref, abs=4.0 * se)


def test_apply_jacobi_gen_quadratic():
    # f(x) = x^2: B f = 4x(1-x) + 4x(r - (r+r')x); at x=0.5, r=r'=0.5:
    # 1 + 2(0.5 - 0.5) = 1.0
    assert apply_jacobi_gen([0.0, 0.0, 1.0], 0.5, 0.5, 0.5) == pytest.approx(1.0)
    # f(x) = x at a general point: B f = 2(r - (r+r')x)
    assert apply_jacobi_gen([0.0, 1.0], 0.3, 0.9, 0.25) == pytest.approx(
        2.0 * (0.3 - 1.2 * 0.25))


def test_apply_wf_gen_consistent_with_jacobi():
    # monomial w_1 on two coordinates equals f(x) = x under the reduction
    r = [0.6, 0.8]
    for x in (0.2, 0.5, 0.9):
        wf = apply_wf_gen([1, 0], r, [x, 1.0 - x])
        jac = apply_jacobi_gen([0.0, 1.0], r[0], r[1], x)
        assert wf == pytest.approx(jac, rel=1e-12)
    # and w_1^2 equals f(x) = x^2
    for x in (0.2, 0.5, 0.9):
        wf = apply_wf_gen([2, 0], r, [x, 1.0 - x])
        jac = apply_jacobi_gen([0.0, 0.0, 1.0], r[0], r[1], x)
        assert wf == pytest.approx(jac, rel=1e-12)


def test_apply_wf_gen_finite_difference():
    # compare against a central finite difference of the generator applied
    # to prod w_i^{e_i} along simplex-preserving directions
    e = np.array([2.0, 1.0, 1.0])
    r = np.array([0.5, 0.7, 0.3])
    w = np.array([0.5, 0.3, 0.2])
    exact = apply_wf_gen(e, r, w)

    def f(v):
        return float(np.prod(v ** e))

    h = 1e-5
    acc2 = 0.0
    for i in range(3):
        for j in range(3):
            di = np.zeros(3)
            di[i] = 1.0
            dj = np.zeros(3)
            dj[j] = 1.0
            mixed = (f(w + h * di + h * dj) - f(w + h * di - h * dj)
                     - f(w - h * di + h * dj) + f(w - h * di - h * dj)) \
                / (4.0 * h ** 2)
            a_ij = (w[i] if i == j else 0.0) - w[i] * w[j]
            acc2 += 2.0 * a_ij * mixed
        d = np.zeros(3)
        d[i] = 1.0
        first = (f(w + h * d) - f(w - h * d)) / (2.0 * h)
        acc2 += 2.0 * (r[i] - r.sum() * w[i]) * first
    assert exact == pytest.approx(acc2, rel=1e-4)
