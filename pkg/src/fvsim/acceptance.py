"""End-to-end statistical acceptance checks.

Each criterion function runs a self-contained experiment with fixed seeds
and returns a report dict: {"name", "parts": [sub-report, ...], "pass",
"seconds"}.  Sub-reports carry estimate / reference / se (or the KS
statistic and p-value) so the numbers behind every verdict are visible.
run_all executes every criterion and returns the combined report.
"""

from __future__ import annotations

import itertools
import math
import os
import time

import numpy as np
from scipy.special import gammaln

from .besq import besq_transition
from .core_types import RankedVector, diversity_estimate, ranked
from .ekp_algebra import (SymPoly, apply_B_direct, apply_B_partition,
                          crp_partition, crp_updown_step, stationary_moment,
                          updown_matrix_n2)
from .engine import fv_path_stats, sssp_negtheta_batch, sssp_step_batch
from .fdiff import jacobi_batch
from .kernels import (Params, ip_kernel_step, kernel_step, laplace_L,
                      sample_L)
from .core_types import AtomMeasure, IntervalPartition
from .pd_sampling import stick_breaking
from .rng import RngStream
from .verify import (generator_slope_test, ks_two_sample, report,
                     reversibility_test)


def _se_pass(estimate, reference, se, factor=3.0):
    return bool(abs(estimate - reference) <= factor * se)


def _workers():
    return max(1, min(os.cpu_count() or 1, 8))


def _runtime_part(seconds: float, budget: float) -> dict:
    return report("runtime", {"budget_seconds": budget}, float(seconds),
                  None, None, seconds < budget,
                  extra={"cpu_workers": _workers()})


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def criterion_stationary_moments(n=100_000, step=1e-3, t=0.1, seed=101):
    """Moments of the ranked state started from its stationary law."""
    t0 = time.time()
    parts = []
    for i, (alpha, theta) in enumerate([(0.5, 0.5), (0.3, 0.0), (0.5, -0.25)]):
        res = fv_path_stats(None, alpha, theta, [t], step, n,
                            RngStream(seed, i), stats=("q1", "q2"),
                            init_pd_sticks=400, chunk_size=8192,
                            workers=_workers())
        for m in (1, 2):
            vals = res[f"q{m}"][:, 0]
            vals = vals[~np.isnan(vals)]
            est, se = _mean_se(vals)
            ref = stationary_moment(m, alpha, theta)
            parts.append(report(
                f"moment m={m}", {"alpha": alpha, "theta": theta, "t": t,
                                  "n": n, "step": step},
                est, ref, se, _se_pass(est, ref, se)))
    parts.append(_runtime_part(time.time() - t0, 300.0))
    return {"name": "stationary_moments", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


def criterion_total_mass(n=10_000, s=0.3, theta=0.5, alpha=0.5, seed=102):
    """Total mass after one kernel step vs the exact squared-Bessel
    transition of dimension 2 theta."""
    t0 = time.time()
    res = sssp_step_batch([1.0], [s], alpha, theta, n, RngStream(seed, 0),
                          stats=("total",))
    ref = besq_transition(1.0, 2.0 * theta, s, RngStream(seed, 1).generator(),
                          size=n)
    d, p = ks_two_sample(res["total"], ref)
    part = report("total mass KS", {"alpha": alpha, "theta": theta, "s": s,
                                    "n": n},
                  d, None, None, p > 0.01, extra={"p_value": p})
    return {"name": "total_mass_besq", "parts": [part], "pass": part["pass"],
            "seconds": time.time() - t0}


def criterion_atom_jacobi(n=10_000, t=0.1, step=1e-3, seed=103):
    """Normalized mass at a tagged initial atom vs the Jacobi diffusion."""
    t0 = time.time()
    alpha, theta = 0.5, 0.5
    x0 = np.array([0.9, 0.1])
    res = fv_path_stats(x0, alpha, theta, [t], step, n, RngStream(seed, 0),
                        stats=("label1",))
    vals = res["label1"][:, 0]
    vals = vals[~np.isnan(vals)]
    gen = RngStream(seed, 1).generator()
    orc = jacobi_batch(np.full(n, 0.9), -alpha, theta + alpha, 1e-4, t, gen)
    m1, se1 = _mean_se(vals)
    m2, se2 = _mean_se(orc)
    se_mean = math.hypot(se1, se2)
    mean_rep = report("tagged-atom mean", {"alpha": alpha, "theta": theta,
                                           "t": t, "n": n},
                      m1, m2, se_mean, _se_pass(m1, m2, se_mean))
    v1 = vals.var(ddof=1)
    v2 = orc.var(ddof=1)

    def var_se(x):
        x = np.asarray(x, dtype=float)
        c = x - x.mean()
        return math.sqrt((np.mean(c ** 4) - np.var(c) ** 2) / x.size)

    se_var = math.hypot(var_se(vals), var_se(orc))
    var_rep = report("tagged-atom variance", {"alpha": alpha, "theta": theta,
                                              "t": t, "n": n},
                     float(v1), float(v2), se_var,
                     _se_pass(v1, v2, se_var))
    parts = [mean_rep, var_rep]
    return {"name": "atom_jacobi", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


def criterion_generator_slope(n=1_000_000, seed=104):
    """Finite-difference slope of E[q] equals twice the generator value."""
    t0 = time.time()
    parts = []
    cases = [
        (np.array([0.9, 0.1]), SymPoly.q(1), Params(0.5, 0.0)),
        (np.array([0.6, 0.4]), SymPoly.q(1, 1), Params(0.3, 0.7)),
    ]
    for i, (x, q, params) in enumerate(cases):
        ref = apply_B_partition(q, params.alpha, params.theta, x)
        res = generator_slope_test(x, q, params, [0.005, 0.01], n,
                                   seed=seed + i, step=5e-4, reference=ref,
                                   workers=_workers())
        parts.append(report(
            f"slope of {q}", {"alpha": params.alpha, "theta": params.theta,
                              "x": list(x), "n": n},
            res["extrapolated"], res["reference"], res["se"], res["pass"],
            extra={"table": res["table"],
                   "B_only": res["reference"] / 2.0}))
    parts.append(_runtime_part(time.time() - t0, 1800.0))
    return {"name": "generator_slope", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


def criterion_chapman_kolmogorov(n=100_000, seed=105):
    """One kernel step of 0.4 vs two steps of 0.2 from a single unit
    atom."""
    t0 = time.time()
    alpha, theta = 0.5, 0.5
    one = sssp_step_batch([1.0], [0.4], alpha, theta, n, RngStream(seed, 0),
                          stats=("total", "max"))
    two = sssp_step_batch([1.0], [0.2, 0.2], alpha, theta, n,
                          RngStream(seed, 1), stats=("total", "max"))
    parts = []
    for name in ("total", "max"):
        d, p = ks_two_sample(one[name], two[name])
        parts.append(report(f"KS on {name} mass",
                            {"alpha": alpha, "theta": theta, "n": n},
                            d, None, None, p > 0.01, extra={"p_value": p}))
    return {"name": "chapman_kolmogorov", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


def criterion_laplace_L(n=1_000_000, seed=106):
    """Monte Carlo Laplace transform of the principal-atom mass."""
    t0 = time.time()
    b = r = 1.0
    alpha = 0.5
    gen = RngStream(seed).generator()
    L = sample_L(np.full(n, b), np.full(n, r), alpha, gen)
    parts = []
    for lam in (0.5, 1.0, 2.0, 5.0):
        vals = np.exp(-lam * L)
        est, se = _mean_se(vals)
        ref = laplace_L(b, r, alpha, lam)
        parts.append(report(f"Laplace at lambda={lam}",
                            {"b": b, "r": r, "alpha": alpha, "n": n},
                            est, ref, se, _se_pass(est, ref, se)))
    return {"name": "laplace_L", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


def criterion_relocation_invariance(n=100_000, s=0.2, seed=107):
    """The ranked masses after a kernel step do not depend on where the
    initial atoms sit."""
    t0 = time.time()
    params = Params(0.5, 0.5)
    configs = [
        AtomMeasure(locations=[0.2, 0.9], masses=[0.7, 0.3]),
        AtomMeasure(locations=[0.5, 0.1], masses=[0.7, 0.3]),
    ]
    tops = []
    for i, mu in enumerate(configs):
        gen = RngStream(seed, i).generator()
        top = np.empty(n)
        for k in range(n):
            nu = kernel_step(mu, s, params, gen, n_sticks=50)
            top[k] = nu.masses.max() if len(nu) else 0.0
        tops.append(top)
    d, p = ks_two_sample(tops[0], tops[1])
    part = report("KS on largest mass", {"alpha": params.alpha,
                                         "theta": params.theta, "s": s,
                                         "n": n},
                  d, None, None, p > 0.01, extra={"p_value": p})
    return {"name": "relocation_invariance", "parts": [part],
            "pass": part["pass"], "seconds": time.time() - t0}


def criterion_ip_coupling(n=100_000, s=0.2, seed=108):
    """Interval-partition kernel vs measure kernel: the ranked masses
    agree in law when started from matching states."""
    t0 = time.time()
    params = Params(0.5, 0.5)
    beta0 = IntervalPartition([0.6, 0.4])
    mu0 = AtomMeasure(locations=[0.3, 0.7], masses=[0.6, 0.4])
    gen_ip = RngStream(seed, 0).generator()
    gen_mu = RngStream(seed, 1).generator()
    top_ip = np.empty(n)
    top_mu = np.empty(n)
    for k in range(n):
        b = ip_kernel_step(beta0, s, params, gen_ip, n_sticks=50)
        top_ip[k] = b.blocks.max() if len(b) else 0.0
        m = kernel_step(mu0, s, params, gen_mu, n_sticks=50)
        top_mu[k] = m.masses.max() if len(m) else 0.0
    d, p = ks_two_sample(top_ip, top_mu)
    part = report("KS on largest block vs largest atom",
                  {"alpha": params.alpha, "theta": params.theta, "s": s,
                   "n": n},
                  d, None, None, p > 0.01, extra={"p_value": p})
    return {"name": "ip_measure_coupling", "parts": [part],
            "pass": part["pass"], "seconds": time.time() - t0}


def criterion_generator_routes(instances=100, seed=109, tol=1e-10):
    """The partition-sum route equals twice the product-rule route on
    random product terms of up to three power sums."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        alpha = rng.uniform(0.05, 0.95)
        theta = rng.uniform(-alpha + 0.05, 2.0)
        k = int(rng.integers(1, 4))
        m = tuple(int(v) for v in rng.integers(1, 4, size=k))
        coeff = rng.uniform(-2.0, 2.0)
        q = SymPoly([(m, coeff)])
        x = rng.dirichlet(np.ones(int(rng.integers(2, 5))))
        a = apply_B_partition(q, alpha, theta, x)
        b = 2.0 * apply_B_direct(q, alpha, theta, x)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    parts = [report("route agreement", {"instances": instances},
                    worst, 0.0, None, worst <= tol, extra={"tolerance": tol}),
             _runtime_part(time.time() - t0, 1.0)]
    return {"name": "generator_routes", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


def criterion_negative_theta(n_mass=10_000, n_moment=20_000, seed=110):
    """Designated-atom construction for theta < 0: linear mean total mass
    and the stationary first moment after normalization."""
    t0 = time.time()
    alpha, theta = 0.5, -0.25
    s = 0.2
    res = sssp_negtheta_batch([1.0], alpha, theta, 1e-3, s, n_mass,
                              RngStream(seed, 0), stats=("total",))
    est, se = _mean_se(res["total"])
    ref = 1.0 + 2.0 * theta * s
    mass_rep = report("mean total mass", {"alpha": alpha, "theta": theta,
                                          "s": s, "n": n_mass},
                      est, ref, se, _se_pass(est, ref, se))
    res2 = fv_path_stats(None, alpha, theta, [0.1], 1e-3, n_moment,
                         RngStream(seed, 1), stats=("q1",),
                         init_pd_sticks=400, chunk_size=8192,
                         workers=_workers())
    vals = res2["q1"][:, 0]
    vals = vals[~np.isnan(vals)]
    est2, se2 = _mean_se(vals)
    ref2 = stationary_moment(1, alpha, theta)
    mom_rep = report("stationary first moment", {"alpha": alpha,
                                                 "theta": theta, "t": 0.1,
                                                 "n": n_moment},
                     est2, ref2, se2, _se_pass(est2, ref2, se2))
    parts = [mass_rep, mom_rep]
    return {"name": "negative_theta", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


def criterion_reversibility(n=100_000, t=0.1, seed=111):
    """Cross moments E[q1(V_0) q2(V_t)] = E[q2(V_0) q1(V_t)]."""
    t0 = time.time()
    params = Params(0.5, 0.5)
    res = reversibility_test(SymPoly.q(1), SymPoly.q(2), params, t, n,
                             seed=seed)
    part = report("cross-moment difference",
                  {"alpha": params.alpha, "theta": params.theta, "t": t,
                   "n": n},
                  res["difference"], 0.0, res["se_difference"], res["pass"],
                  extra={"forward": res["forward"],
                         "backward": res["backward"]})
    return {"name": "reversibility", "parts": [part], "pass": part["pass"],
            "seconds": time.time() - t0}


def criterion_diversity(seed=112):
    """Small-mass count estimator: exact limit on a deterministic sequence
    and agreement with the table-count oracle on random partitions."""
    t0 = time.time()
    # deterministic: x_i proportional to i^-2, normalized
    i = np.arange(1, 20_001, dtype=float)
    x = (1.0 / i ** 2) / (math.pi ** 2 / 6.0)
    est = diversity_estimate(RankedVector(x), 0.5, [1e-8])[0][1]
    ref = math.sqrt(6.0 / math.pi)
    det_rep = report("deterministic sequence", {"alpha": 0.5, "h": 1e-8},
                     est, ref, None, abs(est / ref - 1.0) < 0.01,
                     extra={"relative_tolerance": 0.01})
    # random partitions: h->0 count statistic vs distinct tables among
    # 10^6 draws from the same frequencies (K_n / n^alpha has the same
    # almost-sure limit)
    alpha, theta = 0.5, 0.5
    gen = RngStream(seed).generator()
    n_cust = 1_000_000
    ratios = []
    for _ in range(10):
        sticks, residual = stick_breaking(alpha, theta, 300_000, gen)
        div = diversity_estimate(ranked(sticks), alpha, [1e-6])[0][1]
        probs = np.append(sticks, residual)
        counts = gen.multinomial(n_cust, probs / probs.sum())
        k_n = int(np.count_nonzero(counts[:-1])) + int(counts[-1])
        oracle = k_n / n_cust ** alpha
        ratios.append(div / oracle)
    mean_ratio = float(np.mean(ratios))
    orc_rep = report("table-count oracle", {"alpha": alpha, "theta": theta,
                                            "replicas": 10,
                                            "customers": n_cust},
                     mean_ratio, 1.0, None, abs(mean_ratio - 1.0) < 0.10,
                     extra={"relative_tolerance": 0.10, "ratios": ratios})
    parts = [det_rep, orc_rep]
    return {"name": "diversity", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


def criterion_updown_crp(n=200, n_steps=1_000_000, seed=113):
    """Stationarity of the up-down chain: largest block vs direct
    sampling, plus the exact two-customer chain."""
    t0 = time.time()
    alpha, theta = 0.5, 0.5
    gen = RngStream(seed, 0).generator()
    sizes = crp_partition(n, alpha, theta, gen)
    burn = 10_000
    thin = 500
    largest = []
    for k in range(n_steps):
        sizes = crp_updown_step(sizes, alpha, theta, gen)
        if k >= burn and (k - burn) % thin == 0:
            largest.append(int(sizes.max()))
    largest = np.asarray(largest, dtype=float)
    gen2 = RngStream(seed, 1).generator()
    direct = np.array([crp_partition(n, alpha, theta, gen2)[0]
                       for _ in range(largest.size)], dtype=float)
    d, p = ks_two_sample(largest, direct)
    ks_rep = report("largest-block KS", {"alpha": alpha, "theta": theta,
                                         "n": n, "steps": n_steps,
                                         "thin": thin},
                    d, None, None, p > 0.01, extra={"p_value": p})
    # exact two-customer chain: stationary law of (one table, two tables)
    P, pi = updown_matrix_n2(alpha, theta)
    ref = np.array([(1.0 - alpha) / (1.0 + theta),
                    (theta + alpha) / (1.0 + theta)])
    err = float(max(np.max(np.abs(pi - ref)), np.max(np.abs(pi @ P - pi))))
    exact_rep = report("two-customer exact chain",
                       {"alpha": alpha, "theta": theta},
                       err, 0.0, None, err <= 1e-12,
                       extra={"tolerance": 1e-12,
                              "stationary": pi.tolist()})
    parts = [ks_rep, exact_rep]
    return {"name": "updown_crp", "parts": parts,
            "pass": all(p["pass"] for p in parts),
            "seconds": time.time() - t0}


ALL_CRITERIA = [
    criterion_stationary_moments,
    criterion_total_mass,
    criterion_atom_jacobi,
    criterion_generator_slope,
    criterion_chapman_kolmogorov,
    criterion_laplace_L,
    criterion_relocation_invariance,
    criterion_ip_coupling,
    criterion_generator_routes,
    criterion_negative_theta,
    criterion_reversibility,
    criterion_diversity,
    criterion_updown_crp,
]

_BY_NAME = {
    "moments": criterion_stationary_moments,
    "totalmass": criterion_total_mass,
    "jacobi-marginal": criterion_atom_jacobi,
    "generator": criterion_generator_slope,
    "chapman": criterion_chapman_kolmogorov,
    "laplace": criterion_laplace_L,
    "relocation": criterion_relocation_invariance,
    "coupling": criterion_ip_coupling,
    "routes": criterion_generator_routes,
    "negtheta": criterion_negative_theta,
    "reversibility": criterion_reversibility,
    "diversity": criterion_diversity,
    "crp": criterion_updown_crp,
}


def run_all():
    reports = [fn() for fn in ALL_CRITERIA]
    return {"criteria": reports,
            "pass": all(r["pass"] for r in reports),
            "seconds": sum(r["seconds"] for r in reports)}
