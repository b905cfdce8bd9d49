"""Statistical verification harness: deterministic Monte Carlo estimates,
two-sample tests, the generator finite-difference (slope) test and the
reversibility cross-moment test."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import ks_2samp

from .ekp_algebra import SymPoly, apply_B_direct, eval_sympoly
from .engine import fv_path_stats
from .kernels import Params
from .rng import RngStream


def mc_estimate(sampler, n: int, seed: int = 0, parallel: bool = False,
                workers: int = 4):
    """Mean and standard error of sampler(RngStream) over n replicas.

    Replica i always uses stream id i, and aggregation is an indexed
    reduction, so the result is bit-identical with or without parallelism.
    """
    if n < 2:
        raise ValueError("need n >= 2 replicas")
    values = np.empty(n)

    def fill(lo, hi):
        for i in range(lo, hi):
            values[i] = sampler(RngStream(seed, i))

    if parallel:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: fill(*b), zip(bounds[:-1], bounds[1:])))
    else:
        fill(0, n)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(n))
    return mean, se


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 50 or b.size < 50:
        raise ValueError("need at least 50 observations per sample")
    res = ks_2samp(a, b, mode="asymp")
    return float(res.statistic), float(res.pvalue)


def _needed_power_sums(q: SymPoly):
    ms = sorted({m for term, _c in q.terms for m in term})
    if any(m > 3 for m in ms):
        raise ValueError("slope test supports power sums q_1..q_3 only")
    return ms


def _eval_terms(q: SymPoly, stats, idx=None):
    """Evaluate q per path from the named power-sum statistic arrays."""
    first = next(iter(stats.values()))
    shape = first.shape if idx is None else first[:, idx].shape
    total = np.zeros(shape)
    for m, c in q.terms:
        val = np.full(shape, c)
        for mj in m:
            arr = stats[f"q{mj}"]
            val = val * (arr if idx is None else arr[:, idx])
        total += val
    return total


def generator_slope_test(x, q: SymPoly, params: Params, t_list, n: int,
                         seed: int = 0, step: float | None = None,
                         reference: float | None = None, workers: int = 1):
    """Finite-difference estimate of the time-derivative of E[q] at 0.

    All t values are evaluated along the same simulated path family
    (common random numbers), and the slopes are Richardson-extrapolated
    to t = 0.  The reference defaults to 2 B q(x).
    """
    x = np.asarray(x, dtype=float)
    t_list = sorted(float(t) for t in t_list)
    if step is None:
        step = t_list[0] / 10.0
    stats = tuple(f"q{m}" for m in _needed_power_sums(q))
    res = fv_path_stats(x, params.alpha, params.theta, t_list, step, n,
                        RngStream(seed), stats=stats, workers=workers)
    q0 = eval_sympoly(q, x)
    table = []
    per_t = []
    for j, t in enumerate(t_list):
        vals = _eval_terms(q, res, idx=j)
        ok = ~np.isnan(vals)
        slopes = (vals[ok] - q0) / t
        per_t.append((t, vals, ok))
        table.append((t, float(slopes.mean()),
                      float(slopes.std(ddof=1) / np.sqrt(ok.sum()))))
    # Richardson extrapolation from the two smallest t, per path so the
    # standard error reflects the common-random-number pairing
    (t1, v1, ok1), (t2, v2, ok2) = per_t[0], per_t[1]
    ok = ok1 & ok2
    r = (t2 * (v1[ok] - q0) / t1 - t1 * (v2[ok] - q0) / t2) / (t2 - t1)
    extrapolated = float(r.mean())
    se = float(r.std(ddof=1) / np.sqrt(ok.sum()))
    if reference is None:
        reference = 2.0 * apply_B_direct(q, params.alpha, params.theta, x)
    inconclusive = all(abs(s) < 2.0 * e for _t, s, e in table)
    return {
        "table": table,
        "extrapolated": extrapolated,
        "se": se,
        "reference": float(reference),
        "inconclusive": inconclusive,
        "pass": bool(abs(extrapolated - reference) <= 3.0 * se),
    }


def reversibility_test(f: SymPoly, g: SymPoly, params: Params, t: float,
                       n: int, seed: int = 0, step: float = 1e-3,
                       init_sticks: int = 400):
    """Cross moments E[f(V_0) g(V_t)] and E[g(V_0) f(V_t)] from a
    stationary start; under reversibility the two coincide."""
    stats = tuple(sorted({f"q{m}" for m in
                          _needed_power_sums(f) + _needed_power_sums(g)}))
    res = fv_path_stats(None, params.alpha, params.theta, [0.0, t], step, n,
                        RngStream(seed), stats=stats,
                        init_pd_sticks=init_sticks)
    f0 = _eval_terms(f, res, idx=0)
    g0 = _eval_terms(g, res, idx=0)
    ft = _eval_terms(f, res, idx=1)
    gt = _eval_terms(g, res, idx=1)
    ok = ~(np.isnan(ft) | np.isnan(gt))
    fg = f0[ok] * gt[ok]
    gf = g0[ok] * ft[ok]
    diff = fg - gf
    m = int(ok.sum())
    se_fg = float(fg.std(ddof=1) / np.sqrt(m))
    se_gf = float(gf.std(ddof=1) / np.sqrt(m))
    se_diff = float(diff.std(ddof=1) / np.sqrt(m))
    return {
        "forward": float(fg.mean()),
        "backward": float(gf.mean()),
        "se_forward": se_fg,
        "se_backward": se_gf,
        "difference": float(diff.mean()),
        "se_difference": se_diff,
        "pass": bool(abs(diff.mean()) <= 3.0 * se_diff),
    }


def report(name: str, params: dict, estimate, reference, se, passed: bool,
           extra: dict | None = None) -> dict:
    rec = {
        "name": name,
        "params": params,
        "estimate": estimate,
        "reference": reference,
        "se": se,
        "pass": bool(passed),
    }
    if extra:
        rec.update(extra)
    return rec


def report_json(rec: dict) -> str:
    return json.dumps(rec, default=float)
