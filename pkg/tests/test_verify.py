import json

import numpy as np
import pytest

from fvsim.ekp_algebra import SymPoly
from fvsim.kernels import Params
from fvsim.verify import (generator_slope_test, ks_two_sample, mc_estimate,
                          report, report_json, reversibility_test)


def test_mc_estimate_deterministic_and_parallel_identical():
    def sampler(stream):
        return float(stream.generator().normal())

    serial = mc_estimate(sampler, 200, seed=5)
    again = mc_estimate(sampler, 200, seed=5)
    par = mc_estimate(sampler, 200, seed=5, parallel=True, workers=3)
    assert serial == again
    assert serial == par
    with pytest.raises(ValueError):
        mc_estimate(sampler, 1)


def test_ks_two_sample_behavior():
    rng = np.random.default_rng(0)
    a = rng.normal(size=2000)
    b = rng.normal(size=2000)
    stat, p = ks_two_sample(a, b)
    assert p > 0.01
    _stat, p_shift = ks_two_sample(a, b + 1.0)
    assert p_shift < 1e-6
    with pytest.raises(ValueError):
        ks_two_sample(a[:10], b)


def test_generator_slope_small():
    # small-n smoke: slope of E[q1] from x = (0.9, 0.1) at (0.5, 0) has
    # reference -1.28/... : 2 B q1 = -1.28, so the de-Poissonized slope
    # target is -1.28 when compared against the doubled generator
    q = SymPoly.q(1)
    res = generator_slope_test([0.9, 0.1], q, Params(0.5, 0.0),
                               [0.005, 0.01], n=20_000, seed=3, step=5e-4)
    assert res["reference"] == pytest.approx(-1.28)
    assert np.isfinite(res["extrapolated"])
    assert res["se"] > 0.0
    # at this n the estimate should already be within 5 combined SE
    assert abs(res["extrapolated"] - res["reference"]) < 5.0 * res["se"]


def test_reversibility_small():
    res = reversibility_test(SymPoly.q(1), SymPoly.q(2), Params(0.5, 0.5),
                             t=0.05, n=8000, seed=4, step=2e-3,
                             init_sticks=200)
    assert res["se_difference"] > 0.0
    assert abs(res["difference"]) < 5.0 * res["se_difference"]


def test_report_json():
    rec = report("check", {"alpha": 0.5}, 1.0, 1.1, 0.05, False,
                 extra={"note": "x"})
    parsed = json.loads(report_json(rec))
    assert parsed["name"] == "check"
    assert parsed["pass"] is False
    assert parsed["note"] == "x"
