import numpy as np
import pytest

from fvsim.core_types import (AtomMeasure, GridPath, IntervalPartition,
                              RankedVector, ZERO_MEASURE, diversity_estimate,
                              hausdorff_distance, ranked)


def test_atom_measure_invariants():
    mu = AtomMeasure(locations=[0.2, 0.7], masses=[0.3, 0.7])
    assert mu.total_mass == pytest.approx(1.0)
    assert mu.mass_at(0.7) == pytest.approx(0.7)
    assert mu.mass_at(0.5) == 0.0
    with pytest.raises(ValueError):
        AtomMeasure(locations=[0.2, 0.2], masses=[0.1, 0.1])
    with pytest.raises(ValueError):
        AtomMeasure(locations=[0.2], masses=[-0.1])
    with pytest.raises(ValueError):
        AtomMeasure(locations=[1.5], masses=[0.1])


def test_atom_measure_json_roundtrip():
    mu = AtomMeasure(locations=[0.25, 0.5], masses=[1.5, 0.5])
    again = AtomMeasure.from_json(mu.to_json())
    np.testing.assert_array_equal(again.locations, mu.locations)
    np.testing.assert_array_equal(again.masses, mu.masses)
    assert "location" in mu.to_csv().splitlines()[0]


def test_zero_measure():
    assert ZERO_MEASURE.is_zero()
    assert len(ZERO_MEASURE) == 0
    assert ZERO_MEASURE.total_mass == 0.0


def test_interval_partition():
    beta = IntervalPartition([0.5, 0.3, 0.2])
    np.testing.assert_allclose(beta.boundaries(), [0.0, 0.5, 0.8, 1.0])
    assert beta.total_mass == pytest.approx(1.0)
    with pytest.raises(ValueError):
        IntervalPartition([0.5, 0.0])
    again = IntervalPartition.from_json(beta.to_json())
    np.testing.assert_array_equal(again.blocks, beta.blocks)


def test_ranked_vector():
    v = RankedVector([0.5, 0.3, 0.2], mass_defect=0.0)
    assert v.sum == pytest.approx(1.0)
    assert v.power_sum(2.0) == pytest.approx(0.25 + 0.09 + 0.04)
    with pytest.raises(ValueError):
        RankedVector([0.1, 0.5])
    with pytest.raises(ValueError):
        RankedVector([-0.1])


def test_ranked_conversion_and_normalization():
    mu = AtomMeasure(locations=[0.1, 0.9], masses=[0.4, 1.6])
    v = ranked(mu)
    np.testing.assert_allclose(v.entries, [1.6, 0.4])
    vn = ranked(mu, normalize=True)
    np.testing.assert_allclose(vn.entries, [0.8, 0.2])
    beta = IntervalPartition([0.2, 0.8])
    np.testing.assert_allclose(ranked(beta).entries, [0.8, 0.2])


def test_hausdorff_distance():
    a = IntervalPartition([0.5, 0.5])
    b = IntervalPartition([1.0])
    assert hausdorff_distance(a, b) == pytest.approx(0.5)
    assert hausdorff_distance(a, a) == 0.0


def test_diversity_estimate_power_sequence():
    # x_i ~ c i^{-1/alpha} has diversity Gamma(1-alpha) c^alpha
    alpha = 0.5
    i = np.arange(1, 200_001, dtype=float)
    x = 1.0 / i ** 2
    (h, est), = diversity_estimate(RankedVector(x), alpha, [1e-9])
    assert est == pytest.approx(np.sqrt(np.pi), rel=1e-3)


def test_grid_path_serialization():
    path = GridPath([0.0, 0.5, 1.0], [1.0, 2.0, 0.5],
                    clock=[0.0, 0.7, 1.9])
    lines = path.to_json_lines().strip().splitlines()
    assert len(lines) == 3
    assert "clock_integral" in lines[0]
    np.testing.assert_allclose(path.total_masses(), [1.0, 2.0, 0.5])
    with pytest.raises(ValueError):
        GridPath([0.0, 0.0], [1.0, 1.0])
