"""Samplers for the two-parameter Poisson-Dirichlet family.

All three entry points share the same stick-breaking construction
(W_j ~ Beta(1-alpha, theta + j*alpha), P_j = W_j * prod_{i<j} (1-W_i)),
so for a fixed generator state they produce the same mass multiset and
differ only in how the masses are arranged (ranked vector, atoms at
uniform locations, or left-to-right blocks).
"""

from __future__ import annotations

import numpy as np

from .core_types import AtomMeasure, IntervalPartition, RankedVector
from .rng import as_generator

DEFAULT_N_STICKS = 10_000


def check_params(alpha: float, theta: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    if not (theta > -alpha):
        raise ValueError(f"theta must exceed -alpha, got theta={theta}, alpha={alpha}")


def stick_breaking(alpha: float, theta: float, n_sticks: int, rng):
    """Size-biased PD(alpha,theta) sticks and the residual mass.

    Returns (sticks, residual) with sticks.sum() + residual == 1 exactly
    up to float rounding.
    """
    check_params(alpha, theta)
    if n_sticks < 1:
        raise ValueError("n_sticks must be >= 1")
    gen = as_generator(rng)
    j = np.arange(1, n_sticks + 1)
    w = gen.beta(1.0 - alpha, theta + j * alpha)
    log1mw = np.log1p(-w)
    # P_j = W_j * prod_{i<j}(1 - W_i); cumulative product in log space to
    # stay accurate deep into the tail
    cum = np.concatenate([[0.0], np.cumsum(log1mw[:-1])])
    sticks = w * np.exp(cum)
    residual = float(np.exp(cum[-1] + log1mw[-1]))
    return sticks, residual


def sample_pd(alpha: float, theta: float, n_sticks: int = DEFAULT_N_STICKS,
              rng=None) -> RankedVector:
    """Ranked masses of a PD(alpha,theta) sample, truncated at n_sticks."""
    sticks, residual = stick_breaking(alpha, theta, n_sticks, rng)
    return RankedVector(np.sort(sticks)[::-1], mass_defect=residual)


def sample_pdrm(alpha: float, theta: float, n_sticks: int = DEFAULT_N_STICKS,
                rng=None) -> AtomMeasure:
    """PD(alpha,theta) masses at i.i.d. uniform locations."""
    gen = as_generator(rng)
    sticks, _residual = stick_breaking(alpha, theta, n_sticks, gen)
    locs = gen.uniform(size=sticks.size)
    while np.unique(locs).size != locs.size:
        locs = gen.uniform(size=sticks.size)
    return AtomMeasure(locations=locs, masses=sticks)


def sample_pdip_masses(alpha: float, theta: float,
                       n_sticks: int = DEFAULT_N_STICKS,
                       rng=None) -> IntervalPartition:
    """Interval partition with PD(alpha,theta) mass multiset.

    Blocks are laid out in size-biased (stick-breaking) order, which is a
    stand-in for the true regenerative order; every ranked-mass statistic
    is unaffected.
    """
    sticks, _residual = stick_breaking(alpha, theta, n_sticks, rng)
    return IntervalPartition(sticks)
