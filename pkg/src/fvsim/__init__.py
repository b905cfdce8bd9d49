"""Stochastic simulation and numerical verification of two-parameter
measure-valued diffusions, their interval-partition counterparts, and the
associated diffusion on the ranked simplex."""

from .core_types import (AtomMeasure, GridPath, IntervalPartition,
                         RankedVector, ZERO_MEASURE, diversity_estimate,
                         hausdorff_distance, ranked)
from .ekp_algebra import (SymPoly, apply_B_direct, apply_B_partition,
                          crp_partition, crp_updown_step, eval_sympoly,
                          format_sympoly, parse_sympoly, power_sum,
                          stationary_moment)
from .kernels import (Params, ip_kernel_step, kernel_step, laplace_L,
                      mean_L, p_keep, sample_L, sample_Q, sssp_grid_path,
                      sssp_negative_theta)
from .pd_sampling import sample_pd, sample_pdip_masses, sample_pdrm
from .rng import RngStream

__all__ = [
    "AtomMeasure", "GridPath", "IntervalPartition", "RankedVector",
    "ZERO_MEASURE", "diversity_estimate", "hausdorff_distance", "ranked",
    "SymPoly", "apply_B_direct", "apply_B_partition", "crp_partition",
    "crp_updown_step", "eval_sympoly", "format_sympoly", "parse_sympoly",
    "power_sum", "stationary_moment", "Params", "ip_kernel_step",
    "kernel_step", "laplace_L", "mean_L", "p_keep", "sample_L", "sample_Q",
    "sssp_grid_path", "sssp_negative_theta", "sample_pd",
    "sample_pdip_masses", "sample_pdrm", "RngStream",
]

__version__ = "0.1.0"
