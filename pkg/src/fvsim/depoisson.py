"""De-Poissonization: the 1/total-mass time change and normalization that
turn a superprocess grid path into a probability-measure-valued path."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_types import AtomMeasure, GridPath, IntervalPartition


@dataclass(frozen=True)
class TimeChange:
    source_times: np.ndarray
    clock_values: np.ndarray
    horizon_t: float

    def rho(self, t: float) -> float:
        """Smallest source time with clock value exceeding t."""
        if t >= self.horizon_t:
            raise ValueError(f"t={t} is beyond the horizon {self.horizon_t}")
        idx = int(np.searchsorted(self.clock_values, t, side="right"))
        if idx >= self.source_times.size:
            idx = self.source_times.size - 1
        return float(self.source_times[idx])

    def rho_index(self, t: float) -> int:
        """Index of the source grid point at or after rho(t)."""
        if t >= self.horizon_t:
            raise ValueError(f"t={t} is beyond the horizon {self.horizon_t}")
        idx = int(np.searchsorted(self.clock_values, t, side="right"))
        return min(idx, self.source_times.size - 1)


def build_time_change(path: GridPath) -> TimeChange:
    """Trapezoidal clock of 1/total-mass along the path."""
    masses = path.total_masses()
    if masses[0] <= 0.0:
        raise ValueError("total mass must be positive at time 0")
    if path.clock is not None:
        clock = path.clock
    else:
        inv = np.zeros_like(masses)
        alive = masses > 0.0
        inv[alive] = 1.0 / masses[alive]
        dt = np.diff(path.times)
        clock = np.concatenate([[0.0],
                                np.cumsum(dt * 0.5 * (inv[:-1] + inv[1:]))])
    horizon = float(clock[-1])
    return TimeChange(np.asarray(path.times, dtype=float),
                      np.asarray(clock, dtype=float), horizon)


def _normalize(state):
    if isinstance(state, AtomMeasure):
        m = state.total_mass
        return AtomMeasure(locations=state.locations, masses=state.masses / m)
    if isinstance(state, IntervalPartition):
        return IntervalPartition(state.blocks / state.total_mass)
    arr = np.asarray(state, dtype=float)
    return arr / arr.sum()


def depoissonize(path: GridPath, tc: TimeChange, t_grid) -> GridPath:
    """Normalized states at the de-Poissonized times.

    For each requested t, the source state is the one at the nearest grid
    point at or after rho(t) (grid states are exact in law; interpolating
    between measures has no distributional meaning).
    """
    t_grid = np.asarray(list(t_grid), dtype=float)
    masses = path.total_masses()
    states = []
    for t in t_grid:
        idx = tc.rho_index(float(t))
        state = path.states[idx]
        if masses[idx] <= 0.0:
            raise ValueError(f"source state at rho({t}) has zero mass "
                             "(path extinct)")
        states.append(_normalize(state))
    return GridPath(t_grid, states)
