"""Squared Bessel processes.

For nonnegative dimension the transition law is sampled exactly as a
Poisson-Gamma mixture: N ~ Poisson(b/2s), Z_s ~ Gamma(r + N, rate 1/2s),
with Gamma(0, .) the point mass at 0.  Negative dimension has no such
elementary mixture; those paths are Euler-Maruyama with a linear
first-passage refinement of the absorption time, after which the path is
identically zero.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .rng import as_generator


@dataclass(frozen=True)
class BesqPath:
    grid: np.ndarray
    values: np.ndarray
    dimension: float
    absorption_time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["time", "value"])
        for t, v in zip(self.grid.tolist(), self.values.tolist()):
            w.writerow([repr(t), repr(v)])
        return buf.getvalue()


def besq_transition(b, two_r, s: float, rng, size=None):
    """Exact draw(s) from the time-s marginal of BESQ_b(2r), 2r >= 0."""
    b = np.asarray(b, dtype=float)
    two_r = np.asarray(two_r, dtype=float)
    if np.any(b < 0):
        raise ValueError("initial value b must be >= 0")
    if np.any(two_r < 0):
        raise ValueError("besq_transition requires dimension 2r >= 0")
    if not (s > 0):
        raise ValueError("time s must be > 0")
    gen = as_generator(rng)
    scalar = b.ndim == 0 and two_r.ndim == 0 and size is None
    lam = b / (2.0 * s)
    n = gen.poisson(lam if size is None else np.broadcast_to(lam, size))
    shape = two_r / 2.0 + n
    z = gen.gamma(np.asarray(shape, dtype=float)) * (2.0 * s)
    return float(z) if scalar else z


def besq_negative_path(b: float, alpha: float, step: float, horizon: float,
                       rng) -> BesqPath:
    """Euler path of BESQ_b(-2alpha), absorbed at its first zero."""
    if not (b > 0):
        raise ValueError("b must be > 0")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0,1)")
    if not (0 < step <= horizon):
        raise ValueError("need 0 < step <= horizon")
    gen = as_generator(rng)
    n_steps = int(round(horizon / step))
    grid = step * np.arange(n_steps + 1)
    values = np.zeros(n_steps + 1)
    values[0] = b
    z = b
    absorption = None
    sqrt_step = np.sqrt(step)
    noise = gen.standard_normal(n_steps)
    for k in range(n_steps):
        drift = -2.0 * alpha * step
        z_next = z + drift + 2.0 * np.sqrt(z) * sqrt_step * noise[k]
        if z_next <= 0.0:
            # linear interpolation of the crossing inside the step
            frac = z / (z - z_next)
            absorption = float(grid[k] + frac * step)
            z = 0.0
            values[k + 1:] = 0.0
            break
        z = z_next
        values[k + 1] = z
    return BesqPath(grid, values, dimension=-2.0 * alpha,
                    absorption_time=absorption)


def besq_negative_batch(b: np.ndarray, alpha: float, step: float,
                        horizon: float, gen) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Euler endpoints of BESQ(-2alpha) over many starting points.

    Returns (value_at_horizon, absorption_time) arrays; absorption_time is
    nan where the path survived to the horizon.
    """
    z = np.asarray(b, dtype=float).copy()
    n_steps = int(round(horizon / step))
    sqrt_step = np.sqrt(step)
    absorbed = z <= 0.0
    s_abs = np.full(z.shape, np.nan)
    s_abs[absorbed] = 0.0
    z[absorbed] = 0.0
    for k in range(n_steps):
        live = ~absorbed
        if not live.any():
            break
        zn = z[live] - 2.0 * alpha * step \
            + 2.0 * np.sqrt(z[live]) * sqrt_step * gen.standard_normal(live.sum())
        crossed = zn <= 0.0
        idx = np.flatnonzero(live)
        hit = idx[crossed]
        frac = z[hit] / (z[hit] - zn[crossed])
        s_abs[hit] = k * step + frac * step
        z[hit] = 0.0
        absorbed[hit] = True
        z[idx[~crossed]] = zn[~crossed]
    return z, s_abs


def besq_additive_path(components, step: float, horizon: float, rng):
    """Independent exact BESQ paths on a common grid, plus their sum path.

    components is a list of (b_i, two_r_i) with two_r_i >= 0.  Returns
    (list of BesqPath, sum BesqPath).
    """
    if not (0 < step <= horizon):
        raise ValueError("need 0 < step <= horizon")
    gen = as_generator(rng)
    n_steps = int(round(horizon / step))
    grid = step * np.arange(n_steps + 1)
    paths = []
    for b, two_r in components:
        values = np.zeros(n_steps + 1)
        values[0] = b
        z = float(b)
        for k in range(n_steps):
            z = besq_transition(z, two_r, step, gen)
            values[k + 1] = z
        paths.append(BesqPath(grid, values, dimension=float(two_r)))
    if paths:
        total = np.sum([p.values for p in paths], axis=0)
        dim = float(sum(c[1] for c in components))
    else:
        total = np.zeros(n_steps + 1)
        dim = 0.0
    return paths, BesqPath(grid, total, dimension=dim)
