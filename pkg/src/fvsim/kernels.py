"""One-step transition kernels of the self-similar superprocess and its
interval-partition counterpart, plus multi-step grid paths.

The kernel for a time step s works at rate r = 1/(2s).  Each atom of mass
b survives with probability 1 - e^{-br}; a survivor is replaced by a
"principal" atom of mass L (Poisson-Gamma mixture: K zero-truncated
Poisson(br), L ~ Gamma(K - alpha, rate r)) that stays at the old location
with probability p_keep(b, r, L), plus an independent Gamma(alpha, r)
cloud of Poisson-Dirichlet atoms at fresh uniform locations.  Immigration
contributes one more Gamma(theta, r) cloud.

Stick-breaking clouds are truncated; the truncated residual is always
carried as one extra small atom (block) so that total mass has the exact
law.  The residual masses involved are recorded on request but never
dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .besq import besq_negative_path
from .core_types import (AtomMeasure, GridPath, IntervalPartition,
                         ZERO_MEASURE, concatenate, scale)
from .pd_sampling import check_params, stick_breaking
from .rng import as_generator
from .specialfn import (_asymptotic_iv_scaled, _recip_gamma, _series_iv,
                        zt_poisson)

_SERIES_SWITCH = 15.0
CLOUD_STICKS = 100


class FormulaNormalizationError(ValueError):
    """The survival-probability formula evaluated outside [0,1]."""


class EpochCapError(RuntimeError):
    """Too many re-designation epochs before the horizon."""

    def __init__(self, message, partial_path=None):
        super().__init__(message)
        self.partial_path = partial_path


@dataclass(frozen=True)
class Params:
    alpha: float
    theta: float

    def __post_init__(self):
        check_params(self.alpha, self.theta)


def sample_L(b, r, alpha: float, rng, size=None):
    """Draw the principal-atom mass L of a surviving atom."""
    b = np.asarray(b, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(b <= 0) or np.any(r <= 0):
        raise ValueError("sample_L requires b > 0 and r > 0")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0,1)")
    gen = as_generator(rng)
    scalar = b.ndim == 0 and r.ndim == 0 and size is None
    br = b * r
    k = zt_poisson(gen, br if size is None else np.broadcast_to(br, size))
    out = gen.gamma(np.asarray(k, dtype=float) - alpha) / r
    return float(out) if scalar else out


def laplace_L(b: float, r: float, alpha: float, lam: float) -> float:
    """Closed-form E[exp(-lam L)] of the principal-atom mass."""
    return (((r + lam) / r) ** alpha
            * math.expm1(b * r * r / (r + lam)) / math.expm1(b * r))


def mean_L(b: float, r: float, alpha: float) -> float:
    """Closed-form E[L] = b e^{br}/(e^{br}-1) - alpha/r."""
    return b * math.exp(b * r) / math.expm1(b * r) - alpha / r


def _p_keep_raw(z: np.ndarray, alpha: float) -> np.ndarray:
    """I_{1+a}(z) / tail(I_{-1-a})(z), where tail removes the m=0 series
    term of the denominator order; that term is cancelled exactly by the
    formula's added power term, so evaluating the tail directly avoids
    catastrophic cancellation near z = 0."""
    p = np.empty_like(z)
    small = z <= _SERIES_SWITCH
    if small.any():
        zs = z[small]
        p[small] = _series_iv(1.0 + alpha, zs) / _series_iv(-1.0 - alpha, zs,
                                                            m_start=1)
    if (~small).any():
        zl = z[~small]
        num = _asymptotic_iv_scaled(1.0 + alpha, zl)
        lead = _recip_gamma(-alpha) * np.exp((-1.0 - alpha) * np.log(zl / 2.0)
                                             - zl)
        den = _asymptotic_iv_scaled(-1.0 - alpha, zl) - lead
        p[~small] = num / den
    return p


_PK_TABLE_POINTS = 4096
_PK_TABLE_ZMIN = 1e-10
_PK_TABLE_CACHE: dict = {}


def _p_keep_table(alpha: float):
    key = round(float(alpha), 12)
    tab = _PK_TABLE_CACHE.get(key)
    if tab is None:
        logz = np.linspace(math.log(_PK_TABLE_ZMIN), math.log(_SERIES_SWITCH),
                           _PK_TABLE_POINTS)
        logp = np.log(_p_keep_raw(np.exp(logz), alpha))
        tab = (logz, logp)
        _PK_TABLE_CACHE[key] = tab
    return tab


def p_keep_interp(z: np.ndarray, alpha: float) -> np.ndarray:
    """Fast p_keep via a cached log-log interpolation table.

    The table spans z in [1e-10, 15]; beyond 15 the probability differs
    from 1 by less than 5e-8 and is returned as 1, and below 1e-10 the
    clamped table value (~0) is returned.  Absolute error < 1e-5.
    """
    logz_tab, logp_tab = _p_keep_table(alpha)
    with np.errstate(divide="ignore"):
        p = np.exp(np.interp(np.log(z), logz_tab, logp_tab))
    return np.where(z > _SERIES_SWITCH, 1.0, p)


def p_keep(b, r, c, alpha: float):
    """Probability that a surviving atom keeps its location.

    Vectorized over (b, r, c).  Raises FormulaNormalizationError if the
    evaluated formula leaves [0,1] beyond rounding slack.
    """
    b = np.asarray(b, dtype=float)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(b <= 0) or np.any(r <= 0) or np.any(c <= 0):
        raise ValueError("p_keep requires b, r, c > 0")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0,1)")
    scalar = b.ndim == 0 and r.ndim == 0 and c.ndim == 0
    z = np.atleast_1d(2.0 * r * np.sqrt(b * c))
    p = _p_keep_raw(z, alpha)
    if np.any(p < -1e-9) or np.any(p > 1.0 + 1e-9):
        bad = p[(p < -1e-9) | (p > 1.0 + 1e-9)]
        raise FormulaNormalizationError(
            f"survival probability left [0,1]: extremes {bad.min()}, {bad.max()}")
    p = np.clip(p, 0.0, 1.0)
    return float(p[0]) if scalar else p


def p_keep_candidates(b: float, r: float, c: float, alpha: float):
    """Both readings of the denominator's added power term.

    Returns (p with (z/2)^{-1-a} normalization, p with literal z^{-1-a}).
    The first equals p_keep; the second is kept for the normalization
    audit and is expected to leave [0,1] for small z.
    """
    z = 2.0 * r * math.sqrt(b * c)
    num = float(_series_iv(1.0 + alpha, np.atleast_1d(z))[0])
    i_neg = float(_series_iv(-1.0 - alpha, np.atleast_1d(z))[0])
    half = num / (i_neg + alpha * (z / 2.0) ** (-1.0 - alpha)
                  * _recip_gamma(1.0 - alpha))
    literal = num / (i_neg + alpha * z ** (-1.0 - alpha)
                     * _recip_gamma(1.0 - alpha))
    return half, literal


def _cloud_sticks(alpha: float, total: float, gen,
                  n_sticks: int = CLOUD_STICKS) -> np.ndarray:
    """Masses of a total * PDIP/PDRM(alpha, alpha) cloud: n_sticks
    stick-breaking masses plus the residual as one final entry."""
    sticks, residual = stick_breaking(alpha, alpha, n_sticks, gen)
    out = np.append(sticks, residual) * total
    return out[out > 0.0]


def _fresh_locations(n: int, taken: np.ndarray, gen) -> np.ndarray:
    locs = gen.uniform(size=n)
    if taken.size or n > 1:
        while True:
            all_locs = np.concatenate([taken, locs])
            if np.unique(all_locs).size == all_locs.size:
                break
            locs = gen.uniform(size=n)
    return locs


def sample_Q(b: float, u: float, r: float, alpha: float, rng,
             n_sticks: int = CLOUD_STICKS) -> AtomMeasure:
    """One atom's offspring measure under the transition kernel."""
    if not (b > 0 and r > 0):
        raise ValueError("sample_Q requires b > 0 and r > 0")
    gen = as_generator(rng)
    if gen.uniform() < math.exp(-b * r):
        return ZERO_MEASURE
    c = sample_L(b, r, alpha, gen)
    keep = gen.uniform() < p_keep(b, r, c, alpha)
    g = gen.gamma(alpha) / r
    cloud = _cloud_sticks(alpha, g, gen, n_sticks) if g > 0 else np.empty(0)
    if keep:
        loc0 = u
        locs = _fresh_locations(cloud.size, np.array([u]), gen)
    else:
        locs_all = _fresh_locations(cloud.size + 1, np.array([u]), gen)
        loc0, locs = locs_all[0], locs_all[1:]
    return AtomMeasure(locations=np.append(locs, loc0),
                       masses=np.append(cloud, c))


def kernel_step(mu: AtomMeasure, s: float, params: Params, rng,
                n_sticks: int = CLOUD_STICKS) -> AtomMeasure:
    """One exact transition of duration s, for theta >= 0."""
    if params.theta < 0:
        raise ValueError("kernel_step requires theta >= 0; "
                         "use sssp_negative_theta for theta < 0")
    if not (s > 0):
        raise ValueError("s must be > 0")
    gen = as_generator(rng)
    r = 1.0 / (2.0 * s)
    locs_parts = []
    mass_parts = []
    if params.theta > 0:
        g0 = gen.gamma(params.theta) / r
        if g0 > 0:
            sticks, residual = stick_breaking(params.alpha, params.theta,
                                              n_sticks, gen)
            cloud = np.append(sticks, residual) * g0
            cloud = cloud[cloud > 0.0]
            locs_parts.append(gen.uniform(size=cloud.size))
            mass_parts.append(cloud)
    for u, b in zip(mu.locations, mu.masses):
        q = sample_Q(b, u, r, params.alpha, gen, n_sticks)
        if len(q):
            locs_parts.append(q.locations)
            mass_parts.append(q.masses)
    if not mass_parts:
        return ZERO_MEASURE
    locs = np.concatenate(locs_parts)
    masses = np.concatenate(mass_parts)
    # collisions have probability zero; in floating point, resample any
    # duplicated fresh location (atoms kept at an input location stay put)
    while np.unique(locs).size != locs.size:
        _vals, inverse, counts = np.unique(locs, return_inverse=True,
                                           return_counts=True)
        dup = counts[inverse] > 1
        fixed = np.isin(locs, mu.locations)
        redraw = dup & ~fixed
        if not redraw.any():
            redraw = dup
            redraw[np.argmax(dup)] = False
        locs[redraw] = gen.uniform(size=int(redraw.sum()))
    return AtomMeasure(locations=locs, masses=masses)


def ip_kernel_step(beta: IntervalPartition, s: float, params: Params, rng,
                   n_sticks: int = CLOUD_STICKS) -> IntervalPartition:
    """One exact interval-partition transition of duration s, theta >= 0."""
    if params.theta < 0:
        raise ValueError("ip_kernel_step requires theta >= 0")
    if not (s > 0):
        raise ValueError("s must be > 0")
    gen = as_generator(rng)
    r = 1.0 / (2.0 * s)
    parts = []
    if params.theta > 0:
        g0 = gen.gamma(params.theta) / r
        if g0 > 0:
            sticks, residual = stick_breaking(params.alpha, params.theta,
                                              n_sticks, gen)
            cloud = np.append(sticks, residual) * g0
            parts.append(IntervalPartition(cloud[cloud > 0.0]))
    for b in beta.blocks:
        if gen.uniform() < math.exp(-b * r):
            continue
        c = sample_L(b, r, params.alpha, gen)
        g = gen.gamma(params.alpha) / r
        blocks = [c]
        if g > 0:
            blocks.extend(_cloud_sticks(params.alpha, g, gen, n_sticks))
        parts.append(IntervalPartition(blocks))
    return concatenate(parts)


def sssp_grid_path(mu0: AtomMeasure, step: float, horizon: float,
                   params: Params, rng,
                   n_sticks: int = CLOUD_STICKS) -> GridPath:
    """Iterated kernel transitions on a uniform grid, with the cumulative
    clock integral of 1/total-mass (trapezoidal) for de-Poissonization."""
    if not (0 < step <= horizon):
        raise ValueError("need 0 < step <= horizon")
    gen = as_generator(rng)
    n_steps = int(round(horizon / step))
    times = step * np.arange(n_steps + 1)
    states = [mu0]
    clock = np.zeros(n_steps + 1)
    extinct = mu0.total_mass == 0.0
    extinction_time = 0.0 if extinct else None
    mu = mu0
    for k in range(n_steps):
        m_prev = mu.total_mass
        if m_prev == 0.0:
            mu = ZERO_MEASURE
            clock[k + 1] = clock[k]
        else:
            mu = kernel_step(mu, step, params, gen, n_sticks)
            m_next = mu.total_mass
            if m_next == 0.0:
                # clock diverges at extinction; cap it at the one-sided value
                clock[k + 1] = clock[k] + step / m_prev
                if not extinct:
                    extinct = True
                    extinction_time = float(times[k + 1])
            else:
                clock[k + 1] = clock[k] + step * 0.5 * (1.0 / m_prev
                                                        + 1.0 / m_next)
        states.append(mu)
    return GridPath(times, states, clock=clock, extinct=extinct,
                    extinction_time=extinction_time)


def _euler_until(z: float, alpha: float, duration: float, substep: float,
                 gen) -> tuple[float, float, bool]:
    """Euler-advance a squared Bessel of dimension -2 alpha by at most
    `duration`; stop early at the (interpolated) first zero.

    Returns (value, time elapsed, absorbed)."""
    t = 0.0
    while t < duration - 1e-15 * duration:
        h = min(substep, duration - t)
        zn = z - 2.0 * alpha * h + 2.0 * math.sqrt(z * h) * gen.standard_normal()
        if zn <= 0.0:
            frac = z / (z - zn)
            return 0.0, t + frac * h, True
        z = zn
        t += h
    return z, duration, False


def sssp_negative_theta(mu0: AtomMeasure, step: float, horizon: float,
                        alpha: float, theta: float, rng,
                        n_sticks: int = CLOUD_STICKS,
                        euler_step: float | None = None,
                        epoch_cap: int = 10_000) -> GridPath:
    """Grid path for theta in (-alpha, 0).

    The largest atom is designated to evolve as a squared Bessel process
    of dimension -2 alpha with no descendants; the rest of the measure
    evolves by the exact kernel with parameters (alpha, theta + alpha).
    At each absorption time the largest atom of the current state is
    re-designated and the construction restarts.
    """
    if not (0.0 < alpha < 1.0) or not (-alpha < theta < 0.0):
        raise ValueError("need alpha in (0,1) and theta in (-alpha, 0)")
    if not (0 < step <= horizon):
        raise ValueError("need 0 < step <= horizon")
    gen = as_generator(rng)
    params_rest = Params(alpha, theta + alpha)
    if euler_step is None:
        euler_step = step / 8.0

    def designate(mu: AtomMeasure):
        if mu.total_mass == 0.0:
            return None, None, ZERO_MEASURE
        order = np.lexsort((mu.locations, -mu.masses))
        top = order[0]
        rest = AtomMeasure(locations=np.delete(mu.locations, top),
                           masses=np.delete(mu.masses, top))
        return float(mu.masses[top]), float(mu.locations[top]), rest

    n_steps = int(round(horizon / step))
    times = step * np.arange(n_steps + 1)
    states = [mu0]
    clock = np.zeros(n_steps + 1)
    extinct = mu0.total_mass == 0.0
    extinction_time = 0.0 if extinct else None
    z, u_top, rest = designate(mu0)
    epochs = 0
    for k in range(n_steps):
        m_prev = (0.0 if z is None else z) + rest.total_mass
        if m_prev == 0.0:
            states.append(ZERO_MEASURE)
            clock[k + 1] = clock[k]
            continue
        remaining = step
        while remaining > 0.0:
            z, elapsed, absorbed = _euler_until(z, alpha, remaining,
                                                euler_step, gen)
            tiny = 1e-12 * step  # below this the kernel rate 1/(2s) overflows
            if elapsed > tiny and rest.total_mass > 0.0:
                rest = kernel_step(rest, elapsed, params_rest, gen, n_sticks)
            elif elapsed > tiny and params_rest.theta > 0.0:
                rest = kernel_step(ZERO_MEASURE, elapsed, params_rest, gen,
                                   n_sticks)
            remaining -= elapsed
            if absorbed:
                epochs += 1
                if epochs > epoch_cap:
                    partial = GridPath(times[:k + 1], states,
                                       clock=clock[:k + 1])
                    raise EpochCapError(
                        f"exceeded {epoch_cap} re-designation epochs",
                        partial_path=partial)
                z, u_top, rest = designate(rest)
                if z is None:
                    break
        if z is None:
            state = ZERO_MEASURE
        elif len(rest):
            state = AtomMeasure(locations=np.append(rest.locations, u_top),
                                masses=np.append(rest.masses, z))
        else:
            state = AtomMeasure(locations=[u_top], masses=[z])
        m_next = state.total_mass
        if m_next == 0.0:
            clock[k + 1] = clock[k] + step / m_prev
            if not extinct:
                extinct = True
                extinction_time = float(times[k + 1])
        else:
            clock[k + 1] = clock[k] + step * 0.5 * (1.0 / m_prev + 1.0 / m_next)
        states.append(state)
    return GridPath(times, states, clock=clock, extinct=extinct,
                    extinction_time=extinction_time)
