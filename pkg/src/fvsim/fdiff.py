"""Finite-dimensional diffusions on [0,1] and on the simplex: Jacobi and
Wright-Fisher Euler integrators, the squared-Bessel time-change
construction of the Jacobi diffusion, and exact generator application to
polynomials."""

from __future__ import annotations

import math

import numpy as np

from .besq import besq_transition
from .core_types import GridPath
from .depoisson import TimeChange, build_time_change
from .rng import as_generator


def jacobi_path(b: float, r: float, r_prime: float, step: float,
                horizon: float, rng) -> GridPath:
    """Euler path of dX = 2 sqrt(X(1-X)) dB + 2(r - (r+r')X) dt.

    Absorbs at 0 when r <= 0 and at 1 when r' <= 0; otherwise the state is
    clipped back into [0,1] after each step.
    """
    if not (0.0 <= b <= 1.0):
        raise ValueError("b must lie in [0,1]")
    if not (0 < step <= horizon):
        raise ValueError("need 0 < step <= horizon")
    gen = as_generator(rng)
    n_steps = int(round(horizon / step))
    times = step * np.arange(n_steps + 1)
    values = np.empty(n_steps + 1)
    values[0] = b
    x = b
    sqrt_step = math.sqrt(step)
    absorbed = (x == 0.0 and r <= 0.0) or (x == 1.0 and r_prime <= 0.0)
    for k in range(n_steps):
        if not absorbed:
            diff = 2.0 * math.sqrt(max(x * (1.0 - x), 0.0))
            x = x + 2.0 * (r - (r + r_prime) * x) * step \
                + diff * sqrt_step * gen.standard_normal()
            if x <= 0.0:
                x = 0.0
                if r <= 0.0:
                    absorbed = True
            elif x >= 1.0:
                x = 1.0
                if r_prime <= 0.0:
                    absorbed = True
        values[k + 1] = x
    return GridPath(times, tuple(values), clock=None)


def jacobi_batch(b, r: float, r_prime: float, step: float, horizon: float,
                 gen) -> np.ndarray:
    """Vectorized Euler endpoints of many independent Jacobi paths."""
    x = np.asarray(b, dtype=float).copy()
    n_steps = int(round(horizon / step))
    sqrt_step = math.sqrt(step)
    stuck_lo = (x == 0.0) & (r <= 0.0)
    stuck_hi = (x == 1.0) & (r_prime <= 0.0)
    for _ in range(n_steps):
        live = ~(stuck_lo | stuck_hi)
        if not live.any():
            break
        xl = x[live]
        xl = xl + 2.0 * (r - (r + r_prime) * xl) * step \
            + 2.0 * np.sqrt(np.maximum(xl * (1.0 - xl), 0.0)) \
            * sqrt_step * gen.standard_normal(xl.size)
        xl = np.clip(xl, 0.0, 1.0)
        x[live] = xl
        if r <= 0.0:
            stuck_lo |= x == 0.0
        if r_prime <= 0.0:
            stuck_hi |= x == 1.0
    return x


def jacobi_mean(b: float, r: float, r_prime: float, t: float) -> float:
    """Solution of the linear mean ODE d/dt E X = 2(r - (r+r') E X),
    valid before any absorption."""
    total = r + r_prime
    if total == 0.0:
        return b + 2.0 * r * t
    target = r / total
    return target + (b - target) * math.exp(-2.0 * total * t)


def wf_path(b, r, step: float, horizon: float, rng) -> GridPath:
    """Euler path on the simplex with per-step renormalization.

    The whole path stops (freezes) when any coordinate with a negative
    rate parameter hits zero.
    """
    b = np.asarray(b, dtype=float)
    r = np.asarray(r, dtype=float)
    if b.size != r.size or b.size < 2:
        raise ValueError("need matching b and r with at least 2 coordinates")
    if abs(b.sum() - 1.0) > 1e-9 or np.any(b < 0):
        raise ValueError("b must lie in the closed simplex")
    if not (0 < step <= horizon):
        raise ValueError("need 0 < step <= horizon")
    gen = as_generator(rng)
    n_steps = int(round(horizon / step))
    times = step * np.arange(n_steps + 1)
    w = b / b.sum()
    states = [w.copy()]
    sqrt_step = math.sqrt(step)
    r_plus = float(r.sum())
    stopped = bool(np.any((w == 0.0) & (r < 0.0)))
    for _ in range(n_steps):
        if not stopped:
            noise = gen.standard_normal(w.size)
            sq = np.sqrt(np.maximum(w, 0.0))
            drift = 2.0 * (r - r_plus * w) * step
            diff = 2.0 * ((1.0 - w) * sq * noise
                          - w * (sq @ noise - sq * noise)) * sqrt_step
            w = np.clip(w + drift + diff, 0.0, None)
            total = w.sum()
            if total <= 0.0:
                w = np.zeros_like(w)
                stopped = True
            else:
                w = w / total
                if np.any((w == 0.0) & (r < 0.0)):
                    stopped = True
        states.append(w.copy())
    return GridPath(times, states, clock=None)


def warren_yor_jacobi(b: float, r: float, r_prime: float, step: float,
                      horizon: float, rng, t_grid=None) -> GridPath:
    """Jacobi path built from two independent exact squared-Bessel paths
    and the shared 1/(Z+Z') clock, evaluated on the de-Poissonized grid."""
    if not (0.0 <= b <= 1.0):
        raise ValueError("b must lie in [0,1]")
    if r < 0 or r_prime < 0:
        raise ValueError("warren_yor_jacobi requires r, r' >= 0")
    gen = as_generator(rng)
    n_steps = int(round(horizon / step))
    times = step * np.arange(n_steps + 1)
    z = np.empty(n_steps + 1)
    zp = np.empty(n_steps + 1)
    z[0], zp[0] = b, 1.0 - b
    for k in range(n_steps):
        z[k + 1] = besq_transition(z[k], 2.0 * r, step, gen)
        zp[k + 1] = besq_transition(zp[k], 2.0 * r_prime, step, gen)
    total = z + zp
    sum_path = GridPath(times, tuple(total))
    tc = build_time_change(sum_path)
    if t_grid is None:
        t_grid = [t for t in times[1:] if t < tc.horizon_t]
    ratios = []
    for t in t_grid:
        idx = tc.rho_index(float(t))
        ratios.append(z[idx] / total[idx])
    return GridPath(np.asarray(t_grid, dtype=float), tuple(ratios))


def _poly_derivatives(coeffs, x: float):
    """(f'(x), f''(x)) for coeffs in increasing-degree order."""
    c = np.asarray(coeffs, dtype=float)
    d1 = np.polynomial.polynomial.polyder(c)
    d2 = np.polynomial.polynomial.polyder(c, 2)
    return (float(np.polynomial.polynomial.polyval(x, d1)) if d1.size else 0.0,
            float(np.polynomial.polynomial.polyval(x, d2)) if d2.size else 0.0)


def apply_jacobi_gen(poly_coeffs, r: float, r_prime: float, x: float) -> float:
    """2x(1-x) f''(x) + 2(r - (r+r')x) f'(x), exactly."""
    f1, f2 = _poly_derivatives(poly_coeffs, x)
    return 2.0 * x * (1.0 - x) * f2 + 2.0 * (r - (r + r_prime) * x) * f1


def apply_wf_gen(exponents, r, w) -> float:
    """Wright-Fisher generator applied to the monomial prod w_i^{e_i}:

    2 sum_i w_i d^2/dw_i^2 - 2 sum_{ij} w_i w_j d^2/dw_i dw_j
    - 2 sum_i (r_+ w_i - r_i) d/dw_i, evaluated exactly.
    """
    e = np.asarray(exponents, dtype=float)
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    if e.size != r.size or e.size != w.size:
        raise ValueError("exponents, r and w must have equal length")
    r_plus = float(r.sum())

    def mono(exp_vec):
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(exp_vec == 0.0, 1.0,
                            np.sign(w) * np.abs(w) ** exp_vec)
        # 0^0 = 1; 0^positive = 0
        vals = np.where((w == 0.0) & (exp_vec > 0.0), 0.0, vals)
        vals = np.where(exp_vec == 0.0, 1.0, vals)
        return float(np.prod(vals))

    total = 0.0
    # 2 sum_i w_i e_i (e_i - 1) w^{e - 2} * w_i  ->  exponent e_i - 1 overall
    for i in range(e.size):
        if e[i] >= 1:
            ei = e.copy()
            ei[i] -= 1.0
            total += 2.0 * e[i] * (e[i] - 1.0) * mono(ei)
    # -2 sum_{ij} w_i w_j d_i d_j f = -2 E (E - 1) f with E = sum e_i
    E = float(e.sum())
    f_val = mono(e)
    total -= 2.0 * E * (E - 1.0) * f_val
    # -2 sum_i (r_+ w_i - r_i) e_i w^{e-u_i}: the r_+ part gives -2 r_+ E f;
    # the r_i part gives +2 sum_i r_i e_i w^{e-u_i}
    total -= 2.0 * r_plus * E * f_val
    for i in range(e.size):
        if e[i] >= 1:
            ei = e.copy()
            ei[i] -= 1.0
            total += 2.0 * r[i] * e[i] * mono(ei)
    return total
