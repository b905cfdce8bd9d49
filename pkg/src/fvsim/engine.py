"""Vectorized multi-path simulation of the superprocess kernel and its
de-Poissonized normalization.

Atoms of a block of paths live in flat structure-of-arrays form: parallel
arrays (path id, mass, label).  One call advances every active path by one
kernel transition, with per-path durations, so each path can take a final
partial step of exactly the duration needed to land on a requested
de-Poissonized time (the duration is chosen as (t - clock) * current
total mass, the forward-rule prediction of the clock increment).

Cloud handling: each stick-breaking cloud is broken into size-biased
sticks only until its residual falls below an absolute threshold; the
residual is carried as a single "lump" row tagged with the PD parameter
of the partition it still represents.  By additivity of the per-atom
total-mass law this leaves the total-mass process exact; only the
sub-threshold partition of mass into atoms is coarsened during the
dynamics.  Whenever statistics of the atom partition are measured, lump
rows are first refined down to a much finer threshold, so the recorded
ranked-mass statistics see an essentially fully resolved state.

Labels mark distinguished atoms: a surviving atom's principal offspring
inherits the label only when it keeps its location, so the mass carrying
label j is the mass at the j-th initial atom's location.
"""

from __future__ import annotations

import numpy as np

from .kernels import p_keep_interp
from .pd_sampling import check_params
from .rng import RngStream
from .specialfn import zt_poisson

BIG_CLOUD_STICKS = 64
DEFAULT_CHUNK = 2048
DEFAULT_LUMP_TAU = 1e-3

KNOWN_STATS = ("total", "q1", "q2", "q3", "max", "label1")


def _stick_refine(pids, totals, beta0, alpha, tau, gen,
                  cap=BIG_CLOUD_STICKS):
    """Stick-break scaled PD(alpha, beta0) clouds down to resolution tau.

    Each cloud is broken into size-biased sticks only until its remaining
    residual falls below tau (or cap sticks are drawn); the residual is
    kept as one row, so total mass is preserved exactly.  Returns
    (pid, mass, beta) rows where beta is nan for a fully resolved stick
    and, for a residual row, the PD parameter of the partition the
    residual still represents (beta0 + j*alpha after j sticks).
    """
    out_pid = []
    out_mass = []
    out_beta = []
    rem = totals.astype(float).copy()
    act = np.arange(totals.size)
    j = 0
    while True:
        live = rem > tau
        if not live.all():
            lump = act[~live]
            out_pid.append(pids[lump])
            out_mass.append(rem[~live])
            out_beta.append(beta0[lump] + j * alpha)
            act = act[live]
            rem = rem[live]
        if not act.size or j == cap:
            if act.size:
                out_pid.append(pids[act])
                out_mass.append(rem)
                out_beta.append(beta0[act] + j * alpha)
            break
        j += 1
        w = gen.beta(1.0 - alpha, beta0[act] + j * alpha)
        stick = rem * w
        out_pid.append(pids[act])
        out_mass.append(stick)
        out_beta.append(np.full(act.size, np.nan))
        rem = rem - stick
    pid = np.concatenate(out_pid) if out_pid else np.empty(0, dtype=np.int64)
    mass = np.concatenate(out_mass) if out_mass else np.empty(0)
    beta = np.concatenate(out_beta) if out_beta else np.empty(0)
    keep = mass > 0.0
    return pid[keep], mass[keep], beta[keep]


def kernel_step_batch(pid, mass, label, dur, n_paths, alpha, theta, gen,
                      lump_tau=DEFAULT_LUMP_TAU):
    """One kernel transition for every path; dur is per-path.

    Returns new (pid, mass, label, rowbeta) arrays, where rowbeta is nan
    for a fully resolved atom and, for a lumped cloud residual, the PD
    parameter of the partition the lump stands for (so measurement-time
    refinement can finish breaking it).
    """
    r_path = 1.0 / (2.0 * dur)
    r_row = r_path[pid]
    br = mass * r_row
    surv = gen.uniform(size=br.size) > np.exp(-br)
    spid = pid[surv]
    sr = r_row[surv]
    sbr = br[surv]
    slab = label[surv]
    if spid.size:
        k = zt_poisson(gen, sbr)
        big_L = gen.gamma(np.asarray(k, dtype=float) - alpha) / sr
        z = 2.0 * sr * np.sqrt(mass[surv] * big_L)
        pk = p_keep_interp(z, alpha)
        keep = gen.uniform(size=pk.size) < pk
        new_lab = np.where(keep, slab, 0).astype(label.dtype)
        g_cloud = gen.gamma(alpha, size=spid.size) / sr
    else:
        big_L = np.empty(0)
        new_lab = np.empty(0, dtype=label.dtype)
        g_cloud = np.empty(0)
    cloud_pid = spid
    cloud_tot = g_cloud
    cloud_beta = np.full(g_cloud.size, alpha)
    if theta > 0.0:
        g0 = gen.gamma(theta, size=n_paths) / r_path
        cloud_pid = np.concatenate([cloud_pid, np.arange(n_paths)])
        cloud_tot = np.concatenate([cloud_tot, g0])
        cloud_beta = np.concatenate([cloud_beta, np.full(n_paths, theta)])
    pos = cloud_tot > 0.0
    cp, cm, cb = _stick_refine(cloud_pid[pos], cloud_tot[pos],
                               cloud_beta[pos], alpha, lump_tau, gen)
    new_pid = np.concatenate([spid, cp]).astype(np.int64)
    new_mass = np.concatenate([big_L, cm])
    new_beta = np.concatenate([np.full(big_L.size, np.nan), cb])
    out_lab = np.zeros(new_pid.size, dtype=label.dtype)
    out_lab[:new_lab.size] = new_lab
    return new_pid, new_mass, out_lab, new_beta


def _path_stats(pid, mass, label, n_paths, stats, extra_mass=None,
                extra_label=None):
    """Per-path statistics; q's are computed on the normalized masses."""
    if extra_mass is not None:
        live = extra_mass > 0.0
        pid = np.concatenate([pid, np.flatnonzero(live)])
        mass = np.concatenate([mass, extra_mass[live]])
        lab = np.zeros(live.sum(), dtype=label.dtype)
        if extra_label is not None:
            lab = extra_label[live]
        label = np.concatenate([label, lab])
    totals = np.bincount(pid, weights=mass, minlength=n_paths)
    out = {}
    safe = np.where(totals > 0.0, totals, 1.0)
    for name in stats:
        if name == "total":
            out[name] = totals.copy()
        elif name in ("q1", "q2", "q3"):
            m = int(name[1])
            sums = np.bincount(pid, weights=mass ** (m + 1),
                               minlength=n_paths)
            out[name] = sums / safe ** (m + 1)
        elif name == "max":
            mx = np.zeros(n_paths)
            np.maximum.at(mx, pid, mass)
            out[name] = mx
        elif name == "label1":
            sel = label == 1
            out[name] = np.bincount(pid[sel], weights=mass[sel],
                                    minlength=n_paths) / safe
        else:
            raise ValueError(f"unknown statistic {name!r}")
    return out


REFINE_TAU = 1e-4


def _refined_stats(pid, mass, label, rowbeta, n_paths, stats, alpha, gen,
                   refine_tau=REFINE_TAU, extra_mass=None, extra_label=None):
    """Path statistics after finishing the stick-breaking of lumped cloud
    residuals down to refine_tau.

    The dynamics carry sub-threshold clouds as single rows (total mass is
    exact either way); statistics of the atom partition are computed on
    the refined state so the coarsening does not bias them.
    """
    lump = np.isfinite(rowbeta) & (mass > refine_tau)
    if lump.any():
        rp, rm, _rb = _stick_refine(pid[lump], mass[lump], rowbeta[lump],
                                    alpha, refine_tau, gen, cap=128)
        pid = np.concatenate([pid[~lump], rp])
        mass = np.concatenate([mass[~lump], rm])
        label = np.concatenate([label[~lump],
                                np.zeros(rp.size, dtype=label.dtype)])
    return _path_stats(pid, mass, label, n_paths, stats, extra_mass,
                       extra_label)


def sssp_step_batch(x0, durations, alpha, theta, n_paths, stream: RngStream,
                    stats=("total", "max"), chunk_size=DEFAULT_CHUNK,
                    lump_tau=DEFAULT_LUMP_TAU):
    """Iterate exact kernel transitions of the given durations from a
    common initial mass vector; returns per-path statistics of the final
    state (un-normalized except the q's)."""
    check_params(alpha, theta)
    x0 = np.asarray(x0, dtype=float)
    out = {name: np.empty(n_paths) for name in stats}
    start = 0
    chunk_idx = 0
    while start < n_paths:
        p = min(chunk_size, n_paths - start)
        gen = stream.substream(chunk_idx)
        pid = np.repeat(np.arange(p), x0.size)
        mass = np.tile(x0, p)
        label = np.tile(np.arange(1, x0.size + 1, dtype=np.int16), p)
        rowbeta = np.full(pid.size, np.nan)
        for s in durations:
            dur = np.full(p, float(s))
            pid, mass, label, rowbeta = kernel_step_batch(
                pid, mass, label, dur, p, alpha, theta, gen, lump_tau)
        res = _refined_stats(pid, mass, label, rowbeta, p, stats, alpha, gen)
        for name in stats:
            out[name][start:start + p] = res[name]
        start += p
        chunk_idx += 1
    return out


def sssp_negtheta_batch(x0, alpha, theta, step, horizon, n_paths,
                        stream: RngStream, stats=("total",),
                        chunk_size=DEFAULT_CHUNK, lump_tau=DEFAULT_LUMP_TAU,
                        euler_substeps=4):
    """Superprocess grid paths for theta in (-alpha, 0): the largest atom
    is designated to evolve as a squared Bessel of dimension -2 alpha with
    no descendants, re-designated at (grid-resolved) absorption epochs,
    while the rest takes exact kernel steps with parameters
    (alpha, theta + alpha).  Returns per-path statistics at the horizon."""
    check_params(alpha, theta)
    if not (theta < 0.0):
        raise ValueError("sssp_negtheta_batch requires theta < 0")
    x0 = np.sort(np.asarray(x0, dtype=float))[::-1]
    n_steps = int(round(horizon / step))
    out = {name: np.empty(n_paths) for name in stats}
    start = 0
    chunk_idx = 0
    while start < n_paths:
        p = min(chunk_size, n_paths - start)
        gen = stream.substream(chunk_idx)
        pid = np.repeat(np.arange(p), x0.size)
        mass = np.tile(x0, p)
        label = np.tile(np.arange(1, x0.size + 1, dtype=np.int16), p)
        rowbeta = np.full(pid.size, np.nan)
        des = np.zeros(p)
        des_lab = np.zeros(p, dtype=np.int16)
        pid, mass, label, rowbeta, des, des_lab = _redesignate(
            pid, mass, label, rowbeta, des, des_lab, p)
        dur = np.full(p, float(step))
        dead = np.zeros(p, dtype=bool)
        for _ in range(n_steps):
            pid, mass, label, rowbeta = kernel_step_batch(
                pid, mass, label, dur, p, alpha, theta + alpha, gen, lump_tau)
            _euler_negdim(des, alpha, dur, gen, euler_substeps)
            des_lab[des <= 0.0] = 0
            pid, mass, label, rowbeta, des, des_lab = _redesignate(
                pid, mass, label, rowbeta, des, des_lab, p)
            # zero total mass is absorbing for theta < 0: discard any
            # immigration the kernel step granted to an already-dead path
            keep = ~dead[pid]
            pid, mass, label, rowbeta = (pid[keep], mass[keep], label[keep],
                                         rowbeta[keep])
            totals = np.bincount(pid, weights=mass, minlength=p) + des
            dead |= totals <= 0.0
        res = _refined_stats(pid, mass, label, rowbeta, p, stats, alpha, gen,
                             extra_mass=des, extra_label=des_lab)
        for name in stats:
            out[name][start:start + p] = res[name]
        start += p
        chunk_idx += 1
    return out


def _fv_chunk_task(args):
    (stream, chunk_idx, p, x0, alpha, theta, t_targets, step, stats,
     lump_tau, euler_substeps, max_iter, init_pd_sticks) = args
    gen = stream.substream(chunk_idx)
    return _fv_chunk(gen, p, x0, alpha, theta, t_targets, step, stats,
                     lump_tau, euler_substeps, max_iter, init_pd_sticks)


def fv_path_stats(x0, alpha, theta, t_targets, step, n_paths,
                  stream: RngStream, stats=("q1",), chunk_size=DEFAULT_CHUNK,
                  lump_tau=DEFAULT_LUMP_TAU, euler_substeps=4,
                  max_iter=1_000_000, init_pd_sticks=None, workers=1):
    """De-Poissonized path statistics at the requested times.

    x0 is the ranked initial mass vector (total mass 1 for a probability
    start), shared by all paths; alternatively init_pd_sticks draws an
    independent stationary stick-breaking start per path (truncated at
    that many sticks, residual carried as one atom so mass is exactly 1).
    Returns {stat: array (n_paths, n_times)}, with nan entries for the
    (rare) paths whose discretized total mass hit zero before a requested
    time.  Works for theta >= 0 and, via the designated-atom
    construction, for theta in (-alpha, 0).

    Chunks draw from indexed substreams, so the result is bit-identical
    for every chunk_size and workers choice; workers > 1 runs chunks in
    parallel processes.
    """
    check_params(alpha, theta)
    if x0 is not None:
        x0 = np.sort(np.asarray(x0, dtype=float))[::-1]
    elif init_pd_sticks is None:
        raise ValueError("need either x0 or init_pd_sticks")
    t_targets = np.asarray(list(t_targets), dtype=float)
    if np.any(np.diff(t_targets) <= 0):
        raise ValueError("t_targets must be strictly increasing")
    nt = t_targets.size
    out = {name: np.full((n_paths, nt), np.nan) for name in stats}
    tasks = []
    start = 0
    chunk_idx = 0
    while start < n_paths:
        p = min(chunk_size, n_paths - start)
        tasks.append((start, p, (stream, chunk_idx, p, x0, alpha, theta,
                                 t_targets, step, stats, lump_tau,
                                 euler_substeps, max_iter, init_pd_sticks)))
        start += p
        chunk_idx += 1
    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fv_chunk_task, [t[2] for t in tasks]))
    else:
        results = [_fv_chunk_task(t[2]) for t in tasks]
    for (start, p, _args), res in zip(tasks, results):
        for name in stats:
            out[name][start:start + p] = res[name]
    return out


def _init_pd_rows(gen, p, alpha, theta, n_sticks, lump_tau):
    """Independent truncated stick-breaking start per path, residual
    refined down to ``lump_tau`` so each path has total mass exactly 1."""
    j = np.arange(1, n_sticks + 1)
    w = gen.beta(1.0 - alpha, theta + j * alpha, size=(p, n_sticks))
    # a stick drawn as exactly 1.0 zeroes everything after it; -inf in the
    # cumulative log is the correct limit, silence the warning only
    with np.errstate(divide="ignore"):
        cum = np.cumsum(np.log1p(-w), axis=1)
    sticks = np.empty((p, n_sticks + 1))
    sticks[:, 0] = w[:, 0]
    sticks[:, 1:-1] = w[:, 1:] * np.exp(cum[:, :-1])
    sticks[:, -1] = 0.0
    masses = sticks.ravel()
    pid = np.repeat(np.arange(p), n_sticks + 1)
    beta = np.full(masses.size, np.nan)
    keep = masses > 0.0
    pid, masses, beta = pid[keep], masses[keep], beta[keep]
    # break the truncation residual further so no path starts with a
    # coarse unresolved remainder
    res_pid, res_mass, res_beta = _stick_refine(
        np.arange(p), np.exp(cum[:, -1]),
        np.full(p, theta + n_sticks * alpha), alpha, lump_tau, gen)
    return (np.concatenate([pid, res_pid]),
            np.concatenate([masses, res_mass]),
            np.concatenate([beta, res_beta]))


def _fv_chunk(gen, p, x0, alpha, theta, t_targets, step, stats, lump_tau,
              euler_substeps, max_iter, init_pd_sticks):
    nt = t_targets.size
    negtheta = theta < 0.0
    th_kernel = theta + alpha if negtheta else theta
    if init_pd_sticks is not None:
        pid, mass, rowbeta = _init_pd_rows(gen, p, alpha, theta,
                                           init_pd_sticks, lump_tau)
        label = np.zeros(pid.size, dtype=np.int16)
    else:
        labels0 = np.arange(1, x0.size + 1, dtype=np.int16)
        pid = np.repeat(np.arange(p), x0.size)
        mass = np.tile(x0, p)
        label = np.tile(labels0, p)
        rowbeta = np.full(pid.size, np.nan)
    if negtheta:
        # designate the largest atom of every path
        des = np.zeros(p)
        des_lab = np.zeros(p, dtype=np.int16)
        pid, mass, label, rowbeta, des, des_lab = _redesignate(
            pid, mass, label, rowbeta, des, des_lab, p)
    else:
        des = None
        des_lab = None
    clock = np.zeros(p)
    ti = np.zeros(p, dtype=np.int64)
    dead = np.zeros(p, dtype=bool)
    out = {name: np.full((p, nt), np.nan) for name in stats}

    if nt and t_targets[0] == 0.0:
        res = _refined_stats(pid, mass, label, rowbeta, p, stats, alpha,
                             gen, extra_mass=des, extra_label=des_lab)
        for name in stats:
            out[name][:, 0] = res[name]
        ti[:] = 1

    for _ in range(max_iter):
        active = (~dead) & (ti < nt)
        if not active.any():
            break
        totals = np.bincount(pid, weights=mass, minlength=p)
        if negtheta:
            totals = totals + des
        zero = active & (totals <= 0.0)
        dead |= zero
        active &= ~zero
        if not active.any():
            break
        gap = t_targets[np.minimum(ti, nt - 1)] - clock
        partial = active & (gap * totals <= step)
        dur = np.where(partial, gap * totals, step)

        act = np.flatnonzero(active)
        amap = np.full(p, -1, dtype=np.int64)
        amap[act] = np.arange(act.size)
        rowsel = active[pid]
        sub_pid, sub_mass, sub_lab, sub_beta = kernel_step_batch(
            amap[pid[rowsel]], mass[rowsel], label[rowsel], dur[act],
            act.size, alpha, th_kernel, gen, lump_tau)
        if negtheta:
            sub_des = des[act].copy()
            sub_dlab = des_lab[act].copy()
            _euler_negdim(sub_des, alpha, dur[act], gen, euler_substeps)
            sub_dlab[sub_des <= 0.0] = 0
            (sub_pid, sub_mass, sub_lab, sub_beta, sub_des,
             sub_dlab) = _redesignate(sub_pid, sub_mass, sub_lab, sub_beta,
                                      sub_des, sub_dlab, act.size)

        clock[act] += np.where(partial[act], gap[act], step / totals[act])

        # record paths that just landed on their target
        landed = partial[act]
        if landed.any():
            lrows = landed[sub_pid]
            res = _refined_stats(sub_pid[lrows], sub_mass[lrows],
                                 sub_lab[lrows], sub_beta[lrows],
                                 act.size, stats, alpha, gen,
                                 extra_mass=np.where(landed, sub_des, 0.0)
                                 if negtheta else None,
                                 extra_label=sub_dlab if negtheta else None)
            rows = act[landed]
            sub_rows = np.flatnonzero(landed)
            sub_tot = np.bincount(sub_pid, weights=sub_mass,
                                  minlength=act.size)
            if negtheta:
                sub_tot = sub_tot + sub_des
            ok = sub_tot[sub_rows] > 0.0
            for name in stats:
                out[name][rows[ok], ti[rows[ok]]] = res[name][sub_rows[ok]]
            dead[rows[~ok]] = True
            ti[rows[ok]] += 1

        # write back: only still-active paths keep their rows
        mass = sub_mass
        label = sub_lab
        rowbeta = sub_beta
        pid_global = act[sub_pid]
        if negtheta:
            des_new = des.copy()
            des_new[act] = sub_des
            des = des_new
            dlab_new = des_lab.copy()
            dlab_new[act] = sub_dlab
            des_lab = dlab_new
        alive = (~dead) & (ti < nt)
        keep = alive[pid_global]
        pid = pid_global[keep]
        mass = mass[keep]
        label = label[keep]
        rowbeta = rowbeta[keep]
    else:
        raise RuntimeError("fv_path_stats failed to converge within max_iter")
    return out


def _euler_negdim(d, alpha, dur, gen, nsub):
    """In-place Euler advance of squared Bessel masses of dimension
    -2 alpha, absorbed at zero."""
    h = dur / nsub
    for _ in range(nsub):
        alive = d > 0.0
        if not alive.any():
            return
        idx = np.flatnonzero(alive)
        noise = gen.standard_normal(idx.size)
        d[idx] = d[idx] - 2.0 * alpha * h[idx] \
            + 2.0 * np.sqrt(d[idx] * h[idx]) * noise
        np.clip(d, 0.0, None, out=d)


def _redesignate(pid, mass, label, rowbeta, des, des_lab, n_paths):
    """Promote the largest remaining atom of any path whose designated
    mass was just absorbed."""
    need = des <= 0.0
    if not need.any():
        return pid, mass, label, rowbeta, des, des_lab
    mx = np.zeros(n_paths)
    np.maximum.at(mx, pid, mass)
    candidate = need[pid] & (mass == mx[pid]) & (mass > 0.0)
    if not candidate.any():
        return pid, mass, label, rowbeta, des, des_lab
    cand_idx = np.flatnonzero(candidate)
    # first matching row per path (ties are broken by row order)
    upaths, first = np.unique(pid[cand_idx], return_index=True)
    chosen = cand_idx[first]
    des = des.copy()
    des_lab = des_lab.copy()
    des[pid[chosen]] = mass[chosen]
    des_lab[pid[chosen]] = label[chosen]
    keep = np.ones(pid.size, dtype=bool)
    keep[chosen] = False
    return (pid[keep], mass[keep], label[keep], rowbeta[keep], des, des_lab)
