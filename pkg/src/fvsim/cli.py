"""Command-line interface: samplers, grid-path simulators, verification
suites and symbolic generator evaluation.

Configuration precedence is flags > environment (prefix FLV_) > defaults;
the effective configuration and where each value came from is printed in
the header of every verify report.  Exit status: 0 on success, 1 when a
verification fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import acceptance
from .besq import besq_transition, besq_negative_path
from .core_types import AtomMeasure, GridPath, IntervalPartition
from .depoisson import build_time_change, depoissonize
from .ekp_algebra import (SymPoly, apply_B_direct, crp_partition,
                          crp_updown_step, eval_sympoly, parse_sympoly)
from .fdiff import jacobi_path, wf_path
from .kernels import (Params, ip_kernel_step, kernel_step, sample_L,
                      sample_Q, sssp_grid_path, sssp_negative_theta)
from .pd_sampling import (DEFAULT_N_STICKS, sample_pd, sample_pdip_masses,
                          sample_pdrm)
from .rng import RngStream

_ENV_PREFIX = "FLV_"

_GLOBAL_FLAGS = {
    "alpha": (float, 0.5),
    "theta": (float, 0.5),
    "seed": (int, 0),
    "samples": (int, 1000),
    "step": (float, 1e-3),
    "horizon": (float, 1.0),
    "time": (float, 0.1),
    "out": (str, None),
    "format": (str, "json"),
    "parallel": (int, 1),
}


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    for name, (typ, _default) in _GLOBAL_FLAGS.items():
        parser.add_argument(f"--{name}", type=typ, default=None)


def _resolve_config(args: argparse.Namespace):
    """flags > FLV_ environment > defaults; returns (config, sources)."""
    config = {}
    sources = {}
    for name, (typ, default) in _GLOBAL_FLAGS.items():
        flag_val = getattr(args, name, None)
        env_key = _ENV_PREFIX + name.upper()
        if flag_val is not None:
            config[name], sources[name] = flag_val, "flag"
        elif env_key in os.environ:
            config[name], sources[name] = typ(os.environ[env_key]), "env"
        else:
            config[name], sources[name] = default, "default"
    return config, sources


def _parse_floats(text: str) -> np.ndarray:
    return np.asarray([float(v) for v in text.split(",") if v.strip()])


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _measure_from_args(args, cfg) -> AtomMeasure:
    masses = _parse_floats(args.x) if args.x else np.array([1.0])
    if args.locs:
        locs = _parse_floats(args.locs)
    else:
        locs = (np.arange(masses.size) + 0.5) / masses.size
    return AtomMeasure(locations=locs, masses=masses)


def _format_obj(obj, fmt: str) -> str:
    if fmt == "csv":
        return obj.to_csv()
    if isinstance(obj, GridPath):
        return obj.to_json_lines()
    return obj.to_json()


def _cmd_sample(args) -> int:
    cfg, _src = _resolve_config(args)
    gen = RngStream(cfg["seed"]).generator()
    alpha, theta = cfg["alpha"], cfg["theta"]
    what = args.what
    if what == "pd":
        v = sample_pd(alpha, theta, args.n_sticks, gen)
        text = v.to_json() if cfg["format"] == "json" else "\n".join(
            repr(e) for e in v.entries.tolist())
    elif what == "pdrm":
        text = _format_obj(sample_pdrm(alpha, theta, args.n_sticks, gen),
                           cfg["format"])
    elif what == "pdip":
        text = _format_obj(sample_pdip_masses(alpha, theta, args.n_sticks,
                                              gen), cfg["format"])
    elif what == "besq":
        vals = besq_transition(args.b, args.dim, cfg["time"], gen,
                               size=cfg["samples"])
        vals = np.atleast_1d(vals)
        text = (json.dumps({"values": vals.tolist()})
                if cfg["format"] == "json"
                else "\n".join(repr(v) for v in vals.tolist()))
    elif what == "L":
        r = 1.0 / (2.0 * cfg["time"])
        vals = sample_L(np.full(cfg["samples"], args.b),
                        np.full(cfg["samples"], r), alpha, gen)
        text = (json.dumps({"values": vals.tolist()})
                if cfg["format"] == "json"
                else "\n".join(repr(v) for v in vals.tolist()))
    elif what == "Q":
        r = 1.0 / (2.0 * cfg["time"])
        q = sample_Q(args.b, 0.5, r, alpha, gen)
        text = _format_obj(q, cfg["format"])
    elif what == "kernel":
        mu = _measure_from_args(args, cfg)
        nu = kernel_step(mu, cfg["time"], Params(alpha, theta), gen)
        text = _format_obj(nu, cfg["format"])
    else:
        raise SystemExit(2)
    _emit(text, cfg["out"])
    return 0


def _cmd_simulate(args) -> int:
    cfg, _src = _resolve_config(args)
    gen = RngStream(cfg["seed"]).generator()
    alpha, theta = cfg["alpha"], cfg["theta"]
    what = args.what
    if what == "sssp":
        mu = _measure_from_args(args, cfg)
        if theta < 0:
            path = sssp_negative_theta(mu, cfg["step"], cfg["horizon"],
                                       alpha, theta, gen)
        else:
            path = sssp_grid_path(mu, cfg["step"], cfg["horizon"],
                                  Params(alpha, theta), gen)
        text = _format_obj(path, cfg["format"])
    elif what == "fv":
        mu = _measure_from_args(args, cfg)
        if theta < 0:
            path = sssp_negative_theta(mu, cfg["step"], cfg["horizon"],
                                       alpha, theta, gen)
        else:
            path = sssp_grid_path(mu, cfg["step"], cfg["horizon"],
                                  Params(alpha, theta), gen)
        tc = build_time_change(path)
        t_grid = [t for t in np.arange(cfg["step"], cfg["time"] + 1e-12,
                                       cfg["step"]) if t < tc.horizon_t]
        norm = depoissonize(path, tc, t_grid)
        text = _format_obj(norm, cfg["format"])
    elif what == "pdipe":
        beta = IntervalPartition(_parse_floats(args.x) if args.x else [1.0])
        n_steps = int(round(cfg["horizon"] / cfg["step"]))
        times = cfg["step"] * np.arange(n_steps + 1)
        states = [beta]
        for _ in range(n_steps):
            beta = ip_kernel_step(beta, cfg["step"], Params(alpha, theta),
                                  gen)
            states.append(beta)
        text = _format_obj(GridPath(times, states), cfg["format"])
    elif what == "jacobi":
        r, r_prime = (args.r if args.r is not None else -alpha,
                      args.r2 if args.r2 is not None else theta + alpha)
        path = jacobi_path(args.b, r, r_prime, cfg["step"], cfg["horizon"],
                           gen)
        text = _format_obj(path, cfg["format"])
    elif what == "wf":
        w0 = _parse_floats(args.x) if args.x else np.array([0.5, 0.5])
        rates = _parse_floats(args.rates) if args.rates else np.zeros(w0.size)
        path = wf_path(w0, rates, cfg["step"], cfg["horizon"], gen)
        text = _format_obj(path, cfg["format"])
    elif what == "crp":
        sizes = crp_partition(args.n, alpha, theta, gen)
        trace = [sizes.tolist()]
        for _ in range(args.steps):
            sizes = crp_updown_step(sizes, alpha, theta, gen)
            trace.append(np.sort(sizes)[::-1].tolist())
        text = "\n".join(json.dumps({"step": i, "sizes": s})
                         for i, s in enumerate(trace))
    else:
        raise SystemExit(2)
    _emit(text, cfg["out"])
    return 0


_VERIFY_MAP = {
    "moments": acceptance.criterion_stationary_moments,
    "totalmass": acceptance.criterion_total_mass,
    "jacobi-marginal": acceptance.criterion_atom_jacobi,
    "generator": acceptance.criterion_generator_slope,
    "chapman": acceptance.criterion_chapman_kolmogorov,
    "laplace": acceptance.criterion_laplace_L,
    "relocation": acceptance.criterion_relocation_invariance,
    "coupling": acceptance.criterion_ip_coupling,
    "routes": acceptance.criterion_generator_routes,
    "negtheta": acceptance.criterion_negative_theta,
    "reversibility": acceptance.criterion_reversibility,
    "diversity": acceptance.criterion_diversity,
    "crp": acceptance.criterion_updown_crp,
}


def _cmd_verify(args) -> int:
    cfg, src = _resolve_config(args)
    header = {"config": {k: cfg[k] for k in
                         ("alpha", "theta", "seed", "samples", "step",
                          "time", "parallel")},
              "sources": {k: src[k] for k in
                          ("alpha", "theta", "seed", "samples", "step",
                           "time", "parallel")}}
    import inspect

    def call(fn):
        # flags override a criterion's built-in sample size / seed when
        # the criterion accepts them
        kwargs = {}
        sig = inspect.signature(fn).parameters
        if src["samples"] != "default" and "n" in sig:
            kwargs["n"] = cfg["samples"]
        if src["seed"] != "default" and "seed" in sig:
            kwargs["seed"] = cfg["seed"]
        return fn(**kwargs)

    if args.what == "all":
        fns = list(acceptance.ALL_CRITERIA)
        if cfg["parallel"] > 1:
            with ThreadPoolExecutor(max_workers=cfg["parallel"]) as pool:
                reports = list(pool.map(call, fns))
        else:
            reports = [call(f) for f in fns]
        doc = {"header": header, "criteria": reports,
               "pass": all(r["pass"] for r in reports)}
    else:
        fn = _VERIFY_MAP.get(args.what)
        if fn is None:
            raise SystemExit(2)
        rep = call(fn)
        doc = {"header": header, "criteria": [rep], "pass": rep["pass"]}
    _emit(json.dumps(doc, indent=2, default=float), cfg["out"])
    return 0 if doc["pass"] else 1


def _cmd_eval_b(args) -> int:
    cfg, _src = _resolve_config(args)
    q = parse_sympoly(args.poly)
    x = _parse_floats(args.x)
    val = 2.0 * apply_B_direct(q, cfg["alpha"], cfg["theta"], x)
    doc = {"poly": str(q), "x": x.tolist(), "alpha": cfg["alpha"],
           "theta": cfg["theta"], "value_2B": val,
           "value_at_x": eval_sympoly(q, x)}
    _emit(json.dumps(doc, default=float), cfg["out"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fvsim",
        description="Measure-valued diffusion sampling and verification")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", help="draw from the basic laws")
    p_sample.add_argument("what", choices=["pd", "pdrm", "pdip", "besq",
                                           "L", "Q", "kernel"])
    p_sample.add_argument("--n-sticks", type=int, default=DEFAULT_N_STICKS)
    p_sample.add_argument("--b", type=float, default=1.0)
    p_sample.add_argument("--dim", type=float, default=1.0)
    p_sample.add_argument("--x", type=str, default=None)
    p_sample.add_argument("--locs", type=str, default=None)
    _add_global_flags(p_sample)
    p_sample.set_defaults(func=_cmd_sample)

    p_sim = sub.add_parser("simulate", help="grid-path simulation")
    p_sim.add_argument("what", choices=["sssp", "fv", "pdipe", "jacobi",
                                        "wf", "crp"])
    p_sim.add_argument("--x", type=str, default=None)
    p_sim.add_argument("--locs", type=str, default=None)
    p_sim.add_argument("--b", type=float, default=0.5)
    p_sim.add_argument("--r", type=float, default=None)
    p_sim.add_argument("--r2", type=float, default=None)
    p_sim.add_argument("--rates", type=str, default=None)
    p_sim.add_argument("--n", type=int, default=200)
    p_sim.add_argument("--steps", type=int, default=100)
    _add_global_flags(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_verify = sub.add_parser("verify", help="statistical verification")
    p_verify.add_argument("what",
                          choices=sorted(_VERIFY_MAP.keys()) + ["all"])
    _add_global_flags(p_verify)
    p_verify.set_defaults(func=_cmd_verify)

    p_eval = sub.add_parser("eval-b", help="symbolic generator evaluation")
    p_eval.add_argument("--poly", type=str, required=True)
    p_eval.add_argument("--x", type=str, required=True)
    _add_global_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval_b)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
