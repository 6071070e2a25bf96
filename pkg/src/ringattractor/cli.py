"""Command-line entry point ``ringattractor``.

Exit codes: 0 success, 1 a check failed, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiments as ex
from .deterministic import compute_moments, equilibria_n2, integrate, stationary_bump
from .ergodics import (default_edges, detect_modes, empirical_measure, ergodic_agreement,
                       time_average)
from .exceptions import ConfigError, NumericalError, PreconditionError
from .stochastic import (apply_generator, certify_beta, coordinate, generator_mc_check,
                         indicator, lyapunov_grid_check, moment_bound_check, product, square,
                         simulate_sde, squared_norm)

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def _vec(text):
    return np.array([float(v) for v in text.split(",")]) if text else None


def _load_config(args, *, required=True):
    if args.config is None:
        if required:
            raise ConfigError("--config is required")
        return None
    return ex.validate_config(args.config)


def _out_path(args, default_name):
    if getattr(args, "out", None):
        p = Path(args.out)
    else:
        p = Path(args.out_dir) / default_name
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(doc):
    print(json.dumps(doc, indent=2, default=float))


def _state0(args, cfg):
    x0 = _vec(args.x0) if args.x0 else np.zeros(cfg.N)
    return x0, args.i0 if args.i0 is not None else cfg.i0


# ---------------------------------------------------------------- commands


def cmd_simulate_det(args):
    cfg = _load_config(args)
    r0 = _vec(args.x0) if args.x0 else np.zeros(cfg.N)
    kw = {} if args.method == "exact_event" else {"h": args.h}
    traj = integrate(r0, args.T, cfg, args.method, **kw)
    out = _out_path(args, "trajectory.csv")
    traj.to_csv(out)
    ev = out.with_name(out.stem + "_events.csv")
    traj.events_to_csv(ev)
    _emit({"final": traj.final.tolist(), "events": len(traj.events),
           "files": [str(out), str(ev)]})
    return EXIT_OK


def cmd_simulate_sde(args):
    cfg = _load_config(args)
    path = simulate_sde(_state0(args, cfg), args.T, args.dt, cfg, args.seed,
                        record_every=args.record_every)
    out = _out_path(args, "path.csv")
    path.to_csv(out)
    _emit({"samples": int(path.times.size), "jumps": int(path.jump_times.size),
           "file": str(out)})
    return EXIT_OK


def cmd_equilibria(args):
    cfg = _load_config(args, required=False)
    delta, V1 = args.delta, args.V1
    if cfg is not None:
        if cfg.N != 2:
            raise ConfigError("equilibria are enumerated for N = 2 only")
        delta = cfg.delta if delta is None else delta
        V1 = float(cfg.V[0]) if V1 is None else V1
    if delta is None or V1 is None:
        raise ConfigError("give --delta and --V1 or a two-unit --config")
    eqs = equilibria_n2(delta, V1)
    _emit({"delta": delta, "V1": V1, "equilibria": [
        {"point": e.point.tolist(), "kind": e.kind, "region": sorted(e.region),
         "eigenvalues": np.real(e.eigenvalues).tolist()} for e in eqs]})
    return EXIT_OK


def cmd_bump(args):
    cfg = _load_config(args, required=False)
    if cfg is not None:
        N, delta, cue = cfg.N, cfg.delta, int(np.argmax(cfg.V))
        V0 = float(cfg.V[cue])
    else:
        if args.N is None or args.delta is None:
            raise ConfigError("give --N and --delta or a --config")
        N, delta, V0, cue = args.N, args.delta, args.V0, 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        b = stationary_bump(N, delta, V0, cue_index=cue)
    out = _out_path(args, "bump.csv")
    theta = np.arange(N) * (2 * np.pi / N)
    np.savetxt(out, np.column_stack([np.arange(N), theta, b.rbar]), delimiter=",",
               header="j,theta,rbar", comments="", fmt="%.12g")
    _emit({"m_x": b.m_x, "active": sorted(b.active), "thresholds": b.thresholds,
           "warnings": [str(w.message) for w in caught], "file": str(out)})
    return EXIT_OK


def cmd_moments(args):
    if args.input:
        data = np.genfromtxt(args.input, delimiter=",", names=True, dtype=float)
        cols = [n for n in data.dtype.names if n.startswith("r") and n[1:].isdigit()]
        R = np.column_stack([data[n] for n in cols])
        t = data["t"]
    elif args.x0:
        R, t = _vec(args.x0)[None, :], np.array([0.0])
    else:
        raise ConfigError("give --input CSV or --x0")
    m = compute_moments(R)
    out = _out_path(args, "moments.csv")
    np.savetxt(out, np.column_stack([t, m.m_x, m.m_y, m.R_amp, m.phi]), delimiter=",",
               header="t,m_x,m_y,R,phi", comments="", fmt="%.12g")
    _emit({"rows": int(R.shape[0]), "last": [float(v[-1]) for v in m], "file": str(out)})
    return EXIT_OK


_FUNCTIONS = {
    "x1": lambda n: coordinate(0, n),
    "x1sq": lambda n: square(0, n),
    "x1x2": lambda n: product(0, 1, n),
    "ind1": lambda n: indicator(1, n),
    "norm2": lambda n: squared_norm(n),
}


def cmd_generator_check(args):
    cfg = _load_config(args)
    f = _FUNCTIONS[args.function](cfg.N)
    z = _state0(args, cfg)
    res = generator_mc_check(f, z, cfg, h=args.h, samples=args.samples, seed=args.seed)
    ok = abs(res.z_score) <= 4
    _emit({"function": args.function, "analytic": res.analytic,
           "mc_estimate": res.mc_estimate, "stderr": res.stderr, "z_score": res.z_score,
           "exact_generator": apply_generator(f, z, cfg), "passed": ok})
    return EXIT_OK if ok else EXIT_CHECK


def cmd_lyapunov_check(args):
    cfg = _load_config(args)
    cert = certify_beta(cfg, args.alpha)
    grid = lyapunov_grid_check(cert, cfg, extent=args.extent, spacing=args.spacing)
    _emit({"alpha": cert.alpha, "beta": cert.beta, "nu": cert.nu,
           "beta_grid": cert.beta_grid, "beta_analytic": cert.beta_analytic,
           "tail_margin": cert.tail, "grid_radius": cert.radius, **grid})
    return EXIT_OK if grid["ok"] else EXIT_CHECK


def cmd_moment_check(args):
    cfg = _load_config(args)
    cert = certify_beta(cfg, args.alpha)
    rep = moment_bound_check(_state0(args, cfg), cert, cfg, T=args.T, dt=args.dt,
                             replicas=args.replicas, seed=args.seed, threads=args.threads)
    out = _out_path(args, "moment_check.csv")
    np.savetxt(out, np.column_stack([rep.times, rep.estimate, rep.stderr, rep.envelope]),
               delimiter=",", header="t,estimate,stderr,envelope", comments="", fmt="%.12g")
    _emit({"alpha": cert.alpha, "beta": cert.beta, "passed": rep.ok,
           "worst_margin": rep.worst_margin, "sup_estimate": rep.sup_estimate,
           "counterexample": rep.counterexample, "file": str(out)})
    return EXIT_OK if rep.ok else EXIT_CHECK


def cmd_ergodic(args):
    cfg = _load_config(args)
    z0 = _state0(args, cfg)
    path = simulate_sde(z0, args.T, args.dt, cfg, args.seed, record_every=args.record_every)
    k = args.coordinate
    edges = default_edges(cfg, k, path, bins=args.bins)
    measure = empirical_measure(path, bins=[edges], coords=[k], n_states=cfg.N)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    measure.to_csv(out_dir / f"histogram_r{k}.csv", k)
    modes = detect_modes(measure, k).to_json(out_dir / f"modes_r{k}.json")
    f = coordinate(k, cfg.N)
    mean, se = time_average(f, path, burn_in=0.1 * args.T)
    doc = {"time_average": mean, "stderr": se, "modes": modes,
           "overflow": measure.overflow}
    status = EXIT_OK
    if args.x0_b:
        i_b = args.i0_b if args.i0_b is not None else z0[1]
        agr = ergodic_agreement(cfg, f, z0, (_vec(args.x0_b), i_b), args.T,
                                seeds=(args.seed, args.seed + 1), dt=args.dt,
                                record_every=args.record_every)
        doc["agreement"] = agr.__dict__
        status = EXIT_OK if agr.agree else EXIT_CHECK
    _emit(doc)
    return status


def cmd_run_preset(args):
    spec = ex.preset_spec(args.name, T=args.T, dt=args.dt, seed=args.seed)
    if args.config:
        spec.config = ex.validate_config(args.config)
    out = Path(args.out_dir) / spec.name
    rep = ex.run_experiment(spec, out)
    _emit(rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_CHECK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="ringattractor", description=__doc__.splitlines()[0])
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--threads", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.set_defaults(func=func)
        return s

    def state_args(s):
        s.add_argument("--x0", help="comma-separated initial activity")
        s.add_argument("--i0", type=int, help="initial cue state (1-based)")

    s = add("simulate-det", cmd_simulate_det, "integrate the deterministic network")
    s.add_argument("--T", type=float, default=50.0)
    s.add_argument("--method", choices=["exact_event", "rk4", "euler"], default="exact_event")
    s.add_argument("--h", type=float, default=1e-3)
    s.add_argument("--x0")
    s.add_argument("--out")

    s = add("simulate-sde", cmd_simulate_sde, "simulate the switching diffusion")
    s.add_argument("--T", type=float, default=100.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--record-every", type=int, default=1)
    state_args(s)
    s.add_argument("--out")

    s = add("equilibria", cmd_equilibria, "equilibria of the two-unit network")
    s.add_argument("--delta", type=float)
    s.add_argument("--V1", type=float)

    s = add("bump", cmd_bump, "stationary bump profile")
    s.add_argument("--N", type=int)
    s.add_argument("--delta", type=float)
    s.add_argument("--V0", type=float, default=1.0)
    s.add_argument("--out")

    s = add("moments", cmd_moments, "bump moments of states or a trajectory CSV")
    s.add_argument("--input")
    s.add_argument("--x0")
    s.add_argument("--out")

    s = add("generator-check", cmd_generator_check, "Monte Carlo check of the generator")
    s.add_argument("--function", choices=sorted(_FUNCTIONS), default="x1")
    s.add_argument("--h", type=float, default=1e-3)
    s.add_argument("--samples", type=int, default=100_000)
    state_args(s)

    s = add("lyapunov-check", cmd_lyapunov_check, "certify beta and check the drift grid")
    s.add_argument("--alpha", type=float, default=1.5)
    s.add_argument("--extent", type=float, default=10.0)
    s.add_argument("--spacing", type=float, default=0.1)

    s = add("moment-check", cmd_moment_check, "Monte Carlo second-moment envelope")
    s.add_argument("--alpha", type=float, default=1.5)
    s.add_argument("--T", type=float, default=50.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--replicas", type=int, default=10_000)
    state_args(s)
    s.add_argument("--out")

    s = add("ergodic", cmd_ergodic, "occupation measure, modes and time average")
    s.add_argument("--T", type=float, default=2e4)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--record-every", type=int, default=10)
    s.add_argument("--bins", type=int, default=100)
    s.add_argument("--coordinate", type=int, default=0)
    state_args(s)
    s.add_argument("--x0-b", help="second start for the agreement check")
    s.add_argument("--i0-b", type=int)

    s = add("run-preset", cmd_run_preset, "run a preset experiment")
    s.add_argument("name", choices=ex.PRESETS)
    s.add_argument("--T", type=float)
    s.add_argument("--dt", type=float)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.seed is None and args.command != "run-preset":
        args.seed = 0
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        for e in exc.errors:
            print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (PreconditionError, ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
