"""Command line front end.

Every command reads a YAML run file and writes its artifacts under
out/<command>/<hash>/ where the hash digests the effective configuration, so
reruns of the same run land in the same directory and different runs never
collide.  Result files are written atomically and deterministically; the
manifest (which records wall time) is the only file that varies between
identical reruns.

Exit codes: 0 success, 1 infeasible target or runtime failure, 2 bad usage
or configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from io import StringIO
from pathlib import Path

import numpy as np
import scipy

from . import __version__, errors, ldp, mc, sim, varsolve
from .config import FixedPointConfig, build_field, load_config
from .mc import BallTarget


def _effective(cfg, command, seed):
    return {"command": command, "seed": seed, "config": cfg.raw}


def _run_dir(out, command, effective):
    digest = hashlib.sha256(
        json.dumps(effective, sort_keys=True).encode()).hexdigest()[:12]
    return Path(out) / command / digest


def _atomic_write(path, text):
    tmp = path.parent / (path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class _Outputs:
    """Collects artifacts for one run directory and writes the manifest last."""

    def __init__(self, run_dir, effective):
        self.run_dir = run_dir
        self.effective = effective
        self.names = []
        self.t0 = time.monotonic()
        run_dir.mkdir(parents=True, exist_ok=True)

    def write_text(self, name, text):
        _atomic_write(self.run_dir / name, text)
        self.names.append(name)

    def write_json(self, name, obj):
        self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name, writer_fn, *args):
        buf = StringIO()
        writer_fn(*args, buf)
        self.write_text(name, buf.getvalue())

    def finish(self):
        manifest = {
            "command": self.effective["command"],
            "config": self.effective["config"],
            "seed": self.effective["seed"],
            "outputs": sorted(self.names),
            "versions": {
                "selfjump": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": sys.version.split()[0],
            },
            "wall_time_s": time.monotonic() - self.t0,
            "created": datetime.now(timezone.utc).isoformat(),
        }
        _atomic_write(self.run_dir / "manifest.json",
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    def note(self, fmt):
        stream = sys.stderr if fmt == "csv" else sys.stdout
        print(f"wrote {self.run_dir}", file=stream)


def _emit(out, fmt, primary_csv, pretty_lines):
    if fmt == "csv":
        sys.stdout.write((out.run_dir / primary_csv).read_text())
    else:
        for line in pretty_lines:
            print(line)
    out.note(fmt)


def _need(value, what):
    if value is None:
        raise errors.ConfigError(f"this command needs the {what!r} section", "config")
    return value


def _fmt(x):
    return repr(float(x))


# -- commands ----------------------------------------------------------------


def _cmd_validate(args, cfg, seed):
    field = build_field(cfg.field)
    print("config OK")
    print(f"family: {field.family}  states: {field.d}  "
          f"edges: {len(field.support_edges())}")
    print(f"rate upper bound: {_fmt(field.rate_upper)}  "
          f"lower coefficient: {_fmt(field.rate_lower_coeff)}")
    present = [s for s in ("simulate", "target", "solver", "mc", "fixed_point")
               if getattr(cfg, s) is not None]
    if present:
        print("sections: " + ", ".join(present))
    return 0


def _cmd_simulate(args, cfg, seed):
    field = build_field(cfg.field)
    sc = _need(cfg.simulate, "simulate")
    batch = sim.batch_simulate(field, sc.x0, sc.horizon, sc.n_paths, seed,
                               sampler=sc.sampler, threads=args.threads)
    first = sim._SAMPLERS[sc.sampler](field, sc.x0, sc.horizon, seed, path_index=0)
    out = _Outputs(_run_dir(args.out, "simulate", _effective(cfg, "simulate", seed)),
                   _effective(cfg, "simulate", seed))
    out.write_csv("batch.csv", sim.write_batch_csv, batch)
    out.write_csv("trajectory.csv", sim.write_trajectory_csv, first)
    out.write_json("results.json", {
        "n_paths": sc.n_paths,
        "horizon": sc.horizon,
        "sampler": sc.sampler,
        "x0": sc.x0,
        "mean_occupation": batch.mean_occupation.tolist(),
        "var_occupation": batch.var_occupation.tolist(),
        "mean_flux": batch.mean_flux.tolist(),
    })
    out.finish()
    mean = ", ".join(_fmt(v) for v in batch.mean_occupation)
    _emit(out, args.format, "batch.csv", [
        f"{sc.n_paths} paths to t={sc.horizon} ({sc.sampler})",
        f"mean occupation: [{mean}]",
        f"first path jumps: {first.n_jumps}",
    ])
    return 0


def _infeasibility_reason(field, flux):
    if not ldp.flux_balanced(flux, tol=1e-10):
        return "flux balance violated"
    off = ~field.support & ~np.eye(field.d, dtype=bool)
    if np.any(np.asarray(flux)[off] > 1e-12):
        return "flux charges edges off the support"
    return None


def _cmd_dv_rate(args, cfg, seed):
    field = build_field(cfg.field)
    if field.family != "constant":
        raise errors.ConfigError(
            "dv-rate applies to constant fields; use 'rate' for interacting ones",
            "field.family")
    target = _need(cfg.target, "target")
    gamma = np.array(_need(target.gamma, "target.gamma"))
    flux = ldp.as_flux(np.array(_need(target.flux, "target.flux")))
    value = ldp.dv_rate(field.vertices[0], gamma, flux)
    if not np.isfinite(value):
        reason = _infeasibility_reason(field, flux) or "no finite cost"
        print(f"infeasible: {reason}", file=sys.stderr)
        return 1
    out = _Outputs(_run_dir(args.out, "dv-rate", _effective(cfg, "dv-rate", seed)),
                   _effective(cfg, "dv-rate", seed))
    out.write_json("results.json", {"value": value, "gamma": gamma.tolist(),
                                    "flux": flux.tolist()})
    out.write_text("value.csv", "value\n" + _fmt(value) + "\n")
    out.finish()
    _emit(out, args.format, "value.csv", [_fmt(value)])
    return 0


def _solve_command(name, solve, args, cfg, seed):
    result = solve()
    if result.status == "infeasible":
        print(f"infeasible: {result.detail}", file=sys.stderr)
        return 1
    out = _Outputs(_run_dir(args.out, name, _effective(cfg, name, seed)),
                   _effective(cfg, name, seed))
    out.write_json("results.json", varsolve.rate_result_to_dict(result))
    out.write_csv("path.csv", varsolve.write_control_path_csv, result.path)
    out.write_text("value.csv", "value,status\n"
                   + _fmt(result.value) + "," + result.status + "\n")
    out.finish()
    rd = result.residuals
    _emit(out, args.format, "value.csv", [
        f"value: {_fmt(result.value)}",
        f"status: {result.status}",
        f"residuals: marginal {rd['marginal']:.2e}  stationarity "
        f"{rd['stationarity']:.2e}  flux {rd['flux']:.2e}",
    ])
    return 0


def _cmd_rate(args, cfg, seed):
    field = build_field(cfg.field)
    target = _need(cfg.target, "target")
    gamma = np.array(_need(target.gamma, "target.gamma"))
    flux = np.array(_need(target.flux, "target.flux"))
    opts = cfg.solve_options(seed)
    return _solve_command("rate", lambda: varsolve.solve_rate(gamma, flux, field, opts),
                          args, cfg, seed)


def _cmd_occupation_rate(args, cfg, seed):
    field = build_field(cfg.field)
    target = _need(cfg.target, "target")
    gamma = np.array(_need(target.gamma, "target.gamma"))
    opts = cfg.solve_options(seed)
    return _solve_command("occupation-rate",
                          lambda: varsolve.occupation_rate(gamma, field, opts),
                          args, cfg, seed)


def _cmd_current_rate(args, cfg, seed):
    field = build_field(cfg.field)
    target = _need(cfg.target, "target")
    current = np.array(_need(target.current, "target.current"))
    opts = cfg.solve_options(seed)
    return _solve_command("current-rate",
                          lambda: varsolve.current_rate(current, field, opts),
                          args, cfg, seed)


def _cmd_fixed_point(args, cfg, seed):
    field = build_field(cfg.field)
    fpc = cfg.fixed_point or FixedPointConfig()
    out = _Outputs(_run_dir(args.out, "fixed-point",
                            _effective(cfg, "fixed-point", seed)),
                   _effective(cfg, "fixed-point", seed))
    if fpc.n_starts > 1:
        results = ldp.fixed_point_multistart(field, n_starts=fpc.n_starts, seed=seed,
                                             tol=fpc.tol, max_iter=fpc.max_iter)
        payload = [{"pi": r.pi.tolist(), "converged": r.converged,
                    "iterations": r.iterations, "gap": r.gap,
                    "residual": r.residual} for r in results]
        out.write_json("results.json", {"fixed_points": payload})
        out.write_text("value.csv", "index," + ",".join(
            f"pi_{k+1}" for k in range(field.d)) + ",converged\n" + "".join(
            f"{i}," + ",".join(_fmt(v) for v in r.pi) + f",{int(r.converged)}\n"
            for i, r in enumerate(results)))
        lines = [f"{len(results)} distinct fixed point(s)"]
        for i, r in enumerate(results):
            pi = ", ".join(_fmt(v) for v in r.pi)
            lines.append(f"  [{i}] pi = [{pi}]  converged={r.converged} "
                         f"iterations={r.iterations}")
    else:
        r = ldp.fixed_point_pi_star(field, tol=fpc.tol, max_iter=fpc.max_iter)
        out.write_json("results.json", {"pi": r.pi.tolist(), "converged": r.converged,
                                        "iterations": r.iterations, "gap": r.gap,
                                        "residual": r.residual})
        out.write_text("value.csv", ",".join(f"pi_{k+1}" for k in range(field.d))
                       + ",converged\n" + ",".join(_fmt(v) for v in r.pi)
                       + f",{int(r.converged)}\n")
        pi = ", ".join(_fmt(v) for v in r.pi)
        lines = [f"pi = [{pi}]", f"converged: {r.converged}  "
                 f"iterations: {r.iterations}  residual: {r.residual:.2e}"]
        if not r.converged:
            lines.append("warning: not converged to tolerance; best iterate shown")
    out.finish()
    _emit(out, args.format, "value.csv", lines)
    return 0


def _cmd_mc_ldp(args, cfg, seed):
    field = build_field(cfg.field)
    mcc = _need(cfg.mc, "mc")
    target = BallTarget(np.array(mcc.center), mcc.radius)
    points = mc.decay_curve(field, mcc.x0, target, mcc.times, mcc.n_paths,
                            seed=seed, sampler=mcc.sampler, threads=args.threads)
    if mcc.rate is not None:
        rate, rate_source = mcc.rate, "config"
    else:
        res = varsolve.occupation_rate(np.array(mcc.center), field,
                                       cfg.solve_options(seed))
        rate, rate_source = res.value, "solved at ball center"
    comparison = mc.compare_to_rate(points, rate)
    out = _Outputs(_run_dir(args.out, "mc-ldp", _effective(cfg, "mc-ldp", seed)),
                   _effective(cfg, "mc-ldp", seed))
    out.write_csv("decay.csv", mc.write_decay_csv, points)
    out.write_json("results.json", {
        "points": [{"t": p.t, "p_hat": p.p_hat, "ci_low": p.ci_low,
                    "ci_high": p.ci_high, "n": p.n, "censored": p.censored,
                    "neg_log_rate": p.neg_log_rate} for p in points],
        "rate": rate,
        "rate_source": rate_source,
        "gaps": comparison.gaps,
        "trend": comparison.trend,
        "n_censored": comparison.n_censored,
        "inconclusive": comparison.inconclusive,
    })
    out.finish()
    lines = [f"{'t':>10} {'p_hat':>12} {'ci_low':>12} {'ci_high':>12} "
             f"{'censored':>9} {'-log(p)/t':>12}"]
    for p in points:
        lines.append(f"{p.t:>10.4g} {p.p_hat:>12.6g} {p.ci_low:>12.6g} "
                     f"{p.ci_high:>12.6g} {str(p.censored):>9} "
                     f"{p.neg_log_rate:>12.6g}")
    lines.append(f"reference rate: {_fmt(rate)} ({rate_source})")
    lines.append(f"trend: {comparison.trend}  censored: {comparison.n_censored}  "
                 f"inconclusive: {comparison.inconclusive}")
    _emit(out, args.format, "decay.csv", lines)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "dv-rate": _cmd_dv_rate,
    "rate": _cmd_rate,
    "occupation-rate": _cmd_occupation_rate,
    "current-rate": _cmd_current_rate,
    "fixed-point": _cmd_fixed_point,
    "mc-ldp": _cmd_mc_ldp,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="selfjump",
        description="Simulate self-interacting jump processes and evaluate "
                    "their large-deviation rate functions.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "parse and check a run file",
        "simulate": "sample trajectories and occupation statistics",
        "dv-rate": "closed-form level-2.5 rate for a constant field",
        "rate": "minimize the control cost at fixed occupation and flux",
        "occupation-rate": "minimize the control cost at fixed occupation",
        "current-rate": "minimize the control cost at fixed net current",
        "fixed-point": "self-consistent stationary distribution(s)",
        "mc-ldp": "Monte Carlo decay curve against the variational rate",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML run file")
        p.add_argument("--out", default="out", help="output root (default: out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for sampling")
        p.add_argument("--format", choices=("csv", "pretty"), default="pretty",
                       help="stdout rendering")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        return _COMMANDS[args.command](args, cfg, seed)
    except errors.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except errors.SelfJumpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
