"""Command line interface: solve, extract, simulate, verify.

Every subcommand reads one INI configuration (see config module), applies
any --set overrides, and writes its artifacts under the configured output
directory with a JSON metadata sidecar carrying the full configuration,
the seed and the package version, so each file can be regenerated exactly.

Exit codes: 0 success, 1 usage or configuration error (also a failed
verification suite), 2 degenerate-mode signal, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv as _csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import check_boundary, extract_boundary
from .config import RunConfig, load_config
from .errors import ConfigError, DegenerateModeError, NonConvergenceError
from .fields import write_field_csv, write_sidecar
from .policy import PolicySpec, evaluate_policy
from .stopping import solve_stopping_value
from .hjb import solve_control_value
from .verify import oracle_1d_resolvent, rbm_resolvent_mc, run_suite

_POLICY_CHOICES = ("free-boundary", "ray", "axis", "scaled")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="quadctrl",
                description="grid solvers and Monte Carlo for a singular "
                            "control problem on the quadrant")
    p.add_argument("--version", action="version", version=f"quadctrl {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp):
        sp.add_argument("--config", metavar="FILE", default=None,
                        help="INI run description (defaults used when omitted)")
        sp.add_argument("--set", dest="overrides", action="append",
                        metavar="SECTION.KEY=VALUE", default=[],
                        help="override one config key (repeatable)")

    sp = sub.add_parser("stopping", help="solve the stopping value on the grid")
    common(sp)
    sp = sub.add_parser("hjb", help="solve the control value on the grid")
    common(sp)
    sp = sub.add_parser("boundary", help="extract and check the free boundary")
    common(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo cost of a reflection policy")
    common(sp)
    sp.add_argument("--policy", choices=_POLICY_CHOICES, default="free-boundary",
                    help="barrier family (default free-boundary)")
    sp.add_argument("--kappa", type=float, default=2.0,
                    help="scale factor for --policy scaled (default 2.0)")
    sp.add_argument("--x", dest="probes", action="append", metavar="X1,X2",
                    default=[], help="start point, repeatable "
                    "(default one interior probe)")
    sp.add_argument("--workers", type=int, default=1,
                    help="process count for Monte Carlo blocks (default 1)")

    sp = sub.add_parser("verify", help="run the verification suite")
    common(sp)

    sp = sub.add_parser("oracle1d", help="closed-form vs Monte Carlo 1D resolvent")
    common(sp)
    sp.add_argument("--x0", type=float, default=0.0, help="start point (default 0)")
    return p


def _outdir(cfg: RunConfig) -> Path:
    d = Path(cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _meta(cfg: RunConfig, command: str) -> dict:
    return {"command": command, "version": __version__, **cfg.flat()}


def _solver_kwargs(cfg: RunConfig) -> dict:
    return {"omega": cfg.solver.omega, "change_tol": cfg.solver.tol,
            "resid_tol": 25.0 * cfg.solver.tol,
            "max_sweeps": cfg.solver.max_iters}


def _cmd_stopping(cfg: RunConfig) -> int:
    u = solve_stopping_value(cfg.model, cfg.cost, cfg.grid, **_solver_kwargs(cfg))
    path = _outdir(cfg) / "stopping_value.csv"
    write_field_csv(u, path, extra_meta=_meta(cfg, "stopping"))
    print(f"stopping value written to {path} "
          f"({u.meta['sweeps']} sweeps, final change {u.meta['final_change']:.3g}, "
          f"enlargements {u.meta['enlargements']})")
    return 0


def _cmd_hjb(cfg: RunConfig) -> int:
    v = solve_control_value(cfg.model, cfg.cost, cfg.grid, **_solver_kwargs(cfg))
    path = _outdir(cfg) / "control_value.csv"
    write_field_csv(v, path, extra_meta=_meta(cfg, "hjb"))
    print(f"control value written to {path} "
          f"({v.meta['improvements']} policy improvements, "
          f"{v.meta['sweeps']} sweeps)")
    return 0


def _cmd_boundary(cfg: RunConfig) -> int:
    u = solve_stopping_value(cfg.model, cfg.cost, cfg.grid, **_solver_kwargs(cfg))
    bnd = extract_boundary(u)
    if bnd.degenerate:
        raise DegenerateModeError(
            "stopping value vanishes identically (b1 = 0 mode): the free "
            "boundary collapses onto the kink ray x1 = x2/c and no curve "
            "is extracted")
    rep = check_boundary(bnd, cfg.cost.c)
    out = _outdir(cfg)
    path = out / "boundary.csv"
    np.savetxt(path, np.column_stack([bnd.x2, bnd.psi]), delimiter=",",
               header="x2,psi", comments="", fmt="%.17g")
    write_sidecar(path, {**_meta(cfg, "boundary"), "zero_tol": bnd.zero_tol,
                         "checks_ok": rep.ok})
    print(f"boundary written to {path}")
    print(f"checks: ok={rep.ok} max_slope={rep.max_slope:.4g} "
          f"(bound {rep.slope_bound:.4g}) cone_ok={rep.cone_ok} grows={rep.grows}")
    for note in rep.notes:
        print(f"  note: {note}")
    return 0 if rep.ok else 1


def _parse_probe(text: str):
    try:
        a, b = text.split(",")
        return float(a), float(b)
    except ValueError:
        raise ConfigError(f"--x expects X1,X2 with numeric entries, got {text!r}") from None


def _cmd_simulate(cfg: RunConfig, args) -> int:
    if args.policy in ("free-boundary", "scaled"):
        u = solve_stopping_value(cfg.model, cfg.cost, cfg.grid, **_solver_kwargs(cfg))
        bnd = extract_boundary(u)
        if args.policy == "free-boundary":
            policy = PolicySpec.free_boundary(bnd)
        else:
            policy = PolicySpec.scaled_boundary(bnd, args.kappa)
    elif args.policy == "ray":
        policy = PolicySpec.ray(cfg.cost.c)
    else:
        policy = PolicySpec.axis()
    probes = [_parse_probe(t) for t in args.probes]
    if not probes:
        probes = [(0.25 * cfg.grid.L1, 0.125 * cfg.grid.L2)]
    rows = []
    for x in probes:
        res = evaluate_policy(cfg.model, cfg.cost, policy, x, dt=cfg.sim.dt,
                              T=cfg.sim.t, n_paths=cfg.sim.n_paths,
                              seed=cfg.sim.seed, tail_tol=cfg.sim.tail_tol,
                              workers=args.workers)
        rows.append(res.row(x))
        print(f"x=({x[0]:g},{x[1]:g}): J={res.j_estimate:.6f} "
              f"+/- {res.std_error:.6f} (tail <= {res.tail_bound:.3g}, "
              f"T={res.horizon:g})")
    path = _outdir(cfg) / "sim_results.csv"
    with path.open("w", newline="") as fh:
        w = _csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    write_sidecar(path, {**_meta(cfg, "simulate"), "policy": policy.describe(),
                         "workers": args.workers})
    print(f"results written to {path}")
    return 0


def _cmd_verify(cfg: RunConfig) -> int:
    report = run_suite(cfg)
    print(report.to_text())
    path = _outdir(cfg) / "verify_report.csv"
    path.write_text(report.to_csv())
    write_sidecar(path, {**_meta(cfg, "verify"), "passed": report.passed})
    print(f"report written to {path}")
    return 0 if report.passed else 1


def _cmd_oracle1d(cfg: RunConfig, args) -> int:
    m = cfg.model
    drift, variance = float(m.theta[1]), float(m.sigma[1, 1])
    exact = oracle_1d_resolvent(args.x0, drift, variance, m.gamma)
    T = cfg.sim.t if cfg.sim.t is not None else 15.0 / m.gamma
    est, se = rbm_resolvent_mc(args.x0, drift, variance, m.gamma,
                               dt=cfg.sim.dt, T=T, n_paths=cfg.sim.n_paths,
                               seed=cfg.sim.seed)
    gap = abs(est - exact)
    print(f"closed form: {exact:.6f}")
    print(f"monte carlo: {est:.6f} +/- {se:.6f} "
          f"({cfg.sim.n_paths} paths, dt={cfg.sim.dt:g}, T={T:g})")
    print(f"difference:  {gap:.6f} ({gap / se:.2f} std errors)" if se > 0
          else f"difference:  {gap:.6f}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides=args.overrides)
        if args.command == "stopping":
            return _cmd_stopping(cfg)
        if args.command == "hjb":
            return _cmd_hjb(cfg)
        if args.command == "boundary":
            return _cmd_boundary(cfg)
        if args.command == "simulate":
            return _cmd_simulate(cfg, args)
        if args.command == "verify":
            return _cmd_verify(cfg)
        return _cmd_oracle1d(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DegenerateModeError as exc:
        print(f"degenerate mode: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"solver failed to converge: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
