"""Command-line front end.

Subcommands: ``solve``, ``mc-e1``, ``mc-e2``, ``total-error``,
``consistency`` (all driven by a config file plus ``--set`` overrides) and
``norms`` (a utility operating on a dumped field).  Every experiment writes
its artifacts plus a ``manifest.json`` that records the seed, the full
resolved configuration and format versions, which is enough to reproduce
the run exactly.  All floating-point CSV output uses 17 significant digits
so reruns can be compared byte for byte.
"""

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import TestFunction, consistency_residuals, dual_sobolev_norm, lq_norm
from .config import load_config, serialize_config
from .errors import ConfigError, PlanError, SolverError
from .fields import EFLD_MAGIC, FieldSet, kh_coefficients, kh_field, read_efld, sample_stream, write_efld
from .grid import Grid
from .montecarlo import SamplePlan, e1_study, e2_study, total_error_study
from .scheme import solve

__all__ = ["main", "default_test_pair"]


def default_test_pair(t_final):
    """Built-in smooth test functions for the consistency functionals.

    The time cutoff ``(1 - (t/T)**2)**3`` is twice continuously
    differentiable at T where it vanishes.  The spatial parts mix an
    x2-only wave with a fully two-dimensional one, with generic phase
    shifts: shear-band states that stay x1-independent or reflection
    symmetric still produce non-trivial defects.
    """
    two_pi = 2.0 * math.pi

    def cut(t):
        s = t / t_final
        return (1.0 - s * s) ** 3

    def phi_val(t, x1, x2):
        return cut(t) * (
            0.5
            + np.sin(two_pi * x2 + 0.7)
            + 0.5 * np.sin(two_pi * x1 + 0.3) * np.sin(two_pi * x2 + 1.1)
        )

    def phi_grad(t, x1, x2):
        c = cut(t) * two_pi
        return (
            0.5 * c * np.cos(two_pi * x1 + 0.3) * np.sin(two_pi * x2 + 1.1),
            c
            * (
                np.cos(two_pi * x2 + 0.7)
                + 0.5 * np.sin(two_pi * x1 + 0.3) * np.cos(two_pi * x2 + 1.1)
            ),
        )

    def v1_val(t, x1, x2):
        return cut(t) * (
            np.sin(two_pi * x2 + 0.4)
            + 0.5 * np.sin(two_pi * x1 + 1.3) * np.cos(two_pi * x2 + 0.2)
        )

    def v1_grad(t, x1, x2):
        c = cut(t) * two_pi
        return (
            0.5 * c * np.cos(two_pi * x1 + 1.3) * np.cos(two_pi * x2 + 0.2),
            c
            * (
                np.cos(two_pi * x2 + 0.4)
                - 0.5 * np.sin(two_pi * x1 + 1.3) * np.sin(two_pi * x2 + 0.2)
            ),
        )

    def v2_val(t, x1, x2):
        return cut(t) * (
            np.cos(two_pi * x2 + 0.9)
            + 0.5 * np.cos(two_pi * x1 + 0.5) * np.sin(two_pi * x2 + 1.7)
        )

    def v2_grad(t, x1, x2):
        c = cut(t) * two_pi
        return (
            -0.5 * c * np.sin(two_pi * x1 + 0.5) * np.sin(two_pi * x2 + 1.7),
            c
            * (
                -np.sin(two_pi * x2 + 0.9)
                + 0.5 * np.cos(two_pi * x1 + 0.5) * np.cos(two_pi * x2 + 1.7)
            ),
        )

    phi = TestFunction(value=phi_val, grad=phi_grad)
    phivec = (
        TestFunction(value=v1_val, grad=v1_grad),
        TestFunction(value=v2_val, grad=v2_grad),
    )
    return phi, phivec


def _initial_state(cfg, grid):
    if cfg.initial == "constant":
        return FieldSet.constant(grid, cfg.rho, cfg.u1, cfg.u2)
    rng = sample_stream(cfg.master_seed, cfg.sample_id)
    return kh_field(cfg.kh, kh_coefficients(cfg.kh, rng), grid)


def _write_manifest(out, cfg, outputs):
    text = serialize_config(cfg)
    manifest = {
        "format": "eulermc-manifest/1",
        "kind": cfg.kind,
        "master_seed": cfg.master_seed,
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "config": text,
        "field_format": EFLD_MAGIC,
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(x) for x in sys.version_info[:3]),
        },
        "outputs": sorted(outputs),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_steps_csv(path, reports):
    lines = ["step,t,picard_iters,residual,mass_drift,energy"]
    for r in reports:
        lines.append(
            f"{r.step},{r.t:.17g},{r.picard_iters},{r.residual:.17g},"
            f"{r.mass_drift:.17g},{r.energy:.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _plan(cfg):
    return SamplePlan(
        master_seed=cfg.master_seed,
        ladder=cfg.ladder_grids(),
        gas=cfg.gas,
        scheme=cfg.scheme,
        kh=cfg.kh,
        n_list=cfg.n_list,
        l_reps=cfg.l_reps,
        n_ref=cfg.n_ref,
    )


def _cmd_solve(cfg, out):
    grid = cfg.grid()
    state = _initial_state(cfg, grid)
    snaps = list(cfg.snapshots) if cfg.snapshots else [cfg.scheme.t_final]
    traj = solve(state, cfg.gas, cfg.scheme, snapshot_times=snaps)
    outputs = []
    for k, (t, snap) in enumerate(zip(traj.times, traj.states)):
        name = f"snap_{k:03d}_t{t:.6g}.efld"
        write_efld(out / name, snap)
        outputs.append(name)
    _write_steps_csv(out / "steps.csv", traj.reports)
    outputs.append("steps.csv")
    return outputs


def _cmd_mc_e1(cfg, out):
    table, _ = e1_study(_plan(cfg), cfg.grid(), workers=cfg.workers)
    (out / "errors_e1.csv").write_text(table.to_csv())
    (out / "plot_e1.csv").write_text(table.plot_csv())
    return ["errors_e1.csv", "plot_e1.csv"]


def _cmd_mc_e2(cfg, out):
    table, _ = e2_study(_plan(cfg), workers=cfg.workers)
    (out / "errors_e2.csv").write_text(table.to_csv())
    (out / "plot_e2.csv").write_text(table.plot_csv())
    return ["errors_e2.csv", "plot_e2.csv"]


def _cmd_total_error(cfg, out):
    if not cfg.pairs:
        raise ConfigError("total-error mode needs plan.pairs (e.g. 32:5,64:10)", key="pairs")
    if not cfg.ref_nx:
        raise ConfigError("total-error mode needs plan.ref_nx", key="ref_nx")
    ratio = cfg.ly / cfg.lx
    pairs = [
        (Grid(nx=nx, ny=round(nx * ratio), lx=cfg.lx, ly=cfg.ly), n) for nx, n in cfg.pairs
    ]
    ref_grid = Grid(nx=cfg.ref_nx, ny=round(cfg.ref_nx * ratio), lx=cfg.lx, ly=cfg.ly)
    table, _ = total_error_study(
        _plan(cfg), pairs, ref_grid, workers=cfg.workers, cesaro=cfg.cesaro
    )
    tag = "e2" if cfg.cesaro else "e1"
    (out / f"errors_total_{tag}.csv").write_text(table.to_csv())
    (out / f"plot_total_{tag}.csv").write_text(table.plot_csv())
    return [f"errors_total_{tag}.csv", f"plot_total_{tag}.csv"]


def _cmd_consistency(cfg, out):
    phi, phivec = default_test_pair(cfg.scheme.t_final)
    lines = ["h,e1,e2,e3"]
    for grid in cfg.ladder_grids():
        state = _initial_state(cfg, grid)
        traj = solve(state, cfg.gas, cfg.scheme, keep_all=True)
        e1, e2, e3 = consistency_residuals(traj, state, cfg.gas, cfg.scheme, phi, phivec)
        lines.append(f"{grid.h:.17g},{e1:.17g},{e2:.17g},{e3:.17g}")
    (out / "consistency.csv").write_text("\n".join(lines) + "\n")
    return ["consistency.csv"]


def _cmd_norms(args):
    state = read_efld(args.field)
    grid = state.grid
    fields = {"rho": state.rho, "m1": state.mom[0], "m2": state.mom[1]}
    print("var,kind,param,value")
    for var, f in fields.items():
        for q in args.q:
            print(f"{var},lq,{q:.17g},{lq_norm(grid, f, q):.17g}")
        for ell in args.ell:
            print(f"{var},dual,{ell},{dual_sobolev_norm(grid, f, ell):.17g}")
    return 0


_RUNNERS = {
    "solve": _cmd_solve,
    "mc-e1": _cmd_mc_e1,
    "mc-e2": _cmd_mc_e2,
    "total-error": _cmd_total_error,
    "consistency": _cmd_consistency,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="eulermc",
        description="Finite volume solver and Monte Carlo error studies "
        "for the 2D isentropic Euler system on periodic grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("config", help="path to the run configuration file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.add_argument("--out", help="output directory (overrides run.out_dir)")
        p.add_argument("--workers", type=int, help="worker count (overrides run.workers)")
    p = sub.add_parser("norms", help="norms of a dumped field")
    p.add_argument("field", help="path to an EFLD1 field dump")
    p.add_argument("--q", type=float, action="append", default=[], help="L^q exponent")
    p.add_argument("--ell", type=int, action="append", default=[], help="dual-norm order")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "norms":
        if not args.q and not args.ell:
            args.q = [1.0, 2.0]
            args.ell = [4]
        return _cmd_norms(args)

    overrides = list(args.overrides)
    if args.out:
        overrides.append(f"run.out_dir={args.out}")
    if args.workers:
        overrides.append(f"run.workers={args.workers}")
    try:
        cfg = load_config(args.config, overrides=overrides, kind=args.command)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        outputs = _RUNNERS[args.command](cfg, out)
    except (ConfigError, PlanError) as exc:
        _write_error(out, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        _write_error(out, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out, cfg, outputs + ["manifest.json"])
    return 0


def _write_error(out, exc):
    record = {"error": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "step", None) is not None:
        record["step"] = exc.step
    (out / "error.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
