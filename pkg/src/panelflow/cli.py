"""Command-line driver: simulate / equilibria / flow / probe / check / sweep."""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from . import diagnostics as dg
from . import equilibria as eq
from . import fileio
from . import flowrecon as fr
from . import grid as gridmod
from . import integrate as it
from . import vonkarman as vk
from .aero import AeroConfig, escape_time


def _phys(rc: cfgmod.RunConfig) -> it.PhysParams:
    return it.PhysParams(U=rc.U, alpha=rc.alpha, k=rc.k, loads=rc.loads)


def cmd_simulate(args) -> int:
    rc = cfgmod.load_config(args.config, need_time=True)
    p = _phys(rc)
    sim = it.SimConfig(dt=rc.dt, horizon=rc.horizon, quad=rc.quad,
                       prehistory=rc.prehistory if isinstance(rc.prehistory, str)
                       else "constant",
                       cadence=rc.cadence,
                       power_every=0 if args.no_power_balance else 1)
    history = None
    resume = False
    u0, u1, t0 = rc.u0, rc.u1, 0.0
    if isinstance(rc.prehistory, dict):
        history, u1 = fileio.load_checkpoint(rc.prehistory["checkpoint"],
                                             with_velocity=True)
        u0 = history.snaps[-1].u
        t0 = history.newest_t
        resume = True

    outdir = rc.output_dir or "."
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "run.csv")
    writer = fileio.CsvWriter(csv_path, dg.EnergyReport.CSV_COLUMNS)
    outputs = [csv_path]
    try:
        traj = it.simulate(sim, p, u0, u1, rc.grid, history=history, t0=t0,
                           on_record=lambda rep: writer.row(rep.csv_row()),
                           collect_states=bool(rc.snapshot_every),
                           resume=resume)
    finally:
        writer.close()
    if rc.snapshot_every:
        for i, st in enumerate(traj.states):
            if i % rc.snapshot_every == 0:
                path = os.path.join(outdir, f"snap_{i:06d}.pflb")
                fileio.save_snapshot(path, st.t, st.u, rc.grid)
                outputs.append(path)
    ck_path = os.path.join(outdir, "checkpoint.bin")
    fileio.save_checkpoint(ck_path, traj.history, ut=traj.final.ut)
    outputs.append(ck_path)
    fileio.write_manifest(os.path.join(outdir, "manifest.json"), rc.raw,
                          rc.seed, outputs)
    print(f"simulate: {len(traj.times)} records -> {csv_path}")
    print(f"final t={traj.final.t:.6g}  E*={traj.reports[-1].e_star:.6g}  "
          f"diss={traj.diss_accum:.6g}")
    return 0


def cmd_equilibria(args) -> int:
    rc = cfgmod.load_config(args.config)
    p = _phys(rc)
    cfg = AeroConfig(rc.U, escape_time(rc.grid, rc.U), rc.quad)
    res = eq.newton_solve(rc.u0, p, cfg, rc.grid)
    outdir = rc.output_dir or "."
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "equilibrium.pflb")
    fileio.save_snapshot(path, 0.0, res.u, rc.grid)
    fileio.write_manifest(os.path.join(outdir, "manifest.json"), rc.raw,
                          rc.seed, [path],
                          extra={"residual": res.residual_norm,
                                 "iterations": res.iterations,
                                 "converged": res.converged})
    print(f"equilibria: converged={res.converged} residual={res.residual_norm:.3e} "
          f"|u|_2={gridmod.seminorm_h2(res.u, rc.grid):.6g} -> {path}")
    return 0 if res.converged else 1


def cmd_sweep(args) -> int:
    rc = cfgmod.load_config(args.config)
    sw = rc.sweep
    cfgmod._require_keys(sw, {"param", "lo", "hi", "steps"},
                         {"param", "lo", "hi", "steps"}, "sweep")
    if sw["param"] != "beta":
        raise cfgmod.ConfigError("only the 'beta' prestress sweep is supported")
    betas = np.linspace(sw["lo"], sw["hi"], int(sw["steps"]))
    p = _phys(rc)
    cfg = AeroConfig(rc.U, escape_time(rc.grid, rc.U), rc.quad)
    points = eq.continuation_sweep(betas, p, cfg, rc.grid)
    outdir = rc.output_dir or "."
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "branch.csv")
    writer = fileio.CsvWriter(path, ("param", "norm_h2", "residual",
                                     "iterations", "smallest_eig"))
    for pt in points:
        writer.row((pt.param, pt.norm_h2, pt.residual, pt.iterations,
                    pt.smallest_eig if pt.smallest_eig is not None else np.nan))
    writer.close()
    fileio.write_manifest(os.path.join(outdir, "manifest.json"), rc.raw,
                          rc.seed, [path])
    print(f"sweep: {len(points)} points -> {path}")
    return 0


def cmd_flow(args) -> int:
    rc = cfgmod.load_config(args.config) if args.config else None
    (history,) = fileio.load_checkpoint(args.checkpoint)
    g = history.grid
    U = rc.U if rc else args.U
    quad = rc.quad if rc else None
    cfg = AeroConfig(U, escape_time(g, U), quad) if quad else \
        AeroConfig(U, escape_time(g, U))
    box = tuple(float(v) for v in args.box.split(","))
    dims = tuple(int(v) for v in args.dims.split(","))
    t = history.newest_t
    fs, axes = fr.reconstruct_box(history, t, cfg, box, dims)
    u_latest = history.snaps[-1].u
    e_fl, e_int = fr.flow_energy_box(fs, axes, cfg, u=u_latest, g=g)
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "flow.csv")
    writer = fileio.CsvWriter(path, ("x1", "x2", "x3", "phi", "phi_t",
                                     "dphi_dx1", "dphi_dx2", "dphi_dx3"))
    for i in range(fs.points.shape[0]):
        writer.row((*fs.points[i], fs.phi[i], fs.phi_t[i], *fs.grad[i]))
    writer.close()
    print(f"flow: {fs.points.shape[0]} samples at t={t:.6g} -> {path}")
    print(f"E_fl_box={e_fl:.6g}  E_int_box={'n/a' if e_int is None else f'{e_int:.6g}'}")
    return 0


def cmd_probe(args) -> int:
    rc = cfgmod.load_config(args.config, need_time=True)
    from .checks import run_probe_from_config
    report = run_probe_from_config(rc)
    outdir = rc.output_dir or "."
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, f"probe_{report.name}.json")
    with open(path, "w") as fh:
        json.dump({"name": report.name, "constants": report.constants,
                   "passed": report.passed, "details": report.details},
                  fh, indent=2, sort_keys=True)
    print(f"probe {report.name}: passed={report.passed} constants={report.constants}")
    return 0 if report.passed else 1


def cmd_check(args) -> int:
    from .checks import run_invariant_checks
    results = run_invariant_checks()
    ok = True
    for name, passed, detail in results:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        ok = ok and passed
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="panelflow",
        description="Clamped von Karman plate with delayed potential-flow "
                    "aerodynamics: simulation, equilibria, flow "
                    "reconstruction, and stability probes.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="advance the plate from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--no-power-balance", action="store_true",
                   help="skip the per-step power-balance diagnostic")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("equilibria", help="Newton solve for a stationary state")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_equilibria)

    s = sub.add_parser("sweep", help="continuation sweep over the prestress load")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("flow", help="reconstruct the flow potential from a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--U", type=float, default=0.0)
    s.add_argument("--box", default="0,1,0,1,0,0.5",
                   help="x0,x1,y0,y1,z0,z1")
    s.add_argument("--dims", default="9,9,5", help="nx,ny,nz sample counts")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_flow)

    s = sub.add_parser("probe", help="run a stability probe from a JSON config")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("check", help="fast self-check of the numerical kernels")
    s.set_defaults(func=cmd_check)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (cfgmod.ConfigError, fileio.FormatError, gridmod.GridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
