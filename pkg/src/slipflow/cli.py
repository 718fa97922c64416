"""Command line entry points.

Nothing heavy is imported at module scope: ``--serial`` must pin the BLAS
thread pools through environment variables before numpy first loads, which is
what makes reruns of the shipped configurations byte-identical.

Exit codes: 0 when the requested checks pass, 1 when a check fails, 2 on
configuration or runtime errors (reported as a JSON object on stdout).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")


def _pin_serial():
    for var in _THREAD_VARS:
        os.environ[var] = "1"


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(outdir, command, cfg_raw, *, basis_hash=None, seeds=None,
                    artifacts=None):
    from . import __version__

    manifest = {
        "format_version": 1,
        "package_version": __version__,
        "command": list(command),
        "config": cfg_raw,
        "basis_hash": basis_hash,
        "seeds": seeds or {},
        "artifacts": sorted(artifacts or []),
    }
    _write_json(os.path.join(outdir, "manifest.json"), manifest)


def _write_runtime(outdir, t0):
    with open(os.path.join(outdir, "runtime.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"{time.perf_counter() - t0:.3f}\n")


def _outdir(args, cfg=None):
    path = args.output or (cfg.output_directory if cfg else None)
    if not path:
        raise ValueError("no output directory: pass --output or set output.directory")
    os.makedirs(path, exist_ok=True)
    return path


def _build_from_config(cfg):
    from .basis import build_basis
    from .operators import build_operators

    basis = build_basis(cfg.domain, cfg.num_modes, oversample=cfg.oversample,
                        vertical_modes=cfg.vertical_modes)
    ops = build_operators(basis, cfg.physics)
    return basis, ops


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, command):
    from .basisio import basis_hash
    from .config import load_config, make_forcing, make_initial
    from .diagnostics import EnergyLedger
    from .figures import energy_figure
    from .timestepper import solve

    t0 = time.perf_counter()
    cfg = load_config(args.config)
    outdir = _outdir(args, cfg)
    basis, ops = _build_from_config(cfg)
    g0 = make_initial(cfg, basis)
    forcing = make_forcing(cfg, basis.num_modes)
    traj = solve(ops, g0, cfg.solver, forcing=forcing)
    ledger = EnergyLedger.from_trajectory(ops, traj, forcing=forcing)

    ledger.write_csv(os.path.join(outdir, "energy.csv"))
    traj.write_states_csv(os.path.join(outdir, "states.csv"))
    energy_figure(ledger, os.path.join(outdir, "energy.png"))
    summary = {
        "num_modes": basis.num_modes,
        "num_steps": cfg.solver.num_steps,
        "picard_iterations": traj.picard_iterations,
        "initial_energy": float(ledger.e_l2[0]),
        "final_energy": float(ledger.e_l2[-1]),
        "max_energy_increase": ledger.max_energy_increase(),
        "max_l2_quadrature_gap": ledger.max_l2_quadrature_gap,
    }
    _write_json(os.path.join(outdir, "summary.json"), summary)
    _write_manifest(outdir, command, cfg.raw, basis_hash=basis_hash(basis),
                    seeds=cfg.seeds,
                    artifacts=["energy.csv", "states.csv", "energy.png",
                               "summary.json"])
    _write_runtime(outdir, t0)
    print(f"simulate: {cfg.solver.num_steps} steps, energy "
          f"{summary['initial_energy']:.6g} -> {summary['final_energy']:.6g}")
    return 0


def cmd_verify_basis(args, command):
    from .basisio import basis_hash, save_basis, save_matrix
    from .config import load_config
    from .operators import assemble_stiffness
    from .basis import verify_basis

    t0 = time.perf_counter()
    cfg = load_config(args.config)
    outdir = _outdir(args, cfg)
    basis, _ = _build_from_config(cfg)
    report = verify_basis(basis)
    save_basis(basis, os.path.join(outdir, "basis.bin"))
    save_matrix(assemble_stiffness(basis), os.path.join(outdir, "stiffness.bin"))
    _write_json(os.path.join(outdir, "certification.json"), report.to_dict())
    _write_manifest(outdir, command, cfg.raw, basis_hash=basis_hash(basis),
                    seeds=cfg.seeds,
                    artifacts=["basis.bin", "stiffness.bin",
                               "certification.json"])
    _write_runtime(outdir, t0)
    status = "pass" if report.passed else "FAIL"
    print(f"verify-basis: div={report.max_divergence:.3e} "
          f"normal={report.max_normal_trace:.3e} slip={report.max_slip:.3e} "
          f"gram={report.max_gram_deviation:.3e} [{status}]")
    return 0 if report.passed else 1


def cmd_energy_report(args, command):
    import numpy as np

    from .basisio import basis_hash
    from .config import load_config, make_forcing, make_initial
    from .diagnostics import (EnergyLedger, check_energy_inequality,
                              energy_residuals)
    from .figures import energy_figure
    from .timestepper import solve

    t0 = time.perf_counter()
    cfg = load_config(args.config)
    outdir = _outdir(args, cfg)
    basis, ops = _build_from_config(cfg)
    g0 = make_initial(cfg, basis)
    forcing = make_forcing(cfg, basis.num_modes)
    traj = solve(ops, g0, cfg.solver, forcing=forcing)
    ledger = EnergyLedger.from_trajectory(ops, traj, forcing=forcing)
    inequality = check_energy_inequality(ops, ledger)
    residuals = energy_residuals(ops, ledger)
    res_max = float(np.abs(residuals).max()) if residuals.size else 0.0

    ledger.write_csv(os.path.join(outdir, "energy.csv"))
    energy_figure(ledger, os.path.join(outdir, "energy.png"))
    report = {
        "inequality": inequality.to_dict(),
        "max_step_residual": res_max,
        "residual_constant": res_max / cfg.solver.dt ** 3,
        "max_l2_quadrature_gap": ledger.max_l2_quadrature_gap,
    }
    _write_json(os.path.join(outdir, "report.json"), report)
    _write_manifest(outdir, command, cfg.raw, basis_hash=basis_hash(basis),
                    seeds=cfg.seeds,
                    artifacts=["energy.csv", "energy.png", "report.json"])
    _write_runtime(outdir, t0)
    status = "pass" if inequality.passed else "FAIL"
    print(f"energy-report: margin={inequality.margin:.6e} "
          f"max_increase={inequality.max_energy_increase:.3e} [{status}]")
    return 0 if inequality.passed else 1


def cmd_mms(args, command):
    from .harness import get_mms_case, run_mms

    t0 = time.perf_counter()
    outdir = _outdir(args)
    case = get_mms_case(args.case)
    error = run_mms(case, args.dt, args.t_final, args.scheme)
    report = {"case": args.case, "scheme": args.scheme, "dt": args.dt,
              "t_final": args.t_final, "error": error,
              "tolerance": args.tolerance}
    _write_json(os.path.join(outdir, "mms.json"), report)
    _write_manifest(outdir, command, report, artifacts=["mms.json"])
    _write_runtime(outdir, t0)
    ok = args.tolerance is None or error <= args.tolerance
    print(f"mms {args.case}/{args.scheme}: error={error:.6e} "
          f"[{'pass' if ok else 'FAIL'}]")
    return 0 if ok else 1


_ORDER_WINDOWS = {"imex-cn": (1.9, 2.1), "rk4": (3.8, 4.2)}


def cmd_converge_time(args, command):
    from .figures import temporal_figure
    from .harness import get_mms_case, temporal_convergence

    t0 = time.perf_counter()
    outdir = _outdir(args)
    case = get_mms_case(args.case)
    dts = [float(v) for v in args.dts.split(",")]
    study = temporal_convergence(case, dts, args.scheme, t_final=args.t_final)
    lo, hi = _ORDER_WINDOWS[args.scheme]
    if args.order_min is not None:
        lo = args.order_min
    if args.order_max is not None:
        hi = args.order_max
    ok = lo <= study.fitted_order <= hi

    temporal_figure(study, os.path.join(outdir, "temporal.png"))
    report = study.to_dict()
    report.update({"order_window": [lo, hi], "pass": ok})
    _write_json(os.path.join(outdir, "convergence.json"), report)
    _write_manifest(outdir, command, report,
                    artifacts=["convergence.json", "temporal.png"])
    _write_runtime(outdir, t0)
    print(f"converge-time {args.case}/{args.scheme}: order="
          f"{study.fitted_order:.3f} window=[{lo},{hi}] "
          f"[{'pass' if ok else 'FAIL'}]")
    return 0 if ok else 1


def cmd_converge_space(args, command):
    from .config import load_config
    from .figures import spatial_figure
    from .harness import spatial_convergence

    t0 = time.perf_counter()
    cfg = load_config(args.config)
    outdir = _outdir(args, cfg)
    study_cfg = cfg.study
    counts = ([int(v) for v in args.mode_counts.split(",")]
              if args.mode_counts else study_cfg.get("mode_counts", [16, 32, 64]))
    study = spatial_convergence(
        cfg.domain, cfg.physics, counts,
        seed=study_cfg.get("seed", 0),
        amplitude=study_cfg.get("amplitude", 1.0),
        decay=study_cfg.get("decay", 4.0),
        decay_variable=study_cfg.get("decay_variable", "sqrt_h1"),
        t_final=study_cfg.get("t_final", 0.5), dt=cfg.solver.dt)
    decreasing = all(study.errors[k + 1] < study.errors[k]
                     for k in range(len(study.errors) - 1))
    ok = decreasing and all(r >= args.min_ratio for r in study.ratios)

    spatial_figure(study, os.path.join(outdir, "spatial.png"))
    report = study.to_dict()
    report.update({"min_ratio": args.min_ratio, "pass": ok})
    _write_json(os.path.join(outdir, "spatial.json"), report)
    _write_manifest(outdir, command, cfg.raw, seeds=cfg.seeds,
                    artifacts=["spatial.json", "spatial.png"])
    _write_runtime(outdir, t0)
    print(f"converge-space: ratios={['%.2f' % r for r in study.ratios]} "
          f"[{'pass' if ok else 'FAIL'}]")
    return 0 if ok else 1


def cmd_twin(args, command):
    from .config import load_config, make_forcing, make_initial
    from .figures import twin_figure
    from .harness import twin_run

    t0 = time.perf_counter()
    cfg = load_config(args.config)
    outdir = _outdir(args, cfg)
    basis, ops = _build_from_config(cfg)
    g0 = make_initial(cfg, basis)
    forcing = make_forcing(cfg, basis.num_modes)
    eps = ([float(v) for v in args.epsilons.split(",")]
           if args.epsilons else cfg.study.get("epsilons", [1e-3, 5e-4, 2.5e-4]))
    study = twin_run(ops, g0, cfg.solver, eps,
                     seed=cfg.study.get("twin_seed", 0), forcing=forcing)
    ok = (all(args.ratio_min <= r <= args.ratio_max for r in study.ratios)
          and study.control_gap <= args.control_tol)

    twin_figure(study, os.path.join(outdir, "twin.png"))
    report = study.to_dict()
    report.update({"ratio_window": [args.ratio_min, args.ratio_max],
                   "control_tolerance": args.control_tol, "pass": ok})
    _write_json(os.path.join(outdir, "twin.json"), report)
    _write_manifest(outdir, command, cfg.raw, seeds=cfg.seeds,
                    artifacts=["twin.json", "twin.png"])
    _write_runtime(outdir, t0)
    print(f"twin: ratios={['%.3f' % r for r in study.ratios]} "
          f"control={study.control_gap:.3e} [{'pass' if ok else 'FAIL'}]")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", default=None,
                        help="output directory (overrides config)")
    common.add_argument("--serial", action="store_true",
                        help="pin BLAS threading to one thread for "
                             "reproducible bytes")

    p = argparse.ArgumentParser(
        prog="slipflow",
        description="Spectral Galerkin solver and verification harness for "
                    "damped incompressible flow with slip walls.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("simulate", parents=[common],
                        help="run a configuration and write the energy ledger")
    sp.add_argument("config")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify-basis", parents=[common],
                        help="certify divergence, wall conditions and grams")
    sp.add_argument("config")
    sp.set_defaults(func=cmd_verify_basis)

    sp = sub.add_parser("energy-report", parents=[common],
                        help="run and check the a priori energy inequality")
    sp.add_argument("config")
    sp.set_defaults(func=cmd_energy_report)

    sp = sub.add_parser("mms", parents=[common],
                        help="single manufactured-solution error")
    sp.add_argument("--case", required=True)
    sp.add_argument("--scheme", default="imex-cn", choices=["imex-cn", "rk4"])
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--t-final", type=float, default=0.5)
    sp.add_argument("--tolerance", type=float, default=None)
    sp.set_defaults(func=cmd_mms)

    sp = sub.add_parser("converge-time", parents=[common],
                        help="temporal order study on a manufactured case")
    sp.add_argument("--case", required=True)
    sp.add_argument("--scheme", default="imex-cn", choices=["imex-cn", "rk4"])
    sp.add_argument("--dts", default="4e-3,2e-3,1e-3,5e-4",
                    help="comma-separated step sizes")
    sp.add_argument("--t-final", type=float, default=0.5)
    sp.add_argument("--order-min", type=float, default=None)
    sp.add_argument("--order-max", type=float, default=None)
    sp.set_defaults(func=cmd_converge_time)

    sp = sub.add_parser("converge-space", parents=[common],
                        help="nested-basis spatial convergence study")
    sp.add_argument("config")
    sp.add_argument("--mode-counts", default=None,
                    help="comma-separated mode counts")
    sp.add_argument("--min-ratio", type=float, default=2.0)
    sp.set_defaults(func=cmd_converge_space)

    sp = sub.add_parser("twin", parents=[common],
                        help="perturbation growth and determinism control")
    sp.add_argument("config")
    sp.add_argument("--epsilons", default=None,
                    help="comma-separated perturbation sizes")
    sp.add_argument("--ratio-min", type=float, default=3.6)
    sp.add_argument("--ratio-max", type=float, default=4.4)
    sp.add_argument("--control-tol", type=float, default=1e-20)
    sp.set_defaults(func=cmd_twin)

    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.serial:
        _pin_serial()

    from .errors import SlipflowError

    command = ["slipflow"] + argv
    try:
        return args.func(args, command)
    except SlipflowError as exc:
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}))
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
