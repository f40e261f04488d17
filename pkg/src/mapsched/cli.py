"""Command line interface.

Subcommands: ident, gains, certify, run, compare. Exit codes: 0 success,
1 invalid config, 2 numerical failure, 3 certification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_motor_config
from .control import LqrWeights, gain_report, solve_dare, write_gain_csv, write_gain_report
from .errors import CertificationError, ConfigError, NumericalError
from .harness import (
    compare_runs,
    compute_metrics,
    design_from_motor,
    load_scenario,
    run_scenario,
    write_metrics_json,
    write_plot_csv,
    write_trace_csv,
)
from .ident import identify, read_samples_csv
from .motor import DiscreteModel
from .stability import MismatchAssumptions, certify


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maps",
        description="Mode-aware probabilistic scheduling for a friction-varying DC motor",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ident = sub.add_parser("ident", help="identify the viscous coefficient from a CSV")
    p_ident.add_argument("csv", help="two-column CSV of (voltage, velocity), header optional")
    p_ident.add_argument("--motor", help="motor config file", default=None)

    p_gains = sub.add_parser("gains", help="print vertex LQR gains and closed-loop moduli")
    p_gains.add_argument("--motor", help="motor config file", default=None)
    p_gains.add_argument("--json", help="also write the report as JSON", default=None)
    p_gains.add_argument("--csv", help="also write the gain table as CSV", default=None)

    p_cert = sub.add_parser("certify", help="certify quadratic stability of the scheduled loop")
    p_cert.add_argument("--motor", help="motor config file", default=None)
    p_cert.add_argument("--epsilon", type=float, default=None,
                        help="scheduling mismatch bound to evaluate the rate at")
    p_cert.add_argument("--delta", type=float, default=0.0,
                        help="per-tick parameter drift bound (reported only)")

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("scenario", help="scenario config file (key = value lines)")
    p_run.add_argument("--out", default="runout", help="output directory")

    p_cmp = sub.add_parser("compare", help="run variants of a scenario side by side")
    p_cmp.add_argument("scenario", help="scenario config file")
    p_cmp.add_argument(
        "--variant",
        action="append",
        default=None,
        metavar="NAME=CONTROLLER/ESTIMATOR",
        help="e.g. maps=maps/imm (default: maps/imm vs fixed:0/kf:0)",
    )
    p_cmp.add_argument("--out", default=None, help="optional CSV output path")
    return parser


def _cmd_ident(args) -> int:
    motor = load_motor_config(args.motor)
    samples = read_samples_csv(args.csv)
    result = identify(motor.params, samples)
    print(f"slope mu        = {result.slope:.6e} V*s/rad")
    print(f"viscous coeff b = {result.viscous_coeff:.6e} N*m*s/rad")
    print(f"residual rms    = {result.residual_rms:.6e} V")
    if result.warning:
        print(f"warning: {result.warning}")
    return 0


def _cmd_gains(args) -> int:
    motor = load_motor_config(args.motor)
    weights = LqrWeights.default()
    vertices = design_from_motor(motor, weights)
    solutions = [
        solve_dare(DiscreteModel(Phi=phi, Gamma=vertices.Gamma, H=vertices.H, T=vertices.T),
                   weights)
        for phi in vertices.Phi_vertices
    ]
    report = gain_report(vertices, solutions)
    print(f"discretization: {report['mode']}, sample time {report['sample_time']} s")
    for entry in report["vertices"]:
        K = ", ".join(f"{v: .6f}" for v in entry["K"])
        moduli = ", ".join(f"{v:.6f}" for v in entry["closed_loop_eigenvalue_moduli"])
        print(f"vertex {entry['index']}: rho = {entry['rho']:.6e}")
        print(f"  K = [{K}]")
        print(f"  closed-loop |eig| = [{moduli}]")
        print(f"  riccati residual = {entry['riccati_residual']:.3e} "
              f"({entry['riccati_iterations']} iterations)")
    if args.json:
        write_gain_report(args.json, report)
        print(f"wrote {args.json}")
    if args.csv:
        write_gain_csv(args.csv, report)
        print(f"wrote {args.csv}")
    return 0


def _cmd_certify(args) -> int:
    motor = load_motor_config(args.motor)
    vertices = design_from_motor(motor)
    assumptions = None
    if args.epsilon is not None:
        assumptions = MismatchAssumptions(epsilon=args.epsilon, delta=args.delta)
    cert = certify(vertices, assumptions=assumptions)
    with np.printoptions(precision=6, suppress=False):
        print("common Lyapunov matrix P:")
        print(cert.P_lyap)
    print(f"alpha (worst vertex margin) = {cert.alpha:.6e}")
    print("vertex margins              = "
          + ", ".join(f"{m:.6e}" for m in cert.vertex_margins))
    print(f"sampled margin minimum      = {cert.sampled_margins_min:.6e}")
    print(f"L_phi = {cert.L_phi:.6e}  L_k = {cert.L_k:.6e}  L = {cert.L:.6e}")
    print(f"eps_star = {cert.eps_star:.6e}")
    print(f"C = {cert.C:.6e}  lambda = {cert.lambda_:.6e} "
          f"(at epsilon = {cert.epsilon_used:.6e})")
    if cert.delta:
        print(f"delta (reported only) = {cert.delta:.6e}")
    print("certified: yes")
    return 0


def _cmd_run(args) -> int:
    spec, motor = load_scenario(args.scenario)
    vertices = design_from_motor(motor)
    record = run_scenario(spec, motor, vertices)
    metrics = compute_metrics(record)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / "trace.csv", record)
    write_plot_csv(out / "plot.csv", record)
    write_metrics_json(out / "metrics.json", record, metrics)
    print(f"controller={spec.controller} estimator={spec.estimator} "
          f"seed={spec.seed} ticks={spec.n_ticks}")
    print(f"tracking rmse = {metrics.rmse:.6f} rad, mae = {metrics.mae:.6f} rad, "
          f"iae = {metrics.iae:.6f} rad*s")
    print("estimation rmse (theta, omega, current) = "
          + ", ".join(f"{v:.6f}" for v in metrics.est_rmse))
    print(f"saturated ticks = {record.saturation_count}")
    print(f"wrote {out / 'trace.csv'}, {out / 'plot.csv'}, {out / 'metrics.json'}")
    return 0


def _parse_variants(raw) -> list:
    if not raw:
        return [("maps", "maps", "imm"), ("fixed", "fixed:0", "kf:0")]
    variants = []
    for item in raw:
        name, _, rest = item.partition("=")
        controller, _, estimator = rest.partition("/")
        if not (name and controller and estimator):
            raise ConfigError(
                f"variant {item!r} must look like NAME=CONTROLLER/ESTIMATOR"
            )
        variants.append((name, controller, estimator))
    return variants


def _cmd_compare(args) -> int:
    spec, motor = load_scenario(args.scenario)
    vertices = design_from_motor(motor)
    variants = _parse_variants(args.variant)
    comparison = compare_runs(spec, variants, motor, vertices)
    print(comparison.to_text())
    if args.out:
        comparison.to_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "ident": _cmd_ident,
        "gains": _cmd_gains,
        "certify": _cmd_certify,
        "run": _cmd_run,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except CertificationError as exc:
        print(f"error: certification failed: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
