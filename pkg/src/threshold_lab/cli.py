"""
Command-line front end of threshold-lab.

    threshold-lab classify run.json
    threshold-lab spectrum run.json --kappa-min 1e-3 --kappa-max 1e3
    threshold-lab zero-mode run.json | --design centres.json
    threshold-lab resolvent-grid run.json --x 0.3 0.2 --y -0.4 1.1
    threshold-lab validate-asymptotics run.json
    threshold-lab wave-probe run.json --p 1.5 2 3 4

Exit codes: 0 success, 1 numerical failure, 2 input error, 3 internal inconsistency.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

import pandas as pd

from threshold_lab.errors import (ConfigurationError, DesignError, DomainError, InternalInconsistencyError,
                                  NumericalError, SingularityError, WrongCaseError)
from threshold_lab.reports.load_config import PROJECT_CFG
from threshold_lab.reports.run_config import DesignFile, RunConfig, load_run_config
from threshold_lab.reports.sweep_report import ensure_parent_dir, to_builtin, write_frame_csv
from threshold_lab.spectral.asymptotics_validator import expansion_sweep
from threshold_lab.spectral.load_lab_config import LAB_CFG
from threshold_lab.spectral.numerics import geometric_grid
from threshold_lab.spectral.spectrum_resolvent import negative_eigenvalues, resolvent_zero_limit
from threshold_lab.spectral.threshold_classifier import classify
from threshold_lab.spectral.wave_operator_probe import apply_K, apply_omega, lp_ratio_sweep, mexican_hat_corpus
from threshold_lab.spectral.zero_modes import design_alpha, zero_mode_space

logger = logging.getLogger("threshold_lab")

INPUT_ERRORS = (ConfigurationError, DomainError, SingularityError, WrongCaseError, DesignError)


def _status(message: str) -> None:
    print(f"[threshold-lab] {message}", file=sys.stderr)


def _tolerance(args: argparse.Namespace, run: Optional[RunConfig] = None) -> float:
    if args.tolerance is not None:
        return LAB_CFG.tolerance(args.tolerance)
    return LAB_CFG.tolerance(run.tolerance if run is not None else None)


def _metadata(args: argparse.Namespace, tolerance: float) -> dict:
    return PROJECT_CFG.metadata(command=args.command, tolerance=tolerance)


def _output_path(args: argparse.Namespace) -> Optional[str]:
    if args.output is not None:
        ensure_parent_dir(args.output)
    return args.output


def _emit_csv(frame: pd.DataFrame, args: argparse.Namespace, metadata: dict) -> None:
    path = _output_path(args)
    text = write_frame_csv(frame, path, metadata)
    if path is None:
        sys.stdout.write(text)
    else:
        _status(f"wrote {len(frame)} rows to {path}")


def _emit_json(payload: dict, args: argparse.Namespace) -> None:
    text = json.dumps(to_builtin(payload), sort_keys=True, indent=2)
    path = _output_path(args)
    if path is None:
        print(text)
    else:
        with open(path, "w") as handle:
            handle.write(text + "\n")
        _status(f"wrote report to {path}")


def cmd_classify(args: argparse.Namespace) -> int:
    run = load_run_config(args.config)
    tolerance = _tolerance(args, run)
    classification = classify(run.to_configuration(), tolerance)
    _status(f"threshold type: {classification.case.value}")
    _emit_json({**classification.to_dict(), "metadata": _metadata(args, tolerance)}, args)
    return 0


def cmd_spectrum(args: argparse.Namespace) -> int:
    run = load_run_config(args.config)
    tolerance = _tolerance(args, run)
    config = run.to_configuration()
    states = negative_eigenvalues(config, kappa_min=args.kappa_min, kappa_max=args.kappa_max,
                                  points_per_decade=args.points_per_decade, workers=args.workers)
    columns = ["kappa", "energy", "multiplicity"] + [f"c_{j + 1}" for j in range(config.n)]
    rows = [[s.kappa, s.energy, s.multiplicity, *s.c] for s in states]
    frame = pd.DataFrame(rows, columns=columns)
    _status(f"{len(states)} bound state(s) with kappa in [{args.kappa_min:g}, {args.kappa_max:g}]")
    _emit_csv(frame, args, _metadata(args, tolerance))
    return 0


def cmd_zero_mode(args: argparse.Namespace) -> int:
    if args.design is not None:
        design = load_run_config(args.design, DesignFile)
        tolerance = _tolerance(args)
        result = design_alpha(design.centres, tolerance)
        if result is None:
            payload = {"design": "none"}
        else:
            payload = {"design": {"alpha": result.alpha, "a": result.a}}
    else:
        if args.config is None:
            raise ConfigurationError("zero-mode needs a run file or --design")
        run = load_run_config(args.config)
        tolerance = _tolerance(args, run)
        modes = zero_mode_space(run.to_configuration(), tolerance)
        payload = {"zero_modes": [mode.a for mode in modes] if modes else "none"}
    payload["metadata"] = _metadata(args, tolerance)
    _emit_json(payload, args)
    return 0


def cmd_resolvent_grid(args: argparse.Namespace) -> int:
    run = load_run_config(args.config)
    tolerance = _tolerance(args, run)
    config = run.to_configuration()
    grid = geometric_grid(args.lambda_min, args.lambda_max, args.points_per_decade, decreasing=True)
    report = resolvent_zero_limit(config, args.x, args.y, grid, classify(config, tolerance))
    _status(f"scaled error spread {report.summary['scaled_error_spread']:.3g}")
    _emit_csv(report.frame, args, _metadata(args, tolerance))
    return 0


def cmd_validate_asymptotics(args: argparse.Namespace) -> int:
    run = load_run_config(args.config)
    tolerance = _tolerance(args, run)
    config = run.to_configuration()
    grid = geometric_grid(args.lambda_min, args.lambda_max, args.points_per_decade, decreasing=True)
    report = expansion_sweep(config, grid, classify(config, tolerance), tolerance)
    if args.csv is not None:
        ensure_parent_dir(args.csv)
        write_frame_csv(report.frame, args.csv, _metadata(args, tolerance))
        _status(f"wrote sweep table to {args.csv}")
    _emit_json({**report.summary, "notes": report.notes, "metadata": _metadata(args, tolerance)}, args)
    return 0


def cmd_wave_probe(args: argparse.Namespace) -> int:
    run = load_run_config(args.config)
    tolerance = _tolerance(args, run)
    config = run.to_configuration()
    corpus = mexican_hat_corpus(r_max=args.r_max, n_r=args.n_r, n_theta=args.n_theta)[: args.corpus_size]
    if args.operator == "K":
        def operator(u, points):
            return apply_K(u, points, s_step=args.s_step)
    else:
        classification = classify(config, tolerance)

        def operator(u, points):
            return apply_omega(config, args.j, args.k, u, points, classification=classification,
                               n_rho=args.n_rho, s_step=args.s_step)
    report = lp_ratio_sweep(operator, corpus, args.p, workers=args.workers)
    _status(f"L^p ratios {'stable' if report.summary['stable'] else 'NOT stable'} under grid refinement")
    _emit_csv(report.frame, args, _metadata(args, tolerance))
    return 0


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="log decisions at INFO level")
    common.add_argument("--tolerance", type=float, default=None,
                        help="relative singular-value tolerance (overrides the run file and THRESHOLD_LAB_TOL)")
    common.add_argument("--output", "-o", default=None, help="write the CSV/JSON result to this file")

    parser = argparse.ArgumentParser(prog="threshold-lab",
                                     description="Threshold behaviour of planar point interactions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="classify the zero-energy threshold")
    p.add_argument("config")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("spectrum", parents=[common], help="negative eigenvalues as CSV")
    p.add_argument("config")
    p.add_argument("--kappa-min", type=_positive_float, default=LAB_CFG.kappa_min)
    p.add_argument("--kappa-max", type=_positive_float, default=LAB_CFG.kappa_max)
    p.add_argument("--points-per-decade", type=_positive_int, default=LAB_CFG.kappa_points_per_decade)
    p.add_argument("--workers", type=_positive_int, default=LAB_CFG.workers)
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("zero-mode", parents=[common], help="zero modes, or designed strengths with --design")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--design", default=None, help="JSON file with centres only")
    p.set_defaults(handler=cmd_zero_mode)

    p = sub.add_parser("resolvent-grid", parents=[common], help="resolvent kernel towards λ = 0 (regular case)")
    p.add_argument("config")
    p.add_argument("--x", type=float, nargs=2, required=True, metavar=("X1", "X2"))
    p.add_argument("--y", type=float, nargs=2, required=True, metavar=("Y1", "Y2"))
    p.add_argument("--lambda-min", type=_positive_float, default=1e-10)
    p.add_argument("--lambda-max", type=_positive_float, default=1e-3)
    p.add_argument("--points-per-decade", type=_positive_int, default=4)
    p.set_defaults(handler=cmd_resolvent_grid)

    p = sub.add_parser("validate-asymptotics", parents=[common], help="low-energy expansion sweep")
    p.add_argument("config")
    p.add_argument("--lambda-min", type=_positive_float, default=LAB_CFG.lambda_min)
    p.add_argument("--lambda-max", type=_positive_float, default=LAB_CFG.lambda_max)
    p.add_argument("--points-per-decade", type=_positive_int, default=LAB_CFG.lambda_points_per_decade)
    p.add_argument("--csv", default=None, help="also write the sweep table to this CSV file")
    p.set_defaults(handler=cmd_validate_asymptotics)

    p = sub.add_parser("wave-probe", parents=[common], help="empirical L^p ratios of K or Ω_jk")
    p.add_argument("config")
    p.add_argument("--operator", choices=("K", "omega"), default="omega")
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--p", type=float, nargs="+", default=[1.5, 2.0, 3.0, 4.0])
    p.add_argument("--r-max", type=_positive_float, default=LAB_CFG.r_max)
    p.add_argument("--n-r", type=_positive_int, default=LAB_CFG.n_r)
    p.add_argument("--n-theta", type=_positive_int, default=LAB_CFG.n_theta)
    p.add_argument("--n-rho", type=_positive_int, default=LAB_CFG.n_rho)
    p.add_argument("--s-step", type=_positive_float, default=LAB_CFG.s_step)
    p.add_argument("--corpus-size", type=_positive_int, default=12)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(handler=cmd_wave_probe)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    logger.debug("dispatching %s", args.command)
    try:
        return args.handler(args)
    except INPUT_ERRORS as exc:
        _status(f"Error: {exc}")
        return 2
    except NumericalError as exc:
        _status(f"Numerical failure: {exc}")
        return 1
    except InternalInconsistencyError as exc:
        _status(f"Internal inconsistency: {exc}")
        return 3
    finally:
        logging.captureWarnings(False)
